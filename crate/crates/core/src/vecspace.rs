//! Dense embedding vectors and the cosine metric.
//!
//! All accumulation runs left to right over the coordinates so results are
//! reproducible bit for bit.

use std::ops::Index;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VecError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vector must have at least one coordinate")]
    Empty,
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
}

/// A finite, non-empty embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T> {
    values: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, VecError> {
        if values.is_empty() {
            return Err(VecError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VecError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self, VecError> {
        Self::new(values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn zeros(dim: usize) -> Result<Self, VecError> {
        Self::new(vec![T::zero(); dim])
    }

    /// Wraps values already known to be finite and non-empty.
    pub(crate) fn from_vec_unchecked(values: Vec<T>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        norm_slice(&self.values)
    }

    pub fn scale(&self, s: T) -> Result<Self, VecError> {
        Self::new(self.values.iter().map(|&v| v * s).collect())
    }

    /// Rounds every coordinate to the nearest `f32`.
    pub fn round_f32(&self) -> Self {
        Self { values: self.values.iter().map(|v| v.round_f32()).collect() }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

fn check_dims(a: usize, b: usize) -> Result<(), VecError> {
    if a != b {
        return Err(VecError::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

pub fn dot<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<T, VecError> {
    check_dims(a.dim(), b.dim())?;
    Ok(dot_slice(&a.values, &b.values))
}

pub fn cosine_similarity<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<T, VecError> {
    check_dims(a.dim(), b.dim())?;
    cosine_slice(&a.values, &b.values)
}

/// Concatenates two vectors, `a` first.
pub fn concat<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    let mut values = Vec::with_capacity(a.dim() + b.dim());
    values.extend_from_slice(&a.values);
    values.extend_from_slice(&b.values);
    Vector { values }
}

pub(crate) fn dot_slice<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm_slice<T: Scalar>(a: &[T]) -> T {
    dot_slice(a, a).sqrt()
}

pub(crate) fn cosine_slice<T: Scalar>(a: &[T], b: &[T]) -> Result<T, VecError> {
    let na = norm_slice(a);
    let nb = norm_slice(b);
    if na == T::zero() || nb == T::zero() {
        return Err(VecError::ZeroNorm);
    }
    Ok(dot_slice(a, b) / (na * nb))
}
