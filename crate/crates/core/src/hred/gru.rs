use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{affine, Matrix};
use super::HredError;
use crate::scalar::{sigmoid, Scalar};
use crate::vecspace::Vector;

/// Parameters of one gated recurrent unit.
///
/// Input matrices are `hidden_dim × input_dim`, recurrent matrices
/// `hidden_dim × hidden_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_z: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_z: Vec<T>,
    pub b_r: Vec<T>,
    pub b_h: Vec<T>,
}

/// Forward intermediates of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct GruCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub h_tilde: Vec<T>,
    pub reset_hidden: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, input_dim);
        let u = || Matrix::zeros(hidden_dim, hidden_dim);
        let b = || vec![T::zero(); hidden_dim];
        Self { w_z: w(), w_r: w(), w_h: w(), u_z: u(), u_r: u(), u_h: u(), b_z: b(), b_r: b(), b_h: b() }
    }

    /// Entries uniform in `[-scale, scale]` from a seeded generator.
    pub fn random(input_dim: usize, hidden_dim: usize, scale: f64, seed: u64) -> Self {
        Self::uniform(input_dim, hidden_dim, scale, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub(crate) fn uniform<R: Rng>(input_dim: usize, hidden_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut w = || Matrix::uniform(hidden_dim, input_dim, scale, rng);
        let (w_z, w_r, w_h) = (w(), w(), w());
        let mut u = || Matrix::uniform(hidden_dim, hidden_dim, scale, rng);
        let (u_z, u_r, u_h) = (u(), u(), u());
        let mut b = || (0..hidden_dim).map(|_| T::lit(rng.random_range(-scale..=scale))).collect::<Vec<T>>();
        let (b_z, b_r, b_h) = (b(), b(), b());
        Self { w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub(crate) fn tensors(&self) -> [&[T]; 9] {
        [
            self.w_z.as_slice(),
            self.w_r.as_slice(),
            self.w_h.as_slice(),
            self.u_z.as_slice(),
            self.u_r.as_slice(),
            self.u_h.as_slice(),
            &self.b_z,
            &self.b_r,
            &self.b_h,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [T]; 9] {
        [
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    /// One step on raw slices whose lengths the caller has checked.
    pub(crate) fn forward(&self, h_prev: &[T], x: &[T]) -> GruCache<T> {
        let mut z = affine(&self.w_z, x, &self.b_z);
        self.u_z.mul_add(h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = affine(&self.w_r, x, &self.b_r);
        self.u_r.mul_add(h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let reset_hidden: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        let mut h_tilde = affine(&self.w_h, x, &self.b_h);
        self.u_h.mul_add(&reset_hidden, &mut h_tilde);
        h_tilde.iter_mut().for_each(|v| *v = v.tanh());

        let h = (0..h_prev.len()).map(|i| z[i] * h_prev[i] + (T::one() - z[i]) * h_tilde[i]).collect();
        GruCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, h_tilde, reset_hidden, h }
    }

    /// Accumulates parameter gradients into `grad` and input/state gradients
    /// into `dx` and `dh_prev` given `dh = ∂L/∂h`.
    pub(crate) fn backward(
        &self,
        cache: &GruCache<T>,
        dh: &[T],
        grad: &mut Self,
        dx: Option<&mut [T]>,
        dh_prev: &mut [T],
    ) {
        let n = dh.len();
        let one = T::one();
        let mut da_z = vec![T::zero(); n];
        let mut da_h = vec![T::zero(); n];
        for i in 0..n {
            let (z, ht) = (cache.z[i], cache.h_tilde[i]);
            dh_prev[i] = dh_prev[i] + dh[i] * z;
            da_z[i] = dh[i] * (cache.h_prev[i] - ht) * z * (one - z);
            da_h[i] = dh[i] * (one - z) * (one - ht * ht);
        }

        let mut d_reset_hidden = vec![T::zero(); n];
        self.u_h.t_mul_add(&da_h, &mut d_reset_hidden);
        let mut da_r = vec![T::zero(); n];
        for i in 0..n {
            let r = cache.r[i];
            dh_prev[i] = dh_prev[i] + d_reset_hidden[i] * r;
            da_r[i] = d_reset_hidden[i] * cache.h_prev[i] * r * (one - r);
        }

        grad.w_z.add_outer(&da_z, &cache.x);
        grad.w_r.add_outer(&da_r, &cache.x);
        grad.w_h.add_outer(&da_h, &cache.x);
        grad.u_z.add_outer(&da_z, &cache.h_prev);
        grad.u_r.add_outer(&da_r, &cache.h_prev);
        grad.u_h.add_outer(&da_h, &cache.reset_hidden);
        for i in 0..n {
            grad.b_z[i] = grad.b_z[i] + da_z[i];
            grad.b_r[i] = grad.b_r[i] + da_r[i];
            grad.b_h[i] = grad.b_h[i] + da_h[i];
        }

        self.u_z.t_mul_add(&da_z, dh_prev);
        self.u_r.t_mul_add(&da_r, dh_prev);
        if let Some(dx) = dx {
            self.w_z.t_mul_add(&da_z, dx);
            self.w_r.t_mul_add(&da_r, dx);
            self.w_h.t_mul_add(&da_h, dx);
        }
    }
}

/// `h = z ∘ h_prev + (1 − z) ∘ tanh(W_h x + U_h (r ∘ h_prev) + b_h)` with
/// sigmoid gates `z`, `r`.
pub fn gru_step<T: Scalar>(p: &GruParams<T>, h_prev: &Vector<T>, x: &Vector<T>) -> Result<Vector<T>, HredError> {
    if h_prev.dim() != p.hidden_dim() {
        return Err(HredError::Shape { what: "hidden state", expected: p.hidden_dim(), got: h_prev.dim() });
    }
    if x.dim() != p.input_dim() {
        return Err(HredError::Shape { what: "GRU input", expected: p.input_dim(), got: x.dim() });
    }
    Ok(Vector::new(p.forward(h_prev.as_slice(), x.as_slice()).h)?)
}
