//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod bench;
pub mod brute;
pub mod checks;
pub mod gradcheck;
pub mod scalar_ref;
