//! Weight initialization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn_core::{Elem, Tensor};

/// Kaiming uniform fill: U(-b, b) with b = sqrt(6 / fan_in).
pub fn kaiming_uniform<T: Elem, R: Rng>(
    dims: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if fan_in == 0 {
        return Err(Error::Config("kaiming_uniform: fan_in must be positive".into()));
    }
    let bound = (6.0 / fan_in as f64).sqrt();
    bounded_uniform(dims, bound, rng)
}

/// Bias fill: U(-b, b) with b = 1 / sqrt(fan_in).
pub fn uniform_bias<T: Elem, R: Rng>(
    dims: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if fan_in == 0 {
        return Err(Error::Config("uniform_bias: fan_in must be positive".into()));
    }
    let bound = 1.0 / (fan_in as f64).sqrt();
    bounded_uniform(dims, bound, rng)
}

fn bounded_uniform<T: Elem, R: Rng>(dims: &[usize], bound: f64, rng: &mut R) -> Result<Tensor<T>> {
    let len = dims.iter().product();
    let data = (0..len).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect();
    Tensor::from_vec(dims, data)
}
