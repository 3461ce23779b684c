//! Deterministic neural-network kernels: tensors, conv, the histogram layer,
//! pooling, linear, dropout, softmax cross-entropy, and Adagrad.
//!
//! Gradients are hand-derived per op and verified against central finite
//! differences in the unit tests. Everything is generic over [`Elem`] so that
//! training runs in f32 while gradient checks run the same code in f64.

mod adagrad;
mod conv;
mod histogram;
mod init;
mod layers;

pub use adagrad::adagrad_step;
pub use conv::{conv2d_backward, conv2d_forward};
pub use histogram::{histogram_backward, histogram_forward, HistogramLayerParams};
pub use init::{kaiming_uniform, uniform_bias};
pub use layers::{
    adaptive_avg_pool_backward, adaptive_avg_pool_forward, dropout_backward, dropout_forward,
    linear_backward, linear_forward, maxpool2d_backward, maxpool2d_forward, relu_backward,
    relu_forward, softmax_cross_entropy,
};

use crate::error::{Error, Result};

/// Scalar element type for tensors: f32 in production, f64 in gradient checks.
pub trait Elem: num_traits::Float + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// C = alpha·A·B + beta·C for row-major strides, dispatching to the
    /// platform gemm.
    ///
    /// # Safety
    /// Pointers must reference buffers valid for the given dimensions and
    /// strides; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Elem for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Elem for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Elem> Tensor<T> {
    pub fn zeros(dims: &[usize]) -> Tensor<T> {
        let len = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![T::zero(); len] }
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Tensor<T>> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Shape(format!("invalid tensor dims {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise conversion between element types (f32 ↔ f64).
    pub fn cast<U: Elem>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

pub(crate) fn expect_dims<T: Elem>(t: &Tensor<T>, rank: usize, what: &str) -> Result<()> {
    if t.dims().len() != rank {
        return Err(Error::Shape(format!(
            "{what} expects rank {rank}, got dims {:?}",
            t.dims()
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let len = dims.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(dims, data).unwrap()
    }

    /// Central finite-difference gradient of `f` at `theta`, step 1e-4.
    pub fn finite_difference<F: FnMut(&[f64]) -> f64>(theta: &[f64], mut f: F) -> Vec<f64> {
        let h = 1e-4;
        let mut work = theta.to_vec();
        (0..theta.len())
            .map(|i| {
                work[i] = theta[i] + h;
                let up = f(&work);
                work[i] = theta[i] - h;
                let down = f(&work);
                work[i] = theta[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Relative error used by every gradient check: |a − b| scaled by the
    /// larger magnitude, with an absolute floor for near-zero pairs.
    pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        assert_eq!(analytic.len(), numeric.len());
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
            .fold(0.0, f64::max)
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_validation() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 0], vec![]).is_err());
        assert!(Tensor::<f32>::from_vec(&[], vec![]).is_err());
    }

    #[test]
    fn cast_round_trip() {
        let t = Tensor::<f32>::from_vec(&[2, 2], vec![1.0, -2.5, 0.25, 3.0]).unwrap();
        let back: Tensor<f32> = t.cast::<f64>().cast();
        assert_eq!(t, back);
    }

    #[test]
    fn gemm_matches_naive() {
        // 2x3 · 3x2 row-major.
        let a = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0f32, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = [0.0f32; 4];
        unsafe {
            f32::gemm(2, 3, 2, 1.0, a.as_ptr(), 3, 1, b.as_ptr(), 2, 1, 0.0, c.as_mut_ptr(), 2, 1);
        }
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
    }
}
