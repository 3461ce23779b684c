//! Adagrad parameter update.

use crate::error::{Error, Result};
use crate::nn_core::{Elem, Tensor};

const ADAGRAD_EPS: f64 = 1e-10;

/// One Adagrad step: `acc += grad^2; param -= lr * grad / (sqrt(acc) + eps)`.
pub fn adagrad_step<T: Elem>(
    param: &mut Tensor<T>,
    acc: &mut Tensor<T>,
    grad: &Tensor<T>,
    lr: f64,
) -> Result<()> {
    if param.dims() != grad.dims() || param.dims() != acc.dims() {
        return Err(Error::Shape(format!(
            "adagrad: param {:?}, acc {:?}, grad {:?}",
            param.dims(),
            acc.dims(),
            grad.dims()
        )));
    }
    let lr = T::from_f64(lr);
    let eps = T::from_f64(ADAGRAD_EPS);
    for ((p, a), &g) in param.data_mut().iter_mut().zip(acc.data_mut()).zip(grad.data()) {
        *a = *a + g * g;
        *p = *p - lr * g / (a.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = Tensor::from_vec(&[2], vec![0.25f64, -0.5]).unwrap();
        let mut acc = Tensor::zeros(&[2]);
        let g = Tensor::zeros(&[2]);
        adagrad_step(&mut p, &mut acc, &g, 1e-3).unwrap();
        assert_eq!(p.data(), [0.25, -0.5]);
        assert_eq!(acc.data(), [0.0, 0.0]);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // grad = 2: acc = 4, update = lr * 2 / (2 + eps) ~= lr.
        let mut p = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let mut acc = Tensor::zeros(&[1]);
        let g = Tensor::from_vec(&[1], vec![2.0f64]).unwrap();
        adagrad_step(&mut p, &mut acc, &g, 1e-3).unwrap();
        assert!((p.data()[0] - (1.0 - 1e-3)).abs() < 1e-12);
        assert_eq!(acc.data()[0], 4.0);
    }

    #[test]
    fn second_step_shrinks_by_sqrt_two() {
        let mut p = Tensor::from_vec(&[1], vec![0.0f64]).unwrap();
        let mut acc = Tensor::zeros(&[1]);
        let g = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        adagrad_step(&mut p, &mut acc, &g, 1e-3).unwrap();
        let first = -p.data()[0];
        adagrad_step(&mut p, &mut acc, &g, 1e-3).unwrap();
        let second = -p.data()[0] - first;
        assert!((first - 1e-3).abs() < 1e-12);
        assert!((second - 1e-3 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn accumulator_never_decreases() {
        use rand::Rng;
        let mut rng = crate::nn_core::testutil::rng(7);
        let mut p = Tensor::zeros(&[8]);
        let mut acc = Tensor::zeros(&[8]);
        let mut prev = acc.data().to_vec();
        for _ in 0..50 {
            let g = Tensor::from_vec(
                &[8],
                (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>(),
            )
            .unwrap();
            adagrad_step(&mut p, &mut acc, &g, 1e-2).unwrap();
            for (now, before) in acc.data().iter().zip(&prev) {
                assert!(now >= before);
            }
            prev = acc.data().to_vec();
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let mut acc = Tensor::zeros(&[2]);
        let g = Tensor::zeros(&[3]);
        assert!(adagrad_step(&mut p, &mut acc, &g, 1e-3).is_err());
    }
}
