//! 2-D convolution (cross-correlation) via im2col and gemm.

use crate::error::{Error, Result};
use crate::nn_core::{expect_dims, Elem, Tensor};

struct ConvGeometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    out_h: usize,
    out_w: usize,
}

fn geometry<T: Elem>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvGeometry> {
    expect_dims(x, 3, "conv2d input")?;
    expect_dims(weights, 4, "conv2d weights")?;
    expect_dims(bias, 1, "conv2d bias")?;
    let (c_in, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    let (c_out, wc_in, kh, kw) = (weights.dim(0), weights.dim(1), weights.dim(2), weights.dim(3));
    if wc_in != c_in {
        return Err(Error::Shape(format!(
            "conv2d: input has {c_in} channels, weights expect {wc_in}"
        )));
    }
    if bias.dim(0) != c_out {
        return Err(Error::Shape(format!(
            "conv2d: {c_out} output channels, bias has {}",
            bias.dim(0)
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("conv2d: stride must be positive".into()));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::Shape(format!(
            "conv2d: kernel {kh}x{kw} exceeds padded input {}x{}",
            h + 2 * padding,
            w + 2 * padding
        )));
    }
    let out_h = (h + 2 * padding - kh) / stride + 1;
    let out_w = (w + 2 * padding - kw) / stride + 1;
    Ok(ConvGeometry { c_in, h, w, c_out, kh, kw, out_h, out_w })
}

fn im2col<T: Elem>(x: &Tensor<T>, g: &ConvGeometry, stride: usize, padding: usize) -> Vec<T> {
    let n = g.out_h * g.out_w;
    let mut cols = vec![T::zero(); g.c_in * g.kh * g.kw * n];
    let x_data = x.data();
    for c in 0..g.c_in {
        let plane = &x_data[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * n;
                for oh in 0..g.out_h {
                    let ih = (oh * stride + ki) as isize - padding as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let src_row = ih as usize * g.w;
                    let dst_row = row + oh * g.out_w;
                    for ow in 0..g.out_w {
                        let iw = (ow * stride + kj) as isize - padding as isize;
                        if iw >= 0 && iw < g.w as isize {
                            cols[dst_row + ow] = plane[src_row + iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Standard cross-correlation: x [Cin×H×W] with weights [Cout×Cin×kh×kw]
/// and bias [Cout] → [Cout×H'×W'], H' = floor((H+2p−kh)/stride)+1.
pub fn conv2d_forward<T: Elem>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = geometry(x, weights, bias, stride, padding)?;
    let k = g.c_in * g.kh * g.kw;
    let n = g.out_h * g.out_w;
    let cols = im2col(x, &g, stride, padding);
    let mut out = Tensor::zeros(&[g.c_out, g.out_h, g.out_w]);
    unsafe {
        T::gemm(
            g.c_out,
            k,
            n,
            T::one(),
            weights.data().as_ptr(),
            k as isize,
            1,
            cols.as_ptr(),
            n as isize,
            1,
            T::zero(),
            out.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    for co in 0..g.c_out {
        let b = bias.data()[co];
        for v in &mut out.data_mut()[co * n..(co + 1) * n] {
            *v = *v + b;
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss w.r.t. conv input, weights, and bias, given
/// the gradient w.r.t. the conv output.
pub fn conv2d_backward<T: Elem>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = geometry(x, weights, bias, stride, padding)?;
    if grad_out.dims() != [g.c_out, g.out_h, g.out_w] {
        return Err(Error::Shape(format!(
            "conv2d backward: grad dims {:?}, expected [{}, {}, {}]",
            grad_out.dims(),
            g.c_out,
            g.out_h,
            g.out_w
        )));
    }
    let k = g.c_in * g.kh * g.kw;
    let n = g.out_h * g.out_w;
    let cols = im2col(x, &g, stride, padding);

    let mut grad_b = Tensor::zeros(&[g.c_out]);
    for co in 0..g.c_out {
        let mut acc = T::zero();
        for &v in &grad_out.data()[co * n..(co + 1) * n] {
            acc = acc + v;
        }
        grad_b.data_mut()[co] = acc;
    }

    let mut grad_w = Tensor::zeros(&[g.c_out, g.c_in, g.kh, g.kw]);
    unsafe {
        // grad_w [Cout×k] = grad_out [Cout×n] · colsᵀ [n×k]
        T::gemm(
            g.c_out,
            n,
            k,
            T::one(),
            grad_out.data().as_ptr(),
            n as isize,
            1,
            cols.as_ptr(),
            1,
            n as isize,
            T::zero(),
            grad_w.data_mut().as_mut_ptr(),
            k as isize,
            1,
        );
    }

    let mut grad_cols = vec![T::zero(); k * n];
    unsafe {
        // grad_cols [k×n] = weightsᵀ [k×Cout] · grad_out [Cout×n]
        T::gemm(
            k,
            g.c_out,
            n,
            T::one(),
            weights.data().as_ptr(),
            1,
            k as isize,
            grad_out.data().as_ptr(),
            n as isize,
            1,
            T::zero(),
            grad_cols.as_mut_ptr(),
            n as isize,
            1,
        );
    }

    let mut grad_x = Tensor::zeros(&[g.c_in, g.h, g.w]);
    let gx = grad_x.data_mut();
    for c in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * n;
                for oh in 0..g.out_h {
                    let ih = (oh * stride + ki) as isize - padding as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let dst_row = (c * g.h + ih as usize) * g.w;
                    let src_row = row + oh * g.out_w;
                    for ow in 0..g.out_w {
                        let iw = (ow * stride + kj) as isize - padding as isize;
                        if iw >= 0 && iw < g.w as isize {
                            let dst = dst_row + iw as usize;
                            gx[dst] = gx[dst] + grad_cols[src_row + ow];
                        }
                    }
                }
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn_core::testutil::{finite_difference, max_rel_err, random_tensor, rng};
    use rand::Rng;

    /// Direct six-loop convolution oracle.
    fn naive_conv(
        x: &Tensor<f64>,
        w: &Tensor<f64>,
        b: &Tensor<f64>,
        stride: usize,
        padding: usize,
    ) -> Tensor<f64> {
        let (c_in, h, width) = (x.dim(0), x.dim(1), x.dim(2));
        let (c_out, kh, kw) = (w.dim(0), w.dim(2), w.dim(3));
        let out_h = (h + 2 * padding - kh) / stride + 1;
        let out_w = (width + 2 * padding - kw) / stride + 1;
        let mut out = Tensor::zeros(&[c_out, out_h, out_w]);
        for co in 0..c_out {
            for oh in 0..out_h {
                for ow in 0..out_w {
                    let mut acc = b.data()[co];
                    for ci in 0..c_in {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let ih = (oh * stride + ki) as isize - padding as isize;
                                let iw = (ow * stride + kj) as isize - padding as isize;
                                if ih >= 0 && ih < h as isize && iw >= 0 && iw < width as isize {
                                    acc += x.data()[(ci * h + ih as usize) * width + iw as usize]
                                        * w.data()[((co * c_in + ci) * kh + ki) * kw + kj];
                                }
                            }
                        }
                    }
                    out.data_mut()[(co * out_h + oh) * out_w + ow] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn all_ones_sums_window() {
        let x = Tensor::from_vec(&[1, 3, 3], vec![1.0f32; 9]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0f32; 9]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.0f32]).unwrap();
        let out = conv2d_forward(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(out.dims(), [1, 1, 1]);
        assert_eq!(out.data()[0], 9.0);
    }

    #[test]
    fn identity_kernel_passes_through() {
        let x = Tensor::from_vec(&[1, 2, 3], vec![1.0f32, -2.0, 3.0, 4.0, 0.5, -6.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0f32]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.0f32]).unwrap();
        let out = conv2d_forward(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn matches_naive_oracle() {
        for (seed, stride, padding) in [(1u64, 1, 0), (2, 1, 1), (3, 2, 1), (4, 2, 0)] {
            let mut r = rng(seed);
            let x = random_tensor(&[2, 5, 5], &mut r);
            let w = random_tensor(&[3, 2, 3, 3], &mut r);
            let b = random_tensor(&[3], &mut r);
            let got = conv2d_forward(&x, &w, &b, stride, padding).unwrap();
            let want = naive_conv(&x, &w, &b, stride, padding);
            assert_eq!(got.dims(), want.dims());
            for (g, w_) in got.data().iter().zip(want.data()) {
                assert!((g - w_).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_shape_mismatches() {
        let x = Tensor::<f32>::zeros(&[2, 4, 4]);
        let w = Tensor::<f32>::zeros(&[3, 1, 3, 3]);
        let b = Tensor::<f32>::zeros(&[3]);
        assert!(conv2d_forward(&x, &w, &b, 1, 0).is_err());
        let w = Tensor::<f32>::zeros(&[3, 2, 5, 5]);
        assert!(conv2d_forward(&x, &w, &b, 1, 0).is_err());
        let w = Tensor::<f32>::zeros(&[3, 2, 3, 3]);
        let b = Tensor::<f32>::zeros(&[2]);
        assert!(conv2d_forward(&x, &w, &b, 1, 0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20u64 {
            let mut r = rng(seed);
            let stride = r.gen_range(1..3usize);
            let padding = r.gen_range(0..2usize);
            let x = random_tensor(&[2, 4, 5], &mut r);
            let w = random_tensor(&[3, 2, 2, 3], &mut r);
            let b = random_tensor(&[3], &mut r);
            let probe = {
                let out = conv2d_forward(&x, &w, &b, stride, padding).unwrap();
                random_tensor(out.dims(), &mut r)
            };
            let loss = |xv: &Tensor<f64>, wv: &Tensor<f64>, bv: &Tensor<f64>| {
                let out = conv2d_forward(xv, wv, bv, stride, padding).unwrap();
                out.data().iter().zip(probe.data()).map(|(o, p)| o * p).sum::<f64>()
            };

            let (gx, gw, gb) = conv2d_backward(&x, &w, &b, stride, padding, &probe).unwrap();

            let fd_x = finite_difference(x.data(), |v| {
                loss(&Tensor::from_vec(x.dims(), v.to_vec()).unwrap(), &w, &b)
            });
            let fd_w = finite_difference(w.data(), |v| {
                loss(&x, &Tensor::from_vec(w.dims(), v.to_vec()).unwrap(), &b)
            });
            let fd_b = finite_difference(b.data(), |v| {
                loss(&x, &w, &Tensor::from_vec(b.dims(), v.to_vec()).unwrap())
            });

            assert!(max_rel_err(gx.data(), &fd_x) < 1e-5, "seed {seed}: grad_x");
            assert!(max_rel_err(gw.data(), &fd_w) < 1e-5, "seed {seed}: grad_w");
            assert!(max_rel_err(gb.data(), &fd_b) < 1e-5, "seed {seed}: grad_b");
        }
    }
}
