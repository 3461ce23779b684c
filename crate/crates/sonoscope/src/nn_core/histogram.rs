//! The histogram layer: soft binning with learnable centers and widths.
//!
//! For input channel d, bin b, and an S×T window at output cell (r, c):
//!
//! Y[r,c,b,d] = (1/ST) · Σ_s Σ_t exp(−γ²_{bd} · (x[d, r·stride+s, c·stride+t] − μ_{bd})²)
//!
//! Output channels are laid out as d·B + b. Gradients are the hand-derived
//! chain-rule expressions for x, μ, and γ.

use crate::error::{Error, Result};
use crate::nn_core::{expect_dims, Elem, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramLayerParams<T> {
    /// Bin centers μ, [B × D].
    pub centers: Tensor<T>,
    /// Bin widths γ, [B × D]; all entries nonzero.
    pub widths: Tensor<T>,
    pub kernel: (usize, usize),
    pub stride: usize,
}

impl<T: Elem> HistogramLayerParams<T> {
    /// Fresh parameters: per channel, μ evenly spaced over [−1, 1] and
    /// γ = B/2 uniformly.
    pub fn init(bins: usize, channels: usize, kernel: (usize, usize), stride: usize) -> Result<Self> {
        if bins == 0 || channels == 0 || kernel.0 == 0 || kernel.1 == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "histogram layer needs positive bins/channels/kernel/stride, got {bins}, {channels}, {kernel:?}, {stride}"
            )));
        }
        let mut centers = Tensor::zeros(&[bins, channels]);
        for b in 0..bins {
            let mu = if bins == 1 { 0.0 } else { -1.0 + 2.0 * b as f64 / (bins - 1) as f64 };
            for d in 0..channels {
                centers.data_mut()[b * channels + d] = T::from_f64(mu);
            }
        }
        let widths = Tensor::from_vec(
            &[bins, channels],
            vec![T::from_f64(bins as f64 / 2.0); bins * channels],
        )?;
        Ok(HistogramLayerParams { centers, widths, kernel, stride })
    }

    pub fn bins(&self) -> usize {
        self.centers.dim(0)
    }

    pub fn channels(&self) -> usize {
        self.centers.dim(1)
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        expect_dims(x, 3, "histogram input")?;
        if self.centers.dims() != self.widths.dims() || self.centers.dims().len() != 2 {
            return Err(Error::Shape(format!(
                "histogram params: centers {:?} vs widths {:?}",
                self.centers.dims(),
                self.widths.dims()
            )));
        }
        if self.widths.data().iter().any(|g| *g == T::zero()) {
            return Err(Error::Range("histogram widths must be nonzero".into()));
        }
        if x.dim(0) != self.channels() {
            return Err(Error::Shape(format!(
                "histogram input has {} channels, params expect {}",
                x.dim(0),
                self.channels()
            )));
        }
        let (s, t) = self.kernel;
        let (m, n) = (x.dim(1), x.dim(2));
        if m < s || n < t {
            return Err(Error::Shape(format!(
                "histogram kernel {s}x{t} exceeds input {m}x{n}"
            )));
        }
        Ok(((m - s) / self.stride + 1, (n - t) / self.stride + 1))
    }
}

/// Forward pass: x [D×M×N] → [B·D × R × C].
pub fn histogram_forward<T: Elem>(
    x: &Tensor<T>,
    p: &HistogramLayerParams<T>,
) -> Result<Tensor<T>> {
    let (rows, cols) = p.check(x)?;
    let (bins, channels) = (p.bins(), p.channels());
    let (s, t) = p.kernel;
    let (m, n) = (x.dim(1), x.dim(2));
    let inv_window = T::from_f64(1.0 / (s * t) as f64);

    let mut out = Tensor::zeros(&[bins * channels, rows, cols]);
    for d in 0..channels {
        let plane = &x.data()[d * m * n..(d + 1) * m * n];
        for b in 0..bins {
            let mu = p.centers.data()[b * channels + d];
            let gamma = p.widths.data()[b * channels + d];
            let neg_g2 = -(gamma * gamma);
            let out_plane = &mut out.data_mut()
                [(d * bins + b) * rows * cols..(d * bins + b + 1) * rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    let mut acc = T::zero();
                    for si in 0..s {
                        let row = &plane[(r * p.stride + si) * n..][..n];
                        for ti in 0..t {
                            let delta = row[c * p.stride + ti] - mu;
                            acc = acc + (neg_g2 * delta * delta).exp();
                        }
                    }
                    out_plane[r * cols + c] = acc * inv_window;
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass: gradients w.r.t. x, μ, and γ.
///
/// With e = exp(−γ²(x−μ)²) per window element:
///   ∂Y/∂x = (1/ST)·(−2γ²(x−μ))·e
///   ∂Y/∂μ = (1/ST)·( 2γ²(x−μ))·e
///   ∂Y/∂γ = (1/ST)·(−2γ(x−μ)²)·e
pub fn histogram_backward<T: Elem>(
    x: &Tensor<T>,
    p: &HistogramLayerParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (rows, cols) = p.check(x)?;
    let (bins, channels) = (p.bins(), p.channels());
    if grad_out.dims() != [bins * channels, rows, cols] {
        return Err(Error::Shape(format!(
            "histogram backward: grad dims {:?}, expected [{}, {rows}, {cols}]",
            grad_out.dims(),
            bins * channels
        )));
    }
    let (s, t) = p.kernel;
    let (m, n) = (x.dim(1), x.dim(2));
    let inv_window = T::from_f64(1.0 / (s * t) as f64);
    let two = T::from_f64(2.0);

    let mut grad_x = Tensor::zeros(&[channels, m, n]);
    let mut grad_mu = Tensor::zeros(&[bins, channels]);
    let mut grad_gamma = Tensor::zeros(&[bins, channels]);
    for d in 0..channels {
        let plane = &x.data()[d * m * n..(d + 1) * m * n];
        for b in 0..bins {
            let mu = p.centers.data()[b * channels + d];
            let gamma = p.widths.data()[b * channels + d];
            let g2 = gamma * gamma;
            let go_plane =
                &grad_out.data()[(d * bins + b) * rows * cols..(d * bins + b + 1) * rows * cols];
            let mut mu_acc = T::zero();
            let mut gamma_acc = T::zero();
            for r in 0..rows {
                for c in 0..cols {
                    let go = go_plane[r * cols + c] * inv_window;
                    if go == T::zero() {
                        continue;
                    }
                    for si in 0..s {
                        let row_base = (r * p.stride + si) * n;
                        for ti in 0..t {
                            let idx = row_base + c * p.stride + ti;
                            let delta = plane[idx] - mu;
                            let e = (-(g2 * delta * delta)).exp();
                            let common = two * delta * e * go;
                            let gx = grad_x.data_mut();
                            gx[d * m * n + idx] = gx[d * m * n + idx] - g2 * common;
                            mu_acc = mu_acc + g2 * common;
                            gamma_acc = gamma_acc - gamma * delta * common;
                        }
                    }
                }
            }
            grad_mu.data_mut()[b * channels + d] = mu_acc;
            grad_gamma.data_mut()[b * channels + d] = gamma_acc;
        }
    }
    Ok((grad_x, grad_mu, grad_gamma))
}
