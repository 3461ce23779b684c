//! Pointwise and pooling layers, the classifier head, and the loss.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn_core::{expect_dims, Elem, Tensor};

pub fn relu_forward<T: Elem>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

pub fn relu_backward<T: Elem>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.dims() != grad_out.dims() {
        return Err(Error::Shape(format!(
            "relu backward: input {:?} vs grad {:?}",
            x.dims(),
            grad_out.dims()
        )));
    }
    let mut grad = grad_out.clone();
    for (g, &v) in grad.data_mut().iter_mut().zip(x.data()) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
    Ok(grad)
}

/// Max pooling over [C×H×W]; returns the pooled tensor and, per output cell,
/// the flat input index of its maximum (first maximum wins on ties).
pub fn maxpool2d_forward<T: Elem>(
    x: &Tensor<T>,
    kernel: (usize, usize),
    stride: (usize, usize),
) -> Result<(Tensor<T>, Vec<usize>)> {
    expect_dims(x, 3, "maxpool input")?;
    let (kh, kw) = kernel;
    let (sh, sw) = stride;
    let (c_n, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 || kh > h || kw > w {
        return Err(Error::Shape(format!(
            "maxpool kernel {kernel:?} stride {stride:?} invalid for {h}x{w}"
        )));
    }
    let out_h = (h - kh) / sh + 1;
    let out_w = (w - kw) / sw + 1;
    let mut out = Tensor::zeros(&[c_n, out_h, out_w]);
    let mut argmax = vec![0usize; c_n * out_h * out_w];
    for c in 0..c_n {
        let plane = &x.data()[c * h * w..(c + 1) * h * w];
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut best_idx = (oh * sh) * w + ow * sw;
                let mut best = plane[best_idx];
                for ki in 0..kh {
                    for kj in 0..kw {
                        let idx = (oh * sh + ki) * w + ow * sw + kj;
                        if plane[idx] > best {
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (c * out_h + oh) * out_w + ow;
                out.data_mut()[o] = best;
                argmax[o] = c * h * w + best_idx;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2d_backward<T: Elem>(
    x_dims: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::Shape(format!(
            "maxpool backward: {} argmax entries vs {} grads",
            argmax.len(),
            grad_out.len()
        )));
    }
    let mut grad_x = Tensor::zeros(x_dims);
    let gx = grad_x.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        gx[idx] = gx[idx] + g;
    }
    Ok(grad_x)
}

fn pool_region(i: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let start = i * in_len / out_len;
    let end = ((i + 1) * in_len).div_ceil(out_len);
    (start, end)
}

/// Adaptive average pooling: partition H×W into an out_h×out_w grid of
/// near-even regions and average each.
pub fn adaptive_avg_pool_forward<T: Elem>(
    x: &Tensor<T>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<T>> {
    expect_dims(x, 3, "adaptive_avg_pool input")?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Shape("adaptive_avg_pool output dims must be positive".into()));
    }
    let (c_n, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    let mut out = Tensor::zeros(&[c_n, out_h, out_w]);
    for c in 0..c_n {
        let plane = &x.data()[c * h * w..(c + 1) * h * w];
        for oh in 0..out_h {
            let (r0, r1) = pool_region(oh, h, out_h);
            for ow in 0..out_w {
                let (c0, c1) = pool_region(ow, w, out_w);
                let mut acc = T::zero();
                for r in r0..r1 {
                    for cc in c0..c1 {
                        acc = acc + plane[r * w + cc];
                    }
                }
                out.data_mut()[(c * out_h + oh) * out_w + ow] =
                    acc / T::from_f64(((r1 - r0) * (c1 - c0)) as f64);
            }
        }
    }
    Ok(out)
}

pub fn adaptive_avg_pool_backward<T: Elem>(
    x_dims: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if x_dims.len() != 3 || grad_out.dims().len() != 3 || x_dims[0] != grad_out.dim(0) {
        return Err(Error::Shape(format!(
            "adaptive_avg_pool backward: input {x_dims:?} vs grad {:?}",
            grad_out.dims()
        )));
    }
    let (c_n, h, w) = (x_dims[0], x_dims[1], x_dims[2]);
    let (out_h, out_w) = (grad_out.dim(1), grad_out.dim(2));
    let mut grad_x = Tensor::zeros(x_dims);
    for c in 0..c_n {
        for oh in 0..out_h {
            let (r0, r1) = pool_region(oh, h, out_h);
            for ow in 0..out_w {
                let (c0, c1) = pool_region(ow, w, out_w);
                let g = grad_out.data()[(c * out_h + oh) * out_w + ow]
                    / T::from_f64(((r1 - r0) * (c1 - c0)) as f64);
                let gx = grad_x.data_mut();
                for r in r0..r1 {
                    for cc in c0..c1 {
                        let idx = (c * h + r) * w + cc;
                        gx[idx] = gx[idx] + g;
                    }
                }
            }
        }
    }
    Ok(grad_x)
}

/// Fully connected layer: y = W·x + b with x [in], W [out×in], b [out].
pub fn linear_forward<T: Elem>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    expect_dims(x, 1, "linear input")?;
    expect_dims(w, 2, "linear weights")?;
    expect_dims(b, 1, "linear bias")?;
    let (out_n, in_n) = (w.dim(0), w.dim(1));
    if x.dim(0) != in_n || b.dim(0) != out_n {
        return Err(Error::Shape(format!(
            "linear: x {:?}, W {:?}, b {:?}",
            x.dims(),
            w.dims(),
            b.dims()
        )));
    }
    let mut out = Tensor::zeros(&[out_n]);
    for o in 0..out_n {
        let row = &w.data()[o * in_n..(o + 1) * in_n];
        let mut acc = b.data()[o];
        for (wi, xi) in row.iter().zip(x.data()) {
            acc = acc + *wi * *xi;
        }
        out.data_mut()[o] = acc;
    }
    Ok(out)
}

pub fn linear_backward<T: Elem>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (out_n, in_n) = (w.dim(0), w.dim(1));
    if x.dim(0) != in_n || grad_out.dim(0) != out_n {
        return Err(Error::Shape(format!(
            "linear backward: x {:?}, W {:?}, grad {:?}",
            x.dims(),
            w.dims(),
            grad_out.dims()
        )));
    }
    let mut grad_x = Tensor::zeros(&[in_n]);
    let mut grad_w = Tensor::zeros(&[out_n, in_n]);
    let grad_b = grad_out.clone();
    for o in 0..out_n {
        let g = grad_out.data()[o];
        let row = &w.data()[o * in_n..(o + 1) * in_n];
        let grow = &mut grad_w.data_mut()[o * in_n..(o + 1) * in_n];
        for i in 0..in_n {
            grad_x.data_mut()[i] = grad_x.data()[i] + row[i] * g;
            grow[i] = x.data()[i] * g;
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// Inverted dropout: each element survives with probability 1−p and is
/// scaled by 1/(1−p). Returns the output and the per-element multiplier
/// mask for the backward pass.
pub fn dropout_forward<T: Elem, R: Rng>(
    x: &Tensor<T>,
    p: f64,
    rng: &mut R,
) -> Result<(Tensor<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    let scale = T::from_f64(1.0 / (1.0 - p));
    let mask: Vec<T> =
        (0..x.len()).map(|_| if rng.gen::<f64>() < p { T::zero() } else { scale }).collect();
    let mut out = x.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
        *v = *v * m;
    }
    Ok((out, mask))
}

pub fn dropout_backward<T: Elem>(mask: &[T], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if mask.len() != grad_out.len() {
        return Err(Error::Shape(format!(
            "dropout backward: mask {} vs grad {}",
            mask.len(),
            grad_out.len()
        )));
    }
    let mut grad = grad_out.clone();
    for (g, &m) in grad.data_mut().iter_mut().zip(mask) {
        *g = *g * m;
    }
    Ok(grad)
}

/// Cross-entropy of softmax(logits) against `true_class`, with the loss
/// gradient w.r.t. the logits. Log-sum-exp stabilized.
pub fn softmax_cross_entropy<T: Elem>(
    logits: &Tensor<T>,
    true_class: usize,
) -> Result<(T, Tensor<T>)> {
    expect_dims(logits, 1, "softmax_cross_entropy logits")?;
    let k = logits.dim(0);
    if true_class >= k {
        return Err(Error::Label { label: true_class, classes: k });
    }
    let max = logits.data().iter().cloned().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for &l in logits.data() {
        sum = sum + (l - max).exp();
    }
    let lse = max + sum.ln();
    let loss = lse - logits.data()[true_class];
    let mut grad = Tensor::zeros(&[k]);
    for i in 0..k {
        let p = (logits.data()[i] - lse).exp();
        grad.data_mut()[i] = if i == true_class { p - T::one() } else { p };
    }
    Ok((loss, grad))
}
