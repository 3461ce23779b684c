//! HLTDNN assembly: four conv blocks feeding a conv branch (structural
//! texture) in parallel with a histogram branch (statistical texture),
//! concatenated into the penultimate vector and classified by one linear
//! layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn_core::{
    adaptive_avg_pool_backward, adaptive_avg_pool_forward, adagrad_step, conv2d_backward,
    conv2d_forward, dropout_backward, dropout_forward, histogram_backward, histogram_forward,
    kaiming_uniform, linear_backward, linear_forward, maxpool2d_backward, maxpool2d_forward,
    relu_backward, relu_forward, uniform_bias, Elem, HistogramLayerParams, Tensor,
};
use crate::seeding::stream_seed;

const STREAM_INIT: u64 = 0x4d4f44; // "MOD"

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub num_classes: usize,
    pub conv_channels: [usize; 4],
    pub branch_channels: usize,
    pub bins: usize,
    pub hist_kernel: (usize, usize),
    pub hist_stride: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// The paper architecture for a stack with `in_channels` features:
    /// backbone in→16→32→64→16, conv branch to 256, 16-bin histogram branch
    /// over the 16 backbone channels, penultimate 256 + 256 = 512.
    pub fn paper(in_channels: usize, seed: u64) -> Self {
        ModelConfig {
            in_channels,
            num_classes: 4,
            conv_channels: [16, 32, 64, 16],
            branch_channels: 256,
            bins: 16,
            hist_kernel: (2, 2),
            hist_stride: 2,
            seed,
        }
    }

    pub fn penultimate_width(&self) -> usize {
        self.branch_channels + self.bins * self.conv_channels[3]
    }

    fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.in_channels) {
            return Err(Error::Config(format!(
                "in_channels {} outside [1, 6]",
                self.in_channels
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes {} < 2", self.num_classes)));
        }
        if self.conv_channels.contains(&0) || self.branch_channels == 0 || self.bins == 0 {
            return Err(Error::Config("channel counts and bins must be positive".into()));
        }
        if self.hist_kernel.0 == 0 || self.hist_kernel.1 == 0 || self.hist_stride == 0 {
            return Err(Error::Config("histogram kernel and stride must be positive".into()));
        }
        Ok(())
    }
}

/// All learnable tensors, also used for gradients and Adagrad accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub conv_w: Vec<Tensor<T>>,
    pub conv_b: Vec<Tensor<T>>,
    pub branch_w: Tensor<T>,
    pub branch_b: Tensor<T>,
    pub hist_centers: Tensor<T>,
    pub hist_widths: Tensor<T>,
    pub fc_w: Tensor<T>,
    pub fc_b: Tensor<T>,
}

impl<T: Elem> ParamSet<T> {
    pub fn zeros_like(other: &ParamSet<T>) -> ParamSet<T> {
        ParamSet {
            conv_w: other.conv_w.iter().map(|t| Tensor::zeros(t.dims())).collect(),
            conv_b: other.conv_b.iter().map(|t| Tensor::zeros(t.dims())).collect(),
            branch_w: Tensor::zeros(other.branch_w.dims()),
            branch_b: Tensor::zeros(other.branch_b.dims()),
            hist_centers: Tensor::zeros(other.hist_centers.dims()),
            hist_widths: Tensor::zeros(other.hist_widths.dims()),
            fc_w: Tensor::zeros(other.fc_w.dims()),
            fc_b: Tensor::zeros(other.fc_b.dims()),
        }
    }

    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        fn add<T: Elem>(a: &mut Tensor<T>, b: &Tensor<T>) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = *x + *y;
            }
        }
        for (a, b) in self.conv_w.iter_mut().zip(&other.conv_w) {
            add(a, b);
        }
        for (a, b) in self.conv_b.iter_mut().zip(&other.conv_b) {
            add(a, b);
        }
        add(&mut self.branch_w, &other.branch_w);
        add(&mut self.branch_b, &other.branch_b);
        add(&mut self.hist_centers, &other.hist_centers);
        add(&mut self.hist_widths, &other.hist_widths);
        add(&mut self.fc_w, &other.fc_w);
        add(&mut self.fc_b, &other.fc_b);
    }

    /// Stable (name, tensor) listing; checkpoint order depends on it.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, (w, b)) in self.conv_w.iter().zip(&self.conv_b).enumerate() {
            out.push((format!("conv{i}.weight"), w));
            out.push((format!("conv{i}.bias"), b));
        }
        out.push(("branch.weight".into(), &self.branch_w));
        out.push(("branch.bias".into(), &self.branch_b));
        out.push(("hist.centers".into(), &self.hist_centers));
        out.push(("hist.widths".into(), &self.hist_widths));
        out.push(("fc.weight".into(), &self.fc_w));
        out.push(("fc.bias".into(), &self.fc_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, (w, b)) in self.conv_w.iter_mut().zip(self.conv_b.iter_mut()).enumerate() {
            out.push((format!("conv{i}.weight"), w));
            out.push((format!("conv{i}.bias"), b));
        }
        out.push(("branch.weight".into(), &mut self.branch_w));
        out.push(("branch.bias".into(), &mut self.branch_b));
        out.push(("hist.centers".into(), &mut self.hist_centers));
        out.push(("hist.widths".into(), &mut self.hist_widths));
        out.push(("fc.weight".into(), &mut self.fc_w));
        out.push(("fc.bias".into(), &mut self.fc_b));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub cfg: ModelConfig,
    pub params: ParamSet<T>,
}

impl<T: Elem> ModelState<T> {
    /// Seeded initialization: Kaiming-uniform conv/linear weights,
    /// ±1/√fan_in biases, histogram μ over [−1, 1] and γ = B/2.
    pub fn init(cfg: &ModelConfig) -> Result<ModelState<T>> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_INIT));
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        let mut c_in = cfg.in_channels;
        for &c_out in &cfg.conv_channels {
            let fan_in = c_in * 9;
            conv_w.push(kaiming_uniform(&[c_out, c_in, 3, 3], fan_in, &mut rng)?);
            conv_b.push(uniform_bias(&[c_out], fan_in, &mut rng)?);
            c_in = c_out;
        }
        let fan_in = cfg.conv_channels[3] * 9;
        let branch_w = kaiming_uniform(&[cfg.branch_channels, cfg.conv_channels[3], 3, 3], fan_in, &mut rng)?;
        let branch_b = uniform_bias(&[cfg.branch_channels], fan_in, &mut rng)?;
        let hist = HistogramLayerParams::<T>::init(
            cfg.bins,
            cfg.conv_channels[3],
            cfg.hist_kernel,
            cfg.hist_stride,
        )?;
        let penult = cfg.penultimate_width();
        let fc_w = kaiming_uniform(&[cfg.num_classes, penult], penult, &mut rng)?;
        let fc_b = uniform_bias(&[cfg.num_classes], penult, &mut rng)?;
        Ok(ModelState {
            cfg: cfg.clone(),
            params: ParamSet {
                conv_w,
                conv_b,
                branch_w,
                branch_b,
                hist_centers: hist.centers,
                hist_widths: hist.widths,
                fc_w,
                fc_b,
            },
        })
    }

    pub fn cast<U: Elem>(&self) -> ModelState<U> {
        ModelState {
            cfg: self.cfg.clone(),
            params: ParamSet {
                conv_w: self.params.conv_w.iter().map(Tensor::cast).collect(),
                conv_b: self.params.conv_b.iter().map(Tensor::cast).collect(),
                branch_w: self.params.branch_w.cast(),
                branch_b: self.params.branch_b.cast(),
                hist_centers: self.params.hist_centers.cast(),
                hist_widths: self.params.hist_widths.cast(),
                fc_w: self.params.fc_w.cast(),
                fc_b: self.params.fc_b.cast(),
            },
        }
    }

    /// Histogram parameters with the kernel clamped to the backbone output
    /// size, so small inputs (unit tests, tiny models) remain valid.
    fn hist_params(&self, h: usize, w: usize) -> HistogramLayerParams<T> {
        let (s, t) = self.cfg.hist_kernel;
        HistogramLayerParams {
            centers: self.params.hist_centers.clone(),
            widths: self.params.hist_widths.clone(),
            kernel: (s.min(h), t.min(w)),
            stride: self.cfg.hist_stride,
        }
    }

    pub fn adagrad_update(&mut self, acc: &mut ParamSet<T>, grads: &ParamSet<T>, lr: f64) -> Result<()> {
        for ((w, aw), gw) in self
            .params
            .conv_w
            .iter_mut()
            .zip(acc.conv_w.iter_mut())
            .zip(&grads.conv_w)
        {
            adagrad_step(w, aw, gw, lr)?;
        }
        for ((b, ab), gb) in self
            .params
            .conv_b
            .iter_mut()
            .zip(acc.conv_b.iter_mut())
            .zip(&grads.conv_b)
        {
            adagrad_step(b, ab, gb, lr)?;
        }
        adagrad_step(&mut self.params.branch_w, &mut acc.branch_w, &grads.branch_w, lr)?;
        adagrad_step(&mut self.params.branch_b, &mut acc.branch_b, &grads.branch_b, lr)?;
        adagrad_step(&mut self.params.hist_centers, &mut acc.hist_centers, &grads.hist_centers, lr)?;
        adagrad_step(&mut self.params.hist_widths, &mut acc.hist_widths, &grads.hist_widths, lr)?;
        adagrad_step(&mut self.params.fc_w, &mut acc.fc_w, &grads.fc_w, lr)?;
        adagrad_step(&mut self.params.fc_b, &mut acc.fc_b, &grads.fc_b, lr)?;
        Ok(())
    }

    pub fn bits_equal(&self, other: &ModelState<T>) -> bool {
        let a = self.params.named();
        let b = other.params.named();
        a.len() == b.len()
            && a.iter().zip(&b).all(|((na, ta), (nb, tb))| {
                na == nb
                    && ta.dims() == tb.dims()
                    && ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .all(|(x, y)| Elem::to_f64(*x).to_bits() == Elem::to_f64(*y).to_bits())
            })
    }
}

/// Per-layer values saved by the forward pass for the hand-chained backward.
pub struct Trace<T> {
    block_in: Vec<Tensor<T>>,
    block_pre: Vec<Tensor<T>>,
    block_argmax: Vec<Vec<usize>>,
    x4: Tensor<T>,
    branch_pre: Tensor<T>,
    hist_eff: HistogramLayerParams<T>,
    hist_dims: Vec<usize>,
    pub penultimate: Tensor<T>,
    mask: Option<Vec<T>>,
    dropped: Tensor<T>,
    pub logits: Tensor<T>,
}

fn pool_kernel(h: usize, w: usize) -> (usize, usize) {
    (2.min(h), 2.min(w))
}

/// Forward pass over one [C×H×W] stack. Dropout runs only when an RNG is
/// supplied (training); inference is deterministic.
pub fn forward<T: Elem>(
    model: &ModelState<T>,
    x: &Tensor<T>,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<Trace<T>> {
    if x.dims().len() != 3 || x.dim(0) != model.cfg.in_channels {
        return Err(Error::Shape(format!(
            "model expects [{}, H, W] input, got {:?}",
            model.cfg.in_channels,
            x.dims()
        )));
    }
    let mut block_in = Vec::with_capacity(4);
    let mut block_pre = Vec::with_capacity(4);
    let mut block_argmax = Vec::with_capacity(4);
    let mut cur = x.clone();
    for i in 0..4 {
        let pre = conv2d_forward(&cur, &model.params.conv_w[i], &model.params.conv_b[i], 1, 1)?;
        let r = relu_forward(&pre);
        let k = pool_kernel(r.dim(1), r.dim(2));
        let (pooled, argmax) = maxpool2d_forward(&r, k, (2, 2))?;
        block_in.push(cur);
        block_pre.push(pre);
        block_argmax.push(argmax);
        cur = pooled;
    }
    let x4 = cur;

    let branch_pre =
        conv2d_forward(&x4, &model.params.branch_w, &model.params.branch_b, 1, 1)?;
    let branch_relu = relu_forward(&branch_pre);
    let branch_pooled = adaptive_avg_pool_forward(&branch_relu, 1, 1)?;

    let hist_eff = model.hist_params(x4.dim(1), x4.dim(2));
    let hist_out = histogram_forward(&x4, &hist_eff)?;
    let (hc, hr, hcol) = (hist_out.dim(0), hist_out.dim(1), hist_out.dim(2));
    let cells = T::from_f64((hr * hcol) as f64);
    let mut penult =
        Vec::with_capacity(model.cfg.branch_channels + hc);
    penult.extend_from_slice(branch_pooled.data());
    for ch in 0..hc {
        let plane = &hist_out.data()[ch * hr * hcol..(ch + 1) * hr * hcol];
        let mut acc = T::zero();
        for &v in plane {
            acc = acc + v;
        }
        penult.push(acc / cells);
    }
    let penultimate = Tensor::from_vec(&[penult.len()], penult)?;

    let (dropped, mask) = match dropout {
        Some((p, rng)) if p > 0.0 => {
            let (d, m) = dropout_forward(&penultimate, p, rng)?;
            (d, Some(m))
        }
        _ => (penultimate.clone(), None),
    };
    let logits = linear_forward(&dropped, &model.params.fc_w, &model.params.fc_b)?;

    Ok(Trace {
        block_in,
        block_pre,
        block_argmax,
        x4,
        branch_pre,
        hist_eff,
        hist_dims: vec![hc, hr, hcol],
        penultimate,
        mask,
        dropped,
        logits,
    })
}

/// Backward pass from the loss gradient at the logits down to every
/// parameter. Input gradients are computed internally but not returned.
pub fn backward<T: Elem>(
    model: &ModelState<T>,
    trace: &Trace<T>,
    grad_logits: &Tensor<T>,
) -> Result<ParamSet<T>> {
    let mut grads = ParamSet::zeros_like(&model.params);

    let (g_dropped, g_fc_w, g_fc_b) =
        linear_backward(&trace.dropped, &model.params.fc_w, grad_logits)?;
    grads.fc_w = g_fc_w;
    grads.fc_b = g_fc_b;
    let g_penult = match &trace.mask {
        Some(mask) => dropout_backward(mask, &g_dropped)?,
        None => g_dropped,
    };

    // Split the penultimate gradient into the conv branch and histogram parts.
    let bc = model.cfg.branch_channels;
    let g_branch_pool =
        Tensor::from_vec(&[bc, 1, 1], g_penult.data()[..bc].to_vec())?;
    let branch_relu_dims =
        [trace.branch_pre.dim(0), trace.branch_pre.dim(1), trace.branch_pre.dim(2)];
    let g_branch_relu = adaptive_avg_pool_backward(&branch_relu_dims, &g_branch_pool)?;
    let g_branch_pre = relu_backward(&trace.branch_pre, &g_branch_relu)?;
    let (g_x4_a, g_bw, g_bb) = conv2d_backward(
        &trace.x4,
        &model.params.branch_w,
        &model.params.branch_b,
        1,
        1,
        &g_branch_pre,
    )?;
    grads.branch_w = g_bw;
    grads.branch_b = g_bb;

    let (hc, hr, hcol) = (trace.hist_dims[0], trace.hist_dims[1], trace.hist_dims[2]);
    let cells = T::from_f64((hr * hcol) as f64);
    let mut g_hist_out = Tensor::zeros(&[hc, hr, hcol]);
    for ch in 0..hc {
        let g = g_penult.data()[bc + ch] / cells;
        for v in &mut g_hist_out.data_mut()[ch * hr * hcol..(ch + 1) * hr * hcol] {
            *v = g;
        }
    }
    let (g_x4_b, g_mu, g_gamma) = histogram_backward(&trace.x4, &trace.hist_eff, &g_hist_out)?;
    grads.hist_centers = g_mu;
    grads.hist_widths = g_gamma;

    let mut g_cur = g_x4_a;
    for (g, &b) in g_cur.data_mut().iter_mut().zip(g_x4_b.data()) {
        *g = *g + b;
    }

    for i in (0..4).rev() {
        let relu_dims =
            [trace.block_pre[i].dim(0), trace.block_pre[i].dim(1), trace.block_pre[i].dim(2)];
        let g_relu = maxpool2d_backward(&relu_dims, &trace.block_argmax[i], &g_cur)?;
        let g_pre = relu_backward(&trace.block_pre[i], &g_relu)?;
        let (g_in, g_w, g_b) = conv2d_backward(
            &trace.block_in[i],
            &model.params.conv_w[i],
            &model.params.conv_b[i],
            1,
            1,
            &g_pre,
        )?;
        grads.conv_w[i] = g_w;
        grads.conv_b[i] = g_b;
        g_cur = g_in;
    }
    Ok(grads)
}

/// The concatenated pre-dropout feature vector (ℝ^512 for the paper model).
pub fn penultimate<T: Elem>(model: &ModelState<T>, x: &Tensor<T>) -> Result<Vec<T>> {
    Ok(forward(model, x, None)?.penultimate.into_data())
}

/// Argmax class prediction (ties resolved to the lower index) plus logits.
pub fn predict<T: Elem>(model: &ModelState<T>, x: &Tensor<T>) -> Result<(usize, Vec<T>)> {
    let logits = forward(model, x, None)?.logits.into_data();
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    Ok((best, logits))
}
