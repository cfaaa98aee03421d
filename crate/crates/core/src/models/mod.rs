//! Trainable classifiers with hand-derived gradients.
//!
//! All three architectures store their parameters in one flat buffer whose
//! layout is given by [`Architecture::layout`]. The flat buffer *is* the
//! [`FlatParams`] view, so perturbing or optimizing "every trainable scalar"
//! is a loop over a slice and the structured/flat round trip is the identity.
//!
//! Parameter order:
//! - linear: `weight` (classes x inputs, row-major), no bias
//! - mlp: `w1` (hidden x inputs), `b1`, `w2` (classes x hidden), `b2`
//! - cnn: `kernels` (K x F x F), `gamma` (K), `beta` (K),
//!   `fc_weight` (classes x K*Q*Q), `fc_bias`

mod adam;
mod checkpoint;
pub mod layers;
mod train;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use train::{train, EpochStats, TrainOptions};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::math::{argmax_unchecked, matvec_into, softmax_in_place, ClassIndex, ProbVector};
use crate::rng::{fill_standard_normal, RngStream};
use layers::{conv_out_dim, normalize, normalize_backward, Activation, ConvGeometry, LAYER_NORM_EPS};

/// Probabilities are floored here before taking logs in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Samples per partial gradient sum; fixed so reductions are schedule-independent.
pub(crate) const GRAD_CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp,
    Cnn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp" => Ok(ModelKind::Mlp),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(Error::config("model", format!("unknown model `{other}`"))),
        }
    }
}

/// Architecture descriptor; also the header of a checkpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    /// Multinomial regression `softmax(W x)` without bias.
    Linear { inputs: usize, classes: usize },
    /// One ReLU hidden layer.
    Mlp {
        inputs: usize,
        hidden: usize,
        classes: usize,
    },
    /// conv -> layer norm -> GELU -> average pool -> fully connected.
    Cnn {
        side: usize,
        kernels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
        pool: usize,
        classes: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `1 / sqrt(fan_in)`.
    Gaussian { fan_in: usize },
    Zeros,
    Ones,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamBlock {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
    pub init: Init,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct CnnGeometry {
    conv: ConvGeometry,
    kernels: usize,
    pool: usize,
    pooled: usize,
}

impl CnnGeometry {
    fn map_len(&self) -> usize {
        self.conv.out_rows * self.conv.out_cols
    }

    fn pooled_len(&self) -> usize {
        self.pooled * self.pooled
    }

    fn features(&self) -> usize {
        self.kernels * self.pooled_len()
    }
}

impl Architecture {
    pub const MNIST_SIDE: usize = 28;

    pub fn linear(inputs: usize, classes: usize) -> Self {
        Architecture::Linear { inputs, classes }
    }

    pub fn mlp(inputs: usize, hidden: usize, classes: usize) -> Self {
        Architecture::Mlp {
            inputs,
            hidden,
            classes,
        }
    }

    /// The default convolutional model for `side x side` inputs: 8 kernels of
    /// 5x5, stride 1, no padding, 2x2 pooling (28 -> 24 -> 12 on MNIST).
    pub fn tiny_cnn(side: usize, classes: usize) -> Self {
        Architecture::Cnn {
            side,
            kernels: 8,
            kernel_size: 5,
            stride: 1,
            padding: 0,
            pool: 2,
            classes,
        }
    }

    /// Default architecture of each kind for square `side x side` images.
    pub fn for_kind(kind: ModelKind, side: usize, classes: usize) -> Self {
        match kind {
            ModelKind::Linear => Architecture::linear(side * side, classes),
            ModelKind::Mlp => Architecture::mlp(side * side, 128, classes),
            ModelKind::Cnn => Architecture::tiny_cnn(side, classes),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Linear { .. } => ModelKind::Linear,
            Architecture::Mlp { .. } => ModelKind::Mlp,
            Architecture::Cnn { .. } => ModelKind::Cnn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Linear { inputs, .. } | Architecture::Mlp { inputs, .. } => inputs,
            Architecture::Cnn { side, .. } => side * side,
        }
    }

    pub fn num_classes(&self) -> usize {
        match *self {
            Architecture::Linear { classes, .. }
            | Architecture::Mlp { classes, .. }
            | Architecture::Cnn { classes, .. } => classes,
        }
    }

    fn cnn_geometry(&self) -> Result<Option<CnnGeometry>> {
        let Architecture::Cnn {
            side,
            kernels,
            kernel_size,
            stride,
            padding,
            pool,
            ..
        } = *self
        else {
            return Ok(None);
        };
        let out = conv_out_dim(side, kernel_size, padding, stride)?;
        let pooled = conv_out_dim(out, pool, 0, pool)?;
        Ok(Some(CnnGeometry {
            conv: ConvGeometry {
                in_rows: side,
                in_cols: side,
                k_rows: kernel_size,
                k_cols: kernel_size,
                stride,
                padding,
                out_rows: out,
                out_cols: out,
            },
            kernels,
            pool,
            pooled,
        }))
    }

    /// Checks every size is positive and every convolution geometry integral.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim() == 0 || self.num_classes() < 2 {
            return Err(Error::config(
                "model",
                "architecture needs inputs and at least two classes",
            ));
        }
        match *self {
            Architecture::Mlp { hidden: 0, .. } => {
                Err(Error::config("model", "mlp hidden size must be positive"))
            }
            Architecture::Cnn { kernels: 0, .. } => {
                Err(Error::config("model", "cnn needs at least one kernel"))
            }
            _ => self.cnn_geometry().map(|_| ()),
        }
    }

    /// Ordered parameter blocks.
    pub fn layout(&self) -> Result<Vec<ParamBlock>> {
        self.validate()?;
        let classes = self.num_classes();
        let specs: Vec<(&'static str, usize, Init)> = match *self {
            Architecture::Linear { inputs, .. } => vec![(
                "weight",
                classes * inputs,
                Init::Gaussian { fan_in: inputs },
            )],
            Architecture::Mlp { inputs, hidden, .. } => vec![
                ("w1", hidden * inputs, Init::Gaussian { fan_in: inputs }),
                ("b1", hidden, Init::Zeros),
                ("w2", classes * hidden, Init::Gaussian { fan_in: hidden }),
                ("b2", classes, Init::Zeros),
            ],
            Architecture::Cnn {
                kernels,
                kernel_size,
                ..
            } => {
                let g = self.cnn_geometry()?.expect("cnn geometry");
                let k2 = kernel_size * kernel_size;
                vec![
                    ("kernels", kernels * k2, Init::Gaussian { fan_in: k2 }),
                    ("gamma", kernels, Init::Ones),
                    ("beta", kernels, Init::Zeros),
                    (
                        "fc_weight",
                        classes * g.features(),
                        Init::Gaussian {
                            fan_in: g.features(),
                        },
                    ),
                    ("fc_bias", classes, Init::Zeros),
                ]
            }
        };
        let mut offset = 0;
        Ok(specs
            .into_iter()
            .map(|(name, len, init)| {
                let block = ParamBlock {
                    name,
                    offset,
                    len,
                    init,
                };
                offset += len;
                block
            })
            .collect())
    }

    pub fn num_params(&self) -> Result<usize> {
        Ok(self.layout()?.iter().map(|b| b.len).sum())
    }
}

/// Every trainable scalar of a model, in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatParams(pub Vec<f64>);

impl FlatParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Result of one forward/backward pass over a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradient {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    /// Gradient of `loss`, in [`FlatParams`] order.
    pub grad: Vec<f64>,
    /// How many samples the pre-update model classified correctly.
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    arch: Architecture,
    layout: Vec<ParamBlock>,
    params: Vec<f64>,
    cnn: Option<CnnGeometry>,
}

impl Model {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.num_params()?;
        Model::from_flat(arch, FlatParams(vec![0.0; n]))
    }

    /// Weights `N(0, 1/fan_in)`, biases and shifts zero, layer-norm scales one.
    pub fn init(arch: Architecture, rng: &RngStream) -> Result<Self> {
        let mut model = Model::zeros(arch)?;
        let mut gen = rng.rng();
        for block in model.layout.clone() {
            let slot = &mut model.params[block.offset..block.offset + block.len];
            match block.init {
                Init::Gaussian { fan_in } => {
                    fill_standard_normal(&mut gen, slot);
                    let std = 1.0 / (fan_in as f64).sqrt();
                    slot.iter_mut().for_each(|w| *w *= std);
                }
                Init::Zeros => slot.fill(0.0),
                Init::Ones => slot.fill(1.0),
            }
        }
        Ok(model)
    }

    pub fn from_flat(arch: Architecture, params: FlatParams) -> Result<Self> {
        let layout = arch.layout()?;
        let expected: usize = layout.iter().map(|b| b.len).sum();
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "{} parameters given, architecture needs {expected}",
                params.len()
            )));
        }
        let cnn = arch.cnn_geometry()?;
        Ok(Model {
            arch,
            layout,
            params: params.0,
            cnn,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn flat_params(&self) -> FlatParams {
        FlatParams(self.params.clone())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes()
    }

    /// Parameter block by name.
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .iter()
            .find(|b| b.name == name)
            .map(|b| &self.params[b.offset..b.offset + b.len])
    }

    fn slice(&self, i: usize) -> &[f64] {
        let b = &self.layout[i];
        &self.params[b.offset..b.offset + b.len]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "expected input of {} values, found {}",
                self.input_dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("input contains non-finite values"));
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.logits_unchecked(x))
    }

    /// Output probabilities for one flattened image.
    pub fn forward(&self, x: &[f64]) -> Result<ProbVector> {
        self.check_input(x)?;
        ProbVector::new(self.probs_unchecked(x))
            .map_err(|e| Error::Invariant(format!("forward produced {e}")))
    }

    pub(crate) fn probs_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits_unchecked(x);
        softmax_in_place(&mut z);
        z
    }

    /// Argmax class and class probabilities; inputs assumed well-shaped.
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> (ClassIndex, Vec<f64>) {
        let p = self.probs_unchecked(x);
        (argmax_unchecked(&p), p)
    }

    fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let classes = self.num_classes();
        let mut z = vec![0.0; classes];
        match self.arch {
            Architecture::Linear { inputs, .. } => matvec_into(self.slice(0), inputs, x, &mut z),
            Architecture::Mlp { inputs, hidden, .. } => {
                let mut h = vec![0.0; hidden];
                matvec_into(self.slice(0), inputs, x, &mut h);
                for (a, b) in h.iter_mut().zip(self.slice(1)) {
                    *a = Activation::Relu.apply(*a + b);
                }
                matvec_into(self.slice(2), hidden, &h, &mut z);
                z.iter_mut().zip(self.slice(3)).for_each(|(v, b)| *v += b);
            }
            Architecture::Cnn { .. } => {
                let fwd = self.cnn_forward(x);
                let g = self.cnn.expect("cnn geometry");
                matvec_into(self.slice(3), g.features(), &fwd.pooled, &mut z);
                z.iter_mut().zip(self.slice(4)).for_each(|(v, b)| *v += b);
            }
        }
        z
    }

    fn cnn_forward(&self, x: &[f64]) -> CnnForward {
        let g = self.cnn.expect("cnn geometry");
        let (kernels, gamma, beta) = (self.slice(0), self.slice(1), self.slice(2));
        let k2 = g.conv.k_rows * g.conv.k_cols;
        let map = g.map_len();
        let mut conv = vec![0.0; g.kernels * map];
        for k in 0..g.kernels {
            g.conv.correlate(
                x,
                &kernels[k * k2..(k + 1) * k2],
                &mut conv[k * map..(k + 1) * map],
            );
        }
        let (xhat, inv_std) = normalize(&conv, LAYER_NORM_EPS);
        let mut pre = vec![0.0; xhat.len()];
        let mut act = vec![0.0; xhat.len()];
        for k in 0..g.kernels {
            for i in k * map..(k + 1) * map {
                pre[i] = gamma[k] * xhat[i] + beta[k];
                act[i] = Activation::Gelu.apply(pre[i]);
            }
        }
        let mut pooled = vec![0.0; g.features()];
        let pl = g.pooled_len();
        for k in 0..g.kernels {
            layers::avg_pool_raw(
                &act[k * map..(k + 1) * map],
                g.conv.out_cols,
                g.pool,
                g.pool,
                g.pooled,
                g.pooled,
                &mut pooled[k * pl..(k + 1) * pl],
            );
        }
        CnnForward {
            xhat,
            inv_std,
            pre,
            pooled,
        }
    }

    /// Adds the single-sample cross-entropy gradient at `(x, label)` into
    /// `grad` and returns `(loss, predicted class)`.
    fn accumulate_gradient(&self, x: &[f64], label: ClassIndex, grad: &mut [f64]) -> (f64, usize) {
        let classes = self.num_classes();
        let l = &self.layout;
        match self.arch {
            Architecture::Linear { inputs, .. } => {
                let mut p = vec![0.0; classes];
                matvec_into(self.slice(0), inputs, x, &mut p);
                softmax_in_place(&mut p);
                let out = (loss_of(&p, label), argmax_unchecked(&p));
                p[label] -= 1.0;
                let gw = &mut grad[l[0].offset..l[0].offset + l[0].len];
                for (row, &d) in gw.chunks_exact_mut(inputs).zip(&p) {
                    axpy(d, x, row);
                }
                out
            }
            Architecture::Mlp { inputs, hidden, .. } => {
                let mut h = vec![0.0; hidden];
                matvec_into(self.slice(0), inputs, x, &mut h);
                h.iter_mut().zip(self.slice(1)).for_each(|(v, b)| *v += b);
                let a: Vec<f64> = h.iter().map(|&v| Activation::Relu.apply(v)).collect();
                let mut p = vec![0.0; classes];
                matvec_into(self.slice(2), hidden, &a, &mut p);
                p.iter_mut().zip(self.slice(3)).for_each(|(v, b)| *v += b);
                softmax_in_place(&mut p);
                let out = (loss_of(&p, label), argmax_unchecked(&p));
                p[label] -= 1.0;
                let dz = p;

                let w2 = self.slice(2);
                let mut da = vec![0.0; hidden];
                for (row, &d) in w2.chunks_exact(hidden).zip(&dz) {
                    axpy(d, row, &mut da);
                }
                let (gw2, gb2) = (l[2], l[3]);
                for (row, &d) in grad[gw2.offset..gw2.offset + gw2.len]
                    .chunks_exact_mut(hidden)
                    .zip(&dz)
                {
                    axpy(d, &a, row);
                }
                grad[gb2.offset..gb2.offset + gb2.len]
                    .iter_mut()
                    .zip(&dz)
                    .for_each(|(g, d)| *g += d);
                let dh: Vec<f64> = da
                    .iter()
                    .zip(&h)
                    .map(|(d, &v)| d * Activation::Relu.derivative(v))
                    .collect();
                let (gw1, gb1) = (l[0], l[1]);
                for (row, &d) in grad[gw1.offset..gw1.offset + gw1.len]
                    .chunks_exact_mut(inputs)
                    .zip(&dh)
                {
                    if d != 0.0 {
                        axpy(d, x, row);
                    }
                }
                grad[gb1.offset..gb1.offset + gb1.len]
                    .iter_mut()
                    .zip(&dh)
                    .for_each(|(g, d)| *g += d);
                out
            }
            Architecture::Cnn { .. } => self.cnn_gradient(x, label, grad),
        }
    }

    fn cnn_gradient(&self, x: &[f64], label: ClassIndex, grad: &mut [f64]) -> (f64, usize) {
        let g = self.cnn.expect("cnn geometry");
        let classes = self.num_classes();
        let l = &self.layout;
        let fwd = self.cnn_forward(x);
        let features = g.features();

        let mut p = vec![0.0; classes];
        matvec_into(self.slice(3), features, &fwd.pooled, &mut p);
        p.iter_mut().zip(self.slice(4)).for_each(|(v, b)| *v += b);
        softmax_in_place(&mut p);
        let out = (loss_of(&p, label), argmax_unchecked(&p));
        p[label] -= 1.0;
        let dz = p;

        // Fully connected layer.
        let fc_w = self.slice(3);
        let mut d_pooled = vec![0.0; features];
        for (row, &d) in fc_w.chunks_exact(features).zip(&dz) {
            axpy(d, row, &mut d_pooled);
        }
        let (gfw, gfb) = (l[3], l[4]);
        for (row, &d) in grad[gfw.offset..gfw.offset + gfw.len]
            .chunks_exact_mut(features)
            .zip(&dz)
        {
            axpy(d, &fwd.pooled, row);
        }
        grad[gfb.offset..gfb.offset + gfb.len]
            .iter_mut()
            .zip(&dz)
            .for_each(|(g, d)| *g += d);

        // Average pool, then GELU, then the per-map affine.
        let map = g.map_len();
        let cols = g.conv.out_cols;
        let scale = 1.0 / (g.pool * g.pool) as f64;
        let gamma = self.slice(1);
        let mut d_xhat = vec![0.0; fwd.pre.len()];
        for k in 0..g.kernels {
            let mut d_gamma = 0.0;
            let mut d_beta = 0.0;
            for r in 0..g.conv.out_rows {
                for c in 0..cols {
                    let (pi, pj) = (r / g.pool, c / g.pool);
                    let i = k * map + r * cols + c;
                    let d_act = if pi < g.pooled && pj < g.pooled {
                        d_pooled[k * g.pooled_len() + pi * g.pooled + pj] * scale
                    } else {
                        0.0
                    };
                    let d_pre = d_act * Activation::Gelu.derivative(fwd.pre[i]);
                    d_gamma += d_pre * fwd.xhat[i];
                    d_beta += d_pre;
                    d_xhat[i] = d_pre * gamma[k];
                }
            }
            grad[l[1].offset + k] += d_gamma;
            grad[l[2].offset + k] += d_beta;
        }

        // Layer norm over the whole conv output, then the convolution.
        let d_conv = normalize_backward(&fwd.xhat, fwd.inv_std, &d_xhat);
        let k2 = g.conv.k_rows * g.conv.k_cols;
        let gk = l[0];
        let d_kernels = &mut grad[gk.offset..gk.offset + gk.len];
        for k in 0..g.kernels {
            g.conv.kernel_grad(
                x,
                &d_conv[k * map..(k + 1) * map],
                &mut d_kernels[k * k2..(k + 1) * k2],
            );
        }
        out
    }

    /// Mean cross-entropy and its exact gradient over `indices` of `data`.
    ///
    /// Partial sums are formed over fixed chunks of [`GRAD_CHUNK`] samples and
    /// added in chunk order, so the result is bit-identical for every
    /// execution policy.
    pub fn gradients(
        &self,
        data: &LabeledDataset,
        indices: &[usize],
        exec: Exec,
    ) -> Result<BatchGradient> {
        if indices.is_empty() {
            return Err(Error::invalid("gradient of an empty batch"));
        }
        if data.input_dim() != self.input_dim() {
            return Err(Error::invalid(format!(
                "dataset images have {} values, model expects {}",
                data.input_dim(),
                self.input_dim()
            )));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::invalid(format!("batch index {i} out of range")));
        }
        let n = self.num_params();
        let partials = exec.map_chunks(indices, GRAD_CHUNK, |_, chunk| {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            let mut correct = 0;
            for &i in chunk {
                let label = data.label(i);
                let (l, pred) = self.accumulate_gradient(data.image(i), label, &mut grad);
                loss += l;
                correct += usize::from(pred == label);
            }
            (loss, grad, correct)
        });
        let mut total = BatchGradient {
            loss: 0.0,
            grad: vec![0.0; n],
            correct: 0,
        };
        for (loss, grad, correct) in partials {
            total.loss += loss;
            total.correct += correct;
            total.grad.iter_mut().zip(&grad).for_each(|(t, g)| *t += g);
        }
        let inv = 1.0 / indices.len() as f64;
        total.loss *= inv;
        total.grad.iter_mut().for_each(|g| *g *= inv);
        Ok(total)
    }

    /// Mean cross-entropy over `indices` without gradients.
    pub fn loss(&self, data: &LabeledDataset, indices: &[usize]) -> Result<f64> {
        let preds = indices
            .iter()
            .map(|&i| self.forward(data.image(i)))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<_> = indices.iter().map(|&i| data.label(i)).collect();
        cross_entropy(&preds, &labels)
    }
}

struct CnnForward {
    xhat: Vec<f64>,
    inv_std: f64,
    pre: Vec<f64>,
    pooled: Vec<f64>,
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn loss_of(p: &[f64], label: ClassIndex) -> f64 {
    -p[label].max(PROB_FLOOR).ln()
}

/// Average cross-entropy `-(1/N) sum ln p_i[y_i]`, probabilities floored at
/// [`PROB_FLOOR`].
pub fn cross_entropy(preds: &[ProbVector], labels: &[ClassIndex]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::invalid("cross-entropy of an empty batch"));
    }
    if preds.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (p, &y) in preds.iter().zip(labels) {
        if y >= p.len() {
            return Err(Error::invalid(format!("label {y} outside {} classes", p.len())));
        }
        total += loss_of(p.as_slice(), y);
    }
    Ok(total / preds.len() as f64)
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(model: &Model, data: &LabeledDataset, exec: Exec) -> Result<f64> {
    Ok(correct_count(model, data, exec)? as f64 / data.len() as f64)
}

/// Samples whose unperturbed argmax equals the label.
pub fn correct_count(model: &Model, data: &LabeledDataset, exec: Exec) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset"));
    }
    if data.input_dim() != model.input_dim() {
        return Err(Error::invalid(format!(
            "dataset images have {} values, model expects {}",
            data.input_dim(),
            model.input_dim()
        )));
    }
    let counts = exec.map_range(data.len().div_ceil(256), |c| {
        (c * 256..((c + 1) * 256).min(data.len()))
            .filter(|&i| model.predict_unchecked(data.image(i)).0 == data.label(i))
            .count()
    });
    Ok(counts.into_iter().sum())
}

#[cfg(test)]
mod tests;
