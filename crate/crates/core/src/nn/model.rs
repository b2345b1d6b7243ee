//! The three classifiers.
//!
//! * `LR`: one sigmoid dense layer over the flat input.
//! * `LSTM` / `GRU`: per-step linear dense → recurrent layer (full sequence)
//!   → recurrent layer (last step only) → inverted dropout → sigmoid dense.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{Gru, GruCache};
use super::loss::mse_loss_batch;
use super::lstm::{Lstm, LstmCache};
use super::{Activation, Dense, Parameters, RmsPropConfig};
use crate::error::{Error, Result};
use crate::sequence::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR", alias = "lr")]
    Lr,
    #[serde(rename = "LSTM", alias = "lstm")]
    Lstm,
    #[serde(rename = "GRU", alias = "gru")]
    Gru,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lr, ModelKind::Lstm, ModelKind::Gru];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Lstm => "LSTM",
            ModelKind::Gru => "GRU",
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != ModelKind::Lr
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(ModelKind::Lr),
            "lstm" => Ok(ModelKind::Lstm),
            "gru" => Ok(ModelKind::Gru),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// How a flat sample maps onto timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceLayout {
    /// Step `t` is `x[t*d .. (t+1)*d]`.
    Contiguous,
    /// The flat vector holds `steps` blocks of `d - 1` values followed by one
    /// trailing scalar per step; step `t` is its block plus its scalar.
    TrailingScalars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub steps: usize,
    pub per_step_dim: usize,
    pub layout: SequenceLayout,
    pub hidden: [usize; 2],
    pub dropout: f64,
    pub n_classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Recurrent candidate / cell-output nonlinearity.
    pub activation: Activation,
    pub optimizer: RmsPropConfig,
    pub seed: u64,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 256];
pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const DEFAULT_BATCH: usize = 32;
pub const LR_EPOCHS: usize = 300;
pub const RNN_EPOCHS: usize = 20;

impl ModelSpec {
    /// Defaults for a classification task over fires of length `lw`.
    pub fn for_task(kind: ModelKind, task: Task, lw: usize, seed: u64) -> Self {
        Self {
            kind,
            steps: lw - 1,
            per_step_dim: task.per_step_dim(),
            layout: match task {
                Task::Binary => SequenceLayout::Contiguous,
                Task::Multiclass => SequenceLayout::TrailingScalars,
            },
            hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
            n_classes: task.n_classes(),
            epochs: if kind.is_recurrent() { RNN_EPOCHS } else { LR_EPOCHS },
            batch_size: DEFAULT_BATCH,
            activation: Activation::Relu,
            optimizer: RmsPropConfig::default(),
            seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.steps * self.per_step_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_classes < 2 {
            return bad(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if self.steps == 0 || self.per_step_dim == 0 {
            return bad("steps and per_step_dim must be positive".into());
        }
        if self.layout == SequenceLayout::TrailingScalars && self.per_step_dim < 2 {
            return bad("trailing-scalar layout needs per_step_dim >= 2".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Recurrent {
    Lstm(Lstm),
    Gru(Gru),
}

#[derive(Debug, Clone)]
pub enum RecurrentCache {
    Lstm(LstmCache),
    Gru(GruCache),
}

impl RecurrentCache {
    pub fn hidden(&self) -> &Array2<f64> {
        match self {
            RecurrentCache::Lstm(c) => &c.hidden,
            RecurrentCache::Gru(c) => &c.hidden,
        }
    }

    pub fn last_hidden(&self) -> ArrayView2<'_, f64> {
        match self {
            RecurrentCache::Lstm(c) => c.last_hidden(),
            RecurrentCache::Gru(c) => c.last_hidden(),
        }
    }
}

impl Recurrent {
    fn new<R: Rng>(kind: ModelKind, rng: &mut R, input: usize, units: usize, act: Activation) -> Self {
        match kind {
            ModelKind::Gru => Recurrent::Gru(Gru::new(rng, input, units, act)),
            _ => Recurrent::Lstm(Lstm::new(rng, input, units, act)),
        }
    }

    pub fn units(&self) -> usize {
        match self {
            Recurrent::Lstm(l) => l.units(),
            Recurrent::Gru(g) => g.units(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Recurrent::Lstm(l) => Recurrent::Lstm(l.zeros_like()),
            Recurrent::Gru(g) => Recurrent::Gru(g.zeros_like()),
        }
    }

    fn forward_seq(&self, xs: ArrayView2<'_, f64>, batch: usize) -> Result<RecurrentCache> {
        Ok(match self {
            Recurrent::Lstm(l) => RecurrentCache::Lstm(l.forward_seq(xs, batch)?),
            Recurrent::Gru(g) => RecurrentCache::Gru(g.forward_seq(xs, batch)?),
        })
    }

    fn backward_seq(&self, cache: &RecurrentCache, d_hidden: ArrayView2<'_, f64>, grad: &mut Recurrent) -> Array2<f64> {
        match (self, cache, grad) {
            (Recurrent::Lstm(l), RecurrentCache::Lstm(c), Recurrent::Lstm(g)) => l.backward_seq(c, d_hidden, g),
            (Recurrent::Gru(l), RecurrentCache::Gru(c), Recurrent::Gru(g)) => l.backward_seq(c, d_hidden, g),
            _ => unreachable!("cache and gradient always mirror the layer"),
        }
    }

    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        match self {
            Recurrent::Lstm(l) => l.tensors(),
            Recurrent::Gru(g) => g.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        match self {
            Recurrent::Lstm(l) => l.tensors_mut(),
            Recurrent::Gru(g) => g.tensors_mut(),
        }
    }
}

/// Trainable weights. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Logistic {
        output: Dense,
    },
    Recurrent {
        input: Dense,
        first: Recurrent,
        second: Recurrent,
        output: Dense,
    },
}

impl Network {
    pub fn zeros_like(&self) -> Self {
        match self {
            Network::Logistic { output } => Network::Logistic { output: output.zeros_like() },
            Network::Recurrent { input, first, second, output } => Network::Recurrent {
                input: input.zeros_like(),
                first: first.zeros_like(),
                second: second.zeros_like(),
                output: output.zeros_like(),
            },
        }
    }

    /// Tensor names in [`Parameters`] order.
    pub fn tensor_names(&self) -> Vec<String> {
        match self {
            Network::Logistic { .. } => vec!["output.weight".into(), "output.bias".into()],
            Network::Recurrent { .. } => [
                "input.weight",
                "input.bias",
                "first.w",
                "first.u",
                "first.b",
                "second.w",
                "second.u",
                "second.b",
                "output.weight",
                "output.bias",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl Parameters for Network {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        match self {
            Network::Logistic { output } => output.tensors(),
            Network::Recurrent { input, first, second, output } => {
                let mut v = input.tensors();
                v.extend(first.tensors());
                v.extend(second.tensors());
                v.extend(output.tensors());
                v
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        match self {
            Network::Logistic { output } => output.tensors_mut(),
            Network::Recurrent { input, first, second, output } => {
                let mut v = input.tensors_mut();
                v.extend(first.tensors_mut());
                v.extend(second.tensors_mut());
                v.extend(output.tensors_mut());
                v
            }
        }
    }
}

pub enum Mode<'a> {
    /// Dropout active, masks drawn from the given generator.
    Train(&'a mut ChaCha8Rng),
    Eval,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    pub input: Array2<f64>,
    pub projected: Option<Array2<f64>>,
    pub first: Option<RecurrentCache>,
    pub second: Option<RecurrentCache>,
    pub mask: Option<Array2<f64>>,
    pub head_input: Array2<f64>,
    pub scores: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub net: Network,
}

impl Model {
    /// Fresh weights drawn from `spec.seed`.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Self::with_rng(spec, &mut rng)
    }

    pub fn with_rng<R: Rng>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let net = match spec.kind {
            ModelKind::Lr => Network::Logistic {
                output: Dense::new(rng, spec.input_dim(), spec.n_classes, Activation::Sigmoid),
            },
            kind => {
                let d = spec.per_step_dim;
                let [h1, h2] = spec.hidden;
                Network::Recurrent {
                    input: Dense::new(rng, d, d, Activation::Linear),
                    first: Recurrent::new(kind, rng, d, h1, spec.activation),
                    second: Recurrent::new(kind, rng, h1, h2, spec.activation),
                    output: Dense::new(rng, h2, spec.n_classes, Activation::Sigmoid),
                }
            }
        };
        Ok(Self { spec, net })
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.spec.input_dim() {
            return Err(Error::shape(format!("input dimension {}", self.spec.input_dim()), x.ncols()));
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("empty batch"));
        }
        Ok(())
    }

    /// Step-major stacking `(steps * batch, per_step_dim)` of a flat batch.
    pub fn to_sequence(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (steps, d) = (self.spec.steps, self.spec.per_step_dim);
        let batch = x.nrows();
        let mut out = Array2::zeros((steps * batch, d));
        for t in 0..steps {
            let mut block = out.slice_mut(s![t * batch..(t + 1) * batch, ..]);
            match self.spec.layout {
                SequenceLayout::Contiguous => block.assign(&x.slice(s![.., t * d..(t + 1) * d])),
                SequenceLayout::TrailingScalars => {
                    let base = d - 1;
                    block.slice_mut(s![.., ..base]).assign(&x.slice(s![.., t * base..(t + 1) * base]));
                    block.column_mut(base).assign(&x.column(steps * base + t));
                }
            }
        }
        out
    }

    pub fn draw_mask(&self, rng: &mut ChaCha8Rng, batch: usize) -> Option<Array2<f64>> {
        let p = self.spec.dropout;
        if !self.spec.kind.is_recurrent() || p == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        Some(Array2::from_shape_simple_fn((batch, self.spec.hidden[1]), || {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        }))
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>, mode: Mode<'_>) -> Result<Array2<f64>> {
        let mask = match mode {
            Mode::Train(rng) => self.draw_mask(rng, x.nrows()),
            Mode::Eval => None,
        };
        Ok(self.forward_cached(x, mask)?.scores)
    }

    /// Forward pass with an explicit dropout mask (`None` = eval behaviour).
    pub fn forward_cached(&self, x: ArrayView2<'_, f64>, mask: Option<Array2<f64>>) -> Result<ForwardCache> {
        self.check_input(x)?;
        let batch = x.nrows();
        let cache = match &self.net {
            Network::Logistic { output } => ForwardCache {
                batch,
                input: x.to_owned(),
                projected: None,
                first: None,
                second: None,
                mask: None,
                scores: output.forward(x)?,
                head_input: x.to_owned(),
            },
            Network::Recurrent { input, first, second, output } => {
                let xs = self.to_sequence(x);
                let projected = input.forward(xs.view())?;
                let c1 = first.forward_seq(projected.view(), batch)?;
                let c2 = second.forward_seq(c1.hidden().view(), batch)?;
                let mut head_input = c2.last_hidden().to_owned();
                if let Some(m) = &mask {
                    if m.dim() != head_input.dim() {
                        return Err(Error::shape(format!("{:?} mask", head_input.dim()), format!("{:?}", m.dim())));
                    }
                    head_input *= m;
                }
                let scores = output.forward(head_input.view())?;
                ForwardCache {
                    batch,
                    input: xs,
                    projected: Some(projected),
                    first: Some(c1),
                    second: Some(c2),
                    mask,
                    head_input,
                    scores,
                }
            }
        };
        debug_assert!(cache.scores.iter().all(|v| v.is_finite()), "non-finite scores");
        Ok(cache)
    }

    /// Gradients of the loss with respect to every parameter, given
    /// `dL/dscores`.
    pub fn backward(&self, cache: &ForwardCache, d_scores: ArrayView2<'_, f64>) -> Network {
        let mut grad = self.net.zeros_like();
        match (&self.net, &mut grad) {
            (Network::Logistic { output }, Network::Logistic { output: g_out }) => {
                output.backward(cache.input.view(), cache.scores.view(), d_scores, g_out);
            }
            (
                Network::Recurrent { input, first, second, output },
                Network::Recurrent { input: g_in, first: g_first, second: g_second, output: g_out },
            ) => {
                let batch = cache.batch;
                let mut d_head = output.backward(cache.head_input.view(), cache.scores.view(), d_scores, g_out);
                if let Some(m) = &cache.mask {
                    d_head *= m;
                }
                let c1 = cache.first.as_ref().expect("recurrent cache");
                let c2 = cache.second.as_ref().expect("recurrent cache");
                let rows = c2.hidden().nrows();
                let mut d_h2 = Array2::zeros((rows, second.units()));
                d_h2.slice_mut(s![rows - batch.., ..]).assign(&d_head);
                let d_h1 = second.backward_seq(c2, d_h2.view(), g_second);
                let d_proj = first.backward_seq(c1, d_h1.view(), g_first);
                let projected = cache.projected.as_ref().expect("recurrent cache");
                input.backward(cache.input.view(), projected.view(), d_proj.view(), g_in);
            }
            _ => unreachable!("gradient network mirrors the model"),
        }
        grad
    }

    /// Batch MSE loss against one-hot targets and its parameter gradients.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        mask: Option<Array2<f64>>,
    ) -> Result<(f64, Network)> {
        let cache = self.forward_cached(x, mask)?;
        let (loss, d_scores) = mse_loss_batch(cache.scores.view(), targets)?;
        Ok((loss, self.backward(&cache, d_scores.view())))
    }

    pub fn loss(&self, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, mask: Option<Array2<f64>>) -> Result<f64> {
        let cache = self.forward_cached(x, mask)?;
        Ok(mse_loss_batch(cache.scores.view(), targets)?.0)
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let scores = self.forward(x, Mode::Eval)?;
        Ok(scores.rows().into_iter().map(|r| argmax(r.as_slice().expect("row"))).collect())
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Class index for one flat input vector.
pub fn predict(model: &Model, input: &[f64]) -> Result<usize> {
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row");
    Ok(model.predict_batch(x)?[0])
}

/// One-hot rows for zero-based class labels.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), n_classes));
    for (r, &l) in labels.iter().enumerate() {
        out[[r, l]] = 1.0;
    }
    out
}

/// Elementwise sum of two gradient networks, for tests and accumulation.
pub fn add_into(acc: &mut Network, other: &Network) {
    for (mut a, b) in acc.tensors_mut().into_iter().zip(other.tensors()) {
        Zip::from(&mut a).and(&b).for_each(|a, &b| *a += b);
    }
}
