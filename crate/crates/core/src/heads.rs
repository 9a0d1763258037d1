//! Classification heads over encoder hidden states: a linear layer on the
//! CLS vector, and stacked bidirectional LSTM / GRU layers pooled from the
//! last hidden state of each direction.

use serde::{Deserialize, Serialize};

use crate::encoder::{cast_linear, cast_param};
use crate::error::{Error, Result};
use crate::layers::{linear_layout, Linear};
use crate::numerics::kernels::{matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::ops::sigmoid;
use crate::numerics::{
    dropout, dropout_backward, DropoutMask, Module, ParamGroup, ParamInfo, Parameter, Real, Tensor,
};
use crate::rng::{self, derive_index};

pub const NUM_CLASSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Linear,
    Bilstm,
    Bigru,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Cls,
    LastHidden,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub kind: HeadKind,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub pooling: Pooling,
}

impl HeadConfig {
    pub fn linear() -> Self {
        HeadConfig {
            kind: HeadKind::Linear,
            hidden_size: 256,
            num_layers: 2,
            dropout: 0.2,
            pooling: Pooling::Cls,
        }
    }

    /// hidden 256, 2 layers, dropout 0.2.
    pub fn bilstm() -> Self {
        HeadConfig {
            kind: HeadKind::Bilstm,
            pooling: Pooling::LastHidden,
            ..HeadConfig::linear()
        }
    }

    pub fn bigru() -> Self {
        HeadConfig {
            kind: HeadKind::Bigru,
            pooling: Pooling::LastHidden,
            ..HeadConfig::linear()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::Config("head hidden_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "head dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        match (self.kind, self.pooling) {
            (HeadKind::Linear, Pooling::Cls) => Ok(()),
            (HeadKind::Linear, _) => Err(Error::Config("linear head requires cls pooling".into())),
            (_, Pooling::LastHidden) if self.num_layers >= 1 => Ok(()),
            (_, Pooling::LastHidden) => {
                Err(Error::Config("recurrent head needs at least one layer".into()))
            }
            (_, Pooling::Cls) => Err(Error::Config(
                "recurrent heads pool the last hidden state".into(),
            )),
        }
    }

    fn cell(&self) -> Option<CellKind> {
        match self.kind {
            HeadKind::Linear => None,
            HeadKind::Bilstm => Some(CellKind::Lstm),
            HeadKind::Bigru => Some(CellKind::Gru),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

/// Weights of one recurrent cell: `W: [G·h × in]`, `U: [G·h × h]`, one bias
/// `b: [G·h]`. Gate order is i, f, g, o for LSTM and z, r, n for GRU.
#[derive(Clone, Debug)]
pub struct RecurrentCellParams<T> {
    pub kind: CellKind,
    pub w: Parameter<T>,
    pub u: Parameter<T>,
    pub b: Parameter<T>,
}

impl<T: Real> RecurrentCellParams<T> {
    pub fn new(prefix: &str, kind: CellKind, input: usize, hidden: usize, rng: &mut rng::Rng) -> Self {
        let g = kind.gates() * hidden;
        RecurrentCellParams {
            kind,
            w: Parameter::new(
                format!("{prefix}.w"),
                Tensor::uniform(&[g, input], 1.0 / (input as f64).sqrt(), rng),
                ParamGroup::Head,
            ),
            u: Parameter::new(
                format!("{prefix}.u"),
                Tensor::uniform(&[g, hidden], 1.0 / (hidden as f64).sqrt(), rng),
                ParamGroup::Head,
            ),
            b: Parameter::new(format!("{prefix}.b"), Tensor::zeros(&[g]), ParamGroup::Head),
        }
    }

    pub fn zeros(kind: CellKind, input: usize, hidden: usize) -> Self {
        let g = kind.gates() * hidden;
        RecurrentCellParams {
            kind,
            w: Parameter::new("w", Tensor::zeros(&[g, input]), ParamGroup::Head),
            u: Parameter::new("u", Tensor::zeros(&[g, hidden]), ParamGroup::Head),
            b: Parameter::new("b", Tensor::zeros(&[g]), ParamGroup::Head),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.value.shape()[1]
    }

    pub fn input(&self) -> usize {
        self.w.value.shape()[1]
    }

    /// `Wx + Uh + b` (all gates), with `U` applied only to the first
    /// `u_gates` gates (GRU applies its candidate `U` separately).
    fn preact(&self, x: &[T], h: &[T], u_gates: usize) -> Vec<T> {
        let hd = self.hidden();
        let mut a = self.b.value.data().to_vec();
        matvec_acc(self.w.value.data(), x, &mut a);
        matvec_acc(&self.u.value.data()[..u_gates * hd * hd], h, &mut a[..u_gates * hd]);
        a
    }

    pub(crate) fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        f(&self.w);
        f(&self.u);
        f(&self.b);
    }

    pub(crate) fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.w);
        f(&mut self.u);
        f(&mut self.b);
    }

    pub(crate) fn cast<U: Real>(&self) -> RecurrentCellParams<U> {
        RecurrentCellParams {
            kind: self.kind,
            w: cast_param(&self.w),
            u: cast_param(&self.u),
            b: cast_param(&self.b),
        }
    }
}

pub fn cell_layout(prefix: &str, kind: CellKind, input: usize, hidden: usize) -> Vec<ParamInfo> {
    let g = kind.gates() * hidden;
    vec![
        ParamInfo::new(format!("{prefix}.w"), &[g, input], ParamGroup::Head),
        ParamInfo::new(format!("{prefix}.u"), &[g, hidden], ParamGroup::Head),
        ParamInfo::new(format!("{prefix}.b"), &[g], ParamGroup::Head),
    ]
}


/// Values saved by one recurrent step for backpropagation.
#[derive(Clone, Debug)]
pub struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// LSTM: i, f, g, o activations. GRU: z, r, n activations.
    gates: Vec<T>,
    /// LSTM: tanh(c). GRU: U_n·h_prev.
    aux: Vec<T>,
}

/// Hidden and cell state. GRU leaves `c` empty.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> CellState<T> {
    pub fn zeros(kind: CellKind, hidden: usize) -> Self {
        CellState {
            h: vec![T::zero(); hidden],
            c: match kind {
                CellKind::Lstm => vec![T::zero(); hidden],
                CellKind::Gru => Vec::new(),
            },
        }
    }
}

fn lstm_step<T: Real>(p: &RecurrentCellParams<T>, x: &[T], h_prev: &[T], c_prev: &[T]) -> (CellState<T>, StepCache<T>) {
    let hd = p.hidden();
    let mut a = p.preact(x, h_prev, 4);
    for j in 0..hd {
        a[j] = sigmoid(a[j]);
        a[hd + j] = sigmoid(a[hd + j]);
        a[2 * hd + j] = a[2 * hd + j].tanh();
        a[3 * hd + j] = sigmoid(a[3 * hd + j]);
    }
    let mut c = vec![T::zero(); hd];
    let mut tc = vec![T::zero(); hd];
    let mut h = vec![T::zero(); hd];
    for j in 0..hd {
        c[j] = a[hd + j] * c_prev[j] + a[j] * a[2 * hd + j];
        tc[j] = c[j].tanh();
        h[j] = a[3 * hd + j] * tc[j];
    }
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: a,
        aux: tc,
    };
    (CellState { h, c }, cache)
}

fn gru_step<T: Real>(p: &RecurrentCellParams<T>, x: &[T], h_prev: &[T]) -> (CellState<T>, StepCache<T>) {
    let hd = p.hidden();
    let mut a = p.preact(x, h_prev, 2);
    let mut un = vec![T::zero(); hd];
    matvec_acc(&p.u.value.data()[2 * hd * hd..], h_prev, &mut un);
    let mut h = vec![T::zero(); hd];
    for j in 0..hd {
        let z = sigmoid(a[j]);
        let r = sigmoid(a[hd + j]);
        let n = (a[2 * hd + j] + r * un[j]).tanh();
        a[j] = z;
        a[hd + j] = r;
        a[2 * hd + j] = n;
        h[j] = (T::one() - z) * n + z * h_prev[j];
    }
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: Vec::new(),
        gates: a,
        aux: un,
    };
    (CellState { h, c: Vec::new() }, cache)
}

pub(crate) fn cell_step<T: Real>(p: &RecurrentCellParams<T>, x: &[T], s: &CellState<T>) -> (CellState<T>, StepCache<T>) {
    match p.kind {
        CellKind::Lstm => lstm_step(p, x, &s.h, &s.c),
        CellKind::Gru => gru_step(p, x, &s.h),
    }
}

/// Accumulates weight gradients and returns `(dx, dh_prev, dc_prev)`.
pub(crate) fn cell_step_backward<T: Real>(
    p: &mut RecurrentCellParams<T>,
    cache: &StepCache<T>,
    dh: &[T],
    dc: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let hd = p.hidden();
    let g = &cache.gates;
    let one = T::one();
    // da_w drives W and b; da_u drives U (differs for the GRU candidate).
    let mut da_w = vec![T::zero(); p.kind.gates() * hd];
    let mut dc_prev = Vec::new();
    let mut dh_prev = vec![T::zero(); hd];
    let da_u = match p.kind {
        CellKind::Lstm => {
            dc_prev = vec![T::zero(); hd];
            for j in 0..hd {
                let (i, f, gg, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                let tc = cache.aux[j];
                let dct = dc[j] + dh[j] * o * (one - tc * tc);
                da_w[j] = dct * gg * i * (one - i);
                da_w[hd + j] = dct * cache.c_prev[j] * f * (one - f);
                da_w[2 * hd + j] = dct * i * (one - gg * gg);
                da_w[3 * hd + j] = dh[j] * tc * o * (one - o);
                dc_prev[j] = dct * f;
            }
            da_w.clone()
        }
        CellKind::Gru => {
            let mut da_u = vec![T::zero(); 3 * hd];
            for j in 0..hd {
                let (z, r, n) = (g[j], g[hd + j], g[2 * hd + j]);
                let dn = dh[j] * (one - z);
                let dz = dh[j] * (cache.h_prev[j] - n);
                dh_prev[j] = dh[j] * z;
                let dan = dn * (one - n * n);
                let dr = dan * cache.aux[j];
                da_w[j] = dz * z * (one - z);
                da_w[hd + j] = dr * r * (one - r);
                da_w[2 * hd + j] = dan;
                da_u[j] = da_w[j];
                da_u[hd + j] = da_w[hd + j];
                da_u[2 * hd + j] = dan * r;
            }
            da_u
        }
    };
    if let Some(gw) = p.w.grad_mut() {
        outer_acc(&da_w, &cache.x, gw);
    }
    if let Some(gu) = p.u.grad_mut() {
        outer_acc(&da_u, &cache.h_prev, gu);
    }
    if let Some(gb) = p.b.grad_mut() {
        for (b, &d) in gb.iter_mut().zip(&da_w) {
            *b += d;
        }
    }
    let mut dx = vec![T::zero(); cache.x.len()];
    matvec_t_acc(p.w.value.data(), &da_w, &mut dx);
    matvec_t_acc(p.u.value.data(), &da_u, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_cell<T: Real>(x: &[T], h_prev: &[T], c_prev: &[T], p: &RecurrentCellParams<T>) -> (Vec<T>, Vec<T>) {
    assert_eq!(p.kind, CellKind::Lstm);
    let (s, _) = lstm_step(p, x, h_prev, c_prev);
    (s.h, s.c)
}

/// Backward of [`lstm_cell`]: accumulates into `p`'s gradients and returns
/// `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    p: &mut RecurrentCellParams<T>,
    dh: &[T],
    dc: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (_, cache) = lstm_step(p, x, h_prev, c_prev);
    cell_step_backward(p, &cache, dh, dc)
}

/// One GRU step: returns `h`.
pub fn gru_cell<T: Real>(x: &[T], h_prev: &[T], p: &RecurrentCellParams<T>) -> Vec<T> {
    assert_eq!(p.kind, CellKind::Gru);
    gru_step(p, x, h_prev).0.h
}

/// Backward of [`gru_cell`]: returns `(dx, dh_prev)`.
pub fn gru_cell_backward<T: Real>(
    x: &[T],
    h_prev: &[T],
    p: &mut RecurrentCellParams<T>,
    dh: &[T],
) -> (Vec<T>, Vec<T>) {
    let (_, cache) = gru_step(p, x, h_prev);
    let (dx, dhp, _) = cell_step_backward(p, &cache, dh, &[]);
    (dx, dhp)
}

/// Forward and backward cells of one bidirectional layer.
#[derive(Clone, Debug)]
pub struct BiLayer<T> {
    pub fwd: RecurrentCellParams<T>,
    pub bwd: RecurrentCellParams<T>,
}

#[derive(Clone, Debug)]
pub struct RecurrentHead<T> {
    pub config: HeadConfig,
    pub layers: Vec<BiLayer<T>>,
    pub classifier: Linear<T>,
}

#[derive(Clone, Debug)]
pub struct LinearHead<T> {
    pub config: HeadConfig,
    pub classifier: Linear<T>,
}

#[derive(Clone, Debug)]
pub enum Head<T> {
    Linear(LinearHead<T>),
    Recurrent(RecurrentHead<T>),
}

/// Trainable parameter count of a stacked bidirectional head, by formula.
pub fn recurrent_head_param_count(kind: CellKind, input: usize, hidden: usize, layers: usize) -> usize {
    let g = kind.gates();
    let mut total = 0;
    let mut inp = input;
    for _ in 0..layers {
        total += 2 * (g * hidden * inp + g * hidden * hidden + g * hidden);
        inp = 2 * hidden;
    }
    total + 2 * hidden * NUM_CLASSES + NUM_CLASSES
}

/// Everything the head backward pass needs from its forward pass.
#[derive(Clone, Debug)]
pub struct HeadCache<T> {
    seq_len: usize,
    real_len: usize,
    /// Input of each recurrent layer, `[n × in]` (after inter-layer dropout).
    inputs: Vec<Tensor<T>>,
    /// Dropout applied to each layer's input (None for the first layer).
    input_masks: Vec<Option<DropoutMask<T>>>,
    fwd_steps: Vec<Vec<StepCache<T>>>,
    bwd_steps: Vec<Vec<StepCache<T>>>,
    pooled: Tensor<T>,
    pooled_mask: Option<DropoutMask<T>>,
    pooled_dropped: Tensor<T>,
}

impl<T> HeadCache<T> {
    pub fn pooled(&self) -> &Tensor<T> {
        &self.pooled
    }
}

fn real_length(mask: &[u8]) -> Result<usize> {
    let n = mask.iter().take_while(|&&m| m == 1).count();
    if mask[n..].iter().any(|&m| m != 0) {
        return Err(Error::Input("PAD positions must form a suffix".into()));
    }
    if n == 0 {
        return Err(Error::Input("sequence has no real tokens".into()));
    }
    Ok(n)
}

/// Dropout noise for the head: `training` plus a per-call seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DropoutCtx {
    pub training: bool,
    pub seed: u64,
}

impl DropoutCtx {
    pub const EVAL: DropoutCtx = DropoutCtx {
        training: false,
        seed: 0,
    };
}

impl<T: Real> Head<T> {
    /// Builds a head reading `input_dim`-wide hidden states.
    pub fn new(config: &HeadConfig, input_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::rng(seed);
        match config.cell() {
            None => Ok(Head::Linear(LinearHead {
                config: config.clone(),
                classifier: Linear::new("head.classifier", input_dim, NUM_CLASSES, ParamGroup::Head, &mut r),
            })),
            Some(kind) => {
                let h = config.hidden_size;
                let mut layers = Vec::with_capacity(config.num_layers);
                let mut inp = input_dim;
                for l in 0..config.num_layers {
                    layers.push(BiLayer {
                        fwd: RecurrentCellParams::new(&format!("head.layer{l}.fwd"), kind, inp, h, &mut r),
                        bwd: RecurrentCellParams::new(&format!("head.layer{l}.bwd"), kind, inp, h, &mut r),
                    });
                    inp = 2 * h;
                }
                Ok(Head::Recurrent(RecurrentHead {
                    config: config.clone(),
                    layers,
                    classifier: Linear::new("head.classifier", 2 * h, NUM_CLASSES, ParamGroup::Head, &mut r),
                }))
            }
        }
    }

    pub fn layout(config: &HeadConfig, input_dim: usize) -> Vec<ParamInfo> {
        match config.cell() {
            None => linear_layout("head.classifier", input_dim, NUM_CLASSES, ParamGroup::Head),
            Some(kind) => {
                let h = config.hidden_size;
                let mut out = Vec::new();
                let mut inp = input_dim;
                for l in 0..config.num_layers {
                    out.extend(cell_layout(&format!("head.layer{l}.fwd"), kind, inp, h));
                    out.extend(cell_layout(&format!("head.layer{l}.bwd"), kind, inp, h));
                    inp = 2 * h;
                }
                out.extend(linear_layout("head.classifier", 2 * h, NUM_CLASSES, ParamGroup::Head));
                out
            }
        }
    }

    pub fn config(&self) -> &HeadConfig {
        match self {
            Head::Linear(h) => &h.config,
            Head::Recurrent(h) => &h.config,
        }
    }

    /// Width of the hidden states this head reads.
    pub fn input_dim(&self) -> usize {
        match self {
            Head::Linear(h) => h.classifier.input_dim(),
            Head::Recurrent(h) => h.layers[0].fwd.input(),
        }
    }

    pub fn classifier(&self) -> &Linear<T> {
        match self {
            Head::Linear(h) => &h.classifier,
            Head::Recurrent(h) => &h.classifier,
        }
    }

    pub fn classifier_mut(&mut self) -> &mut Linear<T> {
        match self {
            Head::Linear(h) => &mut h.classifier,
            Head::Recurrent(h) => &mut h.classifier,
        }
    }

    /// Logits `[1 × 2]` for hidden states `hidden: [T × d]`.
    pub fn forward(&self, hidden: &Tensor<T>, mask: &[u8], ctx: DropoutCtx) -> Result<(Tensor<T>, HeadCache<T>)> {
        if hidden.rows() != mask.len() {
            return Err(Error::Shape {
                op: "head_forward",
                left: hidden.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let n = real_length(mask)?;
        let p = self.config().dropout;
        let mut cache = HeadCache {
            seq_len: mask.len(),
            real_len: n,
            inputs: Vec::new(),
            input_masks: Vec::new(),
            fwd_steps: Vec::new(),
            bwd_steps: Vec::new(),
            pooled: Tensor::zeros(&[0]),
            pooled_mask: None,
            pooled_dropped: Tensor::zeros(&[0]),
        };
        let pooled = match self {
            Head::Linear(_) => Tensor::from_vec(&[1, hidden.cols()], hidden.row(0).to_vec())?,
            Head::Recurrent(head) => {
                let h = head.config.hidden_size;
                let mut x = Tensor::from_vec(&[n, hidden.cols()], hidden.data()[..n * hidden.cols()].to_vec())?;
                for (l, layer) in head.layers.iter().enumerate() {
                    let input_mask = if l > 0 {
                        let (dropped, m) = dropout(&x, p, derive_index(ctx.seed, l as u64), ctx.training);
                        x = dropped;
                        m
                    } else {
                        None
                    };
                    let mut out = Tensor::zeros(&[n, 2 * h]);
                    let mut fs = Vec::with_capacity(n);
                    let mut state = CellState::zeros(layer.fwd.kind, h);
                    for t in 0..n {
                        let (s, c) = cell_step(&layer.fwd, x.row(t), &state);
                        out.row_mut(t)[..h].copy_from_slice(&s.h);
                        fs.push(c);
                        state = s;
                    }
                    let mut bs = Vec::with_capacity(n);
                    let mut state = CellState::zeros(layer.bwd.kind, h);
                    for t in (0..n).rev() {
                        let (s, c) = cell_step(&layer.bwd, x.row(t), &state);
                        out.row_mut(t)[h..].copy_from_slice(&s.h);
                        bs.push(c);
                        state = s;
                    }
                    cache.inputs.push(x);
                    cache.input_masks.push(input_mask);
                    cache.fwd_steps.push(fs);
                    cache.bwd_steps.push(bs);
                    x = out;
                }
                let mut pooled = vec![T::zero(); 2 * h];
                pooled[..h].copy_from_slice(&x.row(n - 1)[..h]);
                pooled[h..].copy_from_slice(&x.row(0)[h..]);
                Tensor::from_vec(&[1, 2 * h], pooled)?
            }
        };
        let (dropped, pmask) = dropout(&pooled, p, derive_index(ctx.seed, u64::MAX), ctx.training);
        let logits = self.classifier().forward(&dropped);
        cache.pooled = pooled;
        cache.pooled_mask = pmask;
        cache.pooled_dropped = dropped;
        Ok((logits, cache))
    }

    /// Logits without a cache, dropout off.
    pub fn logits(&self, hidden: &Tensor<T>, mask: &[u8]) -> Result<Tensor<T>> {
        self.forward(hidden, mask, DropoutCtx::EVAL).map(|(l, _)| l)
    }

    /// Accumulates gradients from `dlogits: [1 × 2]` and returns `dH: [T × d]`
    /// (zero on PAD rows).
    pub fn backward(&mut self, cache: &HeadCache<T>, dlogits: &Tensor<T>) -> Tensor<T> {
        let dpd = self
            .classifier_mut()
            .backward(&cache.pooled_dropped, dlogits, true)
            .expect("dx");
        let dpooled = dropout_backward(cache.pooled_mask.as_ref(), &dpd);
        match self {
            Head::Linear(_) => {
                let d = dpooled.cols();
                let mut dh = Tensor::zeros(&[cache.seq_len, d]);
                dh.row_mut(0).copy_from_slice(dpooled.data());
                dh
            }
            Head::Recurrent(head) => {
                let h = head.config.hidden_size;
                let n = cache.real_len;
                let mut dout = Tensor::zeros(&[n, 2 * h]);
                dout.row_mut(n - 1)[..h].copy_from_slice(&dpooled.data()[..h]);
                dout.row_mut(0)[h..].copy_from_slice(&dpooled.data()[h..]);
                for l in (0..head.layers.len()).rev() {
                    let layer = &mut head.layers[l];
                    let in_dim = cache.inputs[l].cols();
                    let mut dx = Tensor::zeros(&[n, in_dim]);
                    // forward direction ran t = 0..n; unroll in reverse.
                    let mut dh_next = vec![T::zero(); h];
                    let mut dc_next = vec![T::zero(); if layer.fwd.kind == CellKind::Lstm { h } else { 0 }];
                    for t in (0..n).rev() {
                        let mut dh_t = dout.row(t)[..h].to_vec();
                        for (a, &b) in dh_t.iter_mut().zip(&dh_next) {
                            *a += b;
                        }
                        let (dxt, dhp, dcp) = cell_step_backward(&mut layer.fwd, &cache.fwd_steps[l][t], &dh_t, &dc_next);
                        for (a, &b) in dx.row_mut(t).iter_mut().zip(&dxt) {
                            *a += b;
                        }
                        dh_next = dhp;
                        dc_next = dcp;
                    }
                    // backward direction ran t = n-1..0; step k handled t = n-1-k.
                    let mut dh_next = vec![T::zero(); h];
                    let mut dc_next = vec![T::zero(); if layer.bwd.kind == CellKind::Lstm { h } else { 0 }];
                    for k in (0..n).rev() {
                        let t = n - 1 - k;
                        let mut dh_t = dout.row(t)[h..].to_vec();
                        for (a, &b) in dh_t.iter_mut().zip(&dh_next) {
                            *a += b;
                        }
                        let (dxt, dhp, dcp) = cell_step_backward(&mut layer.bwd, &cache.bwd_steps[l][k], &dh_t, &dc_next);
                        for (a, &b) in dx.row_mut(t).iter_mut().zip(&dxt) {
                            *a += b;
                        }
                        dh_next = dhp;
                        dc_next = dcp;
                    }
                    dout = dropout_backward(cache.input_masks[l].as_ref(), &dx);
                }
                let d = dout.cols();
                let mut dh = Tensor::zeros(&[cache.seq_len, d]);
                dh.data_mut()[..n * d].copy_from_slice(dout.data());
                dh
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Head<U> {
        match self {
            Head::Linear(h) => Head::Linear(LinearHead {
                config: h.config.clone(),
                classifier: cast_linear(&h.classifier),
            }),
            Head::Recurrent(h) => Head::Recurrent(RecurrentHead {
                config: h.config.clone(),
                layers: h
                    .layers
                    .iter()
                    .map(|l| BiLayer {
                        fwd: l.fwd.cast(),
                        bwd: l.bwd.cast(),
                    })
                    .collect(),
                classifier: cast_linear(&h.classifier),
            }),
        }
    }
}

impl<T: Real> Module<T> for Head<T> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        if let Head::Recurrent(h) = self {
            for l in &h.layers {
                l.fwd.visit(f);
                l.bwd.visit(f);
            }
        }
        self.classifier().visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        if let Head::Recurrent(h) = self {
            for l in &mut h.layers {
                l.fwd.visit_mut(f);
                l.bwd.visit_mut(f);
            }
        }
        self.classifier_mut().visit_mut(f);
    }
}
