//! Miniature post-norm transformer encoder with learned positions,
//! per-layer freezing, optional low-rank adapters on the attention
//! projections and optional sliding-window (or causal) attention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{linear_layout, norm_layout, LayerNorm, Linear};
use crate::numerics::kernels::{add_into, mm_nn, mm_nt, mm_tn};
use crate::numerics::{
    Activation, LayerNormCache, Module, ParamGroup, ParamInfo, Parameter, Real, Tensor,
};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    /// 0 = full attention; otherwise an odd window width.
    #[serde(default)]
    pub attention_window: usize,
    /// Mask out future positions (language-model use).
    #[serde(default)]
    pub causal: bool,
}

impl EncoderConfig {
    /// RoBERTa-base sized; used for parameter accounting.
    pub fn base() -> Self {
        EncoderConfig {
            num_layers: 12,
            model_dim: 768,
            num_heads: 12,
            ffn_dim: 3072,
            vocab_size: 50_265,
            max_positions: 514,
            attention_window: 0,
            causal: false,
        }
    }

    /// Small enough to train on a laptop CPU in seconds.
    pub fn desk() -> Self {
        EncoderConfig {
            num_layers: 2,
            model_dim: 32,
            num_heads: 4,
            ffn_dim: 64,
            vocab_size: 1000,
            max_positions: 514,
            attention_window: 0,
            causal: false,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || !self.model_dim.is_multiple_of(self.num_heads) {
            return Err(Error::Config(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if self.attention_window != 0 && self.attention_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "attention_window must be 0 or odd, got {}",
                self.attention_window
            )));
        }
        if self.vocab_size == 0 || self.max_positions == 0 || self.model_dim == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Attention projection an adapter can target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttnProj {
    Q,
    K,
    V,
    O,
}

impl AttnProj {
    pub const ALL: [AttnProj; 4] = [AttnProj::Q, AttnProj::K, AttnProj::V, AttnProj::O];

    fn name(self) -> &'static str {
        match self {
            AttnProj::Q => "q",
            AttnProj::K => "k",
            AttnProj::V => "v",
            AttnProj::O => "o",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub targets: Vec<AttnProj>,
}

impl LoraConfig {
    /// `{Q, V}` targets with `alpha = rank`.
    pub fn with_rank(rank: usize) -> Self {
        LoraConfig {
            rank,
            alpha: rank as f64,
            targets: vec![AttnProj::Q, AttnProj::V],
        }
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("LoRA rank must be at least 1".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("LoRA targets must be non-empty".into()));
        }
        Ok(())
    }

    fn targets(&self, p: AttnProj) -> bool {
        self.targets.contains(&p)
    }
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig::with_rank(20)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreezeMode {
    AllFrozen,
    AllTrainable,
    TopKUnfrozen { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeSpec {
    pub mode: FreezeMode,
    pub embeddings_trainable: bool,
}

impl FreezeSpec {
    pub fn all_frozen() -> Self {
        FreezeSpec {
            mode: FreezeMode::AllFrozen,
            embeddings_trainable: false,
        }
    }

    pub fn all_trainable() -> Self {
        FreezeSpec {
            mode: FreezeMode::AllTrainable,
            embeddings_trainable: true,
        }
    }

    /// Top `k` layers trainable; embeddings frozen.
    pub fn top_k_unfrozen(k: usize) -> Self {
        FreezeSpec {
            mode: FreezeMode::TopKUnfrozen { k },
            embeddings_trainable: false,
        }
    }

    fn layer_frozen(&self, layer: usize, num_layers: usize) -> bool {
        match self.mode {
            FreezeMode::AllFrozen => true,
            FreezeMode::AllTrainable => false,
            FreezeMode::TopKUnfrozen { k } => layer + k < num_layers,
        }
    }

    pub fn validate(&self, num_layers: usize) -> Result<()> {
        match self.mode {
            FreezeMode::TopKUnfrozen { k } if k > num_layers => Err(Error::Config(format!(
                "cannot unfreeze top {k} layers of a {num_layers}-layer encoder"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnMask<'a> {
    /// 1 for real keys, 0 for PAD.
    pub key_mask: &'a [u8],
    pub window: usize,
    pub causal: bool,
}

impl AttnMask<'_> {
    #[inline]
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        if self.key_mask[j] == 0 {
            return false;
        }
        if self.causal && j > i {
            return false;
        }
        if self.window > 0 {
            let half = (self.window - 1) / 2;
            if i.abs_diff(j) > half {
                return false;
            }
        }
        true
    }
}

/// Scaled dot-product attention for one head. `window = 0` is full
/// attention; otherwise position `i` sees keys within `(window − 1)/2`.
pub fn attention<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    key_mask: &[u8],
    window: usize,
) -> Result<Tensor<T>> {
    if q.shape() != k.shape() || k.rows() != v.rows() || key_mask.len() != k.rows() {
        return Err(Error::Shape {
            op: "attention",
            left: q.shape().to_vec(),
            right: k.shape().to_vec(),
        });
    }
    if window != 0 && window.is_multiple_of(2) {
        return Err(Error::Config(format!("attention window must be odd, got {window}")));
    }
    let mask = AttnMask {
        key_mask,
        window,
        causal: false,
    };
    Ok(attention_forward(q, k, v, &mask).0)
}

/// Returns the output and the attention probabilities `[T × T]`.
pub(crate) fn attention_forward<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    mask: &AttnMask<'_>,
) -> (Tensor<T>, Tensor<T>) {
    let t = q.rows();
    let dh = q.cols();
    let dv = v.cols();
    let scale = T::one() / T::lit(dh as f64).sqrt();
    let mut probs = Tensor::zeros(&[t, t]);
    let mut out = Tensor::zeros(&[t, dv]);
    for i in 0..t {
        let qi = q.row(i);
        let prow = probs.row_mut(i);
        let mut max = T::neg_infinity();
        for j in 0..t {
            if mask.allowed(i, j) {
                let s = crate::numerics::kernels::dot(qi, k.row(j)) * scale;
                prow[j] = s;
                if s > max {
                    max = s;
                }
            }
        }
        if max == T::neg_infinity() {
            continue;
        }
        let mut sum = T::zero();
        for j in 0..t {
            if mask.allowed(i, j) {
                let e = (prow[j] - max).exp();
                prow[j] = e;
                sum += e;
            }
        }
        for j in 0..t {
            if mask.allowed(i, j) {
                prow[j] /= sum;
            }
        }
        let orow = out.row_mut(i);
        for j in 0..t {
            let p = prow[j];
            if p != T::zero() {
                for (o, &vv) in orow.iter_mut().zip(v.row(j)) {
                    *o += p * vv;
                }
            }
        }
    }
    (out, probs)
}

/// Returns `(dq, dk, dv)`.
pub(crate) fn attention_backward<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    probs: &Tensor<T>,
    dout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let t = q.rows();
    let dh = q.cols();
    let dvd = v.cols();
    let scale = T::one() / T::lit(dh as f64).sqrt();
    // dV = Pᵀ dO
    let mut dv = Tensor::zeros(&[t, dvd]);
    mm_tn(probs.data(), dout.data(), dv.data_mut(), t, t, dvd);
    // dP = dO Vᵀ
    let mut dp = Tensor::zeros(&[t, t]);
    mm_nt(dout.data(), v.data(), dp.data_mut(), t, dvd, t);
    // dS = P ⊙ (dP − rowsum(P ⊙ dP)), scaled
    let mut ds = Tensor::zeros(&[t, t]);
    for i in 0..t {
        let p = probs.row(i);
        let dpr = dp.row(i);
        let inner: T = p.iter().zip(dpr).map(|(&a, &b)| a * b).sum();
        let dsr = ds.row_mut(i);
        for j in 0..t {
            dsr[j] = p[j] * (dpr[j] - inner) * scale;
        }
    }
    let mut dq = Tensor::zeros(&[t, dh]);
    mm_nn(ds.data(), k.data(), dq.data_mut(), t, t, dh);
    let mut dk = Tensor::zeros(&[t, dh]);
    mm_tn(ds.data(), q.data(), dk.data_mut(), t, t, dh);
    (dq, dk, dv)
}

/// Low-rank update `(α/r)·B(Ax)` with `A: [r × in]`, `B: [out × r]`.
#[derive(Clone, Debug)]
pub struct LoraAdapter<T> {
    pub a: Parameter<T>,
    pub b: Parameter<T>,
    pub scale: T,
}

/// An attention projection, optionally adapted.
#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub base: Linear<T>,
    pub lora: Option<LoraAdapter<T>>,
}

#[derive(Clone, Debug)]
struct ProjCache<T> {
    /// `x·Aᵀ` when an adapter is present.
    ax: Option<Tensor<T>>,
}

impl<T: Real> Projection<T> {
    fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, ProjCache<T>) {
        let mut y = self.base.forward(x);
        let Some(l) = &self.lora else {
            return (y, ProjCache { ax: None });
        };
        let (n, i) = (x.rows(), x.cols());
        let r = l.a.value.shape()[0];
        let o = y.cols();
        let mut ax = Tensor::zeros(&[n, r]);
        mm_nt(x.data(), l.a.value.data(), ax.data_mut(), n, i, r);
        let mut bax = Tensor::zeros(&[n, o]);
        mm_nt(ax.data(), l.b.value.data(), bax.data_mut(), n, r, o);
        for (yv, &d) in y.data_mut().iter_mut().zip(bax.data()) {
            *yv += l.scale * d;
        }
        (y, ProjCache { ax: Some(ax) })
    }

    fn backward(
        &mut self,
        x: &Tensor<T>,
        cache: &ProjCache<T>,
        dy: &Tensor<T>,
        need_dx: bool,
    ) -> Option<Tensor<T>> {
        let mut dx = self.base.backward(x, dy, need_dx);
        let Some(l) = &mut self.lora else { return dx };
        let ax = cache.ax.as_ref().expect("adapter cache");
        let (n, i, o) = (x.rows(), x.cols(), dy.cols());
        let r = l.a.value.shape()[0];
        let dys = dy.map(|v| v * l.scale);
        if let Some(gb) = l.b.grad_mut() {
            mm_tn(dys.data(), ax.data(), gb, o, n, r);
        }
        if l.a.trainable() || need_dx {
            let mut dax = Tensor::zeros(&[n, r]);
            mm_nn(dys.data(), l.b.value.data(), dax.data_mut(), n, o, r);
            if let Some(ga) = l.a.grad_mut() {
                mm_tn(dax.data(), x.data(), ga, r, n, i);
            }
            if let Some(dx) = dx.as_mut() {
                mm_nn(dax.data(), l.a.value.data(), dx.data_mut(), n, r, i);
            }
        }
        dx
    }

    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        self.base.visit(f);
        if let Some(l) = &self.lora {
            f(&l.a);
            f(&l.b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        self.base.visit_mut(f);
        if let Some(l) = &mut self.lora {
            f(&mut l.a);
            f(&mut l.b);
        }
    }
}

#[derive(Clone, Debug)]
pub struct EncoderLayer<T> {
    pub q: Projection<T>,
    pub k: Projection<T>,
    pub v: Projection<T>,
    pub o: Projection<T>,
    pub attn_norm: LayerNorm<T>,
    pub ffn_in: Linear<T>,
    pub ffn_out: Linear<T>,
    pub ffn_norm: LayerNorm<T>,
}

#[derive(Clone, Debug)]
struct LayerCache<T> {
    x: Tensor<T>,
    q: Tensor<T>,
    k: Tensor<T>,
    v: Tensor<T>,
    qc: ProjCache<T>,
    kc: ProjCache<T>,
    vc: ProjCache<T>,
    oc: ProjCache<T>,
    probs: Vec<Tensor<T>>,
    ctx: Tensor<T>,
    ln1: LayerNormCache<T>,
    h1: Tensor<T>,
    ffn_pre: Tensor<T>,
    ffn_act: Tensor<T>,
    ln2: LayerNormCache<T>,
}

fn head_cols<T: Real>(x: &Tensor<T>, head: usize, dh: usize) -> Tensor<T> {
    let t = x.rows();
    let mut out = Tensor::zeros(&[t, dh]);
    for r in 0..t {
        out.row_mut(r)
            .copy_from_slice(&x.row(r)[head * dh..(head + 1) * dh]);
    }
    out
}

fn put_head_cols<T: Real>(dst: &mut Tensor<T>, src: &Tensor<T>, head: usize, dh: usize) {
    for r in 0..src.rows() {
        dst.row_mut(r)[head * dh..(head + 1) * dh].copy_from_slice(src.row(r));
    }
}

impl<T: Real> EncoderLayer<T> {
    fn new(prefix: &str, cfg: &EncoderConfig, rng: &mut rng::Rng) -> Self {
        let d = cfg.model_dim;
        let g = ParamGroup::Backbone;
        let proj = |name: &str, rng: &mut rng::Rng| Projection {
            base: Linear::new(&format!("{prefix}.attn.{name}"), d, d, g, rng),
            lora: None,
        };
        EncoderLayer {
            q: proj("q", rng),
            k: proj("k", rng),
            v: proj("v", rng),
            o: proj("o", rng),
            attn_norm: LayerNorm::new(&format!("{prefix}.attn.norm"), d, g),
            ffn_in: Linear::new(&format!("{prefix}.ffn.in"), d, cfg.ffn_dim, g, rng),
            ffn_out: Linear::new(&format!("{prefix}.ffn.out"), cfg.ffn_dim, d, g, rng),
            ffn_norm: LayerNorm::new(&format!("{prefix}.ffn.norm"), d, g),
        }
    }

    fn projections_mut(&mut self) -> [(AttnProj, &mut Projection<T>); 4] {
        [
            (AttnProj::Q, &mut self.q),
            (AttnProj::K, &mut self.k),
            (AttnProj::V, &mut self.v),
            (AttnProj::O, &mut self.o),
        ]
    }

    fn forward(&self, x: &Tensor<T>, mask: &AttnMask<'_>, heads: usize) -> (Tensor<T>, LayerCache<T>) {
        let d = x.cols();
        let dh = d / heads;
        let (q, qc) = self.q.forward(x);
        let (k, kc) = self.k.forward(x);
        let (v, vc) = self.v.forward(x);
        let mut ctx = Tensor::zeros(x.shape());
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (oh, ph) = attention_forward(
                &head_cols(&q, h, dh),
                &head_cols(&k, h, dh),
                &head_cols(&v, h, dh),
                mask,
            );
            put_head_cols(&mut ctx, &oh, h, dh);
            probs.push(ph);
        }
        let (a, oc) = self.o.forward(&ctx);
        let mut s1 = x.clone();
        s1.add_assign(&a);
        let (h1, ln1) = self.attn_norm.forward(&s1);
        let ffn_pre = self.ffn_in.forward(&h1);
        let ffn_act = Activation::Gelu.forward(&ffn_pre);
        let f = self.ffn_out.forward(&ffn_act);
        let mut s2 = h1.clone();
        s2.add_assign(&f);
        let (out, ln2) = self.ffn_norm.forward(&s2);
        let cache = LayerCache {
            x: x.clone(),
            q,
            k,
            v,
            qc,
            kc,
            vc,
            oc,
            probs,
            ctx,
            ln1,
            h1,
            ffn_pre,
            ffn_act,
            ln2,
        };
        (out, cache)
    }

    fn backward(&mut self, c: &LayerCache<T>, dout: &Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        let heads = c.probs.len();
        let dh = c.x.cols() / heads;
        let ds2 = self.ffn_norm.backward(&c.ln2, dout);
        let dact = self.ffn_out.backward(&c.ffn_act, &ds2, true).expect("dx");
        let dpre = Activation::Gelu.backward(&c.ffn_pre, &dact);
        let mut dh1 = self.ffn_in.backward(&c.h1, &dpre, true).expect("dx");
        dh1.add_assign(&ds2);
        let ds1 = self.attn_norm.backward(&c.ln1, &dh1);
        let dctx = self.o.backward(&c.ctx, &c.oc, &ds1, true).expect("dx");
        let mut dq = Tensor::zeros(c.q.shape());
        let mut dk = Tensor::zeros(c.k.shape());
        let mut dv = Tensor::zeros(c.v.shape());
        for h in 0..heads {
            let (gq, gk, gv) = attention_backward(
                &head_cols(&c.q, h, dh),
                &head_cols(&c.k, h, dh),
                &head_cols(&c.v, h, dh),
                &c.probs[h],
                &head_cols(&dctx, h, dh),
            );
            put_head_cols(&mut dq, &gq, h, dh);
            put_head_cols(&mut dk, &gk, h, dh);
            put_head_cols(&mut dv, &gv, h, dh);
        }
        let dxq = self.q.backward(&c.x, &c.qc, &dq, need_dx);
        let dxk = self.k.backward(&c.x, &c.kc, &dk, need_dx);
        let dxv = self.v.backward(&c.x, &c.vc, &dv, need_dx);
        need_dx.then(|| {
            let mut dx = ds1;
            for part in [dxq, dxk, dxv].into_iter().flatten() {
                dx.add_assign(&part);
            }
            dx
        })
    }

    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        self.q.visit(f);
        self.k.visit(f);
        self.v.visit(f);
        self.o.visit(f);
        self.attn_norm.visit(f);
        self.ffn_in.visit(f);
        self.ffn_out.visit(f);
        self.ffn_norm.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        self.q.visit_mut(f);
        self.k.visit_mut(f);
        self.v.visit_mut(f);
        self.o.visit_mut(f);
        self.attn_norm.visit_mut(f);
        self.ffn_in.visit_mut(f);
        self.ffn_out.visit_mut(f);
        self.ffn_norm.visit_mut(f);
    }

    fn any_trainable(&self) -> bool {
        let mut any = false;
        self.visit(&mut |p| any |= p.trainable());
        any
    }
}

fn layer_layout(prefix: &str, cfg: &EncoderConfig, lora: Option<&LoraConfig>) -> Vec<ParamInfo> {
    let d = cfg.model_dim;
    let g = ParamGroup::Backbone;
    let mut out = Vec::new();
    for p in AttnProj::ALL {
        let name = format!("{prefix}.attn.{}", p.name());
        out.extend(linear_layout(&name, d, d, g));
        if let Some(l) = lora.filter(|l| l.targets(p)) {
            out.push(ParamInfo::new(format!("{name}.lora_a"), &[l.rank, d], ParamGroup::Adapter));
            out.push(ParamInfo::new(format!("{name}.lora_b"), &[d, l.rank], ParamGroup::Adapter));
        }
    }
    out.extend(norm_layout(&format!("{prefix}.attn.norm"), d, g));
    out.extend(linear_layout(&format!("{prefix}.ffn.in"), d, cfg.ffn_dim, g));
    out.extend(linear_layout(&format!("{prefix}.ffn.out"), cfg.ffn_dim, d, g));
    out.extend(norm_layout(&format!("{prefix}.ffn.norm"), d, g));
    out
}


/// Forward-pass state needed for backpropagation through one sequence.
#[derive(Clone, Debug)]
pub struct EncoderCache<T> {
    ids: Vec<u32>,
    emb_norm: LayerNormCache<T>,
    layers: Vec<LayerCache<T>>,
}

#[derive(Clone, Debug)]
pub struct Encoder<T> {
    pub config: EncoderConfig,
    pub token_emb: Parameter<T>,
    pub pos_emb: Parameter<T>,
    pub emb_norm: LayerNorm<T>,
    pub layers: Vec<EncoderLayer<T>>,
    lora: Option<LoraConfig>,
}

const PREFIX: &str = "encoder";

impl<T: Real> Encoder<T> {
    /// Fresh encoder, everything trainable. All randomness comes from `seed`.
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::rng(seed);
        let d = config.model_dim;
        let emb_bound = 1.0 / (d as f64).sqrt();
        let g = ParamGroup::Backbone;
        let token_emb = Parameter::new(
            format!("{PREFIX}.embeddings.token"),
            Tensor::uniform(&[config.vocab_size, d], emb_bound, &mut r),
            g,
        );
        let pos_emb = Parameter::new(
            format!("{PREFIX}.embeddings.position"),
            Tensor::uniform(&[config.max_positions, d], emb_bound, &mut r),
            g,
        );
        let emb_norm = LayerNorm::new(&format!("{PREFIX}.embeddings.norm"), d, g);
        let layers = (0..config.num_layers)
            .map(|l| EncoderLayer::new(&format!("{PREFIX}.layer{l}"), &config, &mut r))
            .collect();
        Ok(Encoder {
            config,
            token_emb,
            pos_emb,
            emb_norm,
            layers,
            lora: None,
        })
    }

    /// Names, shapes and freeze flags of the parameters an encoder with this
    /// configuration would have, without allocating any of them.
    pub fn layout(
        config: &EncoderConfig,
        lora: Option<&LoraConfig>,
        freeze: &FreezeSpec,
    ) -> Vec<ParamInfo> {
        let d = config.model_dim;
        let g = ParamGroup::Backbone;
        let mut out = vec![
            ParamInfo::new(format!("{PREFIX}.embeddings.token"), &[config.vocab_size, d], g),
            ParamInfo::new(format!("{PREFIX}.embeddings.position"), &[config.max_positions, d], g),
        ];
        out.extend(norm_layout(&format!("{PREFIX}.embeddings.norm"), d, g));
        for p in out.iter_mut() {
            p.frozen = !freeze.embeddings_trainable;
        }
        for l in 0..config.num_layers {
            let frozen = freeze.layer_frozen(l, config.num_layers);
            out.extend(
                layer_layout(&format!("{PREFIX}.layer{l}"), config, lora)
                    .into_iter()
                    .map(|mut p| {
                        p.frozen = frozen;
                        p
                    }),
            );
        }
        if lora.is_some() {
            for p in out.iter_mut() {
                p.frozen = p.group != ParamGroup::Adapter;
            }
        }
        out
    }

    pub fn lora(&self) -> Option<&LoraConfig> {
        self.lora.as_ref()
    }

    /// Sets backbone freeze flags. Adapter matrices are not touched.
    pub fn set_trainable(&mut self, spec: &FreezeSpec) -> Result<()> {
        spec.validate(self.config.num_layers)?;
        let emb_frozen = !spec.embeddings_trainable;
        self.token_emb.frozen = emb_frozen;
        self.pos_emb.frozen = emb_frozen;
        self.emb_norm.visit_mut(&mut |p| p.frozen = emb_frozen);
        let n = self.config.num_layers;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let frozen = spec.layer_frozen(l, n);
            layer.visit_mut(&mut |p| {
                if p.group == ParamGroup::Backbone {
                    p.frozen = frozen;
                }
            });
        }
        Ok(())
    }

    /// Adds zero-initialized-B adapters to the targeted projections of every
    /// layer and freezes all base weights.
    pub fn apply_lora(&mut self, cfg: &LoraConfig, seed: u64) -> Result<()> {
        if self.lora.is_some() {
            return Err(Error::Config("LoRA adapters already applied".into()));
        }
        cfg.validate()?;
        let mut r = rng::rng(seed);
        let d = self.config.model_dim;
        let bound = 1.0 / (d as f64).sqrt();
        let scale = T::lit(cfg.scale());
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (which, proj) in layer.projections_mut() {
                if !cfg.targets(which) {
                    continue;
                }
                let name = format!("{PREFIX}.layer{l}.attn.{}", which.name());
                proj.lora = Some(LoraAdapter {
                    a: Parameter::new(
                        format!("{name}.lora_a"),
                        Tensor::uniform(&[cfg.rank, d], bound, &mut r),
                        ParamGroup::Adapter,
                    ),
                    b: Parameter::new(
                        format!("{name}.lora_b"),
                        Tensor::zeros(&[d, cfg.rank]),
                        ParamGroup::Adapter,
                    ),
                    scale,
                });
            }
        }
        self.visit_mut(&mut |p| {
            if p.group == ParamGroup::Backbone {
                p.frozen = true;
            }
        });
        self.lora = Some(cfg.clone());
        Ok(())
    }

    fn embeddings_trainable(&self) -> bool {
        self.token_emb.trainable() || self.pos_emb.trainable() || self.emb_norm.gain.trainable()
            || self.emb_norm.bias.trainable()
    }

    /// Lowest block that needs gradients: 0 = embeddings, `l + 1` = layer `l`.
    fn first_trainable_block(&self) -> Option<usize> {
        if self.embeddings_trainable() {
            return Some(0);
        }
        self.layers.iter().position(|l| l.any_trainable()).map(|l| l + 1)
    }

    pub fn has_trainable(&self) -> bool {
        self.first_trainable_block().is_some()
    }

    fn check_input(&self, ids: &[u32], mask: &[u8]) -> Result<()> {
        if ids.len() != mask.len() {
            return Err(Error::Shape {
                op: "encoder_forward",
                left: vec![ids.len()],
                right: vec![mask.len()],
            });
        }
        if ids.len() > self.config.max_positions {
            return Err(Error::Input(format!(
                "sequence length {} exceeds max positions {}",
                ids.len(),
                self.config.max_positions
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(Error::Input(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Hidden states `[T × d]` for one (possibly padded) sequence.
    pub fn forward(&self, ids: &[u32], mask: &[u8]) -> Result<(Tensor<T>, EncoderCache<T>)> {
        self.check_input(ids, mask)?;
        let t = ids.len();
        let d = self.config.model_dim;
        let mut x = Tensor::zeros(&[t, d]);
        for (pos, &id) in ids.iter().enumerate() {
            let row = x.row_mut(pos);
            row.copy_from_slice(self.token_emb.value.row(id as usize));
            add_into(row, self.pos_emb.value.row(pos));
        }
        let (mut h, emb_norm) = self.emb_norm.forward(&x);
        let attn_mask = AttnMask {
            key_mask: mask,
            window: self.config.attention_window,
            causal: self.config.causal,
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, cache) = layer.forward(&h, &attn_mask, self.config.num_heads);
            layers.push(cache);
            h = out;
        }
        Ok((
            h,
            EncoderCache {
                ids: ids.to_vec(),
                emb_norm,
                layers,
            },
        ))
    }

    /// Forward without keeping a cache.
    pub fn encode(&self, ids: &[u32], mask: &[u8]) -> Result<Tensor<T>> {
        self.forward(ids, mask).map(|(h, _)| h)
    }

    /// Hidden states `[B × T × d]` for a padded batch.
    pub fn forward_batch(&self, ids: &[u32], mask: &[u8], batch: usize) -> Result<Tensor<T>> {
        let t = if batch == 0 { 0 } else { ids.len() / batch };
        let d = self.config.model_dim;
        let mut data = Vec::with_capacity(batch * t * d);
        for b in 0..batch {
            let h = self.encode(&ids[b * t..(b + 1) * t], &mask[b * t..(b + 1) * t])?;
            data.extend_from_slice(h.data());
        }
        Tensor::from_vec(&[batch, t, d], data)
    }

    /// Accumulates gradients for trainable parameters given `dH`. Blocks
    /// below the lowest trainable one are skipped entirely.
    pub fn backward(&mut self, cache: &EncoderCache<T>, dh: &Tensor<T>) {
        let Some(first) = self.first_trainable_block() else { return };
        let mut d = dh.clone();
        for l in (0..self.layers.len()).rev() {
            if l + 1 < first {
                return;
            }
            let need_dx = l + 1 > first;
            match self.layers[l].backward(&cache.layers[l], &d, need_dx) {
                Some(dx) => d = dx,
                None => return,
            }
        }
        // first == 0: embeddings are trainable.
        let d0 = self.emb_norm.backward(&cache.emb_norm, &d);
        if let Some(gt) = self.token_emb.grad_mut() {
            let dm = self.config.model_dim;
            for (pos, &id) in cache.ids.iter().enumerate() {
                add_into(&mut gt[id as usize * dm..(id as usize + 1) * dm], d0.row(pos));
            }
        }
        if let Some(gp) = self.pos_emb.grad_mut() {
            let dm = self.config.model_dim;
            for pos in 0..cache.ids.len() {
                add_into(&mut gp[pos * dm..(pos + 1) * dm], d0.row(pos));
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Encoder<U> {
        let mut out = Encoder::<U> {
            config: self.config.clone(),
            token_emb: cast_param(&self.token_emb),
            pos_emb: cast_param(&self.pos_emb),
            emb_norm: LayerNorm {
                gain: cast_param(&self.emb_norm.gain),
                bias: cast_param(&self.emb_norm.bias),
            },
            layers: Vec::new(),
            lora: self.lora.clone(),
        };
        for layer in &self.layers {
            let proj = |p: &Projection<T>| Projection {
                base: cast_linear(&p.base),
                lora: p.lora.as_ref().map(|l| LoraAdapter {
                    a: cast_param(&l.a),
                    b: cast_param(&l.b),
                    scale: U::lit(l.scale.f64()),
                }),
            };
            out.layers.push(EncoderLayer {
                q: proj(&layer.q),
                k: proj(&layer.k),
                v: proj(&layer.v),
                o: proj(&layer.o),
                attn_norm: LayerNorm {
                    gain: cast_param(&layer.attn_norm.gain),
                    bias: cast_param(&layer.attn_norm.bias),
                },
                ffn_in: cast_linear(&layer.ffn_in),
                ffn_out: cast_linear(&layer.ffn_out),
                ffn_norm: LayerNorm {
                    gain: cast_param(&layer.ffn_norm.gain),
                    bias: cast_param(&layer.ffn_norm.bias),
                },
            });
        }
        out
    }
}

pub(crate) fn cast_param<T: Real, U: Real>(p: &Parameter<T>) -> Parameter<U> {
    Parameter {
        name: p.name.clone(),
        value: p.value.cast(),
        grad: p.grad.cast(),
        frozen: p.frozen,
        group: p.group,
    }
}

pub(crate) fn cast_linear<T: Real, U: Real>(l: &Linear<T>) -> Linear<U> {
    Linear {
        weight: cast_param(&l.weight),
        bias: cast_param(&l.bias),
    }
}

impl<T: Real> Module<T> for Encoder<T> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        f(&self.token_emb);
        f(&self.pos_emb);
        self.emb_norm.visit(f);
        for l in &self.layers {
            l.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.token_emb);
        f(&mut self.pos_emb);
        self.emb_norm.visit_mut(f);
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }
}

/// Trainable parameters in one base-encoder layer (attention, FFN, two norms).
pub fn layer_param_count(cfg: &EncoderConfig) -> usize {
    let d = cfg.model_dim;
    let f = cfg.ffn_dim;
    4 * (d * d + d) + (d * f + f) + (f * d + d) + 2 * 2 * d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{count_trainable, param_infos};
    use crate::rng;

    fn tiny(layers: usize) -> EncoderConfig {
        EncoderConfig {
            num_layers: layers,
            model_dim: 8,
            num_heads: 2,
            ffn_dim: 12,
            vocab_size: 20,
            max_positions: 16,
            attention_window: 0,
            causal: false,
        }
    }

    /// Independent masked attention: explicit score matrix, f64 throughout.
    fn brute_attention(q: &Tensor<f64>, k: &Tensor<f64>, v: &Tensor<f64>, mask: &[u8], w: usize) -> Tensor<f64> {
        let t = q.rows();
        let scale = (q.cols() as f64).sqrt();
        let mut out = Tensor::zeros(&[t, v.cols()]);
        for i in 0..t {
            let scores: Vec<Option<f64>> = (0..t)
                .map(|j| {
                    let inside = w == 0 || (i as i64 - j as i64).unsigned_abs() as usize <= (w - 1) / 2;
                    (mask[j] == 1 && inside).then(|| {
                        (0..q.cols()).map(|c| q.at(i, c) * k.at(j, c)).sum::<f64>() / scale
                    })
                })
                .collect();
            let m = scores.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().flatten().map(|s| (s - m).exp()).sum();
            for j in 0..t {
                if let Some(s) = scores[j] {
                    let p = (s - m).exp() / z;
                    for c in 0..v.cols() {
                        out.data_mut()[i * v.cols() + c] += p * v.at(j, c);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn attention_matches_brute_force() {
        let mut r = rng::rng(11);
        let q = Tensor::<f64>::uniform(&[6, 4], 1.5, &mut r);
        let k = Tensor::<f64>::uniform(&[6, 4], 1.5, &mut r);
        let v = Tensor::<f64>::uniform(&[6, 3], 1.5, &mut r);
        let mask = [1, 1, 1, 1, 1, 0];
        for w in [0, 1, 3, 5] {
            let got = attention(&q, &k, &v, &mask, w).unwrap();
            let want = brute_attention(&q, &k, &v, &mask, w);
            assert!(got.max_abs_diff(&want) < 1e-12, "window {w}");
        }
    }

    #[test]
    fn wide_window_equals_full() {
        let mut r = rng::rng(12);
        let t = 7;
        let q = Tensor::<f32>::uniform(&[t, 4], 1.0, &mut r);
        let k = Tensor::<f32>::uniform(&[t, 4], 1.0, &mut r);
        let v = Tensor::<f32>::uniform(&[t, 4], 1.0, &mut r);
        let mask = vec![1u8; t];
        let full = attention(&q, &k, &v, &mask, 0).unwrap();
        let wide = attention(&q, &k, &v, &mask, 2 * t - 1).unwrap();
        assert!(full.max_abs_diff(&wide) < 1e-6);
    }

    #[test]
    fn unit_window_returns_values() {
        let mut r = rng::rng(13);
        let q = Tensor::<f64>::uniform(&[3, 2], 1.0, &mut r);
        let k = Tensor::<f64>::uniform(&[3, 2], 1.0, &mut r);
        let v = Tensor::<f64>::uniform(&[3, 2], 1.0, &mut r);
        let out = attention(&q, &k, &v, &[1, 1, 1], 1).unwrap();
        assert!(out.max_abs_diff(&v) < 1e-15);
        assert!(attention(&q, &k, &v, &[1, 1, 1], 2).is_err());
    }

    #[test]
    fn batch_shape_and_determinism() {
        let mut cfg = EncoderConfig::desk();
        cfg.vocab_size = 30;
        let enc = Encoder::<f32>::new(cfg.clone(), 5).unwrap();
        let ids: Vec<u32> = (0..14).map(|i| (i % 30) as u32).collect();
        let mask = vec![1u8; 14];
        let h = enc.forward_batch(&ids, &mask, 2).unwrap();
        assert_eq!(h.shape(), &[2, 7, 32]);
        let again = Encoder::<f32>::new(cfg, 5).unwrap().forward_batch(&ids, &mask, 2).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn input_validation() {
        let enc = Encoder::<f32>::new(tiny(1), 1).unwrap();
        assert!(enc.forward(&[1, 25], &[1, 1]).is_err());
        assert!(enc.forward(&[1; 17], &[1; 17]).is_err());
        let mut bad = tiny(1);
        bad.num_heads = 3;
        assert!(Encoder::<f32>::new(bad, 1).is_err());
        let mut bad = tiny(1);
        bad.attention_window = 4;
        assert!(Encoder::<f32>::new(bad, 1).is_err());
    }

    #[test]
    fn padding_does_not_change_real_positions() {
        let enc = Encoder::<f64>::new(tiny(2), 3).unwrap();
        let h = enc.encode(&[1, 5, 6, 2], &[1, 1, 1, 1]).unwrap();
        let hp = enc.encode(&[1, 5, 6, 2, 0, 0], &[1, 1, 1, 1, 0, 0]).unwrap();
        let real = Tensor::from_vec(&[4, 8], hp.data()[..4 * 8].to_vec()).unwrap();
        assert!(real.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn lora_starts_as_identity_and_counts() {
        let mut enc = Encoder::<f64>::new(tiny(2), 3).unwrap();
        let ids = [1, 4, 7, 2];
        let before = enc.encode(&ids, &[1; 4]).unwrap();
        enc.apply_lora(&LoraConfig::with_rank(3), 9).unwrap();
        assert_eq!(enc.encode(&ids, &[1; 4]).unwrap(), before);
        assert!(enc.apply_lora(&LoraConfig::with_rank(3), 9).is_err());
        let infos = param_infos(&enc);
        // 2 layers × {Q, V} × (A + B) × 8 × 3
        assert_eq!(count_trainable(&infos), 2 * 2 * 2 * 8 * 3);
        assert!(infos.iter().filter(|p| !p.frozen).all(|p| p.group == ParamGroup::Adapter));
    }

    #[test]
    fn desk_lora_count() {
        let lora = LoraConfig {
            rank: 4,
            alpha: 4.0,
            targets: vec![AttnProj::Q],
        };
        let infos = Encoder::<f32>::layout(&EncoderConfig::desk(), Some(&lora), &FreezeSpec::all_frozen());
        assert_eq!(count_trainable(&infos), 512);
    }

    #[test]
    fn layout_matches_built_model() {
        let lora = LoraConfig::with_rank(2);
        let specs = [
            FreezeSpec::all_frozen(),
            FreezeSpec::all_trainable(),
            FreezeSpec::top_k_unfrozen(1),
            FreezeSpec::top_k_unfrozen(3),
        ];
        for spec in specs {
            for with_lora in [false, true] {
                let mut enc = Encoder::<f32>::new(tiny(3), 1).unwrap();
                enc.set_trainable(&spec).unwrap();
                if with_lora {
                    enc.apply_lora(&lora, 2).unwrap();
                }
                let expect = Encoder::<f32>::layout(&tiny(3), with_lora.then_some(&lora), &spec);
                assert_eq!(param_infos(&enc), expect, "{spec:?} lora={with_lora}");
            }
        }
    }

    #[test]
    fn freeze_specs() {
        let mut enc = Encoder::<f32>::new(tiny(2), 1).unwrap();
        assert!(enc.set_trainable(&FreezeSpec::top_k_unfrozen(3)).is_err());
        enc.set_trainable(&FreezeSpec::all_frozen()).unwrap();
        assert_eq!(count_trainable(&param_infos(&enc)), 0);
        assert!(!enc.has_trainable());
        enc.set_trainable(&FreezeSpec::top_k_unfrozen(1)).unwrap();
        assert_eq!(count_trainable(&param_infos(&enc)), layer_param_count(&tiny(2)));
    }

    #[test]
    fn base_accounting() {
        let base = EncoderConfig::base();
        assert_eq!(layer_param_count(&base), 7_087_872);
        let top2 = Encoder::<f32>::layout(&base, None, &FreezeSpec::top_k_unfrozen(2));
        assert_eq!(count_trainable(&top2), 14_175_744);
        let lora = Encoder::<f32>::layout(&base, Some(&LoraConfig::with_rank(20)), &FreezeSpec::all_frozen());
        assert_eq!(count_trainable(&lora), 737_280);
        let full = count_trainable(&Encoder::<f32>::layout(&base, None, &FreezeSpec::all_trainable()));
        assert_eq!(full, 50_265 * 768 + 514 * 768 + 2 * 768 + 12 * 7_087_872);
    }
}
