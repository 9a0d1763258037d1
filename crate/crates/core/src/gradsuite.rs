//! The full finite-difference suite: every differentiable primitive, both
//! recurrent cells, the three heads, the one-layer encoder in its three
//! training configurations, and both probe language models. All checks run
//! in f64 with dropout off.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{attention_backward, attention_forward, AttnMask, Encoder, EncoderConfig, FreezeSpec, LoraConfig};
use crate::heads::{lstm_cell, lstm_cell_backward, gru_cell, gru_cell_backward, CellKind, DropoutCtx, Head, HeadConfig, RecurrentCellParams};
use crate::layers::{LayerNorm, Linear};
use crate::numerics::{
    grad_check, matmul, matmul_backward, softmax_ce, Activation, GradCheckConfig, GradCheckReport, Module, ParamGroup,
    Parameter, Tensor,
};
use crate::probe::{LanguageModel, LmConfig, LmKind};
use crate::rng::{self, derive_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: String,
    pub report: GradCheckReport,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(CaseResult::passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.cases.iter().map(|c| c.report.max_rel_err()).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&CaseResult> {
        self.cases.iter().filter(|c| !c.passed()).collect()
    }

    pub fn render_table(&self) -> String {
        let rows: Vec<[String; 5]> = self
            .cases
            .iter()
            .map(|c| {
                [
                    c.case.clone(),
                    c.report.params.len().to_string(),
                    c.report.params.iter().map(|p| p.checked).sum::<usize>().to_string(),
                    format!("{:.2e}", c.report.max_rel_err()),
                    if c.passed() { "ok" } else { "FAIL" }.to_string(),
                ]
            })
            .collect();
        let mut out =
            crate::eval::render_columns(&["Case", "Tensors", "Coords", "Max rel err", "Status"], &rows);
        out.push_str(&format!(
            "{} of {} cases within {:e}\n",
            self.cases.iter().filter(|c| c.passed()).count(),
            self.cases.len(),
            self.tolerance
        ));
        out
    }
}

/// Free tensors exposed as parameters so input gradients get checked too.
struct Leaves(Vec<Parameter<f64>>);

impl Module<f64> for Leaves {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
        self.0.iter().for_each(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
        self.0.iter_mut().for_each(f);
    }
}

/// A module plus extra leaf tensors (its inputs).
struct With<M> {
    m: M,
    leaves: Leaves,
}

trait Visit {
    fn each<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>));
    fn each_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>));
}

impl Visit for Linear<f64> {
    fn each<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
        self.visit(f)
    }
    fn each_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
        self.visit_mut(f)
    }
}

impl Visit for LayerNorm<f64> {
    fn each<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
        self.visit(f)
    }
    fn each_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
        self.visit_mut(f)
    }
}

impl Visit for RecurrentCellParams<f64> {
    fn each<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
        self.visit(f)
    }
    fn each_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
        self.visit_mut(f)
    }
}

impl Visit for Head<f64> {
    fn each<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
        Module::visit(self, f)
    }
    fn each_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
        Module::visit_mut(self, f)
    }
}

impl<M: Visit> Module<f64> for With<M> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
        self.m.each(f);
        self.leaves.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
        self.m.each_mut(f);
        self.leaves.visit_mut(f);
    }
}

fn leaf(name: &str, shape: &[usize], seed: u64) -> Parameter<f64> {
    let t = Tensor::uniform(shape, 1.0, &mut rng::rng(derive_seed(seed, name)));
    Parameter::new(name, t, ParamGroup::Head)
}

/// Random projection weights: checking `Σ y ⊙ r` exercises the whole
/// Jacobian, not just one row of it.
fn probe_weights(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::uniform(shape, 1.0, &mut rng::rng(derive_seed(seed, "projection")))
}

fn dot(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn set_grad(p: &mut Parameter<f64>, g: &Tensor<f64>) {
    p.grad.data_mut().copy_from_slice(g.data());
}

fn set_grad_slice(p: &mut Parameter<f64>, g: &[f64]) {
    p.grad.data_mut().copy_from_slice(g);
}

type CaseFn = fn(&GradCheckConfig) -> GradCheckReport;

fn check_matmul(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut m = Leaves(vec![leaf("a", &[3, 4], 1), leaf("b", &[4, 5], 1)]);
    let r = probe_weights(&[3, 5], 1);
    let f = |m: &Leaves| dot(&matmul(&m.0[0].value, &m.0[1].value).unwrap(), &r);
    grad_check(
        &mut m,
        |m| {
            let (da, db) = matmul_backward(&m.0[0].value, &m.0[1].value, &r).unwrap();
            set_grad(&mut m.0[0], &da);
            set_grad(&mut m.0[1], &db);
            f(m)
        },
        f,
        cfg,
    )
}

fn check_linear(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut m = With {
        m: Linear::new("linear", 6, 4, ParamGroup::Head, &mut rng::rng(2)),
        leaves: Leaves(vec![leaf("x", &[3, 6], 2)]),
    };
    // Non-zero bias so its gradient is not trivially matched.
    m.m.bias.value = Tensor::uniform(&[4], 0.5, &mut rng::rng(3));
    let r = probe_weights(&[3, 4], 2);
    let f = |m: &With<Linear<f64>>| dot(&m.m.forward(&m.leaves.0[0].value), &r);
    grad_check(
        &mut m,
        |m| {
            let x = m.leaves.0[0].value.clone();
            let dx = m.m.backward(&x, &r, true).unwrap();
            set_grad(&mut m.leaves.0[0], &dx);
            f(m)
        },
        f,
        cfg,
    )
}

fn check_layer_norm(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut ln = LayerNorm::new("norm", 5, ParamGroup::Head);
    ln.gain.value = Tensor::uniform(&[5], 1.0, &mut rng::rng(4)).map(|v| v + 1.5);
    ln.bias.value = Tensor::uniform(&[5], 0.5, &mut rng::rng(5));
    let mut m = With {
        m: ln,
        leaves: Leaves(vec![leaf("x", &[4, 5], 4)]),
    };
    let r = probe_weights(&[4, 5], 4);
    let f = |m: &With<LayerNorm<f64>>| dot(&m.m.forward(&m.leaves.0[0].value).0, &r);
    grad_check(
        &mut m,
        |m| {
            let (_, cache) = m.m.forward(&m.leaves.0[0].value);
            let dx = m.m.backward(&cache, &r);
            set_grad(&mut m.leaves.0[0], &dx);
            f(m)
        },
        f,
        cfg,
    )
}

fn check_activation(act: Activation, cfg: &GradCheckConfig) -> GradCheckReport {
    let mut x = leaf("x", &[3, 5], 6);
    // Keep ReLU inputs away from the kink.
    x.value = x.value.map(|v| if v.abs() < 0.1 { v + 0.3 } else { v });
    let mut m = Leaves(vec![x]);
    let r = probe_weights(&[3, 5], 6);
    let f = |m: &Leaves| dot(&act.forward(&m.0[0].value), &r);
    grad_check(
        &mut m,
        |m| {
            let dx = act.backward(&m.0[0].value, &r);
            set_grad(&mut m.0[0], &dx);
            f(m)
        },
        f,
        cfg,
    )
}

fn check_softmax_ce(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut m = Leaves(vec![leaf("logits", &[4, 3], 7)]);
    let labels = [0, 2, 1, 1];
    let f = |m: &Leaves| softmax_ce(&m.0[0].value, &labels).unwrap().0;
    grad_check(
        &mut m,
        |m| {
            let (loss, dl) = softmax_ce(&m.0[0].value, &labels).unwrap();
            set_grad(&mut m.0[0], &dl);
            loss
        },
        f,
        cfg,
    )
}

fn check_attention(window: usize, causal: bool, cfg: &GradCheckConfig) -> GradCheckReport {
    let key_mask = [1u8, 1, 1, 1, 1, 0];
    let mask = AttnMask {
        key_mask: &key_mask,
        window,
        causal,
    };
    let mut m = Leaves(vec![leaf("q", &[6, 4], 8), leaf("k", &[6, 4], 8), leaf("v", &[6, 3], 8)]);
    let r = probe_weights(&[6, 3], 8);
    let f = |m: &Leaves| dot(&attention_forward(&m.0[0].value, &m.0[1].value, &m.0[2].value, &mask).0, &r);
    grad_check(
        &mut m,
        |m| {
            let (q, k, v) = (&m.0[0].value, &m.0[1].value, &m.0[2].value);
            let (_, probs) = attention_forward(q, k, v, &mask);
            let (dq, dk, dv) = attention_backward(q, k, v, &probs, &r);
            set_grad(&mut m.0[0], &dq);
            set_grad(&mut m.0[1], &dk);
            set_grad(&mut m.0[2], &dv);
            f(m)
        },
        f,
        cfg,
    )
}

fn cell_case(kind: CellKind) -> With<RecurrentCellParams<f64>> {
    let (input, hidden) = (5, 4);
    let mut p = RecurrentCellParams::new("cell", kind, input, hidden, &mut rng::rng(9));
    p.visit_mut(&mut |q| q.value = q.value.map(|v| v * 3.0));
    With {
        m: p,
        leaves: Leaves(vec![leaf("x", &[input], 9), leaf("h_prev", &[hidden], 9), leaf("c_prev", &[hidden], 9)]),
    }
}

fn check_lstm_cell(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut m = cell_case(CellKind::Lstm);
    let rh = probe_weights(&[4], 10);
    let rc = probe_weights(&[4], 11);
    let f = |m: &With<RecurrentCellParams<f64>>| {
        let l = &m.leaves.0;
        let (h, c) = lstm_cell(l[0].value.data(), l[1].value.data(), l[2].value.data(), &m.m);
        dot(&Tensor::from_vec(&[4], h).unwrap(), &rh) + dot(&Tensor::from_vec(&[4], c).unwrap(), &rc)
    };
    grad_check(
        &mut m,
        |m| {
            let (x, h, c) = (
                m.leaves.0[0].value.data().to_vec(),
                m.leaves.0[1].value.data().to_vec(),
                m.leaves.0[2].value.data().to_vec(),
            );
            let (dx, dh, dc) = lstm_cell_backward(&x, &h, &c, &mut m.m, rh.data(), rc.data());
            set_grad_slice(&mut m.leaves.0[0], &dx);
            set_grad_slice(&mut m.leaves.0[1], &dh);
            set_grad_slice(&mut m.leaves.0[2], &dc);
            f(m)
        },
        f,
        cfg,
    )
}

fn check_gru_cell(cfg: &GradCheckConfig) -> GradCheckReport {
    let mut m = cell_case(CellKind::Gru);
    m.leaves.0.pop();
    let rh = probe_weights(&[4], 12);
    let f = |m: &With<RecurrentCellParams<f64>>| {
        let l = &m.leaves.0;
        let h = gru_cell(l[0].value.data(), l[1].value.data(), &m.m);
        dot(&Tensor::from_vec(&[4], h).unwrap(), &rh)
    };
    grad_check(
        &mut m,
        |m| {
            let (x, h) = (m.leaves.0[0].value.data().to_vec(), m.leaves.0[1].value.data().to_vec());
            let (dx, dh) = gru_cell_backward(&x, &h, &mut m.m, rh.data());
            set_grad_slice(&mut m.leaves.0[0], &dx);
            set_grad_slice(&mut m.leaves.0[1], &dh);
            f(m)
        },
        f,
        cfg,
    )
}

fn check_head(config: HeadConfig, cfg: &GradCheckConfig) -> GradCheckReport {
    let d = 8;
    let config = HeadConfig {
        hidden_size: 6,
        dropout: 0.0,
        ..config
    };
    let mut m = With {
        m: Head::<f64>::new(&config, d, 13).expect("valid head"),
        leaves: Leaves(vec![leaf("hidden_states", &[5, d], 13)]),
    };
    let mask = [1u8, 1, 1, 1, 0];
    let f = |m: &With<Head<f64>>| {
        let (logits, _) = m.m.forward(&m.leaves.0[0].value, &mask, DropoutCtx::EVAL).unwrap();
        softmax_ce(&logits, &[1]).unwrap().0
    };
    grad_check(
        &mut m,
        |m| {
            let (logits, cache) = m.m.forward(&m.leaves.0[0].value, &mask, DropoutCtx::EVAL).unwrap();
            let (loss, dl) = softmax_ce(&logits, &[1]).unwrap();
            let dh = m.m.backward(&cache, &dl);
            set_grad(&mut m.leaves.0[0], &dh);
            loss
        },
        f,
        cfg,
    )
}

/// One-layer desk encoder. The vocabulary and position table are shrunk so
/// sampled embedding coordinates land on rows that carry gradient.
pub fn suite_encoder_config() -> EncoderConfig {
    EncoderConfig {
        num_layers: 1,
        vocab_size: 12,
        max_positions: 8,
        ..EncoderConfig::desk()
    }
}

#[derive(Clone, Copy, Debug)]
enum EncoderSetup {
    AllTrainable,
    Lora,
    TopOneUnfrozen,
}

fn check_encoder(setup: EncoderSetup, cfg: &GradCheckConfig) -> GradCheckReport {
    let mut enc = Encoder::<f64>::new(suite_encoder_config(), 14).expect("valid config");
    match setup {
        EncoderSetup::AllTrainable => enc.set_trainable(&FreezeSpec::all_trainable()).unwrap(),
        EncoderSetup::TopOneUnfrozen => enc.set_trainable(&FreezeSpec::top_k_unfrozen(1)).unwrap(),
        EncoderSetup::Lora => {
            enc.apply_lora(&LoraConfig::with_rank(4), 15).unwrap();
            // B starts at zero, which would leave A's gradient identically zero.
            let mut r = rng::rng(16);
            enc.visit_mut(&mut |p| {
                if p.name.ends_with("lora_b") {
                    p.value = Tensor::uniform(p.value.shape(), 0.5, &mut r);
                }
            });
        }
    }
    let ids = [0u32, 5, 9, 3, 11, 1, 1];
    let mask = [1u8, 1, 1, 1, 1, 1, 0];
    let dim = enc.config.model_dim;
    let r = probe_weights(&[ids.len(), dim], 17);
    let f = |e: &Encoder<f64>| dot(&e.encode(&ids, &mask).unwrap(), &r);
    grad_check(
        &mut enc,
        |e| {
            let (h, cache) = e.forward(&ids, &mask).unwrap();
            e.backward(&cache, &r);
            dot(&h, &r)
        },
        f,
        cfg,
    )
}

fn check_lm(kind: LmKind, cfg: &GradCheckConfig) -> GradCheckReport {
    let config = LmConfig {
        model_dim: 8,
        heads: 2,
        ffn_dim: 16,
        max_len: 16,
        ..LmConfig::new(kind)
    };
    let mut lm = LanguageModel::<f64>::new(config, 10, 18).expect("valid config");
    let ids = [0u32, 4, 7, 4, 9, 2];
    let targets: Vec<usize> = ids[1..].iter().map(|&t| t as usize).collect();
    let inputs = &ids[..ids.len() - 1];
    let f = |m: &LanguageModel<f64>| softmax_ce(&m.forward(inputs).unwrap().0, &targets).unwrap().0;
    grad_check(
        &mut lm,
        |m| {
            let (logits, cache) = m.forward(inputs).unwrap();
            let (loss, dl) = softmax_ce(&logits, &targets).unwrap();
            m.backward(&cache, &dl);
            loss
        },
        f,
        cfg,
    )
}

/// Case names with their checks, in report order.
pub fn suite_cases() -> Vec<(&'static str, CaseFn)> {
    vec![
        ("matmul", check_matmul as CaseFn),
        ("linear", check_linear),
        ("layer_norm", check_layer_norm),
        ("activation.gelu", |c| check_activation(Activation::Gelu, c)),
        ("activation.tanh", |c| check_activation(Activation::Tanh, c)),
        ("activation.sigmoid", |c| check_activation(Activation::Sigmoid, c)),
        ("activation.relu", |c| check_activation(Activation::Relu, c)),
        ("softmax_ce", check_softmax_ce),
        ("attention.full", |c| check_attention(0, false, c)),
        ("attention.window3", |c| check_attention(3, false, c)),
        ("attention.causal", |c| check_attention(0, true, c)),
        ("cell.lstm", check_lstm_cell),
        ("cell.gru", check_gru_cell),
        ("head.linear", |c| check_head(HeadConfig::linear(), c)),
        ("head.bilstm", |c| check_head(HeadConfig::bilstm(), c)),
        ("head.bigru", |c| check_head(HeadConfig::bigru(), c)),
        ("encoder.all_trainable", |c| check_encoder(EncoderSetup::AllTrainable, c)),
        ("encoder.lora", |c| check_encoder(EncoderSetup::Lora, c)),
        ("encoder.top1_unfrozen", |c| check_encoder(EncoderSetup::TopOneUnfrozen, c)),
        ("lm.lstm", |c| check_lm(LmKind::LstmLm, c)),
        ("lm.transformer", |c| check_lm(LmKind::TransformerLm, c)),
    ]
}

/// Runs every case (in parallel) and collects the reports in order.
pub fn run_suite(cfg: &GradCheckConfig) -> SuiteReport {
    let cases = suite_cases()
        .into_par_iter()
        .map(|(name, check)| CaseResult {
            case: name.to_string(),
            report: check(cfg),
        })
        .collect();
    SuiteReport {
        tolerance: cfg.tolerance,
        cases,
    }
}
