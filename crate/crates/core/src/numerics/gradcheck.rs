use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{zero_grads, Module};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates sampled per parameter; smaller tensors are checked fully.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err < self.tolerance)
    }

    /// `Err` naming the worst offending parameter and coordinate.
    pub fn check(&self) -> Result<()> {
        let worst = self
            .params
            .iter()
            .filter(|p| p.max_rel_err >= self.tolerance)
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err));
        match worst {
            None => Ok(()),
            Some(p) => Err(Error::GradCheck {
                param: p.name.clone(),
                coord: p.worst_coord,
                rel_err: p.max_rel_err,
                tolerance: self.tolerance,
            }),
        }
    }
}

/// Gradients smaller than this are compared absolutely. Central differences
/// carry about `ε·|loss|/step` of rounding noise, around 1e-10 for the
/// losses checked here; gradients that are exactly zero (the attention key
/// bias, by softmax shift invariance) measure pure noise.
const REL_FLOOR: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradients written by `loss_and_grads` with central
/// differences of `loss`, over the trainable parameters of `model`. Frozen
/// parameters are not reported.
pub fn grad_check<M, G, L>(
    model: &mut M,
    mut loss_and_grads: G,
    mut loss: L,
    cfg: &GradCheckConfig,
) -> GradCheckReport
where
    M: Module<f64>,
    G: FnMut(&mut M) -> f64,
    L: FnMut(&M) -> f64,
{
    zero_grads(model);
    loss_and_grads(model);

    let mut analytic: Vec<Option<(String, Vec<f64>)>> = Vec::new();
    model.visit(&mut |p| {
        analytic.push((!p.frozen).then(|| (p.name.clone(), p.grad.data().to_vec())));
    });

    let mut picker = rng::rng(cfg.seed);
    let mut params = Vec::new();
    for (pi, entry) in analytic.iter().enumerate() {
        let Some((name, grads)) = entry else { continue };
        let n = grads.len();
        let coords: Vec<usize> = if n <= cfg.max_coords {
            (0..n).collect()
        } else {
            let mut c = sample(&mut picker, n, cfg.max_coords).into_vec();
            c.sort_unstable();
            c
        };
        let mut check = ParamCheck {
            name: name.clone(),
            checked: coords.len(),
            max_rel_err: 0.0,
            worst_coord: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &c in &coords {
            let original = nudge(model, pi, c, None);
            nudge(model, pi, c, Some(original + cfg.step));
            let plus = loss(model);
            nudge(model, pi, c, Some(original - cfg.step));
            let minus = loss(model);
            nudge(model, pi, c, Some(original));
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let e = rel_err(grads[c], numeric);
            if e > check.max_rel_err || (check.max_rel_err == 0.0 && c == coords[0]) {
                check.max_rel_err = e;
                check.worst_coord = c;
                check.analytic = grads[c];
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    GradCheckReport {
        tolerance: cfg.tolerance,
        params,
    }
}

/// Reads (and optionally overwrites) coordinate `c` of the `pi`-th parameter.
fn nudge<M: Module<f64>>(model: &mut M, pi: usize, c: usize, set: Option<f64>) -> f64 {
    let mut idx = 0;
    let mut old = 0.0;
    model.visit_mut(&mut |p| {
        if idx == pi {
            old = p.value.data()[c];
            if let Some(v) = set {
                p.value.data_mut()[c] = v;
            }
        }
        idx += 1;
    });
    old
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ParamGroup, Parameter, Tensor};

    struct Linear {
        w: Parameter<f64>,
        frozen: Parameter<f64>,
    }

    impl Module<f64> for Linear {
        fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
            f(&self.w);
            f(&self.frozen);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
            f(&mut self.w);
            f(&mut self.frozen);
        }
    }

    #[test]
    fn quadratic_is_exact_and_frozen_excluded() {
        let x = 1.7;
        let mut m = Linear {
            w: Parameter::new("w", Tensor::full(&[1], 0.6), ParamGroup::Head),
            frozen: Parameter::new("b", Tensor::full(&[1], 0.2), ParamGroup::Head),
        };
        m.frozen.frozen = true;
        let report = grad_check(
            &mut m,
            |m| {
                let w = m.w.value.data()[0];
                let y = w * x;
                m.w.grad.data_mut()[0] = 2.0 * y * x;
                y * y
            },
            |m| {
                let y = m.w.value.data()[0] * x;
                y * y
            },
            &GradCheckConfig::default(),
        );
        assert_eq!(report.params.len(), 1);
        assert_eq!(report.params[0].name, "w");
        assert!(report.max_rel_err() < 1e-8, "{}", report.max_rel_err());
        assert!(report.check().is_ok());
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let mut m = Linear {
            w: Parameter::new("w", Tensor::full(&[1], 0.6), ParamGroup::Head),
            frozen: Parameter::new("b", Tensor::full(&[1], 0.2), ParamGroup::Head),
        };
        let report = grad_check(
            &mut m,
            |m| {
                m.w.grad.data_mut()[0] = 1.0;
                m.frozen.grad.data_mut()[0] = 0.0;
                0.0
            },
            |m| m.w.value.data()[0] * m.w.value.data()[0],
            &GradCheckConfig::default(),
        );
        match report.check() {
            Err(Error::GradCheck { param, coord, .. }) => {
                assert_eq!(param, "w");
                assert_eq!(coord, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
