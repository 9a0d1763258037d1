use serde::{Deserialize, Serialize};

use super::{Module, ParamGroup, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    /// Learning rate for head and adapter parameters.
    pub lr: f64,
    /// Learning rate for trainable backbone (encoder) parameters.
    pub backbone_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            backbone_lr: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn lr_for(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Backbone => self.backbone_lr,
            ParamGroup::Adapter | ParamGroup::Head => self.lr,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are indexed by module visit order.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Option<(Tensor<T>, Tensor<T>)>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update over every trainable parameter of `module`. Frozen
    /// parameters are left untouched.
    pub fn step<M: Module<T> + ?Sized>(&mut self, module: &mut M) {
        self.step += 1;
        let cfg = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2, eps) = (T::lit(cfg.beta1), T::lit(cfg.beta2), T::lit(cfg.eps));
        let (bc1, bc2) = (T::lit(bc1), T::lit(bc2));
        let moments = &mut self.moments;
        let mut idx = 0usize;
        module.visit_mut(&mut |p| {
            let i = idx;
            idx += 1;
            if p.frozen {
                return;
            }
            if moments.len() <= i {
                moments.resize_with(i + 1, || None);
            }
            let (m, v) = moments[i].get_or_insert_with(|| {
                (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape()))
            });
            let lr = T::lit(cfg.lr_for(p.group));
            let (w, g) = (p.value.data_mut(), p.grad.data());
            for j in 0..w.len() {
                let gj = g[j];
                let mj = b1 * m.data()[j] + (T::one() - b1) * gj;
                let vj = b2 * v.data()[j] + (T::one() - b2) * gj * gj;
                m.data_mut()[j] = mj;
                v.data_mut()[j] = vj;
                let mhat = mj / bc1;
                let vhat = vj / bc2;
                w[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Parameter;
    use proptest::prelude::*;

    struct Bag(Vec<Parameter<f64>>);

    impl Module<f64> for Bag {
        fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<f64>)) {
            self.0.iter().for_each(f);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<f64>)) {
            self.0.iter_mut().for_each(f);
        }
    }

    fn scalar(v: f64, g: f64, frozen: bool) -> Parameter<f64> {
        let mut p = Parameter::new("p", Tensor::full(&[1], v), ParamGroup::Head);
        p.grad = Tensor::full(&[1], g);
        p.frozen = frozen;
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut bag = Bag(vec![scalar(0.3, 0.0, false)]);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..3 {
            adam.step(&mut bag);
        }
        assert_eq!(bag.0[0].value.data()[0], 0.3);
    }

    #[test]
    fn frozen_parameter_untouched() {
        let mut bag = Bag(vec![scalar(0.3, 5.0, true)]);
        Adam::new(AdamConfig::default()).step(&mut bag);
        assert_eq!(bag.0[0].value.data()[0], 0.3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut bag = Bag(vec![scalar(1.0, 1.0, false)]);
        let mut adam = Adam::new(AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        });
        adam.step(&mut bag);
        assert!((bag.0[0].value.data()[0] - 0.9).abs() < 1e-6);
        assert_eq!(adam.steps(), 1);
    }

    proptest! {
        #[test]
        fn never_mutates_frozen(mask in proptest::collection::vec(any::<bool>(), 1..8), steps in 1usize..4) {
            let mut bag = Bag(mask.iter().enumerate()
                .map(|(i, &f)| scalar(i as f64, 1.0 + i as f64, f)).collect());
            let mut adam = Adam::new(AdamConfig::default());
            for _ in 0..steps { adam.step(&mut bag); }
            for (i, p) in bag.0.iter().enumerate() {
                if mask[i] {
                    prop_assert_eq!(p.value.data()[0].to_bits(), (i as f64).to_bits());
                } else {
                    prop_assert!(p.value.data()[0] < i as f64);
                }
            }
        }
    }
}
