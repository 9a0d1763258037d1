//! Affine and normalization layers shared by the encoder, heads and
//! language models.

use crate::numerics::kernels::{mm_nn, mm_nt, mm_tn};
use crate::numerics::{
    layer_norm, layer_norm_backward, LayerNormCache, ParamGroup, ParamInfo, Parameter, Real,
    Tensor,
};
use crate::rng::Rng;

pub const LN_EPS: f64 = 1e-5;

/// Shapes of a [`Linear`] built with the same arguments.
pub fn linear_layout(prefix: &str, input: usize, output: usize, group: ParamGroup) -> Vec<ParamInfo> {
    vec![
        ParamInfo::new(format!("{prefix}.weight"), &[output, input], group),
        ParamInfo::new(format!("{prefix}.bias"), &[output], group),
    ]
}

pub fn norm_layout(prefix: &str, dim: usize, group: ParamGroup) -> Vec<ParamInfo> {
    vec![
        ParamInfo::new(format!("{prefix}.gain"), &[dim], group),
        ParamInfo::new(format!("{prefix}.bias"), &[dim], group),
    ]
}

/// `y = x·Wᵀ + b` with `W: [out × in]`.
#[derive(Clone, Debug)]
pub struct Linear<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Real> Linear<T> {
    /// Uniform(±1/√in) weights, zero bias.
    pub fn new(prefix: &str, input: usize, output: usize, group: ParamGroup, rng: &mut Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Linear {
            weight: Parameter::new(
                format!("{prefix}.weight"),
                Tensor::uniform(&[output, input], bound, rng),
                group,
            ),
            bias: Parameter::new(format!("{prefix}.bias"), Tensor::zeros(&[output]), group),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, i, o) = (x.rows(), self.input_dim(), self.output_dim());
        debug_assert_eq!(x.cols(), i);
        let mut y = Tensor::zeros(&[n, o]);
        for r in 0..n {
            y.row_mut(r).copy_from_slice(self.bias.value.data());
        }
        mm_nt(x.data(), self.weight.value.data(), y.data_mut(), n, i, o);
        y
    }

    /// Accumulates weight/bias gradients (when trainable) and returns `dx`
    /// if requested.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        let (n, i, o) = (x.rows(), self.input_dim(), self.output_dim());
        if let Some(gw) = self.weight.grad_mut() {
            mm_tn(dy.data(), x.data(), gw, o, n, i);
        }
        if let Some(gb) = self.bias.grad_mut() {
            for r in 0..n {
                for (g, &d) in gb.iter_mut().zip(dy.row(r)) {
                    *g += d;
                }
            }
        }
        need_dx.then(|| {
            let mut dx = Tensor::zeros(&[n, i]);
            mm_nn(dy.data(), self.weight.value.data(), dx.data_mut(), n, o, i);
            dx
        })
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Layer normalization over the last dimension with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm<T> {
    pub gain: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(prefix: &str, dim: usize, group: ParamGroup) -> Self {
        LayerNorm {
            gain: Parameter::new(format!("{prefix}.gain"), Tensor::full(&[dim], T::one()), group),
            bias: Parameter::new(format!("{prefix}.bias"), Tensor::zeros(&[dim]), group),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, LayerNormCache<T>) {
        layer_norm(x, self.gain.value.data(), self.bias.value.data(), LN_EPS)
    }

    pub fn backward(&mut self, cache: &LayerNormCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let LayerNorm { gain, bias } = self;
        let dgain = if gain.frozen { None } else { Some(gain.grad.data_mut()) };
        let dbias = if bias.frozen { None } else { Some(bias.grad.data_mut()) };
        layer_norm_backward(cache, gain.value.data(), dy, dgain, dbias)
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>)) {
        f(&self.gain);
        f(&self.bias);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.gain);
        f(&mut self.bias);
    }
}
