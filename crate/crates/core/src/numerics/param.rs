use serde::{Deserialize, Serialize};

use super::{Real, Tensor};

/// Which learning rate a parameter trains under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    /// Base encoder weights (embeddings, attention, FFN, norms).
    Backbone,
    /// Low-rank adapter matrices.
    Adapter,
    /// Classification or language-model output layers.
    Head,
}

/// A named trainable tensor with its gradient buffer.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub frozen: bool,
    pub group: ParamGroup,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>, group: ParamGroup) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter {
            name: name.into(),
            value,
            grad,
            frozen: false,
            group,
        }
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    pub fn trainable(&self) -> bool {
        !self.frozen
    }

    pub fn info(&self) -> ParamInfo {
        ParamInfo {
            name: self.name.clone(),
            shape: self.value.shape().to_vec(),
            frozen: self.frozen,
            group: self.group,
        }
    }

    /// Gradient buffer if this parameter is trainable.
    pub fn grad_mut(&mut self) -> Option<&mut [T]> {
        if self.frozen {
            None
        } else {
            Some(self.grad.data_mut())
        }
    }
}

/// Shape-only description of a parameter, used for accounting without
/// allocating tensors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub frozen: bool,
    pub group: ParamGroup,
}

impl ParamInfo {
    pub fn new(name: impl Into<String>, shape: &[usize], group: ParamGroup) -> Self {
        ParamInfo {
            name: name.into(),
            shape: shape.to_vec(),
            frozen: false,
            group,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Sum of sizes over non-frozen entries.
pub fn count_trainable(infos: &[ParamInfo]) -> usize {
    infos.iter().filter(|p| !p.frozen).map(ParamInfo::numel).sum()
}

/// Anything that owns parameters. Visit order is stable and defines the
/// order used by the optimizer and checkpoints.
pub trait Module<T: Real> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter<T>));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>));
}

pub fn for_each_param<T: Real, M: Module<T> + ?Sized>(m: &M) -> Vec<&Parameter<T>> {
    let mut out = Vec::new();
    m.visit(&mut |p| out.push(p));
    out
}

pub fn param_infos<T: Real, M: Module<T> + ?Sized>(m: &M) -> Vec<ParamInfo> {
    let mut out = Vec::new();
    m.visit(&mut |p| out.push(p.info()));
    out
}

pub fn zero_grads<T: Real, M: Module<T> + ?Sized>(m: &mut M) {
    m.visit_mut(&mut |p| p.grad.fill(T::zero()));
}
