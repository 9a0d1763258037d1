//! Dense tensors, hand-differentiated primitives, Adam and the
//! finite-difference gradient checker.

mod gradcheck;
pub mod kernels;
pub(crate) mod ops;
mod optim;
mod param;
mod tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, ParamCheck};
pub use ops::{
    dropout, dropout_backward, layer_norm, layer_norm_backward, matmul, matmul_backward,
    softmax_ce, softmax_rows, Activation, DropoutMask, LayerNormCache,
};
pub use optim::{Adam, AdamConfig};
pub use param::{
    count_trainable, for_each_param, param_infos, zero_grads, Module, ParamGroup, ParamInfo,
    Parameter,
};
pub use tensor::Tensor;

/// Floating-point element type: `f32` for training, `f64` for gradient checks.
pub trait Real:
    num_traits::Float
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    fn lit(x: f64) -> Self;
    fn f64(self) -> f64;
    fn from_f32(x: f32) -> Self;
    fn to_f32(self) -> f32;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f32(x: f32) -> Self {
        x
    }
    #[inline]
    fn to_f32(self) -> f32 {
        self
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f32(x: f32) -> Self {
        x as f64
    }
    #[inline]
    fn to_f32(self) -> f32 {
        self as f32
    }
}
