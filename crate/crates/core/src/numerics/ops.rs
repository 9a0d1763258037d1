use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{mm_nn, mm_nt, mm_tn};
use super::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng;

/// `C = A·B` for 2-D tensors.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.rows() {
        return Err(Error::Shape {
            op: "matmul",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut c = Tensor::zeros(&[m, n]);
    mm_nn(a.data(), b.data(), c.data_mut(), m, k, n);
    Ok(c)
}

/// Returns `(dA, dB) = (dC·Bᵀ, Aᵀ·dC)`.
pub fn matmul_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    dc: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k || dc.shape() != [m, n] {
        return Err(Error::Shape {
            op: "matmul_backward",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut da = Tensor::zeros(&[m, k]);
    mm_nt(dc.data(), b.data(), da.data_mut(), m, n, k);
    let mut db = Tensor::zeros(&[k, n]);
    mm_tn(a.data(), dc.data(), db.data_mut(), k, m, n);
    Ok((da, db))
}

/// Pointwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Tanh,
    Sigmoid,
    Relu,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Gelu => {
                let c = T::lit(GELU_C);
                let inner = c * (x + T::lit(0.044715) * x * x * x);
                T::lit(0.5) * x * (T::one() + inner.tanh())
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative at `x`.
    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Gelu => {
                let c = T::lit(GELU_C);
                let a = T::lit(0.044715);
                let inner = c * (x + a * x * x * x);
                let t = inner.tanh();
                let dinner = c * (T::one() + T::lit(3.0) * a * x * x);
                T::lit(0.5) * (T::one() + t) + T::lit(0.5) * x * (T::one() - t * t) * dinner
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn forward<T: Real>(self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| self.apply(v))
    }

    /// `dx = dy ⊙ f'(x)`.
    pub fn backward<T: Real>(self, x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = dy.clone();
        for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
            *d *= self.derivative(xv);
        }
        dx
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Per-row values kept for the layer-norm backward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub cols: usize,
}

/// Row-wise normalization followed by `gain ⊙ x̂ + bias`.
pub fn layer_norm<T: Real>(
    x: &Tensor<T>,
    gain: &[T],
    bias: &[T],
    eps: f64,
) -> (Tensor<T>, LayerNormCache<T>) {
    let d = x.cols();
    assert_eq!(gain.len(), d, "layer_norm gain length");
    assert_eq!(bias.len(), d, "layer_norm bias length");
    let rows = x.rows();
    let mut y = Tensor::zeros(x.shape());
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    let dn = T::lit(d as f64);
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().copied().sum::<T>() / dn;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
        let istd = T::one() / (var + T::lit(eps)).sqrt();
        inv_std.push(istd);
        let yr = y.row_mut(r);
        for j in 0..d {
            let h = (row[j] - mean) * istd;
            xhat[r * d + j] = h;
            yr[j] = gain[j] * h + bias[j];
        }
    }
    (
        y,
        LayerNormCache {
            xhat,
            inv_std,
            cols: d,
        },
    )
}

/// Returns `dx`; accumulates into `dgain`/`dbias` when given.
pub fn layer_norm_backward<T: Real>(
    cache: &LayerNormCache<T>,
    gain: &[T],
    dy: &Tensor<T>,
    mut dgain: Option<&mut [T]>,
    mut dbias: Option<&mut [T]>,
) -> Tensor<T> {
    let d = cache.cols;
    let dn = T::lit(d as f64);
    let mut dx = Tensor::zeros(dy.shape());
    for (r, &istd) in cache.inv_std.iter().enumerate() {
        let dyr = dy.row(r);
        let xh = &cache.xhat[r * d..(r + 1) * d];
        if let Some(dg) = dgain.as_deref_mut() {
            for j in 0..d {
                dg[j] += dyr[j] * xh[j];
            }
        }
        if let Some(db) = dbias.as_deref_mut() {
            for j in 0..d {
                db[j] += dyr[j];
            }
        }
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for j in 0..d {
            let g = dyr[j] * gain[j];
            sum_g += g;
            sum_gx += g * xh[j];
        }
        let dxr = dx.row_mut(r);
        for j in 0..d {
            let g = dyr[j] * gain[j];
            dxr[j] = istd * (g - sum_g / dn - xh[j] * sum_gx / dn);
        }
    }
    dx
}

/// Row-wise softmax.
pub fn softmax_rows<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of `logits[n×c]` against class indices and its
/// gradient `(softmax − onehot)/n`.
pub fn softmax_ce<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let n = logits.rows();
    let c = logits.cols();
    if labels.len() != n {
        return Err(Error::Shape {
            op: "softmax_ce",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Input(format!("label {bad} out of range for {c} classes")));
    }
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = T::zero();
    let nt = T::lit(n as f64);
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[label];
        let g = grad.row_mut(r);
        for j in 0..c {
            let p = (row[j] - lse).exp();
            let onehot = if j == label { T::one() } else { T::zero() };
            g[j] = (p - onehot) / nt;
        }
    }
    Ok((loss / nt, grad))
}

/// Keep-mask and survivor scale of one dropout application.
#[derive(Clone, Debug)]
pub struct DropoutMask<T> {
    pub keep: Vec<bool>,
    pub scale: T,
}

/// Inverted dropout. The mask is a pure function of `seed`; identity when
/// `training` is false or `p == 0`.
pub fn dropout<T: Real>(
    x: &Tensor<T>,
    p: f64,
    seed: u64,
    training: bool,
) -> (Tensor<T>, Option<DropoutMask<T>>) {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if !training || p == 0.0 {
        return (x.clone(), None);
    }
    let mut rng = rng::rng(seed);
    let keep: Vec<bool> = (0..x.len()).map(|_| rng.gen::<f64>() >= p).collect();
    let scale = T::lit(1.0 / (1.0 - p));
    let mut y = x.clone();
    for (v, &k) in y.data_mut().iter_mut().zip(&keep) {
        *v = if k { *v * scale } else { T::zero() };
    }
    (y, Some(DropoutMask { keep, scale }))
}

pub fn dropout_backward<T: Real>(mask: Option<&DropoutMask<T>>, dy: &Tensor<T>) -> Tensor<T> {
    match mask {
        None => dy.clone(),
        Some(m) => {
            let mut dx = dy.clone();
            for (v, &k) in dx.data_mut().iter_mut().zip(&m.keep) {
                *v = if k { *v * m.scale } else { T::zero() };
            }
            dx
        }
    }
}
