//! Slice-level matrix kernels over row-major storage. All of them
//! accumulate into `out`.

use super::Real;

/// `out[m×n] += a[m×k] · b[k×n]`
pub fn mm_nn<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`
pub fn mm_nt<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += dot(arow, brow);
        }
    }
}

/// `out[m×n] += a[k×m]ᵀ · b[k×n]`
pub fn mm_tn<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// `y[rows] += w[rows×cols] · x[cols]`
#[inline]
pub fn matvec_acc<T: Real>(w: &[T], x: &[T], y: &mut [T]) {
    let cols = x.len();
    for (r, out) in y.iter_mut().enumerate() {
        *out += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `x[cols] += w[rows×cols]ᵀ · y[rows]`
#[inline]
pub fn matvec_t_acc<T: Real>(w: &[T], y: &[T], x: &mut [T]) {
    let cols = x.len();
    for (r, &yv) in y.iter().enumerate() {
        if yv == T::zero() {
            continue;
        }
        for (xo, &wv) in x.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *xo += wv * yv;
        }
    }
}

/// `w[rows×cols] += y[rows] ⊗ x[cols]`
#[inline]
pub fn outer_acc<T: Real>(y: &[T], x: &[T], w: &mut [T]) {
    let cols = x.len();
    for (r, &yv) in y.iter().enumerate() {
        if yv == T::zero() {
            continue;
        }
        for (wo, &xv) in w[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *wo += yv * xv;
        }
    }
}

#[inline]
pub fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
