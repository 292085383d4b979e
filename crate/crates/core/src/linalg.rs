//! Dense complex linear algebra helpers shared by every norm computation.
//!
//! Spectral norms are evaluated by a dense SVD while the matrix is small and
//! by power iteration on `A* A` (equivalently the Hermitian dilation) once
//! either side reaches [`DENSE_LIMIT`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Realizations at or above this side length use power iteration.
pub const DENSE_LIMIT: usize = 512;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows().max(a.ncols()) < DENSE_LIMIT {
        a.clone()
            .singular_values()
            .iter()
            .fold(0.0_f64, |m, &s| m.max(s))
    } else {
        power_top_pair(a).0
    }
}

/// Top singular triple `(sigma, u, v)` with `A v = sigma u`.
///
/// Ties between equal top singular values are broken by taking the lowest
/// index in the decomposition output, so repeated calls are deterministic.
pub fn top_singular_pair(a: &CMat) -> (f64, CVec, CVec) {
    let (r, cdim) = (a.nrows(), a.ncols());
    if r == 0 || cdim == 0 {
        return (0.0, CVec::zeros(r), CVec::zeros(cdim));
    }
    if r.max(cdim) >= DENSE_LIMIT {
        return power_top_pair(a);
    }
    let svd = a.clone().svd(true, true);
    let mut best = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > svd.singular_values[best] {
            best = k;
        }
    }
    let sigma = svd.singular_values[best];
    let u = svd.u.as_ref().expect("u requested").column(best).into_owned();
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let v = v_t.row(best).adjoint();
    if sigma == 0.0 {
        let mut u0 = CVec::zeros(r);
        let mut v0 = CVec::zeros(cdim);
        u0[0] = ONE;
        v0[0] = ONE;
        return (0.0, u0, v0);
    }
    (sigma, u, v)
}

fn power_top_pair(a: &CMat) -> (f64, CVec, CVec) {
    let n = a.ncols();
    let mut v = CVec::from_fn(n, |k, _| c(1.0 + (k as f64) * 1e-3, 0.0));
    v /= c(v.norm(), 0.0);
    let ah = a.adjoint();
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = a * &v;
        let z = &ah * &w;
        let nz = z.norm();
        if nz == 0.0 {
            break;
        }
        let next = z / c(nz, 0.0);
        let s = (a * &next).norm();
        let done = (s - sigma).abs() <= POWER_TOL * s.max(1e-300);
        sigma = s;
        v = next;
        if done {
            break;
        }
    }
    let av = a * &v;
    let s = av.norm();
    let u = if s > 0.0 {
        av / c(s, 0.0)
    } else {
        CVec::zeros(a.nrows())
    };
    (s, u, v)
}

/// All singular values, descending.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn nuclear_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().iter().sum()
}

/// The unitary (partial isometry) factor `U V*` of the thin SVD, which
/// maximizes `Re tr(G* X)` over the spectral unit ball.
pub fn polar_factor(g: &CMat) -> CMat {
    if g.nrows() == 0 || g.ncols() == 0 {
        return g.clone();
    }
    let svd = g.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    u * v_t
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Matrix unit `ε_ij` of size `n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Row-major vectorization.
pub fn vec_rows(a: &CMat) -> CVec {
    let (r, cdim) = (a.nrows(), a.ncols());
    CVec::from_fn(r * cdim, |k, _| a[(k / cdim, k % cdim)])
}

pub fn unvec_rows(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Frobenius inner product `tr(a* b)`.
pub fn frob_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Moore–Penrose pseudoinverse through the SVD with a relative cutoff.
pub fn pinv(a: &CMat) -> CMat {
    let (r, cdim) = (a.nrows(), a.ncols());
    if r == 0 || cdim == 0 {
        return CMat::zeros(cdim, r);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let cutoff = smax * 1e-13 * (r.max(cdim) as f64);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = CMat::zeros(cdim, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += (vk * uk) * c(1.0 / s, 0.0);
        }
    }
    out
}

/// Sparse matrix stored as coordinate triples; used for basis images whose
/// realizations are mostly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseMat {
    pub fn from_dense(a: &CMat) -> Self {
        let mut entries = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        SparseMat {
            rows: a.nrows(),
            cols: a.ncols(),
            entries,
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `acc += s * self`
    pub fn axpy_into(&self, s: C64, acc: &mut CMat) {
        if s == ZERO {
            return;
        }
        for &(i, j, v) in &self.entries {
            acc[(i, j)] += s * v;
        }
    }

    /// `u* self v`
    pub fn sandwich(&self, u: &CVec, v: &CVec) -> C64 {
        self.entries
            .iter()
            .map(|&(i, j, x)| u[i].conj() * x * v[j])
            .sum()
    }

    /// `tr(self* x)`
    pub fn inner_with(&self, x: &CMat) -> C64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| v.conj() * x[(i, j)])
            .sum()
    }
}
