//! Linear maximization over the operator-norm unit ball of a matrix
//! subspace: `max Re Σ_k conj(g_k) z_k` subject to `‖Σ_k z_k B_k‖ ≤ 1`,
//! solved by Newton path following on `t·objective + log det(I − X* X)`.
//!
//! Coordinates are real: `c = (Re z, Im z)`.

use nalgebra::DMatrix;

use crate::linalg::{CMat, SparseMat, C64, ZERO};

const GROWTH: f64 = 40.0;
const GAP: f64 = 1e-13;
const CENTER_ITERS: usize = 60;
/// Squared Newton decrement at which a stage counts as centered; the
/// value then lies within `(cols + CENTER_TOL) / t` of the optimum.
const CENTER_TOL: f64 = 1e-8;

struct Barrier<'a> {
    basis: &'a [SparseMat],
    rows: usize,
    cols: usize,
}

struct Point {
    x: CMat,
    /// `(I − X* X)^{-1}`
    s: CMat,
}

impl Barrier<'_> {
    fn point(&self, c: &[f64]) -> Option<Point> {
        let p = self.basis.len();
        let mut x = CMat::zeros(self.rows, self.cols);
        for (k, b) in self.basis.iter().enumerate() {
            let z = C64::new(c[k], c[p + k]);
            if z != ZERO {
                b.axpy_into(z, &mut x);
            }
        }
        let m = CMat::identity(self.cols, self.cols) - x.adjoint() * &x;
        // Complex Cholesky accepts negative pivots (as imaginary roots), so
        // positivity is checked on the diagonal.
        let chol = m.cholesky()?;
        let diag = chol.l_dirty().diagonal();
        if diag.iter().any(|z| !(z.re > 0.0) || z.im.abs() > 1e-12 * z.re) {
            return None;
        }
        Some(Point { x, s: chol.inverse() })
    }

    /// Gradient and negated Hessian of `log det(I − X* X)` in real
    /// coordinates.
    ///
    /// With `T = S X*`, `R = I + X T`, the negated second derivative along
    /// complex directions `D`, `E` is `2 Re[⟨E, R D S⟩ + tr(T D T E)]`.
    fn derivatives(&self, pt: &Point) -> (Vec<f64>, DMatrix<f64>) {
        let p = self.basis.len();
        let t = &pt.s * pt.x.adjoint();
        let r = CMat::identity(self.rows, self.rows) + &pt.x * &t;
        let mut grad = vec![0.0; 2 * p];
        for (k, b) in self.basis.iter().enumerate() {
            let tau: C64 = b.entries.iter().map(|&(i, j, v)| v * t[(j, i)]).sum();
            grad[k] = -2.0 * tau.re;
            grad[p + k] = 2.0 * tau.im;
        }
        let y: Vec<CMat> = self
            .basis
            .iter()
            .map(|b| {
                let mut acc = CMat::zeros(self.rows, self.cols);
                for &(i, j, v) in &b.entries {
                    for a in 0..self.rows {
                        let ra = r[(a, i)] * v;
                        for c in 0..self.cols {
                            acc[(a, c)] += ra * pt.s[(j, c)];
                        }
                    }
                }
                acc
            })
            .collect();
        let mut neg_h = DMatrix::<f64>::zeros(2 * p, 2 * p);
        for k in 0..p {
            for l in k..p {
                // h = ⟨B_l, R B_k S⟩, g = tr(T B_k T B_l)
                let h: C64 = self.basis[l].entries.iter().map(|&(i, j, v)| v.conj() * y[k][(i, j)]).sum();
                let mut g = ZERO;
                for &(i, j, v) in &self.basis[k].entries {
                    for &(i2, j2, v2) in &self.basis[l].entries {
                        g += v * v2 * t[(j2, i)] * t[(j, i2)];
                    }
                }
                let aa = 2.0 * (h.re + g.re);
                let bb = 2.0 * (h.re - g.re);
                // (b_k, a_l) and (a_k, b_l)
                let ba = -2.0 * (h.im + g.im);
                let ab = 2.0 * (h.im - g.im);
                neg_h[(k, l)] = aa;
                neg_h[(l, k)] = aa;
                neg_h[(p + k, p + l)] = bb;
                neg_h[(p + l, p + k)] = bb;
                neg_h[(p + k, l)] = ba;
                neg_h[(l, p + k)] = ba;
                neg_h[(k, p + l)] = ab;
                neg_h[(p + l, k)] = ab;
            }
        }
        (grad, neg_h)
    }
}

/// Maximizer of `γ·c` over the unit ball, to relative accuracy about
/// `1e-13`, where `γ = (Re g, Im g)`. After each path stage `accept` sees the
/// current interior point and may end the solve early by returning true.
pub(crate) fn maximize_linear(
    basis: &[SparseMat],
    gamma: &[f64],
    accept: &mut dyn FnMut(&[f64]) -> bool,
) -> Option<Vec<f64>> {
    let p = basis.len();
    let gnorm = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
    if p == 0 || gnorm == 0.0 || gamma.len() != 2 * p {
        return None;
    }
    let bar = Barrier {
        basis,
        rows: basis[0].rows,
        cols: basis[0].cols,
    };
    let mut c = vec![0.0; 2 * p];
    let mut pt = bar.point(&c)?;
    let mut t = 1.0 / gnorm;
    loop {
        let mut prev_dec = f64::INFINITY;
        for it in 0..CENTER_ITERS {
            let (g, neg_h) = bar.derivatives(&pt);
            let grad = nalgebra::DVector::from_iterator(2 * p, g.iter().zip(gamma).map(|(a, b)| a + t * b));
            let step = match neg_h.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => neg_h.lu().solve(&grad)?,
            };
            let dec = grad.dot(&step);
            // Full Newton steps shrink the decrement quadratically; a stall
            // means roundoff dominates.
            if !(dec > CENTER_TOL) || (it >= 3 && dec > 0.5 * prev_dec) {
                break;
            }
            prev_dec = dec;
            // log det(I − X*X) is the log det of an affine LMI, hence
            // self-concordant: the damped step stays feasible.
            let lambda = dec.sqrt();
            let mut s = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
            let mut moved = false;
            while s > 1e-14 {
                let cand: Vec<f64> = c.iter().zip(step.iter()).map(|(a, b)| a + s * b).collect();
                if let Some(np) = bar.point(&cand) {
                    c = cand;
                    pt = np;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if accept(&c) {
            break;
        }
        let value = dot(gamma, &c).abs().max(f64::MIN_POSITIVE);
        if bar.cols as f64 / t <= GAP * value {
            break;
        }
        t *= GROWTH;
        if !t.is_finite() {
            break;
        }
    }
    Some(c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
