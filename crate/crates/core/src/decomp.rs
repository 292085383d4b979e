//! Decomposition upper bounds for the Haagerup, operator-space projective
//! and Schur tensor norms, each paired with the min norm as lower bound.
//!
//! Every decomposition starts from a rank factorization of the coefficient
//! matrix `U[(i,r),(l,s)] = u_il^{rs}`, i.e. `u = Σ_k e_k ⊙ f_k` with columns
//! `e_k ∈ M_{n,1}(E)` and rows `f_k ∈ M_{1,n}(F)`, and then optimizes the
//! gauge `(E G, G⁻¹ F)` which leaves `u` unchanged.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{EstimatorConfig, NormEstimate, Witness};
use crate::linalg::{c, spectral_norm, CMat, C64, ZERO};
use crate::random::{random_matrix, rng_from_seed};
use crate::space::{min_tensor_in, ConcreteSpace, MatElement, TensorElement};

const RESIDUAL_TOL: f64 = 1e-8;
const ROUNDS: usize = 200;
const RESTARTS: usize = 8;
const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompMode {
    /// `α (e ⊗ f) β`
    Otimes,
    /// `α (e ⊙ f) β`, `(e ⊙ f)_ij = Σ_k e_ik ⊗ f_kj`
    Odot,
    /// `α (e • f) β`, `(e • f)_ij = e_ij ⊗ f_ij`
    Bullet,
}

impl DecompMode {
    pub fn label(self) -> &'static str {
        match self {
            DecompMode::Otimes => "projective",
            DecompMode::Odot => "haagerup",
            DecompMode::Bullet => "schur",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub alpha: CMat,
    pub e: MatElement,
    pub f: MatElement,
    pub beta: CMat,
    pub mode: DecompMode,
}

impl Decomposition {
    /// `‖α‖ ‖e‖ ‖f‖ ‖β‖`.
    pub fn cost(&self) -> f64 {
        spectral_norm(&self.alpha) * self.e.min_norm() * self.f.min_norm() * spectral_norm(&self.beta)
    }

    /// The product `α (e ∘ f) β` over the given tensor space.
    pub fn assemble(&self, tensor_space: Arc<ConcreteSpace>) -> Result<MatElement> {
        let inner = match self.mode {
            DecompMode::Otimes => min_tensor_in(&self.e, &self.f, tensor_space)?,
            DecompMode::Odot | DecompMode::Bullet => {
                let p = self.e.level();
                if self.f.level() != p {
                    return Err(Error::shape("matrix-style products need equal levels"));
                }
                let (me, mf) = (self.e.space().dim(), self.f.space().dim());
                let mut coeffs = vec![ZERO; p * p * me * mf];
                for a in 0..p {
                    for b in 0..p {
                        let dst = (a * p + b) * me * mf;
                        let ks: Vec<usize> = match self.mode {
                            DecompMode::Odot => (0..p).collect(),
                            _ => vec![usize::MAX],
                        };
                        for k in ks {
                            let (ea, fb) = if k == usize::MAX {
                                (self.e.entry(a, b), self.f.entry(a, b))
                            } else {
                                (self.e.entry(a, k), self.f.entry(k, b))
                            };
                            for (r, x) in ea.iter().enumerate() {
                                if *x == ZERO {
                                    continue;
                                }
                                for (s, y) in fb.iter().enumerate() {
                                    coeffs[dst + r * mf + s] += x * y;
                                }
                            }
                        }
                    }
                }
                MatElement::new(tensor_space, p, coeffs)?
            }
        };
        inner.compress(&self.alpha, &self.beta)
    }

    /// Euclidean distance between the assembled coefficients and `u`.
    pub fn residual(&self, u: &TensorElement) -> Result<f64> {
        let got = self.assemble(u.element().space().clone())?;
        if got.level() != u.level() {
            return Err(Error::shape("decomposition assembles to the wrong level"));
        }
        Ok(got
            .coeffs()
            .iter()
            .zip(u.coeffs())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Rank factorization `U = E F` with `E: (n m_E) × K`, `F: K × (n m_F)`.
struct Factors {
    n: usize,
    e: CMat,
    f: CMat,
}

fn rank_factors(u: &TensorElement, cap: usize) -> Factors {
    let n = u.level();
    let (me, mf) = (u.left().dim(), u.right().dim());
    let mat = CMat::from_fn(n * me, n * mf, |row, col| {
        u.coeff(row / me, col / mf, row % me, col % mf)
    });
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| svd.singular_values[k] > RANK_CUTOFF * smax && smax > 0.0)
        .take(cap)
        .collect();
    let uu = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let kdim = keep.len();
    let mut e = CMat::zeros(n * me, kdim);
    let mut f = CMat::zeros(kdim, n * mf);
    for (k, &idx) in keep.iter().enumerate() {
        let s = svd.singular_values[idx].sqrt();
        e.set_column(k, &(uu.column(idx) * c(s, 0.0)));
        f.set_row(k, &(vt.row(idx) * c(s, 0.0)));
    }
    Factors { n, e, f }
}

/// Realization of the column block `cols` of `E` as an element of
/// `M_{n, |cols|}(E)`.
fn column_realization(space: &ConcreteSpace, n: usize, e: &CMat, cols: std::ops::Range<usize>) -> CMat {
    let (m, d) = (space.dim(), space.ambient_dim());
    let width = cols.len();
    let mut out = CMat::zeros(n * d, width * d);
    for i in 0..n {
        for (kk, k) in cols.clone().enumerate() {
            let coords: Vec<C64> = (0..m).map(|r| e[(i * m + r, k)]).collect();
            out.view_mut((i * d, kk * d), (d, d)).copy_from(&space.combine(&coords));
        }
    }
    out
}

/// Realization of the row block `rows` of `F` as an element of
/// `M_{|rows|, n}(F)`.
fn row_realization(space: &ConcreteSpace, n: usize, f: &CMat, rows: std::ops::Range<usize>) -> CMat {
    let (m, d) = (space.dim(), space.ambient_dim());
    let height = rows.len();
    let mut out = CMat::zeros(height * d, n * d);
    for (kk, k) in rows.clone().enumerate() {
        for l in 0..n {
            let coords: Vec<C64> = (0..m).map(|s| f[(k, l * m + s)]).collect();
            out.view_mut((kk * d, l * d), (d, d)).copy_from(&space.combine(&coords));
        }
    }
    out
}

struct GaugeProblem<'a> {
    left: &'a ConcreteSpace,
    right: &'a ConcreteSpace,
    factors: &'a Factors,
    mode: DecompMode,
}

impl GaugeProblem<'_> {
    fn k(&self) -> usize {
        self.factors.e.ncols()
    }

    fn parts(&self, g: &CMat) -> Option<(CMat, CMat)> {
        let ginv = g.clone().try_inverse()?;
        Some((&self.factors.e * g, ginv * &self.factors.f))
    }

    /// Per-term norms `(‖e_k‖, ‖f_k‖)`.
    fn term_norms(&self, e: &CMat, f: &CMat) -> Vec<(f64, f64)> {
        let n = self.factors.n;
        (0..self.k())
            .map(|k| {
                (
                    spectral_norm(&column_realization(self.left, n, e, k..k + 1)),
                    spectral_norm(&row_realization(self.right, n, f, k..k + 1)),
                )
            })
            .collect()
    }

    fn cost_of(&self, e: &CMat, f: &CMat) -> f64 {
        let n = self.factors.n;
        let k = self.k();
        match self.mode {
            DecompMode::Odot => {
                spectral_norm(&column_realization(self.left, n, e, 0..k))
                    * spectral_norm(&row_realization(self.right, n, f, 0..k))
            }
            DecompMode::Otimes => self.term_norms(e, f).iter().map(|(a, b)| a * b).sum(),
            DecompMode::Bullet => n as f64 * self.term_norms(e, f).iter().map(|(a, b)| a * b).sum::<f64>(),
        }
    }

    fn log_cost(&self, g: &CMat) -> f64 {
        match self.parts(g) {
            Some((e, f)) => {
                let v = self.cost_of(&e, &f);
                if v > 0.0 && v.is_finite() {
                    v.ln()
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    }

    fn gradient(&self, g: &CMat, f0: f64) -> CMat {
        let k = self.k();
        let h = 1e-6 * (1.0 + g.norm() / (k as f64));
        let mut grad = CMat::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                for (dir, unit) in [(0, c(1.0, 0.0)), (1, c(0.0, 1.0))] {
                    let mut gp = g.clone();
                    gp[(i, j)] += unit * h;
                    let mut gm = g.clone();
                    gm[(i, j)] -= unit * h;
                    let (fp, fm) = (self.log_cost(&gp), self.log_cost(&gm));
                    let d = if fp.is_finite() && fm.is_finite() {
                        (fp - fm) / (2.0 * h)
                    } else if fp.is_finite() {
                        (fp - f0) / h
                    } else {
                        0.0
                    };
                    if dir == 0 {
                        grad[(i, j)].re = d;
                    } else {
                        grad[(i, j)].im = d;
                    }
                }
            }
        }
        grad
    }

    fn descend(&self, mut g: CMat) -> (f64, CMat, usize) {
        let mut val = self.log_cost(&g);
        let mut rounds = 0;
        if !val.is_finite() {
            return (val, g, 0);
        }
        for round in 0..ROUNDS {
            rounds = round + 1;
            let grad = self.gradient(&g, val);
            let gn = grad.norm();
            if gn < 1e-12 {
                break;
            }
            let mut t = g.norm() / gn;
            let mut moved = false;
            for _ in 0..30 {
                let cand = &g - &grad * c(t, 0.0);
                let cv = self.log_cost(&cand);
                if cv < val {
                    let gain = val - cv;
                    g = cand;
                    val = cv;
                    moved = gain > 1e-13;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (val, g, rounds)
    }
}

/// The decomposition for a gauge, balanced so the parts have equal norms.
fn build(problem: &GaugeProblem<'_>, left: &Arc<ConcreteSpace>, right: &Arc<ConcreteSpace>, g: &CMat) -> Result<Decomposition> {
    let (e, f) = problem.parts(g).ok_or_else(|| Error::shape("singular gauge"))?;
    let n = problem.factors.n;
    let k = problem.k();
    let (me, mf) = (left.dim(), right.dim());
    match problem.mode {
        DecompMode::Odot => {
            let p = n.max(k);
            let mut ec = vec![ZERO; p * p * me];
            let mut fc = vec![ZERO; p * p * mf];
            for i in 0..n {
                for kk in 0..k {
                    for r in 0..me {
                        ec[(i * p + kk) * me + r] = e[(i * me + r, kk)];
                    }
                }
            }
            for kk in 0..k {
                for l in 0..n {
                    for s in 0..mf {
                        fc[(kk * p + l) * mf + s] = f[(kk, l * mf + s)];
                    }
                }
            }
            let mut ee = MatElement::new(left.clone(), p, ec)?;
            let mut ff = MatElement::new(right.clone(), p, fc)?;
            let (ne, nf) = (ee.min_norm(), ff.min_norm());
            if ne > 0.0 && nf > 0.0 {
                let t = (nf / ne).sqrt();
                ee = ee.scale(c(t, 0.0));
                ff = ff.scale(c(1.0 / t, 0.0));
            }
            let alpha = CMat::from_fn(n, p, |i, j| if i == j { c(1.0, 0.0) } else { ZERO });
            let beta = CMat::from_fn(p, n, |i, j| if i == j { c(1.0, 0.0) } else { ZERO });
            Ok(Decomposition {
                alpha,
                e: ee,
                f: ff,
                beta,
                mode: DecompMode::Odot,
            })
        }
        DecompMode::Otimes | DecompMode::Bullet => {
            let norms = problem.term_norms(&e, &f);
            let terms: Vec<usize> = (0..k).filter(|&t| norms[t].0 > 0.0 && norms[t].1 > 0.0).collect();
            let p = n * terms.len().max(1);
            let mut ec = vec![ZERO; p * p * me];
            let mut fc = vec![ZERO; p * p * mf];
            let bullet = problem.mode == DecompMode::Bullet;
            let (alpha_cols, beta_rows) = if bullet { (p, p) } else { (p * p, p * p) };
            let mut alpha = CMat::zeros(n, alpha_cols);
            let mut beta = CMat::zeros(beta_rows, n);
            for (slot, &t) in terms.iter().enumerate() {
                let (ne, nf) = norms[t];
                let weight = c((ne * nf).sqrt(), 0.0);
                for i in 0..n {
                    for r in 0..me {
                        let v = e[(i * me + r, t)] / ne;
                        if bullet {
                            for l in 0..n {
                                ec[((slot * n + i) * p + slot * n + l) * me + r] = v;
                            }
                        } else {
                            ec[((slot * n + i) * p + slot) * me + r] = v;
                        }
                    }
                }
                for l in 0..n {
                    for s in 0..mf {
                        let v = f[(t, l * mf + s)] / nf;
                        if bullet {
                            for i in 0..n {
                                fc[((slot * n + i) * p + slot * n + l) * mf + s] = v;
                            }
                        } else {
                            fc[(slot * p + slot * n + l) * mf + s] = v;
                        }
                    }
                }
                for i in 0..n {
                    if bullet {
                        alpha[(i, slot * n + i)] = weight;
                        beta[(slot * n + i, i)] = weight;
                    } else {
                        // row (a, b) of e ⊗ f is a p + b
                        alpha[(i, (slot * n + i) * p + slot)] = weight;
                        beta[(slot * p + slot * n + i, i)] = weight;
                    }
                }
            }
            Ok(Decomposition {
                alpha,
                e: MatElement::new(left.clone(), p, ec)?,
                f: MatElement::new(right.clone(), p, fc)?,
                beta,
                mode: problem.mode,
            })
        }
    }
}

fn decomposition_upper(u: &TensorElement, mode: DecompMode, cap: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    if cap == 0 {
        return Err(Error::shape("rank/size cap must be at least 1"));
    }
    cfg.validate()?;
    let lower = u.min_norm();
    if lower == 0.0 {
        let mut est = NormEstimate::exact(0.0);
        est.notes.push(format!("{} norm of zero", mode.label()));
        return Ok(est);
    }
    let factors = rank_factors(u, cap);
    let problem = GaugeProblem {
        left: u.left(),
        right: u.right(),
        factors: &factors,
        mode,
    };
    let k = problem.k();
    let restarts = RESTARTS.min(cfg.restarts.max(1));
    let runs: Vec<(f64, CMat, usize)> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let g0 = if i == 0 {
                CMat::identity(k, k)
            } else {
                let mut rng = rng_from_seed(cfg.seed.wrapping_add(i as u64));
                CMat::identity(k, k) + random_matrix(&mut rng, k, k) * c(0.5 / (k as f64).sqrt(), 0.0)
            };
            problem.descend(g0)
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.0 < runs[best].0 {
            best = i;
        }
    }
    let iterations = runs.iter().map(|r| r.2).sum();
    let decomp = build(&problem, u.left(), u.right(), &runs[best].1)?;
    let resid = decomp.residual(u)?;
    let scale = u.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    let mut est = if resid <= RESIDUAL_TOL * scale {
        let mut est = NormEstimate::bracket(lower, decomp.cost());
        est.converged = true;
        est
    } else {
        let mut est = NormEstimate::bracket(lower, f64::INFINITY);
        est.converged = false;
        est.notes.push(format!(
            "decomposition residual {resid:.3e} exceeds tolerance at cap {cap}"
        ));
        est
    };
    est.iterations = iterations;
    est.notes.push(format!("{} upper over {k} terms", mode.label()));
    Ok(est.with_witness(Witness::Decomposition(Box::new(decomp))))
}

/// `‖u‖_h ≤ upper`, `lower = ‖u‖_min`.
pub fn haagerup_upper(u: &TensorElement, rank_cap: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    decomposition_upper(u, DecompMode::Odot, rank_cap, cfg)
}

/// `‖u‖_∧ ≤ upper`, `lower = ‖u‖_min`.
pub fn projective_upper(u: &TensorElement, size_cap: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    decomposition_upper(u, DecompMode::Otimes, size_cap, cfg)
}

/// `‖u‖_s ≤ upper`, `lower = ‖u‖_min`.
pub fn schur_upper(u: &TensorElement, size_cap: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    decomposition_upper(u, DecompMode::Bullet, size_cap, cfg)
}

pub fn decomposition_bound(u: &TensorElement, mode: DecompMode, cap: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    decomposition_upper(u, mode, cap, cfg)
}
