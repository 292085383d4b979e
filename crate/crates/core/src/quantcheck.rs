//! Falsification checks of Ruan's axioms for candidate matrix-norm
//! sequences, and the MIN quantization of a finite-dimensional normed space.
//!
//! Matrix data over a base space of dimension `m` uses the same layout as
//! [`MatElement`]: coefficient `(i n + j) m + r`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{EstimatorConfig, NormEstimate, Witness};
use crate::linalg::{spectral_norm, top_singular_pair, CMat, CVec, C64, ZERO};
use crate::random::{gaussian_vec, random_matrix, rng_from_seed};
use crate::space::{ConcreteSpace, MatElement};

/// Excesses above this are recorded as violations.
pub const VIOLATION_TOL: f64 = 1e-8;
const REFINE_STEPS: usize = 200;
const PHASE_BUDGET: usize = 512;

/// A candidate sequence of norms `‖·‖_n` on `M_n(X)`.
pub trait MatrixNormOracle: Send + Sync {
    fn label(&self) -> String;
    /// Dimension of the base space.
    fn base_dim(&self) -> usize;
    fn norm(&self, level: usize, coeffs: &[C64]) -> Result<f64>;
}

fn checked_norm(oracle: &dyn MatrixNormOracle, level: usize, coeffs: &[C64]) -> Result<f64> {
    let m = oracle.base_dim();
    if coeffs.len() != level * level * m {
        return Err(Error::shape(format!(
            "level {level} data over a {m}-dimensional space needs {} coefficients, got {}",
            level * level * m,
            coeffs.len()
        )));
    }
    match oracle.norm(level, coeffs) {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(oracle_error(oracle, level, coeffs, format!("returned {v}"))),
        Err(e) => Err(oracle_error(oracle, level, coeffs, e.to_string())),
    }
}

fn oracle_error(oracle: &dyn MatrixNormOracle, level: usize, coeffs: &[C64], reason: String) -> Error {
    Error::Oracle {
        oracle: oracle.label(),
        input: format!("level {level}, coeffs {coeffs:?}"),
        reason,
    }
}

/// The concrete min norm of a [`ConcreteSpace`].
pub struct MinOracle {
    space: Arc<ConcreteSpace>,
}

impl MinOracle {
    pub fn new(space: Arc<ConcreteSpace>) -> Self {
        MinOracle { space }
    }
}

impl MatrixNormOracle for MinOracle {
    fn label(&self) -> String {
        format!("min:{}", self.space.label())
    }
    fn base_dim(&self) -> usize {
        self.space.dim()
    }
    fn norm(&self, level: usize, coeffs: &[C64]) -> Result<f64> {
        Ok(MatElement::new(self.space.clone(), level, coeffs.to_vec())?.min_norm())
    }
}

/// Frobenius norm of the realization at every level.
pub struct FrobeniusOracle {
    space: Arc<ConcreteSpace>,
}

impl FrobeniusOracle {
    pub fn new(space: Arc<ConcreteSpace>) -> Self {
        FrobeniusOracle { space }
    }
}

impl MatrixNormOracle for FrobeniusOracle {
    fn label(&self) -> String {
        format!("frobenius:{}", self.space.label())
    }
    fn base_dim(&self) -> usize {
        self.space.dim()
    }
    fn norm(&self, level: usize, coeffs: &[C64]) -> Result<f64> {
        Ok(MatElement::new(self.space.clone(), level, coeffs.to_vec())?.realize().norm())
    }
}

/// `scale · Σ |a_ij|` on `M_n(ℂ)`.
pub struct EntrywiseL1Oracle {
    scale: f64,
}

impl EntrywiseL1Oracle {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidSpace("scale must be positive".into()));
        }
        Ok(EntrywiseL1Oracle { scale })
    }
}

impl MatrixNormOracle for EntrywiseL1Oracle {
    fn label(&self) -> String {
        format!("l1:{}", self.scale)
    }
    fn base_dim(&self) -> usize {
        1
    }
    fn norm(&self, _level: usize, coeffs: &[C64]) -> Result<f64> {
        Ok(self.scale * coeffs.iter().map(|z| z.norm()).sum::<f64>())
    }
}

/// A finite-dimensional normed space given by coordinates.
#[derive(Debug, Clone)]
pub enum NormedSpaceOracle {
    /// `ℓ^p` on `ℂ^m`, `p ≥ 1` or `f64::INFINITY`.
    Lp { p: f64, m: usize },
    /// The level-one norm of a concrete operator space.
    Concrete(Arc<ConcreteSpace>),
}

impl NormedSpaceOracle {
    pub fn lp(p: f64, m: usize) -> Result<Self> {
        if m == 0 || p.is_nan() || p < 1.0 {
            return Err(Error::InvalidSpace(format!("ℓ^{p} on ℂ^{m} is not a normed space")));
        }
        Ok(NormedSpaceOracle::Lp { p, m })
    }

    pub fn concrete(space: Arc<ConcreteSpace>) -> Self {
        NormedSpaceOracle::Concrete(space)
    }

    /// `"l1:m" | "linf:m" | "lp:p:m" | "<space shorthand>"`.
    pub fn from_shorthand(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::parse("normed space", format!("bad dimension `{t}` in `{s}`")))
        };
        match parts.as_slice() {
            ["l1", m] => Self::lp(1.0, num(m)?),
            ["linf", m] => Self::lp(f64::INFINITY, num(m)?),
            ["lp", p, m] => {
                let p = p
                    .parse::<f64>()
                    .map_err(|_| Error::parse("normed space", format!("bad exponent in `{s}`")))?;
                Self::lp(p, num(m)?)
            }
            _ => Ok(Self::concrete(Arc::new(crate::lambdaclass::parse_shorthand(s)?))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            NormedSpaceOracle::Lp { p, m } if p.is_infinite() => format!("linf:{m}"),
            NormedSpaceOracle::Lp { p, m } if *p == 1.0 => format!("l1:{m}"),
            NormedSpaceOracle::Lp { p, m } => format!("lp:{p}:{m}"),
            NormedSpaceOracle::Concrete(s) => s.label().to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NormedSpaceOracle::Lp { m, .. } => *m,
            NormedSpaceOracle::Concrete(s) => s.dim(),
        }
    }

    pub fn norm(&self, x: &[C64]) -> f64 {
        match self {
            NormedSpaceOracle::Lp { p, .. } => lp_norm(x, *p),
            NormedSpaceOracle::Concrete(s) => spectral_norm(&s.combine(x)),
        }
    }

    /// A finite dual family whose sup is exact, or exact up to the returned
    /// relative defect `δ`: the true MIN norm is at most `value / (1 − δ)`.
    fn dual_family(&self) -> Option<(Vec<Vec<C64>>, f64)> {
        match self {
            NormedSpaceOracle::Lp { p, m } if p.is_infinite() => Some((unit_vectors(*m), 0.0)),
            NormedSpaceOracle::Lp { p, m } if *p == 1.0 => Some(phase_grid(*m)),
            NormedSpaceOracle::Concrete(s) if s.is_commutative_subspace() => {
                let d = s.ambient_dim();
                let family = (0..d)
                    .map(|k| s.basis().iter().map(|b| b[(k, k)]).collect())
                    .collect();
                Some((family, 0.0))
            }
            _ => None,
        }
    }

    /// `Σ_r ‖x_r‖_X ‖u_r‖` style bound for `u = Σ_r u_r ⊗ δ_r`.
    fn triangle_bound(&self, slices: &[CMat]) -> f64 {
        let m = self.dim();
        (0..m)
            .map(|r| {
                let mut e = vec![ZERO; m];
                e[r] = C64::new(1.0, 0.0);
                self.norm(&e) * spectral_norm(&slices[r])
            })
            .sum()
    }
}

fn lp_norm(x: &[C64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        x.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn unit_vectors(m: usize) -> Vec<Vec<C64>> {
    (0..m)
        .map(|k| {
            let mut e = vec![ZERO; m];
            e[k] = C64::new(1.0, 0.0);
            e
        })
        .collect()
}

/// Unimodular vectors with first entry 1 and the remaining phases on a
/// uniform grid of `g` points.
fn phase_grid(m: usize) -> (Vec<Vec<C64>>, f64) {
    if m == 1 {
        return (vec![vec![C64::new(1.0, 0.0)]], 0.0);
    }
    let g = ((PHASE_BUDGET as f64).powf(1.0 / (m - 1) as f64).floor() as usize).max(4);
    let total = g.pow((m - 1) as u32);
    let family = (0..total)
        .map(|mut idx| {
            let mut f = vec![C64::new(1.0, 0.0)];
            for _ in 1..m {
                let k = idx % g;
                idx /= g;
                f.push(C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / g as f64));
            }
            f
        })
        .collect();
    let delta = 2.0 * (std::f64::consts::PI / (2.0 * g as f64)).sin();
    (family, delta)
}

/// Splits level-`n` data into the `m` scalar slices `u_r ∈ M_n`.
fn slices(n: usize, m: usize, coeffs: &[C64]) -> Vec<CMat> {
    (0..m)
        .map(|r| CMat::from_fn(n, n, |i, j| coeffs[(i * n + j) * m + r]))
        .collect()
}

fn contract(slices: &[CMat], f: &[C64]) -> CMat {
    let n = slices[0].nrows();
    let mut out = CMat::zeros(n, n);
    for (s, fr) in slices.iter().zip(f) {
        if *fr != ZERO {
            out += s * *fr;
        }
    }
    out
}

/// `sup_f ‖(id_n ⊗ f)(u)‖` over an explicit dual family.
fn family_sup(slices: &[CMat], family: &[Vec<C64>]) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (k, f) in family.iter().enumerate() {
        let v = spectral_norm(&contract(slices, f));
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

/// Polar ascent over the dual ball for `ℓ^p`, `1 < p < ∞`.
fn lp_dual_ascent(slices: &[CMat], p: f64, start: Vec<C64>, cfg: &EstimatorConfig) -> (f64, Vec<C64>, usize) {
    let mut f = holder_max(&start, p);
    let mut value = spectral_norm(&contract(slices, &f));
    let mut iters = 0;
    for _ in 0..cfg.max_iter {
        iters += 1;
        let (_, a, b) = top_singular_pair(&contract(slices, &f));
        let c: Vec<C64> = slices.iter().map(|s| (a.adjoint() * s * &b)[(0, 0)]).collect();
        let next = holder_max(&c, p);
        let v = spectral_norm(&contract(slices, &next));
        if v <= value * (1.0 + cfg.tol) {
            if v > value {
                value = v;
                f = next;
            }
            break;
        }
        value = v;
        f = next;
    }
    (value, f, iters)
}

/// Maximizer of `Re Σ f_r c_r` over the dual unit ball of `ℓ^p`.
fn holder_max(c: &[C64], p: f64) -> Vec<C64> {
    let norm = lp_norm(c, p);
    if norm == 0.0 {
        let mut f = vec![ZERO; c.len()];
        f[0] = C64::new(lp_norm(&[C64::new(1.0, 0.0)], p).recip(), 0.0);
        return f;
    }
    c.iter()
        .map(|z| {
            if *z == ZERO {
                ZERO
            } else {
                (z.conj() / z.norm()) * (z.norm() / norm).powf(p - 1.0)
            }
        })
        .collect()
}

/// Alternating ascent over rank-one trace-class functionals `x ↦ w* x v`.
fn concrete_dual_ascent(
    space: &ConcreteSpace,
    slices: &[CMat],
    start: (CVec, CVec),
    cfg: &EstimatorConfig,
) -> (f64, Vec<C64>, usize) {
    let eval = |v: &CVec, w: &CVec| -> Vec<C64> {
        space
            .basis()
            .iter()
            .map(|b| (w.adjoint() * b * v)[(0, 0)])
            .collect()
    };
    let mut f = eval(&start.0.normalize(), &start.1.normalize());
    let mut value = spectral_norm(&contract(slices, &f));
    let mut iters = 0;
    for _ in 0..cfg.max_iter {
        iters += 1;
        let (_, a, b) = top_singular_pair(&contract(slices, &f));
        let c: Vec<C64> = slices.iter().map(|s| (a.adjoint() * s * &b)[(0, 0)]).collect();
        let (_, wn, vn) = top_singular_pair(&space.combine(&c));
        let next = eval(&vn, &wn);
        let val = spectral_norm(&contract(slices, &next));
        if val <= value * (1.0 + cfg.tol) {
            if val > value {
                value = val;
                f = next;
            }
            break;
        }
        value = val;
        f = next;
    }
    (value, f, iters)
}

/// `‖u‖_{M_n(MIN(X))} = sup_{f ∈ Ball(X*)} ‖(id_n ⊗ f)(u)‖_{M_n}`.
///
/// The witness is the best dual functional found, as coordinates `f(δ_r)`.
pub fn min_quantize_norm(x: &NormedSpaceOracle, level: usize, coeffs: &[C64], cfg: &EstimatorConfig) -> Result<NormEstimate> {
    cfg.validate()?;
    let m = x.dim();
    if level == 0 || coeffs.len() != level * level * m {
        return Err(Error::shape(format!(
            "level {level} data over a {m}-dimensional space needs {} coefficients",
            level * level * m
        )));
    }
    if coeffs.iter().all(|z| *z == ZERO) {
        return Ok(NormEstimate::exact(0.0));
    }
    let sl = slices(level, m, coeffs);
    let triangle = x.triangle_bound(&sl);
    let (lower, f, iters, grid_upper) = match x.dual_family() {
        Some((family, delta)) => {
            let (v, k) = family_sup(&sl, &family);
            let up = if delta == 0.0 { v } else { v / (1.0 - delta) };
            (v, family[k].clone(), family.len(), up)
        }
        None => {
            let runs: Vec<(f64, Vec<C64>, usize)> = (0..cfg.restarts.max(1))
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(cfg.seed.wrapping_add(i as u64));
                    match x {
                        NormedSpaceOracle::Lp { p, .. } => lp_dual_ascent(&sl, *p, gaussian_vec(&mut rng, m), cfg),
                        NormedSpaceOracle::Concrete(s) => {
                            let d = s.ambient_dim();
                            let start = (CVec::from_vec(gaussian_vec(&mut rng, d)), CVec::from_vec(gaussian_vec(&mut rng, d)));
                            concrete_dual_ascent(s, &sl, start, cfg)
                        }
                    }
                })
                .collect();
            let mut best = 0;
            for (k, r) in runs.iter().enumerate() {
                if r.0 > runs[best].0 {
                    best = k;
                }
            }
            let iters = runs.iter().map(|r| r.2).sum();
            let (v, f, _) = runs.into_iter().nth(best).expect("at least one restart");
            (v, f, iters, f64::INFINITY)
        }
    };
    let mut upper = triangle.min(grid_upper);
    let mut note = None;
    if let NormedSpaceOracle::Concrete(s) = x {
        let concrete = MatElement::new(s.clone(), level, coeffs.to_vec())?.min_norm();
        if concrete < upper {
            upper = concrete;
            note = Some("upper from the concrete min norm".to_string());
        }
    }
    let mut est = NormEstimate::bracket(lower, upper);
    est.iterations = iters;
    est.converged = true;
    est.settle();
    est.notes.extend(note);
    Ok(est.with_witness(Witness::Functional(f)))
}

/// The MIN quantization of a normed space as a matrix-norm sequence, using
/// the lower bound of [`min_quantize_norm`].
pub struct MinQuantizedOracle {
    space: NormedSpaceOracle,
    cfg: EstimatorConfig,
}

impl MinQuantizedOracle {
    pub fn new(space: NormedSpaceOracle, cfg: EstimatorConfig) -> Self {
        MinQuantizedOracle { space, cfg }
    }
}

impl MatrixNormOracle for MinQuantizedOracle {
    fn label(&self) -> String {
        format!("minq:{}", self.space.label())
    }
    fn base_dim(&self) -> usize {
        self.space.dim()
    }
    fn norm(&self, level: usize, coeffs: &[C64]) -> Result<f64> {
        Ok(min_quantize_norm(&self.space, level, coeffs, &self.cfg)?.lower)
    }
}

/// Oracle registry: `min:<space>`, `frobenius:<space>`, `l1[:scale]`,
/// `minq:<normed space>`.
pub fn oracle_by_label(label: &str, cfg: &EstimatorConfig) -> Result<Box<dyn MatrixNormOracle>> {
    let label = label.trim();
    let (head, rest) = label.split_once(':').unwrap_or((label, ""));
    let space = || crate::lambdaclass::parse_shorthand(rest).map(Arc::new);
    Ok(match head {
        "min" => Box::new(MinOracle::new(space()?)),
        "frobenius" => Box::new(FrobeniusOracle::new(space()?)),
        "l1" => {
            let scale = if rest.is_empty() {
                1.0
            } else {
                rest.parse()
                    .map_err(|_| Error::parse("oracle", format!("bad scale in `{label}`")))?
            };
            Box::new(EntrywiseL1Oracle::new(scale)?)
        }
        "minq" => Box::new(MinQuantizedOracle::new(NormedSpaceOracle::from_shorthand(rest)?, *cfg)),
        _ => return Err(Error::parse("oracle", format!("unknown oracle `{label}`"))),
    })
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub seed: u64,
    pub max_level: usize,
    pub budget: usize,
    /// Hill-climbing steps from the worst sample.
    pub refine_steps: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64, budget: usize) -> Self {
        SamplerConfig {
            seed,
            max_level: 3,
            budget,
            refine_steps: REFINE_STEPS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::shape("budget must be at least 1"));
        }
        if self.max_level == 0 {
            return Err(Error::shape("max_level must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Certificate {
    /// `‖e1 ⊕ e2‖ > max(‖e1‖, ‖e2‖)`.
    R1 {
        n1: usize,
        e1: Vec<C64>,
        n2: usize,
        e2: Vec<C64>,
        sum_norm: f64,
        norm1: f64,
        norm2: f64,
    },
    /// `‖α e β‖ > ‖α‖ ‖e‖ ‖β‖`.
    R2 {
        alpha: CMat,
        n: usize,
        e: Vec<C64>,
        beta: CMat,
        lhs: f64,
        rhs: f64,
    },
}

impl Certificate {
    pub fn excess(&self) -> f64 {
        match self {
            Certificate::R1 {
                sum_norm, norm1, norm2, ..
            } => sum_norm - norm1.max(*norm2),
            Certificate::R2 { lhs, rhs, .. } => lhs - rhs,
        }
    }

    /// Recomputes the excess from scratch with `oracle`.
    pub fn verify(&self, oracle: &dyn MatrixNormOracle) -> Result<f64> {
        let m = oracle.base_dim();
        match self {
            Certificate::R1 { n1, e1, n2, e2, .. } => {
                let sum = direct_sum(m, *n1, e1, *n2, e2);
                let s = checked_norm(oracle, n1 + n2, &sum)?;
                Ok(s - checked_norm(oracle, *n1, e1)?.max(checked_norm(oracle, *n2, e2)?))
            }
            Certificate::R2 { alpha, n, e, beta, .. } => {
                let c = compress(m, *n, e, alpha, beta);
                let lhs = checked_norm(oracle, alpha.nrows(), &c)?;
                Ok(lhs - spectral_norm(alpha) * checked_norm(oracle, *n, e)? * spectral_norm(beta))
            }
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::R1 {
                n1,
                e1,
                n2,
                e2,
                sum_norm,
                norm1,
                norm2,
            } => write!(
                f,
                "R1 levels ({n1},{n2}): ‖e1⊕e2‖ = {sum_norm:.12e}, ‖e1‖ = {norm1:.12e}, ‖e2‖ = {norm2:.12e}, excess {:.6e}; e1 = {}; e2 = {}",
                self.excess(),
                fmt_coeffs(e1),
                fmt_coeffs(e2)
            ),
            Certificate::R2 {
                alpha,
                n,
                e,
                beta,
                lhs,
                rhs,
            } => write!(
                f,
                "R2 level {n} -> {}: ‖αeβ‖ = {lhs:.12e}, ‖α‖‖e‖‖β‖ = {rhs:.12e}, excess {:.6e}; α = {}; e = {}; β = {}",
                alpha.nrows(),
                self.excess(),
                fmt_coeffs(alpha.transpose().as_slice()),
                fmt_coeffs(e),
                fmt_coeffs(beta.transpose().as_slice())
            ),
        }
    }
}

fn fmt_coeffs(v: &[C64]) -> String {
    let parts: Vec<String> = v.iter().map(|z| format!("{:.6e}{:+.6e}i", z.re, z.im)).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Clone)]
pub struct ViolationReport {
    pub axiom: &'static str,
    pub oracle: String,
    pub budget: usize,
    /// Certificates with excess above [`VIOLATION_TOL`], by sample index.
    pub violations: Vec<(usize, Certificate)>,
    /// Largest excess seen over the random samples.
    pub max_excess: f64,
    /// Result of hill climbing from the worst sample, if it is a violation.
    pub refined: Option<Certificate>,
    /// The excess of the built-in sanity case (zero pair or `α = β = I`).
    pub sanity_excess: f64,
}

impl ViolationReport {
    pub fn has_violation(&self) -> bool {
        !self.violations.is_empty() || self.refined.is_some()
    }

    pub fn best_certificate(&self) -> Option<&Certificate> {
        self.refined
            .iter()
            .chain(self.violations.iter().map(|(_, c)| c))
            .max_by(|a, b| a.excess().total_cmp(&b.excess()))
    }

    pub fn summary(&self) -> String {
        match self.best_certificate() {
            None => format!(
                "{} {}: no counterexample found at budget {} (max excess {:.3e})",
                self.axiom, self.oracle, self.budget, self.max_excess
            ),
            Some(c) => format!(
                "{} {}: {} violation(s) at budget {}, worst excess {:.12e}",
                self.axiom,
                self.oracle,
                self.violations.len().max(1),
                self.budget,
                c.excess()
            ),
        }
    }
}

fn direct_sum(m: usize, n1: usize, e1: &[C64], n2: usize, e2: &[C64]) -> Vec<C64> {
    let n = n1 + n2;
    let mut out = vec![ZERO; n * n * m];
    for i in 0..n1 {
        for j in 0..n1 {
            out[(i * n + j) * m..(i * n + j + 1) * m].copy_from_slice(&e1[(i * n1 + j) * m..(i * n1 + j + 1) * m]);
        }
    }
    for i in 0..n2 {
        for j in 0..n2 {
            let dst = ((n1 + i) * n + n1 + j) * m;
            out[dst..dst + m].copy_from_slice(&e2[(i * n2 + j) * m..(i * n2 + j + 1) * m]);
        }
    }
    out
}

/// `α e β` for `α: p × n`, `β: n × p`.
fn compress(m: usize, n: usize, e: &[C64], alpha: &CMat, beta: &CMat) -> Vec<C64> {
    let p = alpha.nrows();
    let mut out = vec![ZERO; p * p * m];
    for r in 0..m {
        let s = CMat::from_fn(n, n, |i, j| e[(i * n + j) * m + r]);
        let c = alpha * s * beta;
        for k in 0..p {
            for l in 0..p {
                out[(k * p + l) * m + r] = c[(k, l)];
            }
        }
    }
    out
}

/// Random data normalized to oracle norm one (left as is if the norm vanishes).
fn unit_sample<R: Rng + ?Sized>(oracle: &dyn MatrixNormOracle, rng: &mut R, level: usize) -> Result<Vec<C64>> {
    let v = gaussian_vec(rng, level * level * oracle.base_dim());
    normalize(oracle, level, v)
}

fn normalize(oracle: &dyn MatrixNormOracle, level: usize, v: Vec<C64>) -> Result<Vec<C64>> {
    let s = checked_norm(oracle, level, &v)?;
    Ok(if s > 0.0 { v.into_iter().map(|z| z / s).collect() } else { v })
}

fn unit_contraction<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let a = random_matrix(rng, rows, cols);
    let s = spectral_norm(&a);
    a / C64::new(s, 0.0)
}

fn perturb<R: Rng + ?Sized>(rng: &mut R, v: &[C64], step: f64) -> Vec<C64> {
    let noise = gaussian_vec(rng, v.len());
    v.iter().zip(noise).map(|(a, b)| a + b * step).collect()
}

fn r1_certificate(oracle: &dyn MatrixNormOracle, n1: usize, e1: Vec<C64>, n2: usize, e2: Vec<C64>) -> Result<Certificate> {
    let m = oracle.base_dim();
    let sum = direct_sum(m, n1, &e1, n2, &e2);
    Ok(Certificate::R1 {
        sum_norm: checked_norm(oracle, n1 + n2, &sum)?,
        norm1: checked_norm(oracle, n1, &e1)?,
        norm2: checked_norm(oracle, n2, &e2)?,
        n1,
        e1,
        n2,
        e2,
    })
}

fn r2_certificate(oracle: &dyn MatrixNormOracle, alpha: CMat, n: usize, e: Vec<C64>, beta: CMat) -> Result<Certificate> {
    let m = oracle.base_dim();
    let c = compress(m, n, &e, &alpha, &beta);
    Ok(Certificate::R2 {
        lhs: checked_norm(oracle, alpha.nrows(), &c)?,
        rhs: spectral_norm(&alpha) * checked_norm(oracle, n, &e)? * spectral_norm(&beta),
        alpha,
        n,
        e,
        beta,
    })
}

fn level<R: Rng + ?Sized>(rng: &mut R, max: usize) -> usize {
    rng.random_range(1..=max)
}

/// Samples pairs `(e1, e2)` and records `‖e1 ⊕ e2‖ − max(‖e1‖, ‖e2‖)`.
pub fn check_r1(oracle: &dyn MatrixNormOracle, sampler: &SamplerConfig) -> Result<ViolationReport> {
    sampler.validate()?;
    let m = oracle.base_dim();
    let zero = r1_certificate(oracle, 1, vec![ZERO; m], 1, vec![ZERO; m])?;
    let samples = (0..sampler.budget)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(sampler.seed.wrapping_add(k as u64));
            let (n1, n2) = (level(&mut rng, sampler.max_level), level(&mut rng, sampler.max_level));
            let e1 = unit_sample(oracle, &mut rng, n1)?;
            let e2 = unit_sample(oracle, &mut rng, n2)?;
            r1_certificate(oracle, n1, e1, n2, e2)
        })
        .collect::<Result<Vec<_>>>()?;
    let refine = |start: &Certificate, rng: &mut crate::random::SeededRng, step: f64| -> Result<Certificate> {
        let Certificate::R1 { n1, e1, n2, e2, .. } = start else {
            unreachable!()
        };
        let e1 = normalize(oracle, *n1, perturb(rng, e1, step))?;
        let e2 = normalize(oracle, *n2, perturb(rng, e2, step))?;
        r1_certificate(oracle, *n1, e1, *n2, e2)
    };
    finish("R1", oracle, sampler, samples, zero.excess(), refine)
}

/// Samples `(α, e, β)` and records `‖α e β‖ − ‖α‖ ‖e‖ ‖β‖`.
pub fn check_r2(oracle: &dyn MatrixNormOracle, sampler: &SamplerConfig) -> Result<ViolationReport> {
    sampler.validate()?;
    let sanity = {
        let mut rng = rng_from_seed(sampler.seed.wrapping_sub(1));
        let n = level(&mut rng, sampler.max_level);
        let e = unit_sample(oracle, &mut rng, n)?;
        r2_certificate(oracle, CMat::identity(n, n), n, e, CMat::identity(n, n))?
    };
    let samples = (0..sampler.budget)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(sampler.seed.wrapping_add(k as u64));
            let (n, p) = (level(&mut rng, sampler.max_level), level(&mut rng, sampler.max_level));
            let e = unit_sample(oracle, &mut rng, n)?;
            let alpha = unit_contraction(&mut rng, p, n);
            let beta = unit_contraction(&mut rng, n, p);
            r2_certificate(oracle, alpha, n, e, beta)
        })
        .collect::<Result<Vec<_>>>()?;
    let refine = |start: &Certificate, rng: &mut crate::random::SeededRng, step: f64| -> Result<Certificate> {
        let Certificate::R2 { alpha, n, e, beta, .. } = start else {
            unreachable!()
        };
        let e = normalize(oracle, *n, perturb(rng, e, step))?;
        let shift = |a: &CMat, rng: &mut crate::random::SeededRng| {
            let b = a + random_matrix(rng, a.nrows(), a.ncols()) * C64::new(step, 0.0);
            let s = spectral_norm(&b);
            b / C64::new(s, 0.0)
        };
        let alpha = shift(alpha, rng);
        let beta = shift(beta, rng);
        r2_certificate(oracle, alpha, *n, e, beta)
    };
    finish("R2", oracle, sampler, samples, sanity.excess(), refine)
}

fn finish<F>(
    axiom: &'static str,
    oracle: &dyn MatrixNormOracle,
    sampler: &SamplerConfig,
    samples: Vec<Certificate>,
    sanity_excess: f64,
    refine: F,
) -> Result<ViolationReport>
where
    F: Fn(&Certificate, &mut crate::random::SeededRng, f64) -> Result<Certificate>,
{
    let mut worst = 0;
    for (k, c) in samples.iter().enumerate() {
        if c.excess() > samples[worst].excess() {
            worst = k;
        }
    }
    let max_excess = samples[worst].excess();
    let mut best = samples[worst].clone();
    let mut rng = rng_from_seed(sampler.seed ^ 0x5eed);
    let mut step = 0.3;
    let mut stale = 0;
    for _ in 0..sampler.refine_steps {
        let cand = refine(&best, &mut rng, step)?;
        if cand.excess() > best.excess() {
            best = cand;
            stale = 0;
        } else {
            stale += 1;
            if stale == 20 {
                step *= 0.5;
                stale = 0;
            }
        }
    }
    let violations = samples
        .into_iter()
        .enumerate()
        .filter(|(_, c)| c.excess() > VIOLATION_TOL)
        .collect();
    let refined = (best.excess() > VIOLATION_TOL).then_some(best);
    Ok(ViolationReport {
        axiom,
        oracle: oracle.label(),
        budget: sampler.budget,
        violations,
        max_excess,
        refined,
        sanity_excess,
    })
}

/// Sampled homogeneity and triangle-inequality pre-check at `level`.
pub fn precheck(oracle: &dyn MatrixNormOracle, level: usize, samples: usize, seed: u64) -> Result<()> {
    let mut rng = rng_from_seed(seed);
    let len = level * level * oracle.base_dim();
    for _ in 0..samples {
        let x = gaussian_vec(&mut rng, len);
        let y = gaussian_vec(&mut rng, len);
        let s = crate::random::gaussian(&mut rng);
        let nx = checked_norm(oracle, level, &x)?;
        let ny = checked_norm(oracle, level, &y)?;
        let sx: Vec<C64> = x.iter().map(|z| z * s).collect();
        let nsx = checked_norm(oracle, level, &sx)?;
        if (nsx - s.norm() * nx).abs() > 1e-9 * (1.0 + nsx) {
            return Err(oracle_error(oracle, level, &x, "not homogeneous".into()));
        }
        let sum: Vec<C64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        if checked_norm(oracle, level, &sum)? > nx + ny + 1e-9 * (1.0 + nx + ny) {
            return Err(oracle_error(oracle, level, &sum, "triangle inequality fails".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn m2() -> Arc<ConcreteSpace> {
        Arc::new(ConcreteSpace::full_matrix(2))
    }

    fn sampler(budget: usize) -> SamplerConfig {
        SamplerConfig::new(11, budget)
    }

    #[test]
    fn frobenius_explicit_certificate() {
        let o = FrobeniusOracle::new(m2());
        let e = MatElement::elementary(m2(), 1, 0, 0, 0).into_coeffs();
        let c = r1_certificate(&o, 1, e.clone(), 1, e).unwrap();
        assert!((c.excess() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((c.verify(&o).unwrap() - c.excess()).abs() < 1e-15);
    }

    #[test]
    fn zero_pair_has_zero_excess() {
        let o = MinOracle::new(m2());
        let rep = check_r1(&o, &sampler(5)).unwrap();
        assert_eq!(rep.sanity_excess, 0.0);
    }

    #[test]
    fn min_oracle_passes_small_budget() {
        let o = MinOracle::new(m2());
        let r1 = check_r1(&o, &sampler(100)).unwrap();
        let r2 = check_r2(&o, &sampler(100)).unwrap();
        assert!(!r1.has_violation(), "{}", r1.summary());
        assert!(!r2.has_violation(), "{}", r2.summary());
        assert!(r2.sanity_excess <= 1e-12);
        assert!(r1.summary().contains("no counterexample found at budget 100"));
    }

    #[test]
    fn entrywise_l1_violates_r2() {
        let o = EntrywiseL1Oracle::new(1.0).unwrap();
        let rep = check_r2(&o, &sampler(1000)).unwrap();
        assert!(rep.has_violation());
        let c = rep.best_certificate().unwrap();
        assert!(c.verify(&o).unwrap() > 5e-9);
    }

    #[test]
    fn min_quantization_level_one_and_scalars() {
        let cfg = EstimatorConfig::default();
        let l1 = NormedSpaceOracle::lp(1.0, 2).unwrap();
        let u = [C64::new(0.6, 0.0), C64::new(0.0, -0.8)];
        let est = min_quantize_norm(&l1, 1, &u, &cfg).unwrap();
        assert!(est.lower <= 1.4 + 1e-12 && est.upper >= 1.4 - 1e-12);
        assert!(est.lower >= 1.4 * (1.0 - 1e-4));

        let c = NormedSpaceOracle::lp(2.0, 1).unwrap();
        let a = [ONE, C64::new(2.0, 0.0), ZERO, C64::new(3.0, 1.0)];
        let est = min_quantize_norm(&c, 2, &a, &cfg).unwrap();
        let expect = spectral_norm(&CMat::from_row_slice(2, 2, &a));
        assert!((est.lower - expect).abs() < 1e-12 && (est.upper - expect).abs() < 1e-12);
    }

    #[test]
    fn diagonal_min_quantization_is_coordinatewise_sup() {
        let d2 = NormedSpaceOracle::concrete(Arc::new(ConcreteSpace::diagonal(2)));
        // ε_11 ⊗ δ_1 + ε_22 ⊗ δ_2
        let mut u = vec![ZERO; 8];
        u[0] = ONE;
        u[3 * 2 + 1] = ONE;
        let est = min_quantize_norm(&d2, 2, &u, &EstimatorConfig::default()).unwrap();
        assert_eq!((est.lower, est.upper), (1.0, 1.0));
    }

    #[test]
    fn min_quantization_below_concrete_norm() {
        let cfg = EstimatorConfig::default().with_restarts(4);
        let x = NormedSpaceOracle::concrete(m2());
        let mut rng = rng_from_seed(3);
        let u = gaussian_vec(&mut rng, 4 * 4);
        let est = min_quantize_norm(&x, 2, &u, &cfg).unwrap();
        let concrete = MatElement::new(m2(), 2, u).unwrap().min_norm();
        assert!(est.lower <= concrete + 1e-9);
        assert!(est.upper <= concrete + 1e-12);
    }

    #[test]
    fn registry_labels() {
        let cfg = EstimatorConfig::default();
        assert_eq!(oracle_by_label("min:M:2", &cfg).unwrap().label(), "min:M:2");
        assert_eq!(oracle_by_label("minq:l1:2", &cfg).unwrap().label(), "minq:l1:2");
        assert!(oracle_by_label("bogus", &cfg).is_err());
    }

    #[test]
    fn precheck_accepts_norms() {
        precheck(&MinOracle::new(m2()), 2, 20, 1).unwrap();
        precheck(&EntrywiseL1Oracle::new(2.0).unwrap(), 2, 20, 1).unwrap();
    }
}
