//! Certified brackets and the projected ascent engine behind every
//! supremum over a matrix unit ball.
//!
//! An operator is presented through the realizations of its coordinate
//! inputs `I_k` (spanning the domain) and of their images `O_k`. For
//! coordinates `c` the input is `Σ c_k I_k` and the output is
//! `Σ c_k O_k` (or `Σ conj(c_k) O_k` for conjugate-linear operators).

use nalgebra::Cholesky;
use rayon::prelude::*;

use crate::barrier;
use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, SparseMat, C64, ZERO};
use crate::random::{gaussian_vec, rng_from_seed};
use crate::space::MatElement;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            restarts: 16,
            max_iter: 500,
            tol: 1e-12,
            seed: 42,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Unsupported(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Unsupported("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// The argument attaining a lower bound.
#[derive(Debug, Clone)]
pub enum Witness {
    Element(MatElement),
    Pair(MatElement, MatElement),
    /// Matrices parameterizing a dual form, see `bilinear`.
    Factors(Vec<CMat>),
    /// Coordinates of a dual functional.
    Functional(Vec<C64>),
    Decomposition(Box<Decomposition>),
}

#[derive(Debug, Clone)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub witness: Option<Witness>,
    pub level_profile: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

impl NormEstimate {
    pub fn exact(value: f64) -> Self {
        NormEstimate {
            lower: value,
            upper: value,
            witness: None,
            level_profile: Vec::new(),
            iterations: 0,
            converged: true,
            notes: Vec::new(),
        }
    }

    pub(crate) fn bracket(lower: f64, upper: f64) -> Self {
        let mut est = NormEstimate::exact(lower);
        est.upper = upper;
        est.settle();
        est
    }

    /// Restores `lower ≤ upper` when rounding pushed the certified upper a
    /// hair below the attained value.
    pub(crate) fn settle(&mut self) {
        if self.upper < self.lower {
            if self.upper < self.lower * (1.0 - 1e-9) - 1e-12 {
                self.notes.push(format!(
                    "upper {:.6e} fell below attained {:.6e}; raised",
                    self.upper, self.lower
                ));
            }
            self.upper = self.lower;
        }
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn witness_element(&self) -> Option<&MatElement> {
        match &self.witness {
            Some(Witness::Element(x)) => Some(x),
            _ => None,
        }
    }

    /// `lower` and `upper` agree to the given absolute tolerance.
    pub fn is_pinned(&self, tol: f64) -> bool {
        self.upper - self.lower <= tol
    }

    pub fn overlaps(&self, other: &NormEstimate, tol: f64) -> bool {
        self.lower <= other.upper + tol && other.lower <= self.upper + tol
    }
}

/// A real-linear operator between realized matrix spaces.
#[derive(Debug, Clone)]
pub(crate) struct RealizedOperator {
    input: Vec<SparseMat>,
    output: Vec<SparseMat>,
    conj: bool,
    in_shape: (usize, usize),
    out_shape: (usize, usize),
    chol: Option<Cholesky<C64, nalgebra::Dyn>>,
    ball: InputBall,
}

/// How the polar step maximizes a linear functional over the input ball.
#[derive(Debug, Clone)]
enum InputBall {
    Full,
    /// The inputs are multiples of distinct matrix units filling disjoint
    /// rectangles `rows × cols`; the ball is a product of full blocks.
    Blocks(Vec<(Vec<usize>, Vec<usize>)>),
    /// A general proper subspace.
    Subspace,
}

fn block_structure(input: &[SparseMat], shape: (usize, usize)) -> Option<Vec<(Vec<usize>, Vec<usize>)>> {
    let (r, c) = shape;
    let mut parent: Vec<usize> = (0..r + c).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for m in input {
        if m.entries.len() != 1 {
            return None;
        }
        let (i, j, _) = m.entries[0];
        let (a, b) = (find(&mut parent, i), find(&mut parent, r + j));
        parent[a] = b;
    }
    let mut blocks: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>, usize)> = Default::default();
    for m in input {
        let (i, _, _) = m.entries[0];
        let root = find(&mut parent, i);
        blocks.entry(root).or_default().2 += 1;
    }
    for i in 0..r {
        let root = find(&mut parent, i);
        if let Some(b) = blocks.get_mut(&root) {
            b.0.push(i);
        }
    }
    for j in 0..c {
        let root = find(&mut parent, r + j);
        if let Some(b) = blocks.get_mut(&root) {
            b.1.push(j);
        }
    }
    blocks
        .into_values()
        .map(|(rows, cols, count)| (count == rows.len() * cols.len()).then_some((rows, cols)))
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct Ascent {
    pub value: f64,
    pub coords: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RealizedOperator {
    pub fn new(input: Vec<SparseMat>, output: Vec<SparseMat>, conj: bool) -> Result<Self> {
        if input.len() != output.len() || input.is_empty() {
            return Err(Error::shape("operator needs one output image per input coordinate"));
        }
        let in_shape = (input[0].rows, input[0].cols);
        let out_shape = (output[0].rows, output[0].cols);
        let gram = gram_matrix(&input);
        let chol = Cholesky::new(gram);
        if chol.is_none() {
            return Err(Error::DependentBasis { ratio: 0.0 });
        }
        let ball = if input.len() == in_shape.0 * in_shape.1 {
            InputBall::Full
        } else if let Some(blocks) = block_structure(&input, in_shape) {
            InputBall::Blocks(blocks)
        } else {
            InputBall::Subspace
        };
        Ok(RealizedOperator {
            input,
            output,
            conj,
            in_shape,
            out_shape,
            chol,
            ball,
        })
    }

    pub fn dim(&self) -> usize {
        self.input.len()
    }

    fn chol(&self) -> &Cholesky<C64, nalgebra::Dyn> {
        self.chol.as_ref().expect("checked at construction")
    }

    pub fn eval_input(&self, x: &[C64]) -> CMat {
        let mut acc = CMat::zeros(self.in_shape.0, self.in_shape.1);
        for (s, m) in x.iter().zip(&self.input) {
            m.axpy_into(*s, &mut acc);
        }
        acc
    }

    pub fn eval_output(&self, x: &[C64]) -> CMat {
        let mut acc = CMat::zeros(self.out_shape.0, self.out_shape.1);
        for (s, m) in x.iter().zip(&self.output) {
            let s = if self.conj { s.conj() } else { *s };
            m.axpy_into(s, &mut acc);
        }
        acc
    }

    /// `‖Φ(x)‖ / ‖x‖`, zero at `x = 0`.
    pub fn ratio(&self, x: &[C64]) -> f64 {
        let den = linalg::spectral_norm(&self.eval_input(x));
        if den <= 0.0 {
            return 0.0;
        }
        linalg::spectral_norm(&self.eval_output(x)) / den
    }

    /// Rescales so the input has spectral norm one.
    fn retract(&self, x: Vec<C64>) -> Option<Vec<C64>> {
        let n = linalg::spectral_norm(&self.eval_input(&x));
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(x.into_iter().map(|z| z / n).collect())
    }

    /// Real gradient of `‖Φ(x)‖` in coordinates and the current value.
    fn gradient(&self, x: &[C64]) -> (f64, CVec) {
        let (sigma, u, v) = linalg::top_singular_pair(&self.eval_output(x));
        let g = CVec::from_iterator(
            self.dim(),
            self.output.iter().map(|o| {
                let w = o.sandwich(&u, &v);
                if self.conj {
                    w
                } else {
                    w.conj()
                }
            }),
        );
        (sigma, g)
    }

    /// Barrier solve for the maximizer over a general input ball of
    /// `Re⟨g, x⟩`. The solve stops at the first path point whose retraction
    /// beats `value` by the relative `tol`; returns that point and its ratio.
    fn exact_step(&self, g: &CVec, value: f64, tol: f64) -> Option<(f64, Vec<C64>)> {
        let m = self.dim();
        let gamma: Vec<f64> = g.iter().map(|z| z.re).chain(g.iter().map(|z| z.im)).collect();
        let mut best: Option<(f64, Vec<C64>)> = None;
        let mut accept = |c: &[f64]| {
            if best.is_some() {
                return true;
            }
            let Some(y) = self.retract((0..m).map(|k| C64::new(c[k], c[m + k])).collect()) else {
                return false;
            };
            let fy = self.ratio(&y);
            if fy > value * (1.0 + tol) {
                best = Some((fy, y));
                return true;
            }
            false
        };
        let c = barrier::maximize_linear(&self.input, &gamma, &mut accept)?;
        accept(&c);
        best
    }

    /// Polar factor of the Riesz representative of `g`, projected back onto
    /// the inputs. Exact unless the inputs form a general subspace.
    fn polar_step(&self, g: &CVec) -> Option<Vec<C64>> {
        let h = self.chol().solve(g);
        let gmat = self.eval_input(h.as_slice());
        let xmat = match &self.ball {
            InputBall::Blocks(blocks) => {
                let mut x = CMat::zeros(gmat.nrows(), gmat.ncols());
                for (rows, cols) in blocks {
                    let sub = gmat.select_rows(rows).select_columns(cols);
                    let p = linalg::polar_factor(&sub);
                    for (a, &i) in rows.iter().enumerate() {
                        for (b, &j) in cols.iter().enumerate() {
                            x[(i, j)] = p[(a, b)];
                        }
                    }
                }
                x
            }
            _ => linalg::polar_factor(&gmat),
        };
        let rhs = CVec::from_iterator(self.dim(), self.input.iter().map(|m| m.inner_with(&xmat)));
        let y = self.chol().solve(&rhs);
        self.retract(y.iter().copied().collect())
    }

    fn frob_norm(&self, x: &[C64]) -> f64 {
        self.eval_input(x).norm()
    }

    /// Polar step, else a backtracking step along the Riesz gradient.
    fn cheap_step(&self, x: &[C64], g: &CVec, value: f64) -> Option<(f64, Vec<C64>)> {
        if let Some(y) = self.polar_step(g) {
            let fy = self.ratio(&y);
            if fy > value {
                return Some((fy, y));
            }
        }
        let h = self.chol().solve(g);
        let hn = self.frob_norm(h.as_slice());
        let xn = self.frob_norm(x);
        if hn <= 0.0 {
            return None;
        }
        let mut t = xn / hn;
        for _ in 0..30 {
            let cand: Vec<C64> = x.iter().zip(h.iter()).map(|(a, b)| a + b * t).collect();
            if let Some(y) = self.retract(cand) {
                let fy = self.ratio(&y);
                if fy > value {
                    return Some((fy, y));
                }
            }
            t *= 0.5;
        }
        None
    }

    /// Doubles the step `y − x` while the ratio keeps improving.
    fn extrapolate(&self, x: &[C64], mut y: Vec<C64>, mut fy: f64) -> (f64, Vec<C64>) {
        let d: Vec<C64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let mut beta = 2.0;
        for _ in 0..8 {
            let Some(z) = self.retract(x.iter().zip(&d).map(|(a, b)| a + b * beta).collect()) else {
                break;
            };
            let fz = self.ratio(&z);
            if fz <= fy {
                break;
            }
            (fy, y) = (fz, z);
            beta *= 2.0;
        }
        (fy, y)
    }

    /// Local ascent from a start; the start is retracted first. On a general
    /// subspace the cheap projected step runs until it stalls, then one exact
    /// step, extrapolated along its direction, is tried to leave the stall.
    pub fn ascend_from(&self, start: Vec<C64>, max_iter: usize, tol: f64) -> Ascent {
        let mut x = match self.retract(start) {
            Some(x) => x,
            None => {
                return Ascent {
                    value: 0.0,
                    coords: vec![ZERO; self.dim()],
                    iterations: 0,
                    converged: true,
                }
            }
        };
        let exact_differs = matches!(self.ball, InputBall::Subspace);
        let mut value = linalg::spectral_norm(&self.eval_output(&x));
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..max_iter {
            iterations = it + 1;
            let (_, g) = self.gradient(&x);
            let stalled = match self.cheap_step(&x, &g, value) {
                Some((fy, y)) => {
                    let gain = fy - value;
                    x = y;
                    value = fy;
                    gain <= tol * value.max(1e-300)
                }
                None => true,
            };
            if !stalled {
                continue;
            }
            if exact_differs {
                let (_, g) = self.gradient(&x);
                if let Some((fy, y)) = self.exact_step(&g, value, tol) {
                    (value, x) = self.extrapolate(&x, y, fy);
                    continue;
                }
            }
            converged = true;
            break;
        }
        // Re-evaluate so the reported value is exactly the ratio of the
        // stored coordinates.
        let value = self.ratio(&x);
        Ascent {
            value,
            coords: x,
            iterations,
            converged,
        }
    }

    /// Warm starts are tried first, then `cfg.restarts` Gaussian starts with
    /// seeds `cfg.seed + i`. The best run wins, lowest index on ties.
    pub fn ascend(&self, cfg: &EstimatorConfig, warm: &[Vec<C64>]) -> Ascent {
        let mut starts: Vec<Vec<C64>> = warm.iter().filter(|w| w.len() == self.dim()).cloned().collect();
        for i in 0..cfg.restarts {
            let mut rng = rng_from_seed(cfg.seed.wrapping_add(i as u64));
            starts.push(gaussian_vec(&mut rng, self.dim()));
        }
        if starts.is_empty() {
            let mut rng = rng_from_seed(cfg.seed);
            starts.push(gaussian_vec(&mut rng, self.dim()));
        }
        let runs: Vec<Ascent> = starts
            .into_par_iter()
            .map(|s| self.ascend_from(s, cfg.max_iter, cfg.tol))
            .collect();
        let total: usize = runs.iter().map(|r| r.iterations).sum();
        let mut best = 0;
        for (k, r) in runs.iter().enumerate() {
            if r.value > runs[best].value {
                best = k;
            }
        }
        let mut out = runs[best].clone();
        out.iterations = total;
        out
    }

    /// Certified upper bound `σ_max(O L^{-*}) · √N` where `H = L L*` is the
    /// Gram matrix of the inputs and `N` the smaller input side: it combines
    /// `‖Φ(x)‖ ≤ ‖Φ(x)‖_F` with `‖x‖_F ≤ √N ‖x‖`.
    pub fn frobenius_upper(&self) -> f64 {
        let l = self.chol().l();
        let ovec = {
            let (r, cols) = self.out_shape;
            let mut m = CMat::zeros(r * cols, self.dim());
            for (k, o) in self.output.iter().enumerate() {
                for &(i, j, v) in &o.entries {
                    m[(i * cols + j, k)] += v;
                }
            }
            m
        };
        // For conjugate-linear operators the output depends on conj(x), whose
        // Gram factor is conj(L).
        let factor = if self.conj { l.map(|z| z.conj()) } else { l };
        let m = solve_right_upper(&ovec, &factor.adjoint());
        let side = self.in_shape.0.min(self.in_shape.1) as f64;
        linalg::spectral_norm(&m) * side.sqrt()
    }

}

/// `M` with `M U = B` for upper-triangular invertible `U`.
fn solve_right_upper(b: &CMat, u: &CMat) -> CMat {
    // M U = B  <=>  U^T M^T = B^T with U^T lower triangular.
    let ut = u.transpose();
    let mt = ut
        .solve_lower_triangular(&b.transpose())
        .expect("triangular factor is invertible");
    mt.transpose()
}

fn gram_matrix(input: &[SparseMat]) -> CMat {
    let m = input.len();
    let dense: Vec<CMat> = input.iter().map(SparseMat::to_dense).collect();
    let mut g = CMat::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = input[i].inner_with(&dense[j]);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Spectral unit-ball ascent result packaged as an estimate.
pub(crate) fn estimate_from(op: &RealizedOperator, cfg: &EstimatorConfig, warm: &[Vec<C64>]) -> (NormEstimate, Vec<C64>) {
    let run = op.ascend(cfg, warm);
    let upper = op.frobenius_upper();
    let mut est = NormEstimate::bracket(run.value, upper);
    est.iterations = run.iterations;
    est.converged = run.converged;
    (est, run.coords)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn identity_op(d: usize) -> RealizedOperator {
        let basis: Vec<SparseMat> = (0..d * d)
            .map(|k| SparseMat::from_dense(&linalg::unit(d, k / d, k % d)))
            .collect();
        RealizedOperator::new(basis.clone(), basis, false).unwrap()
    }

    fn units(d: usize, pos: &[(usize, usize)]) -> Vec<SparseMat> {
        pos.iter().map(|&(i, j)| SparseMat::from_dense(&linalg::unit(d, i, j))).collect()
    }

    #[test]
    fn block_structure_detection() {
        let diag = units(3, &[(0, 0), (1, 1), (2, 2)]);
        assert_eq!(block_structure(&diag, (3, 3)).unwrap().len(), 3);
        let blocks = units(3, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)]);
        let b = block_structure(&blocks, (3, 3)).unwrap();
        assert_eq!(b[0], (vec![0, 1], vec![0, 1]));
        // an L-shape is not a rectangle
        let ell = units(3, &[(0, 0), (0, 1), (1, 0)]);
        assert!(block_structure(&ell, (3, 3)).is_none());
    }

    #[test]
    fn blockwise_polar_step_on_diagonal() {
        // Φ = identity on D_3 weighted by (1, 2, 3); the norm is 3.
        let input = units(3, &[(0, 0), (1, 1), (2, 2)]);
        let output: Vec<SparseMat> = input
            .iter()
            .enumerate()
            .map(|(k, m)| SparseMat::from_dense(&(m.to_dense() * c((k + 1) as f64, 0.0))))
            .collect();
        let op = RealizedOperator::new(input, output, false).unwrap();
        assert!(matches!(op.ball, InputBall::Blocks(_)));
        let a = op.ascend_from(vec![c(1.0, 0.0), c(0.5, 0.2), c(0.1, 0.0)], 200, 1e-13);
        assert!((a.value - 3.0).abs() < 1e-12);
    }

    fn transpose_op(d: usize) -> RealizedOperator {
        let input: Vec<SparseMat> = (0..d * d)
            .map(|k| SparseMat::from_dense(&linalg::unit(d, k / d, k % d)))
            .collect();
        let output = (0..d * d)
            .map(|k| SparseMat::from_dense(&linalg::unit(d, k % d, k / d)))
            .collect();
        RealizedOperator::new(input, output, false).unwrap()
    }

    #[test]
    fn identity_bracket_contains_one() {
        let op = identity_op(2);
        let (est, _) = estimate_from(&op, &EstimatorConfig::default(), &[]);
        assert!(est.lower >= 1.0 - 1e-9);
        assert!(est.upper >= 1.0);
    }

    #[test]
    fn transpose_level_one_is_isometric() {
        let op = transpose_op(2);
        let (est, _) = estimate_from(&op, &EstimatorConfig::default(), &[]);
        assert!((est.lower - 1.0).abs() < 1e-9);
        assert!(est.upper >= 1.0);
    }

    #[test]
    fn scaling_scales_the_bracket() {
        let d = 2;
        let input: Vec<SparseMat> = (0..d * d)
            .map(|k| SparseMat::from_dense(&linalg::unit(d, k / d, k % d)))
            .collect();
        let output = (0..d * d)
            .map(|k| SparseMat::from_dense(&(linalg::unit(d, k / d, k % d) * c(2.0, 0.0))))
            .collect();
        let op = RealizedOperator::new(input, output, false).unwrap();
        let (est, _) = estimate_from(&op, &EstimatorConfig::default(), &[]);
        assert!(est.lower >= 2.0 - 1e-9);
        assert!(est.upper >= 2.0);
    }

    #[test]
    fn frobenius_upper_is_valid_on_identity() {
        // σ_max of the identity coordinate matrix is 1, times √2.
        let up = identity_op(2).frobenius_upper();
        assert!((up - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic() {
        let op = transpose_op(3);
        let cfg = EstimatorConfig::default().with_restarts(4);
        let a = op.ascend(&cfg, &[]);
        let b = op.ascend(&cfg, &[]);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.coords, b.coords);
    }
}
