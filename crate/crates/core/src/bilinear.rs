//! Bilinear maps `E × F → G`, bilinear weights `λ_n : M_n × M_n → M_{k(n)}`,
//! their amplified norms, the matrix pairing against arrays of bilinear
//! forms, and dual lower bounds for the weighted tensor norm.

use std::sync::Arc;

use rayon::prelude::*;

use crate::decomp::{decomposition_bound, DecompMode};
use crate::error::{Error, Result};
use crate::estimate::{EstimatorConfig, NormEstimate, RealizedOperator, Witness};
use crate::linalg::{self, c, kron, spectral_norm, CMat, CVec, SparseMat, C64, ONE, ZERO};
use crate::random::{gaussian_vec, random_matrix, rng_from_seed};
use crate::space::{ConcreteSpace, MatElement, TensorElement};

const SYMMETRY_SAMPLES: usize = 50;
const SYMMETRY_TOL: f64 = 1e-6;
const OUTER_ROUNDS: usize = 200;
const INNER_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum BilinearKind {
    /// `λ_n(a, b) = a b`
    Product,
    /// `λ_n(a, b) = a ⊗ b`
    Kronecker,
    /// `λ_n(a, b) = a ∘ b` entrywise
    Schur,
    /// Entry `n - 1` is a `k² × n⁴` matrix whose column `(i j) n² + (k l)`
    /// is `λ_n(ε_ij, ε_kl)` vectorized row-major.
    Custom(Vec<CMat>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearWeight {
    kind: BilinearKind,
}

/// Sparse structure constants of `λ_n`: `λ_n(ε_a, ε_b)[p, q] = v` for
/// every `(a, b, p, q, v)`, where `a = i n + j` indexes `ε_ij`.
#[derive(Debug, Clone)]
pub struct WeightStructure {
    pub n: usize,
    pub k: usize,
    pub entries: Vec<(usize, usize, usize, usize, C64)>,
}

impl BilinearWeight {
    pub fn product() -> Self {
        BilinearWeight {
            kind: BilinearKind::Product,
        }
    }

    pub fn kronecker() -> Self {
        BilinearWeight {
            kind: BilinearKind::Kronecker,
        }
    }

    pub fn schur() -> Self {
        BilinearWeight {
            kind: BilinearKind::Schur,
        }
    }

    pub fn custom(tables: Vec<CMat>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::InvalidWeight("empty bilinear weight table".into()));
        }
        for (idx, t) in tables.iter().enumerate() {
            let n = idx + 1;
            let k = (t.nrows() as f64).sqrt().round() as usize;
            if k * k != t.nrows() || k == 0 || t.ncols() != n.pow(4) {
                return Err(Error::InvalidWeight(format!(
                    "level {n} table must be k²×{} with k ≥ 1, got {}x{}",
                    n.pow(4),
                    t.nrows(),
                    t.ncols()
                )));
            }
            if t.iter().all(|z| *z == ZERO) {
                return Err(Error::InvalidWeight(format!("λ_{n} is zero")));
            }
        }
        Ok(BilinearWeight {
            kind: BilinearKind::Custom(tables),
        })
    }

    /// `"product" | "kronecker" | "schur"`.
    pub fn from_shorthand(s: &str) -> Result<Self> {
        match s.trim() {
            "product" => Ok(Self::product()),
            "kronecker" => Ok(Self::kronecker()),
            "schur" => Ok(Self::schur()),
            other => Err(Error::parse("weight", format!("unknown bilinear weight `{other}`"))),
        }
    }

    pub fn kind(&self) -> &BilinearKind {
        &self.kind
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            BilinearKind::Product => "product",
            BilinearKind::Kronecker => "kronecker",
            BilinearKind::Schur => "schur",
            BilinearKind::Custom(_) => "custom",
        }
    }

    pub fn n_max(&self) -> Option<usize> {
        match &self.kind {
            BilinearKind::Custom(t) => Some(t.len()),
            _ => None,
        }
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::shape("level must be at least 1"));
        }
        match self.n_max() {
            Some(max) if n > max => Err(Error::LevelOverflow { level: n, max }),
            _ => Ok(()),
        }
    }

    pub fn k_of(&self, n: usize) -> Result<usize> {
        self.check_level(n)?;
        Ok(match &self.kind {
            BilinearKind::Product | BilinearKind::Schur => n,
            BilinearKind::Kronecker => n * n,
            BilinearKind::Custom(t) => (t[n - 1].nrows() as f64).sqrt().round() as usize,
        })
    }

    /// Whether `‖λ_n(a, b)‖ ≤ ‖a‖ ‖b‖` holds structurally.
    pub fn is_contractive(&self) -> bool {
        !matches!(self.kind, BilinearKind::Custom(_))
    }

    pub fn structure(&self, n: usize) -> Result<WeightStructure> {
        let k = self.k_of(n)?;
        let mut entries = Vec::new();
        match &self.kind {
            BilinearKind::Product => {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            entries.push((i * n + j, j * n + l, i, l, ONE));
                        }
                    }
                }
            }
            BilinearKind::Kronecker => {
                for i in 0..n {
                    for j in 0..n {
                        for p in 0..n {
                            for q in 0..n {
                                entries.push((i * n + j, p * n + q, i * n + p, j * n + q, ONE));
                            }
                        }
                    }
                }
            }
            BilinearKind::Schur => {
                for i in 0..n {
                    for j in 0..n {
                        entries.push((i * n + j, i * n + j, i, j, ONE));
                    }
                }
            }
            BilinearKind::Custom(tables) => {
                let t = &tables[n - 1];
                let n2 = n * n;
                for col in 0..t.ncols() {
                    for row in 0..t.nrows() {
                        let v = t[(row, col)];
                        if v != ZERO {
                            entries.push((col / n2, col % n2, row / k, row % k, v));
                        }
                    }
                }
            }
        }
        Ok(WeightStructure { n, k, entries })
    }

    /// `λ_n(a, b)`.
    pub fn apply(&self, a: &CMat, b: &CMat) -> Result<CMat> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n {
            return Err(Error::shape("weight arguments must be n×n"));
        }
        self.check_level(n)?;
        Ok(match &self.kind {
            BilinearKind::Product => a * b,
            BilinearKind::Kronecker => kron(a, b),
            BilinearKind::Schur => a.component_mul(b),
            BilinearKind::Custom(_) => {
                let s = self.structure(n)?;
                let mut out = CMat::zeros(s.k, s.k);
                for &(ia, ib, p, q, v) in &s.entries {
                    out[(p, q)] += v * a[(ia / n, ia % n)] * b[(ib / n, ib % n)];
                }
                out
            }
        })
    }
}

/// Coordinate representation of a bilinear `φ : E × F → G`; column
/// `r m_F + s` of `coeff` holds the coordinates of `φ(B_r, C_s)`.
#[derive(Debug, Clone)]
pub struct BilinearMapRep {
    left: Arc<ConcreteSpace>,
    right: Arc<ConcreteSpace>,
    target: Arc<ConcreteSpace>,
    coeff: CMat,
}

impl BilinearMapRep {
    pub fn new(left: Arc<ConcreteSpace>, right: Arc<ConcreteSpace>, target: Arc<ConcreteSpace>, coeff: CMat) -> Result<Self> {
        if coeff.nrows() != target.dim() || coeff.ncols() != left.dim() * right.dim() {
            return Err(Error::shape(format!(
                "bilinear coefficients are {}x{}, expected {}x{}",
                coeff.nrows(),
                coeff.ncols(),
                target.dim(),
                left.dim() * right.dim()
            )));
        }
        Ok(BilinearMapRep {
            left,
            right,
            target,
            coeff,
        })
    }

    /// `(a, b) ↦ a b` on `ℂ × ℂ`.
    pub fn scalar_multiplication() -> Self {
        let s = Arc::new(ConcreteSpace::scalars());
        BilinearMapRep {
            left: s.clone(),
            right: s.clone(),
            target: s,
            coeff: CMat::identity(1, 1),
        }
    }

    /// `(x, y) ↦ x y` on `M_d × M_d`.
    pub fn matrix_multiplication(d: usize) -> Self {
        let m = Arc::new(ConcreteSpace::full_matrix(d));
        let d2 = d * d;
        let mut coeff = CMat::zeros(d2, d2 * d2);
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    coeff[(i * d + l, (i * d + j) * d2 + j * d + l)] = ONE;
                }
            }
        }
        BilinearMapRep {
            left: m.clone(),
            right: m.clone(),
            target: m,
            coeff,
        }
    }

    pub fn zero(left: Arc<ConcreteSpace>, right: Arc<ConcreteSpace>, target: Arc<ConcreteSpace>) -> Self {
        let coeff = CMat::zeros(target.dim(), left.dim() * right.dim());
        BilinearMapRep {
            left,
            right,
            target,
            coeff,
        }
    }

    pub fn left(&self) -> &Arc<ConcreteSpace> {
        &self.left
    }

    pub fn right(&self) -> &Arc<ConcreteSpace> {
        &self.right
    }

    pub fn target(&self) -> &Arc<ConcreteSpace> {
        &self.target
    }

    pub fn coeff(&self) -> &CMat {
        &self.coeff
    }

    pub fn is_form(&self) -> bool {
        self.target.dim() == 1 && self.target.ambient_dim() == 1
    }

    /// Coordinates of `φ(x, y)`.
    pub fn eval_coords(&self, x: &[C64], y: &[C64]) -> Vec<C64> {
        let v = CVec::from_iterator(x.len() * y.len(), x.iter().flat_map(|a| y.iter().map(move |b| a * b)));
        (&self.coeff * v).iter().copied().collect()
    }

    /// `φ^t : F × E → G`, `φ^t(y, x) = φ(x, y)`.
    pub fn transposed(&self) -> BilinearMapRep {
        let (me, mf) = (self.left.dim(), self.right.dim());
        let coeff = CMat::from_fn(self.coeff.nrows(), me * mf, |t, col| {
            let (s, r) = (col / me, col % me);
            self.coeff[(t, r * mf + s)]
        });
        BilinearMapRep {
            left: self.right.clone(),
            right: self.left.clone(),
            target: self.target.clone(),
            coeff,
        }
    }

    /// Partial evaluation `y ↦ φ(x, y)` as an `m_G × m_F` matrix.
    fn fix_left(&self, x: &[C64]) -> CMat {
        let mf = self.right.dim();
        let mut out = CMat::zeros(self.target.dim(), mf);
        for (r, a) in x.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            out += self.coeff.columns(r * mf, mf) * *a;
        }
        out
    }

    /// Partial evaluation `x ↦ φ(x, y)` as an `m_G × m_E` matrix.
    fn fix_right(&self, y: &[C64]) -> CMat {
        let (me, mf) = (self.left.dim(), self.right.dim());
        let mut out = CMat::zeros(self.target.dim(), me);
        for r in 0..me {
            for (s, b) in y.iter().enumerate() {
                if *b == ZERO {
                    continue;
                }
                let col = self.coeff.column(r * mf + s) * *b;
                let mut dst = out.column_mut(r);
                dst += col;
            }
        }
        out
    }
}

/// Bundles an `m × m` array of bilinear forms into one bilinear map into
/// `M_m`.
pub fn bundle_forms(psi: &[Vec<BilinearMapRep>]) -> Result<BilinearMapRep> {
    let m = psi.len();
    let first = psi
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::shape("empty array of forms"))?;
    let (l, r) = (first.left.clone(), first.right.clone());
    let cols = l.dim() * r.dim();
    let mut coeff = CMat::zeros(m * m, cols);
    for (p, row) in psi.iter().enumerate() {
        if row.len() != m {
            return Err(Error::shape("array of forms must be square"));
        }
        for (q, form) in row.iter().enumerate() {
            if !form.is_form() {
                return Err(Error::Unsupported("array entries must be bilinear forms".into()));
            }
            if !form.left.same_as(&l) || !form.right.same_as(&r) {
                return Err(Error::SpaceMismatch {
                    expected: format!("{} x {}", l.label(), r.label()),
                    found: format!("{} x {}", form.left.label(), form.right.label()),
                });
            }
            coeff.set_row(p * m + q, &form.coeff.row(0));
        }
    }
    BilinearMapRep::new(l, r, Arc::new(ConcreteSpace::full_matrix(m)), coeff)
}

/// `φ_n(u1, u2) = Σ φ(u1_a, u2_b) ⊗ λ_n(ε_a, ε_b) ∈ M_{k(n)}(G)`.
pub fn bilinear_amplify(
    map: &BilinearMapRep,
    weight: &BilinearWeight,
    u1: &MatElement,
    u2: &MatElement,
) -> Result<MatElement> {
    let n = u1.level();
    if u2.level() != n {
        return Err(Error::shape("both arguments need the same level"));
    }
    if !u1.space().same_as(&map.left) || !u2.space().same_as(&map.right) {
        return Err(Error::SpaceMismatch {
            expected: format!("{} x {}", map.left.label(), map.right.label()),
            found: format!("{} x {}", u1.space().label(), u2.space().label()),
        });
    }
    let s = weight.structure(n)?;
    let mg = map.target.dim();
    let mut coeffs = vec![ZERO; s.k * s.k * mg];
    for &(a, b, p, q, v) in &s.entries {
        let g = map.eval_coords(u1.entry(a / n, a % n), u2.entry(b / n, b % n));
        let dst = (p * s.k + q) * mg;
        for (t, z) in g.iter().enumerate() {
            coeffs[dst + t] += v * z;
        }
    }
    MatElement::new(map.target.clone(), s.k, coeffs)
}

/// The linear operator `u2 ↦ φ_n(u1, u2)` (or `u1 ↦ φ_n(u1, u2)`).
fn partial_operator(
    map: &BilinearMapRep,
    s: &WeightStructure,
    fixed: &MatElement,
    fixed_is_left: bool,
    free_space: &ConcreteSpace,
) -> Result<RealizedOperator> {
    let n = s.n;
    let mfree = if fixed_is_left { map.right.dim() } else { map.left.dim() };
    let dg = map.target.ambient_dim();
    let side = s.k * dg;
    let partials: Vec<CMat> = (0..n * n)
        .map(|a| {
            let e = fixed.entry(a / n, a % n);
            if fixed_is_left {
                map.fix_left(e)
            } else {
                map.fix_right(e)
            }
        })
        .collect();
    let mut images = vec![CMat::zeros(side, side); n * n * mfree];
    for &(a, b, p, q, v) in &s.entries {
        let (fixed_idx, free_idx) = if fixed_is_left { (a, b) } else { (b, a) };
        let part = &partials[fixed_idx];
        for col in 0..mfree {
            let coords: Vec<C64> = part.column(col).iter().map(|z| z * v).collect();
            if coords.iter().all(|z| *z == ZERO) {
                continue;
            }
            let block = map.target.combine(&coords);
            let mut view = images[free_idx * mfree + col].view_mut((p * dg, q * dg), (dg, dg));
            view += block;
        }
    }
    let input = free_space.amplified(n).sparse_basis().to_vec();
    let output = images.iter().map(SparseMat::from_dense).collect();
    RealizedOperator::new(input, output, false)
}

struct PairRun {
    value: f64,
    u1: Vec<C64>,
    u2: Vec<C64>,
    iterations: usize,
    converged: bool,
}

fn alternate(
    map: &BilinearMapRep,
    s: &WeightStructure,
    mut u1: MatElement,
    mut u2: MatElement,
    cfg: &EstimatorConfig,
) -> Result<PairRun> {
    let n = s.n;
    let norm = |x: &MatElement| x.min_norm();
    if norm(&u1) == 0.0 || norm(&u2) == 0.0 {
        return Ok(PairRun {
            value: 0.0,
            u1: u1.into_coeffs(),
            u2: u2.into_coeffs(),
            iterations: 0,
            converged: true,
        });
    }
    u1 = u1.scale(c(1.0 / norm(&u1), 0.0));
    u2 = u2.scale(c(1.0 / norm(&u2), 0.0));
    let mut value = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    let rounds = OUTER_ROUNDS.min(cfg.max_iter.max(1));
    for _ in 0..rounds {
        let op2 = partial_operator(map, s, &u1, true, &map.right)?;
        let run2 = op2.ascend_from(u2.coeffs().to_vec(), INNER_ITER, cfg.tol);
        u2 = MatElement::new(map.right.clone(), n, run2.coords)?;
        let op1 = partial_operator(map, s, &u2, false, &map.left)?;
        let run1 = op1.ascend_from(u1.coeffs().to_vec(), INNER_ITER, cfg.tol);
        u1 = MatElement::new(map.left.clone(), n, run1.coords)?;
        iterations += run1.iterations + run2.iterations;
        let new_value = run1.value;
        let gain = new_value - value;
        value = value.max(new_value);
        if gain <= cfg.tol * value.max(1e-300) {
            converged = true;
            break;
        }
    }
    Ok(PairRun {
        value,
        u1: u1.into_coeffs(),
        u2: u2.into_coeffs(),
        iterations,
        converged,
    })
}

/// Certified level-independent bound `Σ_rs ‖φ(B_r, C_s)‖ ‖g_r‖ ‖h_s‖` for
/// contractive weights, where `g_r`, `h_s` are coordinate functionals.
pub fn bilinear_structural_upper(map: &BilinearMapRep, weight: &BilinearWeight) -> f64 {
    if !weight.is_contractive() {
        return f64::INFINITY;
    }
    let gl = coordinate_norms(&map.left);
    let gr = coordinate_norms(&map.right);
    let mf = map.right.dim();
    let mut total = 0.0;
    for (r, a) in gl.iter().enumerate() {
        for (s, b) in gr.iter().enumerate() {
            let coords: Vec<C64> = map.coeff.column(r * mf + s).iter().copied().collect();
            if coords.iter().all(|z| *z == ZERO) {
                continue;
            }
            total += spectral_norm(&map.target.combine(&coords)) * a * b;
        }
    }
    total
}

/// Nuclear norms of the Riesz representers of the coordinate functionals.
fn coordinate_norms(space: &ConcreteSpace) -> Vec<f64> {
    let m = space.dim();
    let basis = space.basis();
    let gram = CMat::from_fn(m, m, |i, j| linalg::frob_inner(&basis[i], &basis[j]));
    let chol = gram.cholesky().expect("basis is independent");
    (0..m)
        .map(|r| {
            let mut e = CVec::zeros(m);
            e[r] = ONE;
            let h = chol.solve(&e);
            linalg::nuclear_norm(&space.combine(h.as_slice()))
        })
        .collect()
}

/// `‖φ‖_λ = sup_n ‖φ_n‖` bracket with the per-level profile.
pub fn bilinear_lambda_norm(
    map: &BilinearMapRep,
    weight: &BilinearWeight,
    level_max: usize,
    cfg: &EstimatorConfig,
) -> Result<NormEstimate> {
    if level_max == 0 {
        return Err(Error::shape("level_max must be at least 1"));
    }
    cfg.validate()?;
    weight.check_level(level_max)?;
    let mut profile = Vec::with_capacity(level_max);
    let mut best: Option<(f64, MatElement, MatElement)> = None;
    let mut prev: Option<(MatElement, MatElement)> = None;
    let mut iterations = 0;
    let mut converged = true;
    for n in 1..=level_max {
        let s = weight.structure(n)?;
        let mut starts: Vec<(MatElement, MatElement)> = Vec::new();
        if let Some((a, b)) = &prev {
            starts.push((a.embed(n)?, b.embed(n)?));
        }
        for i in 0..cfg.restarts.max(1) {
            let mut rng = rng_from_seed(cfg.seed.wrapping_add(i as u64));
            let a = gaussian_vec(&mut rng, n * n * map.left.dim());
            let b = gaussian_vec(&mut rng, n * n * map.right.dim());
            starts.push((
                MatElement::new(map.left.clone(), n, a)?,
                MatElement::new(map.right.clone(), n, b)?,
            ));
        }
        let runs = starts
            .into_par_iter()
            .map(|(a, b)| alternate(map, &s, a, b, cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut top = 0;
        for (k, r) in runs.iter().enumerate() {
            if r.value > runs[top].value {
                top = k;
            }
        }
        iterations += runs.iter().map(|r| r.iterations).sum::<usize>();
        converged &= runs[top].converged;
        let r = &runs[top];
        let u1 = MatElement::new(map.left.clone(), n, r.u1.clone())?;
        let u2 = MatElement::new(map.right.clone(), n, r.u2.clone())?;
        profile.push(r.value);
        if best.as_ref().is_none_or(|(v, _, _)| r.value > *v) {
            best = Some((r.value, u1.clone(), u2.clone()));
        }
        prev = Some((u1, u2));
    }
    let (lower, u1, u2) = best.expect("level_max >= 1");
    let upper = bilinear_structural_upper(map, weight);
    let mut est = NormEstimate::bracket(lower, upper);
    est.level_profile = profile;
    est.iterations = iterations;
    est.converged = converged;
    if !weight.is_contractive() {
        est.notes.push("custom weight: no structural upper bound".into());
    }
    Ok(est.with_witness(Witness::Pair(u1, u2)))
}

/// `⟨⟨u, ψ⟩⟩ = [ψ_pq(u_il)]`, an `(n m) × (n m)` matrix with row index
/// `i m + p` and column index `l m + q`.
pub fn matrix_pairing(u: &TensorElement, psi: &[Vec<BilinearMapRep>]) -> Result<CMat> {
    let bundle = bundle_forms(psi)?;
    if !bundle.left.same_as(u.left()) || !bundle.right.same_as(u.right()) {
        return Err(Error::SpaceMismatch {
            expected: format!("{} x {}", u.left().label(), u.right().label()),
            found: format!("{} x {}", bundle.left.label(), bundle.right.label()),
        });
    }
    let n = u.level();
    let m = psi.len();
    let cols = u.left().dim() * u.right().dim();
    let mut out = CMat::zeros(n * m, n * m);
    for i in 0..n {
        for l in 0..n {
            let base = (i * n + l) * cols;
            let v = CVec::from_column_slice(&u.coeffs()[base..base + cols]);
            let vals = &bundle.coeff * v;
            for p in 0..m {
                for q in 0..m {
                    out[(i * m + p, l * m + q)] = vals[p * m + q];
                }
            }
        }
    }
    Ok(out)
}

/// `Σ (e_a ⊗ f_b) ⊗ λ_n(ε_a, ε_b) ∈ M_{k(n)}(E ⊗ F)`: `e ⊙ f` for the
/// product weight, `e ⊗ f` for Kronecker, `e • f` for Schur.
pub fn weighted_tensor(e: &MatElement, f: &MatElement, weight: &BilinearWeight) -> Result<TensorElement> {
    let n = e.level();
    if f.level() != n {
        return Err(Error::shape("both factors need the same level"));
    }
    let s = weight.structure(n)?;
    let (me, mf) = (e.space().dim(), f.space().dim());
    let mut coeffs = vec![ZERO; s.k * s.k * me * mf];
    for &(a, b, p, q, v) in &s.entries {
        let (x, y) = (e.entry(a / n, a % n), f.entry(b / n, b % n));
        let dst = (p * s.k + q) * me * mf;
        for (r, xr) in x.iter().enumerate() {
            for (t, ys) in y.iter().enumerate() {
                coeffs[dst + r * mf + t] += v * xr * ys;
            }
        }
    }
    TensorElement::new(e.space().clone(), f.space().clone(), s.k, coeffs)
}

/// Dual forms `ψ(x, y) = V* x Z y Q` with `V: d_E × m`, `Z: d_E × d_F`,
/// `Q: d_F × m`. Their λ-norm is at most `‖V‖ ‖Z‖ ‖Q‖` for the product,
/// Kronecker and Schur weights.
struct FormAscent<'a> {
    u: &'a TensorElement,
    m: usize,
}

impl FormAscent<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.u.left().ambient_dim(), self.u.right().ambient_dim())
    }

    /// Block `(i, l)` of the pairing before the outer factors: `T_il = Σ u^{rs} B_r Z C_s`.
    fn inner(&self, z: &CMat) -> Vec<CMat> {
        let n = self.u.level();
        let (me, mf) = (self.u.left().dim(), self.u.right().dim());
        let (lb, rb) = (self.u.left().basis(), self.u.right().basis());
        let zc: Vec<CMat> = rb.iter().map(|cs| z * cs).collect();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for l in 0..n {
                let (de, df) = self.dims();
                let mut t = CMat::zeros(de, df);
                for r in 0..me {
                    let mut acc = CMat::zeros(de, df);
                    let mut any = false;
                    for s in 0..mf {
                        let w = self.u.coeff(i, l, r, s);
                        if w != ZERO {
                            acc += &zc[s] * w;
                            any = true;
                        }
                    }
                    if any {
                        t += &lb[r] * acc;
                    }
                }
                out.push(t);
            }
        }
        out
    }

    fn pairing(&self, v: &CMat, z: &CMat, q: &CMat) -> CMat {
        let n = self.u.level();
        let m = self.m;
        let t = self.inner(z);
        let mut out = CMat::zeros(n * m, n * m);
        for i in 0..n {
            for l in 0..n {
                let block = v.adjoint() * &t[i * n + l] * q;
                out.view_mut((i * m, l * m), (m, m)).copy_from(&block);
            }
        }
        out
    }

    fn value(&self, v: &CMat, z: &CMat, q: &CMat) -> f64 {
        let scale = spectral_norm(v) * spectral_norm(z) * spectral_norm(q);
        if scale <= 0.0 {
            return 0.0;
        }
        spectral_norm(&self.pairing(v, z, q)) / scale
    }

    fn run(&self, mut v: CMat, mut z: CMat, mut q: CMat, cfg: &EstimatorConfig) -> (f64, [CMat; 3], usize) {
        let n = self.u.level();
        let m = self.m;
        let (lb, rb) = (self.u.left().basis(), self.u.right().basis());
        let (me, mf) = (self.u.left().dim(), self.u.right().dim());
        v = linalg::polar_factor(&v);
        z = linalg::polar_factor(&z);
        q = linalg::polar_factor(&q);
        let mut value = self.value(&v, &z, &q);
        let mut rounds = 0;
        for _ in 0..OUTER_ROUNDS.min(cfg.max_iter.max(1)) {
            rounds += 1;
            let before = value;
            // V step
            let pm = self.pairing(&v, &z, &q);
            let (_, a, b) = linalg::top_singular_pair(&pm);
            let t = self.inner(&z);
            let mut gv = CMat::zeros(v.nrows(), m);
            for i in 0..n {
                for l in 0..n {
                    let ai = a.rows(i * m, m).into_owned();
                    let bl = b.rows(l * m, m).into_owned();
                    gv += &t[i * n + l] * &q * bl * ai.adjoint();
                }
            }
            v = linalg::polar_factor(&gv);
            // Q step
            let pm = self.pairing(&v, &z, &q);
            let (_, a, b) = linalg::top_singular_pair(&pm);
            let mut h = CMat::zeros(m, q.nrows());
            for i in 0..n {
                for l in 0..n {
                    let ai = a.rows(i * m, m).into_owned();
                    let bl = b.rows(l * m, m).into_owned();
                    h += bl * ai.adjoint() * v.adjoint() * &t[i * n + l];
                }
            }
            q = linalg::polar_factor(&h.adjoint());
            // Z step: a* M b = tr(Z K) with K = Σ u^{rs} C_s Q b_l a_i* V* B_r
            let pm = self.pairing(&v, &z, &q);
            let (_, a, b) = linalg::top_singular_pair(&pm);
            let mut k = CMat::zeros(z.ncols(), z.nrows());
            for i in 0..n {
                for l in 0..n {
                    let ai = a.rows(i * m, m).into_owned();
                    let bl = b.rows(l * m, m).into_owned();
                    let mid = &q * bl * ai.adjoint() * v.adjoint();
                    for r in 0..me {
                        let mut left = CMat::zeros(z.ncols(), z.ncols());
                        let mut any = false;
                        for s in 0..mf {
                            let w = self.u.coeff(i, l, r, s);
                            if w != ZERO {
                                left += &rb[s] * w;
                                any = true;
                            }
                        }
                        if any {
                            k += left * &mid * &lb[r];
                        }
                    }
                }
            }
            z = linalg::polar_factor(&k.adjoint());
            value = self.value(&v, &z, &q);
            if value - before <= cfg.tol * value.max(1e-300) {
                break;
            }
        }
        (value, [v, z, q], rounds)
    }
}

/// Best dual-form value over forms on `E × F` in the given orientation.
fn oriented_lower(u: &TensorElement, m_cap: usize, cfg: &EstimatorConfig) -> (f64, Vec<CMat>, usize) {
    let (de, df) = (u.left().ambient_dim(), u.right().ambient_dim());
    let mut jobs = Vec::new();
    for m in 1..=m_cap {
        for i in 0..cfg.restarts.max(1) {
            jobs.push((m, i));
        }
    }
    let runs: Vec<(f64, [CMat; 3], usize)> = jobs
        .into_par_iter()
        .map(|(m, i)| {
            let mut rng = rng_from_seed(cfg.seed.wrapping_add((m * 1000 + i) as u64));
            let v = random_matrix(&mut rng, de, m);
            let z = random_matrix(&mut rng, de, df);
            let q = random_matrix(&mut rng, df, m);
            FormAscent { u, m }.run(v, z, q, cfg)
        })
        .collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.0 > runs[best].0 {
            best = k;
        }
    }
    let iters = runs.iter().map(|r| r.2).sum();
    let (value, parts, _) = runs.into_iter().nth(best).expect("at least one run");
    (value, parts.to_vec(), iters)
}

/// Lower bound for `‖u‖_λ` from explicit dual forms, paired with the
/// decomposition upper bound of the matching case (product ↔ Haagerup,
/// Kronecker ↔ projective, Schur ↔ Schur).
pub fn lambda_tensor_norm_lower(
    u: &TensorElement,
    weight: &BilinearWeight,
    m_cap: usize,
    cfg: &EstimatorConfig,
) -> Result<NormEstimate> {
    cfg.validate()?;
    if m_cap == 0 {
        return Err(Error::shape("m_cap must be at least 1"));
    }
    let mode = match weight.kind() {
        BilinearKind::Product => DecompMode::Odot,
        BilinearKind::Kronecker => DecompMode::Otimes,
        BilinearKind::Schur => DecompMode::Bullet,
        BilinearKind::Custom(_) => {
            return Err(Error::Unsupported(
                "dual lower bounds are implemented for product, kronecker and schur weights".into(),
            ))
        }
    };
    if u.coeffs().iter().all(|z| *z == ZERO) {
        return Ok(NormEstimate::exact(0.0));
    }
    let (mut lower, mut parts, mut iters) = oriented_lower(u, m_cap, cfg);
    let mut orientation = "x-then-y";
    if mode != DecompMode::Odot {
        // Forms `V* y Z x Q` are also contractive for symmetric weights; they
        // are the forms above evaluated on the flipped element.
        let (alt, alt_parts, alt_iters) = oriented_lower(&u.flip(), m_cap, cfg);
        iters += alt_iters;
        if alt > lower {
            lower = alt;
            parts = alt_parts;
            orientation = "y-then-x";
        }
    }
    let rank_cap = u.level() * u.left().dim().min(u.right().dim()) * u.level();
    let dec = decomposition_bound(u, mode, rank_cap.max(1), cfg)?;
    let mut est = NormEstimate::bracket(lower, dec.upper);
    est.iterations = iters + dec.iterations;
    est.converged = dec.converged;
    est.notes.push(format!(
        "dual forms V* x Z y Q, orientation {orientation}; upper from {} decomposition",
        mode.label()
    ));
    Ok(est.with_witness(Witness::Factors(parts)))
}

/// Re-evaluates a [`Witness::Factors`] from [`lambda_tensor_norm_lower`].
pub fn reevaluate_forms(u: &TensorElement, parts: &[CMat], flipped: bool) -> f64 {
    let target = if flipped { u.flip() } else { u.clone() };
    let m = parts[0].ncols();
    FormAscent { u: &target, m }.value(&parts[0], &parts[1], &parts[2])
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub witness: Option<CMat>,
    /// `max ‖λ_n(b, a) − u* λ_n(a, b) u‖` over the sampled pairs.
    pub residual: f64,
}

/// Swap unitary on `ℂ^n ⊗ ℂ^n`.
pub fn swap_unitary(n: usize) -> CMat {
    CMat::from_fn(n * n, n * n, |row, col| {
        if row == (col % n) * n + col / n {
            ONE
        } else {
            ZERO
        }
    })
}

/// Looks for a unitary `u` with `λ_n(b, a) = u* λ_n(a, b) u`.
pub fn symmetry_check(weight: &BilinearWeight, n: usize, seed: u64) -> Result<SymmetryReport> {
    let k = weight.k_of(n)?;
    let mut rng = rng_from_seed(seed);
    let pairs: Vec<(CMat, CMat)> = (0..SYMMETRY_SAMPLES)
        .map(|_| (random_matrix(&mut rng, n, n), random_matrix(&mut rng, n, n)))
        .collect();
    let candidate = match weight.kind() {
        BilinearKind::Kronecker => swap_unitary(n),
        BilinearKind::Schur => CMat::identity(n, n),
        _ => {
            // Least squares: smallest right singular vector of X ↦ [X λ(b,a) − λ(a,b) X].
            let k2 = k * k;
            let mut rows = Vec::new();
            for (a, b) in &pairs {
                let ab = weight.apply(a, b)?;
                let ba = weight.apply(b, a)?;
                // vec_rows(X M) = (I ⊗ M^T) vec(X); vec_rows(N X) = (N ⊗ I) vec(X)
                let op = kron(&CMat::identity(k, k), &ba.transpose()) - kron(&ab, &CMat::identity(k, k));
                rows.push(op);
            }
            let mut big = CMat::zeros(rows.len() * k2, k2);
            for (i, r) in rows.iter().enumerate() {
                big.view_mut((i * k2, 0), (k2, k2)).copy_from(r);
            }
            let svd = big.svd(false, true);
            let vt = svd.v_t.expect("v_t requested");
            let mut idx = 0;
            for (i, s) in svd.singular_values.iter().enumerate() {
                if *s < svd.singular_values[idx] {
                    idx = i;
                }
            }
            let x = linalg::unvec_rows(vt.row(idx).adjoint().as_slice(), k, k);
            linalg::polar_factor(&x)
        }
    };
    let mut residual = 0.0_f64;
    for (a, b) in &pairs {
        let lhs = weight.apply(b, a)?;
        let rhs = candidate.adjoint() * weight.apply(a, b)? * &candidate;
        residual = residual.max(spectral_norm(&(lhs - rhs)));
    }
    let symmetric = residual <= SYMMETRY_TOL;
    Ok(SymmetryReport {
        symmetric,
        witness: symmetric.then_some(candidate),
        residual,
    })
}

/// Random bilinear map with Gaussian coefficients.
pub fn random_bilinear<R: rand::Rng + ?Sized>(
    rng: &mut R,
    left: Arc<ConcreteSpace>,
    right: Arc<ConcreteSpace>,
    target: Arc<ConcreteSpace>,
) -> BilinearMapRep {
    let coeff = random_matrix(rng, target.dim(), left.dim() * right.dim());
    BilinearMapRep::new(left, right, target, coeff).expect("shapes match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_element, rng_from_seed};

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::default().with_restarts(6)
    }

    fn m(d: usize) -> Arc<ConcreteSpace> {
        Arc::new(ConcreteSpace::full_matrix(d))
    }

    #[test]
    fn structures_reproduce_weights() {
        let mut rng = rng_from_seed(1);
        for w in [BilinearWeight::product(), BilinearWeight::kronecker(), BilinearWeight::schur()] {
            let n = 3;
            let s = w.structure(n).unwrap();
            let a = random_matrix(&mut rng, n, n);
            let b = random_matrix(&mut rng, n, n);
            let mut out = CMat::zeros(s.k, s.k);
            for &(ia, ib, p, q, v) in &s.entries {
                out[(p, q)] += v * a[(ia / n, ia % n)] * b[(ib / n, ib % n)];
            }
            assert!((out - w.apply(&a, &b).unwrap()).norm() < 1e-12, "{}", w.label());
        }
    }

    #[test]
    fn level_one_amplification_is_the_map() {
        let mut rng = rng_from_seed(2);
        let phi = random_bilinear(&mut rng, m(2), m(2), m(2));
        let x = random_element(&mut rng, m(2), 1);
        let y = random_element(&mut rng, m(2), 1);
        for w in [BilinearWeight::product(), BilinearWeight::kronecker(), BilinearWeight::schur()] {
            let out = bilinear_amplify(&phi, &w, &x, &y).unwrap();
            assert_eq!(out.coeffs(), phi.eval_coords(x.coeffs(), y.coeffs()).as_slice());
        }
    }

    #[test]
    fn schur_scalar_identity() {
        let phi = BilinearMapRep::scalar_multiplication();
        let s = Arc::new(ConcreteSpace::scalars());
        let id = MatElement::scalar_tensor(s, &CMat::identity(3, 3), &[ONE]).unwrap();
        let out = bilinear_amplify(&phi, &BilinearWeight::schur(), &id, &id).unwrap();
        assert_eq!(out.realize(), CMat::identity(3, 3));
    }

    #[test]
    fn product_rank_one_assembly() {
        let mut rng = rng_from_seed(3);
        let phi = random_bilinear(&mut rng, m(2), m(2), m(2));
        let (a, b) = (random_matrix(&mut rng, 2, 2), random_matrix(&mut rng, 2, 2));
        let (e, f) = (gaussian_vec(&mut rng, 4), gaussian_vec(&mut rng, 4));
        let x = MatElement::scalar_tensor(m(2), &a, &e).unwrap();
        let y = MatElement::scalar_tensor(m(2), &b, &f).unwrap();
        let out = bilinear_amplify(&phi, &BilinearWeight::product(), &x, &y).unwrap();
        let expect = MatElement::scalar_tensor(m(2), &(&a * &b), &phi.eval_coords(&e, &f)).unwrap();
        for (p, q) in out.coeffs().iter().zip(expect.coeffs()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_multiplication_norms_are_one() {
        let phi = BilinearMapRep::scalar_multiplication();
        for w in [BilinearWeight::schur(), BilinearWeight::kronecker(), BilinearWeight::product()] {
            let est = bilinear_lambda_norm(&phi, &w, 3, &cfg()).unwrap();
            for v in &est.level_profile {
                assert!((v - 1.0).abs() < 1e-6, "{} {v}", w.label());
            }
            assert!((est.upper - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_bilinear_map_has_zero_norm() {
        let phi = BilinearMapRep::zero(m(2), m(2), m(1));
        let est = bilinear_lambda_norm(&phi, &BilinearWeight::product(), 2, &cfg()).unwrap();
        assert_eq!(est.lower, 0.0);
        assert_eq!(est.upper, 0.0);
    }

    #[test]
    fn pairing_of_scalars() {
        let s = Arc::new(ConcreteSpace::scalars());
        let u = TensorElement::new(s.clone(), s.clone(), 1, vec![c(3.0, 0.0)]).unwrap();
        let psi = BilinearMapRep::new(s.clone(), s.clone(), s, CMat::from_element(1, 1, c(2.0, 1.0))).unwrap();
        let p = matrix_pairing(&u, &[vec![psi]]).unwrap();
        assert_eq!(p[(0, 0)], c(6.0, 3.0));
    }

    #[test]
    fn flip_is_involutive() {
        let mut rng = rng_from_seed(4);
        let coeffs = gaussian_vec(&mut rng, 4 * 4 * 2);
        let u = TensorElement::new(m(2), Arc::new(ConcreteSpace::diagonal(2)), 2, coeffs).unwrap();
        let back = u.flip().flip();
        assert_eq!(back.coeffs(), u.coeffs());
        assert!((u.flip().min_norm() - u.min_norm()).abs() < 1e-10);
    }

    #[test]
    fn symmetry_witnesses() {
        let k = symmetry_check(&BilinearWeight::kronecker(), 2, 7).unwrap();
        assert!(k.symmetric);
        assert_eq!(k.witness.unwrap(), swap_unitary(2));
        let s = symmetry_check(&BilinearWeight::schur(), 3, 7).unwrap();
        assert!(s.symmetric);
        let p = symmetry_check(&BilinearWeight::product(), 2, 7).unwrap();
        assert!(!p.symmetric);
        assert!(p.residual > 1e-6);
    }

    #[test]
    fn rank_one_tensor_norm_is_pinned() {
        let mut rng = rng_from_seed(5);
        let x = random_element(&mut rng, m(2), 1);
        let y = random_element(&mut rng, m(2), 1);
        let u = TensorElement::from_min_tensor(&x, &y).unwrap();
        let target = x.min_norm() * y.min_norm();
        for w in [BilinearWeight::product(), BilinearWeight::kronecker(), BilinearWeight::schur()] {
            let est = lambda_tensor_norm_lower(&u, &w, 2, &cfg()).unwrap();
            assert!(est.lower >= target - 1e-6, "{} {} {target}", w.label(), est.lower);
            assert!(est.upper <= target + 1e-6);
        }
    }

    #[test]
    fn tensor_witness_reevaluates() {
        let mut rng = rng_from_seed(6);
        let u = TensorElement::new(m(2), m(2), 1, gaussian_vec(&mut rng, 16)).unwrap();
        let est = lambda_tensor_norm_lower(&u, &BilinearWeight::product(), 2, &cfg()).unwrap();
        let Some(Witness::Factors(parts)) = &est.witness else { panic!() };
        let v = reevaluate_forms(&u, parts, false);
        assert!((v - est.lower).abs() <= 1e-9 * est.lower);
    }
}
