//! Linear maps between concrete spaces, amplifications, weight sequences,
//! and bracketed operator, cb and weighted-cb norms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimate::{estimate_from, EstimatorConfig, NormEstimate, RealizedOperator, Witness};
use crate::linalg::{self, c, kron, spectral_norm, CMat, CVec, SparseMat, C64, ONE, ZERO};
use crate::space::{ConcreteSpace, MatElement};

/// Largest level at which the level-`d_F` Frobenius bracket is computed for
/// the cb upper bound.
const CB_UPPER_LEVEL_CAP: usize = 8;

/// Coordinate representation of a (conjugate-)linear map `E → F`.
#[derive(Debug, Clone)]
pub struct LinearMapRep {
    domain: Arc<ConcreteSpace>,
    codomain: Arc<ConcreteSpace>,
    coeff: CMat,
    conj_linear: bool,
}

impl LinearMapRep {
    pub fn new(
        domain: Arc<ConcreteSpace>,
        codomain: Arc<ConcreteSpace>,
        coeff: CMat,
        conj_linear: bool,
    ) -> Result<Self> {
        if coeff.nrows() != codomain.dim() || coeff.ncols() != domain.dim() {
            return Err(Error::shape(format!(
                "coefficient matrix is {}x{}, expected {}x{} for `{}` -> `{}`",
                coeff.nrows(),
                coeff.ncols(),
                codomain.dim(),
                domain.dim(),
                domain.label(),
                codomain.label()
            )));
        }
        Ok(LinearMapRep {
            domain,
            codomain,
            coeff,
            conj_linear,
        })
    }

    pub fn identity(space: Arc<ConcreteSpace>) -> Self {
        let m = space.dim();
        LinearMapRep {
            domain: space.clone(),
            codomain: space,
            coeff: CMat::identity(m, m),
            conj_linear: false,
        }
    }

    pub fn zero(domain: Arc<ConcreteSpace>, codomain: Arc<ConcreteSpace>) -> Self {
        let coeff = CMat::zeros(codomain.dim(), domain.dim());
        LinearMapRep {
            domain,
            codomain,
            coeff,
            conj_linear: false,
        }
    }

    /// Transpose on `M_d` in the matrix-unit basis.
    pub fn transpose(d: usize) -> Self {
        let space = Arc::new(ConcreteSpace::full_matrix(d));
        let coeff = transpose_permutation(d);
        LinearMapRep {
            domain: space.clone(),
            codomain: space,
            coeff,
            conj_linear: false,
        }
    }

    /// `x ↦ x*` on `M_d`, conjugate-linear.
    pub fn adjoint(d: usize) -> Self {
        let mut map = Self::transpose(d);
        map.conj_linear = true;
        map
    }

    /// Trace functional `M_d → M_1`.
    pub fn trace(d: usize) -> Self {
        let coeff = CMat::from_fn(1, d * d, |_, k| if k / d == k % d { ONE } else { ZERO });
        LinearMapRep {
            domain: Arc::new(ConcreteSpace::full_matrix(d)),
            codomain: Arc::new(ConcreteSpace::scalars()),
            coeff,
            conj_linear: false,
        }
    }

    pub fn domain(&self) -> &Arc<ConcreteSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<ConcreteSpace> {
        &self.codomain
    }

    pub fn coeff(&self) -> &CMat {
        &self.coeff
    }

    pub fn is_conj_linear(&self) -> bool {
        self.conj_linear
    }

    pub fn is_functional(&self) -> bool {
        self.codomain.dim() == 1 && self.codomain.ambient_dim() == 1
    }

    /// Image coordinates of domain coordinates.
    pub fn apply_coords(&self, x: &[C64]) -> Vec<C64> {
        let v = CVec::from_iterator(
            x.len(),
            x.iter().map(|z| if self.conj_linear { z.conj() } else { *z }),
        );
        (&self.coeff * v).iter().copied().collect()
    }

    /// Entrywise application `[x_ij] ↦ [φ(x_ij)]` at the element's level.
    pub fn apply(&self, x: &MatElement) -> Result<MatElement> {
        if !x.space().same_as(&self.domain) {
            return Err(Error::SpaceMismatch {
                expected: self.domain.label().to_string(),
                found: x.space().label().to_string(),
            });
        }
        let n = x.level();
        let mut coeffs = Vec::with_capacity(n * n * self.codomain.dim());
        for i in 0..n {
            for j in 0..n {
                coeffs.extend(self.apply_coords(x.entry(i, j)));
            }
        }
        MatElement::new(self.codomain.clone(), n, coeffs)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMapRep) -> Result<LinearMapRep> {
        if !inner.codomain.same_as(&self.domain) {
            return Err(Error::SpaceMismatch {
                expected: self.domain.label().to_string(),
                found: inner.codomain.label().to_string(),
            });
        }
        let right = if self.conj_linear {
            inner.coeff.map(|z| z.conj())
        } else {
            inner.coeff.clone()
        };
        Ok(LinearMapRep {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            coeff: &self.coeff * right,
            conj_linear: self.conj_linear ^ inner.conj_linear,
        })
    }

    pub fn scale(&self, s: f64) -> LinearMapRep {
        let mut out = self.clone();
        out.coeff *= c(s, 0.0);
        out
    }

    /// `φ^{(n)}` as a map `M_n(E) → M_n(F)` between amplified spaces.
    pub fn amplify(&self, n: usize) -> LinearMapRep {
        LinearMapRep {
            domain: Arc::new(self.domain.amplified(n)),
            codomain: Arc::new(self.codomain.amplified(n)),
            coeff: kron(&CMat::identity(n * n, n * n), &self.coeff),
            conj_linear: self.conj_linear,
        }
    }

    /// `φ ⊗ λ_n : x ↦ Σ_ij φ(x_ij) ⊗ λ_n(ε_ij)` on `M_n(E)`.
    pub fn weighted_amplify(&self, weight: &WeightSequence, n: usize) -> Result<LinearMapRep> {
        let table = weight.table(n)?;
        Ok(LinearMapRep {
            domain: Arc::new(self.domain.amplified(n)),
            codomain: Arc::new(self.codomain.amplified(n)),
            coeff: kron(&table, &self.coeff),
            conj_linear: self.conj_linear,
        })
    }

    /// The realized operator: domain basis in, images of basis out.
    pub(crate) fn operator(&self) -> Result<RealizedOperator> {
        let input = self.domain.sparse_basis().to_vec();
        let out_basis = self.codomain.sparse_basis();
        let dc = self.codomain.ambient_dim();
        let output = (0..self.domain.dim())
            .map(|k| {
                let mut acc = CMat::zeros(dc, dc);
                for (s, b) in out_basis.iter().enumerate() {
                    b.axpy_into(self.coeff[(s, k)], &mut acc);
                }
                SparseMat::from_dense(&acc)
            })
            .collect();
        RealizedOperator::new(input, output, self.conj_linear)
    }

    /// Upper bound `‖g_s‖` for each codomain coordinate functional, from the
    /// nuclear norm of its Riesz representer inside the domain.
    fn coordinate_functional_bounds(&self) -> Vec<f64> {
        let m = self.domain.dim();
        let basis = self.domain.basis();
        let gram = CMat::from_fn(m, m, |i, j| linalg::frob_inner(&basis[i], &basis[j]));
        let chol = gram.cholesky().expect("domain basis is independent");
        (0..self.codomain.dim())
            .map(|s| {
                let a = CVec::from_fn(m, |r, _| self.coeff[(s, r)].conj());
                let h = chol.solve(&a);
                let rep = self.domain.combine(h.as_slice());
                linalg::nuclear_norm(&rep)
            })
            .collect()
    }

    /// `Σ_s ‖g_s‖ ‖F_s‖`: writing `φ = Σ_s g_s(·) F_s` bounds `‖φ‖_cb` and,
    /// after multiplying by a weight's range bound, every weighted level.
    pub fn finite_rank_bound(&self) -> f64 {
        self.coordinate_functional_bounds()
            .iter()
            .zip(self.codomain.basis())
            .map(|(g, f)| g * spectral_norm(f))
            .sum()
    }
}

fn transpose_permutation(d: usize) -> CMat {
    CMat::from_fn(d * d, d * d, |row, col| {
        let (k, l) = (row / d, row % d);
        let (i, j) = (col / d, col % d);
        if k == j && l == i {
            ONE
        } else {
            ZERO
        }
    })
}

/// The linear weight maps `λ_n : M_n → M_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Identity,
    Transpose,
    /// `λ_n(a) = U_n* a U_n`, entry `n - 1` holds `U_n`.
    UnitaryConjugation(Vec<CMat>),
    /// Entry `n - 1` is the `n² × n²` matrix whose column `(i, j)` is
    /// `λ_n(ε_ij)` vectorized row-major.
    Custom(Vec<CMat>),
}

#[derive(Debug, Clone)]
pub struct WeightSequence {
    kind: WeightKind,
    range_bound: f64,
}

impl WeightSequence {
    pub fn identity() -> Self {
        WeightSequence {
            kind: WeightKind::Identity,
            range_bound: 1.0,
        }
    }

    pub fn transpose() -> Self {
        WeightSequence {
            kind: WeightKind::Transpose,
            range_bound: 1.0,
        }
    }

    pub fn unitary_conjugation(unitaries: Vec<CMat>) -> Result<Self> {
        if unitaries.is_empty() {
            return Err(Error::InvalidWeight("no unitaries given".into()));
        }
        for (k, u) in unitaries.iter().enumerate() {
            let n = k + 1;
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::InvalidWeight(format!("U_{n} must be {n}x{n}")));
            }
            let err = (u.adjoint() * u - CMat::identity(n, n)).norm();
            if err > 1e-12 {
                return Err(Error::InvalidWeight(format!(
                    "U_{n} is not unitary (‖U*U - I‖_F = {err:.2e})"
                )));
            }
        }
        Ok(WeightSequence {
            kind: WeightKind::UnitaryConjugation(unitaries),
            range_bound: 1.0,
        })
    }

    pub fn custom(table: Vec<CMat>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidWeight("empty weight table".into()));
        }
        let mut bound = 0.0_f64;
        for (k, t) in table.iter().enumerate() {
            let n = k + 1;
            if t.nrows() != n * n || t.ncols() != n * n {
                return Err(Error::InvalidWeight(format!("λ_{n} table must be {0}x{0}", n * n)));
            }
            if t.iter().all(|z| *z == ZERO) {
                return Err(Error::InvalidWeight(format!("λ_{n} is the zero map")));
            }
            bound = bound.max(spectral_norm(t) * (n as f64).sqrt());
        }
        Ok(WeightSequence {
            kind: WeightKind::Custom(table),
            range_bound: bound,
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Largest represented level, `None` when every level is defined.
    pub fn n_max(&self) -> Option<usize> {
        match &self.kind {
            WeightKind::Identity | WeightKind::Transpose => None,
            WeightKind::UnitaryConjugation(v) | WeightKind::Custom(v) => Some(v.len()),
        }
    }

    /// Certified upper bound on `sup_n ‖λ_n‖` over the represented range.
    /// Exact (one) for identity, transpose and unitary conjugation; for
    /// tabulated weights `‖Λ_n‖_{2→2} √n`.
    pub fn range_bound(&self) -> f64 {
        self.range_bound
    }

    /// Human readable certified range for reports.
    pub fn certified_range(&self) -> String {
        match self.n_max() {
            None => "all levels".to_string(),
            Some(n) => format!("levels 1..={n}"),
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            WeightKind::Identity => "identity",
            WeightKind::Transpose => "transpose",
            WeightKind::UnitaryConjugation(_) => "unitary_conjugation",
            WeightKind::Custom(_) => "custom",
        }
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::shape("weight level must be at least 1"));
        }
        match self.n_max() {
            Some(max) if n > max => Err(Error::LevelOverflow { level: n, max }),
            _ => Ok(()),
        }
    }

    /// `Λ_n` with `Λ_n[(k,l),(i,j)] = λ_n(ε_ij)[k,l]`.
    pub fn table(&self, n: usize) -> Result<CMat> {
        self.check_level(n)?;
        Ok(match &self.kind {
            WeightKind::Identity => CMat::identity(n * n, n * n),
            WeightKind::Transpose => transpose_permutation(n),
            WeightKind::UnitaryConjugation(us) => {
                let u = &us[n - 1];
                let mut t = CMat::zeros(n * n, n * n);
                for i in 0..n {
                    for j in 0..n {
                        let img = u.adjoint() * linalg::unit(n, i, j) * u;
                        t.set_column(i * n + j, &linalg::vec_rows(&img));
                    }
                }
                t
            }
            WeightKind::Custom(tables) => tables[n - 1].clone(),
        })
    }

    /// `λ_n(a)`.
    pub fn apply(&self, n: usize, a: &CMat) -> Result<CMat> {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::shape("weight applied to a matrix of the wrong size"));
        }
        let t = self.table(n)?;
        let v = t * linalg::vec_rows(a);
        Ok(linalg::unvec_rows(v.as_slice(), n, n))
    }
}

/// Bracket for `sup_{‖x‖ ≤ 1} ‖Φ(x)‖` with a level-one witness in `Φ`'s domain.
pub fn induced_norm(map: &LinearMapRep, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    induced_warm(map, cfg, &[])
}

pub(crate) fn induced_warm(map: &LinearMapRep, cfg: &EstimatorConfig, warm: &[Vec<C64>]) -> Result<NormEstimate> {
    cfg.validate()?;
    let op = map.operator()?;
    let (mut est, coords) = estimate_from(&op, cfg, warm);
    let mut upper = est.upper.min(map.finite_rank_bound());
    if map.is_functional() {
        // A functional's norm is at most the nuclear norm of its Riesz
        // representer, with equality on full matrix algebras.
        upper = upper.min(map.coordinate_functional_bounds()[0]);
    }
    est.upper = upper;
    est.settle();
    let w = MatElement::new(map.domain.clone(), 1, coords)?;
    Ok(est.with_witness(Witness::Element(w)))
}

/// Profile of lower bounds over levels `1..=level_max`, warm-starting each
/// level from the previous witness embedded as `x ⊕ 0`.
fn level_profile<F>(
    map: &LinearMapRep,
    level_max: usize,
    cfg: &EstimatorConfig,
    mut amplified: F,
) -> Result<NormEstimate>
where
    F: FnMut(usize) -> Result<LinearMapRep>,
{
    if level_max == 0 {
        return Err(Error::shape("level_max must be at least 1"));
    }
    cfg.validate()?;
    let mut profile = Vec::with_capacity(level_max);
    let mut best: Option<(f64, MatElement)> = None;
    let mut prev: Option<MatElement> = None;
    let mut iterations = 0;
    let mut converged = true;
    for n in 1..=level_max {
        let amp = amplified(n)?;
        let warm: Vec<Vec<C64>> = match &prev {
            Some(x) => vec![x.embed(n)?.into_coeffs()],
            None => Vec::new(),
        };
        let op = amp.operator()?;
        let run = op.ascend(cfg, &warm);
        iterations += run.iterations;
        converged &= run.converged;
        let x = MatElement::new(map.domain.clone(), n, run.coords)?;
        let value = match profile.last() {
            Some(&p) if p > run.value => p,
            _ => run.value,
        };
        profile.push(value);
        if best.as_ref().is_none_or(|(b, _)| run.value > *b) {
            best = Some((run.value, x.clone()));
        }
        prev = Some(x);
    }
    let (lower, witness) = best.expect("level_max >= 1");
    let mut est = NormEstimate::bracket(lower, f64::INFINITY);
    est.level_profile = profile;
    est.iterations = iterations;
    est.converged = converged;
    Ok(est.with_witness(Witness::Element(witness)))
}

/// Certified upper bound on `‖φ‖_cb`.
pub fn cb_upper(map: &LinearMapRep) -> Result<(f64, String)> {
    let mut upper = map.finite_rank_bound();
    let mut note = "cb upper from finite-rank decomposition".to_string();
    let level = if map.codomain.is_commutative_subspace() {
        1
    } else {
        map.codomain.ambient_dim()
    };
    if level <= CB_UPPER_LEVEL_CAP {
        let op = map.amplify(level).operator()?;
        let f = op.frobenius_upper();
        if f < upper {
            upper = f;
            note = format!(
                "cb upper from the Frobenius bracket at level {level} (maps into M_k attain their cb norm at level k)"
            );
        }
    }
    Ok((upper, note))
}

/// `‖φ‖_cb` bracket with the level profile up to `level_max`.
pub fn cb_norm(map: &LinearMapRep, level_max: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    let mut est = level_profile(map, level_max, cfg, |n| Ok(map.amplify(n)))?;
    let (upper, note) = cb_upper(map)?;
    est.upper = upper;
    est.notes.push(note);
    est.settle();
    Ok(est)
}

/// `‖φ‖_cb^λ` bracket with the weighted level profile up to `level_max`.
pub fn lambda_cb_norm(
    map: &LinearMapRep,
    weight: &WeightSequence,
    level_max: usize,
    cfg: &EstimatorConfig,
) -> Result<NormEstimate> {
    if let Some(max) = weight.n_max() {
        if level_max > max {
            return Err(Error::LevelOverflow { level: level_max, max });
        }
    }
    let mut est = level_profile(map, level_max, cfg, |n| map.weighted_amplify(weight, n))?;
    let rb = weight.range_bound();
    let (upper, note) = match weight.kind() {
        WeightKind::Identity | WeightKind::UnitaryConjugation(_) => {
            let (u, note) = cb_upper(map)?;
            (u, format!("{note}; unitary-conjugation weights leave cb norms unchanged"))
        }
        _ if map.is_functional() || map.codomain.is_commutative_subspace() => {
            let ind = induced_norm(map, cfg)?;
            (
                rb * ind.upper,
                "range bound times the operator norm upper (scalar or commutative codomain)".to_string(),
            )
        }
        _ => (
            rb * map.finite_rank_bound(),
            "range bound times the finite-rank decomposition bound".to_string(),
        ),
    };
    est.upper = upper;
    est.notes.push(note);
    est.notes.push(format!("weight `{}` certified on {}", weight.label(), weight.certified_range()));
    est.settle();
    Ok(est)
}

/// Which matrix structure to put on an array of maps.
#[derive(Debug, Clone, Copy)]
pub enum MapStructure<'a> {
    Cb,
    LambdaCb(&'a WeightSequence),
}

/// Bundles an `n × n` array of maps `E → F` into one map `E → M_n(F)`.
pub fn bundle_maps(entries: &[Vec<LinearMapRep>]) -> Result<LinearMapRep> {
    let n = entries.len();
    let first = entries
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::shape("empty array of maps"))?;
    let (dom, cod, conj) = (first.domain.clone(), first.codomain.clone(), first.conj_linear);
    let (me, mf) = (dom.dim(), cod.dim());
    let mut coeff = CMat::zeros(n * n * mf, me);
    for (i, row) in entries.iter().enumerate() {
        if row.len() != n {
            return Err(Error::shape("array of maps must be square"));
        }
        for (j, phi) in row.iter().enumerate() {
            if !phi.domain.same_as(&dom) || !phi.codomain.same_as(&cod) {
                return Err(Error::SpaceMismatch {
                    expected: format!("{} -> {}", dom.label(), cod.label()),
                    found: format!("{} -> {}", phi.domain.label(), phi.codomain.label()),
                });
            }
            if phi.conj_linear != conj {
                return Err(Error::Unsupported("mixed linear and conjugate-linear entries".into()));
            }
            let base = (i * n + j) * mf;
            coeff.view_mut((base, 0), (mf, me)).copy_from(&phi.coeff);
        }
    }
    LinearMapRep::new(dom, Arc::new(cod.amplified(n)), coeff, conj)
}

/// Norm of `[φ_ij] ∈ M_n(CB(E, F))` or `M_n(CB_λ(E, F))` through the
/// identification with maps `E → M_n(F)`.
pub fn matrix_of_maps_norm(
    entries: &[Vec<LinearMapRep>],
    structure: MapStructure<'_>,
    level_max: usize,
    cfg: &EstimatorConfig,
) -> Result<NormEstimate> {
    let map = bundle_maps(entries)?;
    match structure {
        MapStructure::Cb => cb_norm(&map, level_max, cfg),
        MapStructure::LambdaCb(w) => lambda_cb_norm(&map, w, level_max, cfg),
    }
}

/// The partial-transpose witness `SWAP = Σ ε_ij ⊗ ε_ji ∈ M_n(M_n)`.
pub fn swap_element(n: usize) -> MatElement {
    let space = Arc::new(ConcreteSpace::full_matrix(n));
    let mut x = MatElement::zeros(space.clone(), n);
    let mut coeffs = x.coeffs().to_vec();
    for i in 0..n {
        for j in 0..n {
            coeffs[(i * n + j) * n * n + j * n + i] = ONE;
        }
    }
    x = MatElement::new(space, n, coeffs).expect("length matches");
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_element, random_matrix, random_unitary, rng_from_seed};

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::default().with_restarts(6)
    }

    fn m(d: usize) -> Arc<ConcreteSpace> {
        Arc::new(ConcreteSpace::full_matrix(d))
    }

    #[test]
    fn identity_amplifies_to_identity() {
        let id = LinearMapRep::identity(m(2)).amplify(3);
        assert_eq!(id.coeff(), &CMat::identity(36, 36));
    }

    #[test]
    fn amplify_matches_entrywise_application() {
        let mut rng = rng_from_seed(1);
        let phi = LinearMapRep::new(m(2), m(3), random_matrix(&mut rng, 9, 4), false).unwrap();
        let amp = phi.amplify(2);
        for _ in 0..20 {
            let x = random_element(&mut rng, m(2), 2);
            let direct = phi.apply(&x).unwrap();
            let via = amp.apply_coords(x.coeffs());
            for (a, b) in direct.coeffs().iter().zip(&via) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn composition_matches_sequential_application() {
        let mut rng = rng_from_seed(2);
        let phi = LinearMapRep::new(m(2), m(2), random_matrix(&mut rng, 4, 4), true).unwrap();
        let psi = LinearMapRep::new(m(2), m(3), random_matrix(&mut rng, 9, 4), false).unwrap();
        let both = psi.compose(&phi).unwrap();
        let x: Vec<C64> = random_element(&mut rng, m(2), 1).into_coeffs();
        let seq = psi.apply_coords(&phi.apply_coords(&x));
        let one = both.apply_coords(&x);
        for (a, b) in seq.iter().zip(&one) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(both.is_conj_linear());
    }

    #[test]
    fn weighted_identity_equals_amplify() {
        let mut rng = rng_from_seed(3);
        let phi = LinearMapRep::new(m(2), m(2), random_matrix(&mut rng, 4, 4), false).unwrap();
        let a = phi.amplify(3);
        let w = phi.weighted_amplify(&WeightSequence::identity(), 3).unwrap();
        assert_eq!(a.coeff(), w.coeff());
    }

    #[test]
    fn transpose_weight_gives_partial_transpose() {
        let phi = LinearMapRep::identity(m(2));
        let w = phi.weighted_amplify(&WeightSequence::transpose(), 2).unwrap();
        let swap = swap_element(2);
        let out = w.apply_coords(swap.coeffs());
        let out = MatElement::new(m(2), 2, out).unwrap().realize();
        // Partial transpose of the outer index: block (i,j) <- block (j,i).
        let r = swap.realize();
        let mut pt = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                pt.view_mut((i * 2, j * 2), (2, 2))
                    .copy_from(&r.view((j * 2, i * 2), (2, 2)));
            }
        }
        assert_eq!(out, pt);
        assert!((spectral_norm(&out) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_weight_preserves_output_norms() {
        let mut rng = rng_from_seed(4);
        let us = vec![random_unitary(&mut rng, 1), random_unitary(&mut rng, 2)];
        let w = WeightSequence::unitary_conjugation(us).unwrap();
        let phi = LinearMapRep::new(m(2), m(2), random_matrix(&mut rng, 4, 4), false).unwrap();
        let x = random_element(&mut rng, m(2), 2);
        let a = phi.amplify(2).apply_coords(x.coeffs());
        let b = phi.weighted_amplify(&w, 2).unwrap().apply_coords(x.coeffs());
        let na = MatElement::new(m(2), 2, a).unwrap().min_norm();
        let nb = MatElement::new(m(2), 2, b).unwrap().min_norm();
        assert!((na - nb).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_weight_rejected() {
        let bad = vec![CMat::identity(1, 1) * c(2.0, 0.0)];
        assert!(matches!(
            WeightSequence::unitary_conjugation(bad),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn weight_level_overflow() {
        let w = WeightSequence::custom(vec![CMat::identity(1, 1)]).unwrap();
        assert!(matches!(w.table(2), Err(Error::LevelOverflow { .. })));
    }

    #[test]
    fn identity_cb_profile_is_flat() {
        let est = cb_norm(&LinearMapRep::identity(m(3)), 3, &cfg()).unwrap();
        for v in &est.level_profile {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(est.upper >= 1.0 - 1e-12);
    }

    #[test]
    fn transpose_cb_profile_grows() {
        let est = cb_norm(&LinearMapRep::transpose(2), 2, &cfg()).unwrap();
        assert!((est.level_profile[0] - 1.0).abs() < 1e-9);
        assert!(est.level_profile[1] >= 2.0 - 1e-6);
        assert!(est.upper >= 2.0);
        let x = est.witness_element().unwrap();
        let y = LinearMapRep::transpose(2).apply(x).unwrap();
        assert!((y.min_norm() / x.min_norm() - est.lower).abs() < 1e-9 * est.lower);
    }

    #[test]
    fn trace_profile_is_constant() {
        let est = cb_norm(&LinearMapRep::trace(2), 3, &cfg()).unwrap();
        for v in &est.level_profile {
            assert!((v - 2.0).abs() < 1e-8, "{v}");
        }
        assert!((est.upper - 2.0).abs() < 1e-9);
    }

    #[test]
    fn adjoint_under_transpose_weight_is_isometric() {
        let est = lambda_cb_norm(&LinearMapRep::adjoint(2), &WeightSequence::transpose(), 3, &cfg()).unwrap();
        for v in &est.level_profile {
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn bundled_diagonal_identity() {
        let id = LinearMapRep::identity(m(2));
        let zero = LinearMapRep::zero(m(2), m(2));
        let arr = vec![vec![id.clone(), zero.clone()], vec![zero, id]];
        let est = matrix_of_maps_norm(&arr, MapStructure::Cb, 2, &cfg()).unwrap();
        assert!(est.lower <= 1.0 + 1e-9 && est.upper >= 1.0 - 1e-9);
        assert!(est.lower >= 1.0 - 1e-9);
    }
}
