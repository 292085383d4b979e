//! Norms of `φ ⊗ I_X` over finite collections `Λ` of operator spaces, with
//! the min tensor norm on both sides.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{EstimatorConfig, NormEstimate};
use crate::linalg::{kron, CMat, C64, ZERO};
use crate::maps::{bundle_maps, cb_norm, cb_upper, induced_norm, LinearMapRep};
use crate::space::{ConcreteSpace, MatElement};

#[derive(Debug, Clone)]
pub struct LambdaCollection {
    label: String,
    members: Vec<Arc<ConcreteSpace>>,
}

impl LambdaCollection {
    pub fn new(label: impl Into<String>, members: Vec<Arc<ConcreteSpace>>) -> Result<Self> {
        let label = label.into();
        if members.is_empty() {
            return Err(Error::InvalidSpace(format!("collection `{label}` has no members")));
        }
        Ok(LambdaCollection { label, members })
    }

    /// Members from shorthand: `"M:n"`, `"D:d"`, or `"C"` for the scalars.
    pub fn from_shorthand(label: impl Into<String>, items: &[&str]) -> Result<Self> {
        let members = items
            .iter()
            .map(|s| parse_shorthand(s).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, members)
    }

    /// `{D_1, …, D_dmax}`, the finite stand-in for all commutative C*-algebras.
    pub fn commutative_family(dmax: usize) -> Self {
        let members = (1..=dmax.max(1)).map(|d| Arc::new(ConcreteSpace::diagonal(d))).collect();
        LambdaCollection {
            label: format!("D:1..={}", dmax.max(1)),
            members,
        }
    }

    /// `{M_1, …, M_nmax}`.
    pub fn matrix_family(nmax: usize) -> Self {
        let members = (1..=nmax.max(1)).map(|n| Arc::new(ConcreteSpace::full_matrix(n))).collect();
        LambdaCollection {
            label: format!("M:1..={}", nmax.max(1)),
            members,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn members(&self) -> &[Arc<ConcreteSpace>] {
        &self.members
    }
}

/// Parses `"M:n"`, `"D:d"` or `"C"`.
pub fn parse_shorthand(s: &str) -> Result<ConcreteSpace> {
    let s = s.trim();
    if s == "C" {
        return Ok(ConcreteSpace::scalars());
    }
    let (kind, size) = s
        .split_once(':')
        .ok_or_else(|| Error::parse(format!("member `{s}`"), "expected M:n, D:d or C"))?;
    let n: usize = size
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("member `{s}`"), "size is not a positive integer"))?;
    if n == 0 {
        return Err(Error::parse(format!("member `{s}`"), "size must be at least 1"));
    }
    match kind.trim() {
        "M" => Ok(ConcreteSpace::full_matrix(n)),
        "D" => Ok(ConcreteSpace::diagonal(n)),
        other => Err(Error::parse(format!("member `{s}`"), format!("unknown kind `{other}`"))),
    }
}

/// `φ ⊗ I_X : E ⊗ X → F ⊗ X`, coordinates `(r, t) ↦ Σ_r C[s, r] x_{r t}`.
pub fn tensor_with_identity(map: &LinearMapRep, x: &ConcreteSpace) -> Result<LinearMapRep> {
    if map.is_conj_linear() {
        return Err(Error::Unsupported(
            "φ ⊗ I_X is not defined for conjugate-linear φ over a complex X".into(),
        ));
    }
    let mx = x.dim();
    LinearMapRep::new(
        Arc::new(map.domain().tensor(x)),
        Arc::new(map.codomain().tensor(x)),
        kron(map.coeff(), &CMat::identity(mx, mx)),
        false,
    )
}

/// Coordinates over `E ⊗ X` of `e ⊗ x` for coordinate vectors `e`, `x`.
fn tensor_coords(e: &[C64], x: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(e.len() * x.len());
    for a in e {
        for b in x {
            out.push(a * b);
        }
    }
    out
}

/// Bracket for `‖φ ⊗ I_X‖` on one member, warm-started from `e ⊗ X_0`.
fn member_norm(
    map: &LinearMapRep,
    x: &Arc<ConcreteSpace>,
    induced: &NormEstimate,
    cb_up: f64,
    cfg: &EstimatorConfig,
    extra_warm: Vec<Vec<C64>>,
) -> Result<NormEstimate> {
    let phi_x = tensor_with_identity(map, x)?;
    let mut warm = extra_warm;
    if let Some(e) = induced.witness_element() {
        let mut x0 = vec![ZERO; x.dim()];
        x0[0] = C64::new(1.0, 0.0);
        warm.insert(0, tensor_coords(e.coeffs(), &x0));
    }
    let mut est = crate::maps::induced_warm(&phi_x, cfg, &warm)?;
    let mut upper = est.upper.min(cb_up);
    if x.is_commutative_subspace() {
        // The min tensor with a commutative algebra is a direct sum of copies.
        upper = upper.min(induced.upper);
    }
    est.upper = upper;
    est.settle();
    Ok(est)
}

/// `‖φ‖_cb^Λ = sup_{X ∈ Λ} ‖φ ⊗ I_X‖`; the profile lists member lower bounds
/// in collection order.
pub fn lambda_class_norm(map: &LinearMapRep, collection: &LambdaCollection, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    let induced = induced_norm(map, cfg)?;
    let (cb_up, _) = cb_upper(map)?;
    class_norm_with(map, collection, cfg, &induced, cb_up)
}

fn class_norm_with(
    map: &LinearMapRep,
    collection: &LambdaCollection,
    cfg: &EstimatorConfig,
    induced: &NormEstimate,
    cb_up: f64,
) -> Result<NormEstimate> {
    let members: Vec<NormEstimate> = collection
        .members
        .par_iter()
        .map(|x| member_norm(map, x, induced, cb_up, cfg, Vec::new()))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, m) in members.iter().enumerate() {
        if m.lower > members[best].lower {
            best = k;
        }
    }
    let upper = members.iter().fold(0.0_f64, |a, m| a.max(m.upper)).min(cb_up);
    let mut est = NormEstimate::bracket(members[best].lower, upper);
    est.level_profile = members.iter().map(|m| m.lower).collect();
    est.iterations = members.iter().map(|m| m.iterations).sum();
    est.converged = members.iter().all(|m| m.converged);
    est.witness = members[best].witness.clone();
    est.notes.push(format!(
        "collection `{}`; best member {} (`{}`)",
        collection.label,
        best,
        collection.members[best].label()
    ));
    Ok(est)
}

/// Bracket-level check of `‖φ‖ ≤ ‖φ‖_cb^Λ ≤ ‖φ‖_cb`.
#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub ok: bool,
    pub induced: NormEstimate,
    pub class: NormEstimate,
    pub cb: NormEstimate,
    /// `class.upper − induced.lower` and `cb.upper − class.lower`.
    pub slack: [f64; 2],
}

pub const SANDWICH_TOL: f64 = 1e-6;

pub fn sandwich_check(
    map: &LinearMapRep,
    collection: &LambdaCollection,
    level_max: usize,
    cfg: &EstimatorConfig,
) -> Result<SandwichReport> {
    let induced = induced_norm(map, cfg)?;
    let cb = cb_norm(map, level_max, cfg)?;
    let class = class_norm_with(map, collection, cfg, &induced, cb.upper)?;
    let slack = [class.upper - induced.lower, cb.upper - class.lower];
    Ok(SandwichReport {
        ok: slack.iter().all(|s| *s >= -SANDWICH_TOL),
        induced,
        class,
        cb,
        slack,
    })
}

/// `‖φ ⊗ I_X‖` for `X = C(K, M_n)` with `|K| = k_points`, realized as
/// block-diagonal copies of `M_n`. Warm-started from the witness of
/// `φ^{(n)}` placed in the first copy, so the value matches `‖φ^{(n)}‖`.
pub fn ckmn_model_norm(map: &LinearMapRep, n: usize, k_points: usize, cfg: &EstimatorConfig) -> Result<NormEstimate> {
    if n == 0 || k_points == 0 {
        return Err(Error::shape("n and k_points must be at least 1"));
    }
    let amp = crate::maps::induced_norm(&map.amplify(n), cfg)?;
    let x = Arc::new(ConcreteSpace::full_matrix(n).block_copies(k_points));
    let m = map.domain().dim();
    let mx = x.dim();
    let mut warm = vec![ZERO; m * mx];
    if let Some(w) = amp.witness_element() {
        for i in 0..n {
            for j in 0..n {
                for r in 0..m {
                    warm[r * mx + i * n + j] = w.coeffs()[(i * n + j) * m + r];
                }
            }
        }
    }
    let induced = induced_norm(map, cfg)?;
    let (cb_up, _) = cb_upper(map)?;
    let mut est = member_norm(map, &x, &induced, cb_up, cfg, vec![warm])?;
    est.upper = est.upper.min(amp.upper);
    est.settle();
    est.notes.push(format!(
        "C(K, M_{n}) with |K| = {k_points}; amplified bracket [{:.12e}, {:.12e}]",
        amp.lower, amp.upper
    ));
    Ok(est)
}

/// Norm of an `n × n` array of functionals in the Λ-dual, i.e. the Λ-norm of
/// the bundled map `E → M_n`.
pub fn lambda_dual_matrix_norm(
    entries: &[Vec<LinearMapRep>],
    collection: &LambdaCollection,
    cfg: &EstimatorConfig,
) -> Result<NormEstimate> {
    for row in entries {
        for phi in row {
            if !phi.is_functional() {
                return Err(Error::Unsupported(format!(
                    "entry maps into `{}`, expected functionals",
                    phi.codomain().label()
                )));
            }
        }
    }
    let map = bundle_maps(entries)?;
    lambda_class_norm(&map, collection, cfg)
}

/// Coordinate functionals `ψ_ij(x) = x_ji` on `M_d`, whose bundle is the
/// transpose map.
pub fn transpose_functionals(d: usize) -> Vec<Vec<LinearMapRep>> {
    let dom = Arc::new(ConcreteSpace::full_matrix(d));
    let scalars = Arc::new(ConcreteSpace::scalars());
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let mut coeff = CMat::zeros(1, d * d);
                    coeff[(0, j * d + i)] = C64::new(1.0, 0.0);
                    LinearMapRep::new(dom.clone(), scalars.clone(), coeff, false).expect("shapes match")
                })
                .collect()
        })
        .collect()
}

/// Re-evaluates a class-norm witness: `‖(φ ⊗ I_X)(w)‖ / ‖w‖`.
pub fn reevaluate_member(map: &LinearMapRep, x: &ConcreteSpace, witness: &MatElement) -> Result<f64> {
    let phi_x = tensor_with_identity(map, x)?;
    let out = phi_x.apply(witness)?;
    let den = witness.min_norm();
    Ok(if den > 0.0 { out.min_norm() / den } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, rng_from_seed};

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::default().with_restarts(8)
    }

    fn m(d: usize) -> Arc<ConcreteSpace> {
        Arc::new(ConcreteSpace::full_matrix(d))
    }

    #[test]
    fn shorthand_parses() {
        let c = LambdaCollection::from_shorthand("x", &["M:2", "D:3", "C"]).unwrap();
        assert_eq!(c.members()[0].dim(), 4);
        assert_eq!(c.members()[1].dim(), 3);
        assert_eq!(c.members()[2].dim(), 1);
        assert!(LambdaCollection::from_shorthand("x", &["Q:2"]).is_err());
        assert!(LambdaCollection::from_shorthand("x", &["M:0"]).is_err());
        assert!(LambdaCollection::new("x", vec![]).is_err());
    }

    #[test]
    fn scalar_member_reproduces_induced_norm() {
        let mut rng = rng_from_seed(8);
        let phi = LinearMapRep::new(m(2), m(2), random_matrix(&mut rng, 4, 4), false).unwrap();
        let with_c = tensor_with_identity(&phi, &ConcreteSpace::scalars()).unwrap();
        assert_eq!(with_c.coeff(), phi.coeff());
        let a = induced_norm(&phi, &cfg()).unwrap();
        let b = lambda_class_norm(&phi, &LambdaCollection::from_shorthand("c", &["C"]).unwrap(), &cfg()).unwrap();
        assert!((a.lower - b.lower).abs() < 1e-9);
    }

    #[test]
    fn identity_tensor_identity_is_identity() {
        let id = LinearMapRep::identity(m(2));
        let t = tensor_with_identity(&id, &ConcreteSpace::full_matrix(2)).unwrap();
        assert_eq!(t.coeff(), &CMat::identity(16, 16));
    }

    #[test]
    fn m2_member_matches_amplification() {
        let mut rng = rng_from_seed(9);
        let phi = LinearMapRep::new(m(2), m(2), random_matrix(&mut rng, 4, 4), false).unwrap();
        let t = tensor_with_identity(&phi, &ConcreteSpace::full_matrix(2)).unwrap();
        let a = induced_norm(&t, &cfg()).unwrap();
        let b = induced_norm(&phi.amplify(2), &cfg()).unwrap().lower;
        assert!((a.lower - b).abs() < 1e-8, "{} vs {b}", a.lower);
    }

    #[test]
    fn transpose_gap_between_m2_and_cb() {
        let c = LambdaCollection::from_shorthand("m2", &["M:2"]).unwrap();
        let rep = sandwich_check(&LinearMapRep::transpose(3), &c, 3, &cfg()).unwrap();
        assert!(rep.ok);
        assert!((rep.induced.lower - 1.0).abs() < 1e-9);
        assert!(rep.class.lower >= 2.0 - 1e-6);
        assert!(rep.cb.lower >= 3.0 - 1e-6);
    }

    #[test]
    fn ckmn_model_matches_amplification() {
        let est = ckmn_model_norm(&LinearMapRep::transpose(3), 2, 3, &cfg()).unwrap();
        assert!((est.lower - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dual_rejects_non_functionals() {
        let arr = vec![vec![LinearMapRep::identity(m(2))]];
        let c = LambdaCollection::from_shorthand("m2", &["M:2"]).unwrap();
        assert!(matches!(
            lambda_dual_matrix_norm(&arr, &c, &cfg()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn conj_linear_tensor_rejected() {
        assert!(tensor_with_identity(&LinearMapRep::adjoint(2), &ConcreteSpace::full_matrix(2)).is_err());
    }
}
