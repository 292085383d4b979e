//! Named verification suites. Each one checks a family of norm inequalities
//! on seeded random instances and records every inequality with its slack.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::bilinear::{
    bilinear_lambda_norm, lambda_tensor_norm_lower, random_bilinear, symmetry_check, BilinearMapRep, BilinearWeight,
};
use crate::error::{Error, Result};
use crate::estimate::EstimatorConfig;
use crate::io::Report;
use crate::lambdaclass::{
    ckmn_model_norm, lambda_class_norm, lambda_dual_matrix_norm, sandwich_check, transpose_functionals, LambdaCollection,
};
use crate::maps::{cb_norm, induced_norm, lambda_cb_norm, matrix_of_maps_norm, LinearMapRep, MapStructure, WeightSequence};
use crate::random::{gaussian_vec, random_matrix, random_subspace, random_unitary, rng_from_seed, SeededRng};
use crate::space::{ConcreteSpace, TensorElement};

pub const SUITE_TOL: f64 = 1e-6;
/// Relative tolerance for flip invariance of tensor-norm lower bounds.
pub const FLIP_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Composition with a cb map on either side.
    Composition,
    /// Functionals, finite-rank maps and commutative codomains.
    RangeBounds,
    /// `‖φ‖ ≤ ‖φ‖_Λ ≤ ‖φ‖_cb`.
    Sandwich,
    /// Commutative collections give the operator norm.
    CommutativeCollection,
    /// Λ-dual versus cb-dual of the transpose functionals.
    DualGap,
    /// Flip invariance for symmetric bilinear weights.
    FlipInvariance,
    /// Search for an argument-order asymmetry under the product weight.
    ProductAsymmetrySearch,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Composition,
        Suite::RangeBounds,
        Suite::Sandwich,
        Suite::CommutativeCollection,
        Suite::DualGap,
        Suite::FlipInvariance,
        Suite::ProductAsymmetrySearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Composition => "prop2_1",
            Suite::RangeBounds => "prop2_2",
            Suite::Sandwich => "prop3_2",
            Suite::CommutativeCollection => "prop3_4",
            Suite::DualGap => "ex3_5",
            Suite::FlipInvariance => "thm4_commutativity",
            Suite::ProductAsymmetrySearch => "remark4_2_search",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::parse("suite", format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub trials: usize,
    pub level_max: usize,
    /// Overrides the default collection where one is used.
    pub collection: Option<LambdaCollection>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            trials: 10,
            level_max: 3,
            collection: None,
        }
    }
}

pub fn run_suite(suite: Suite, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<Report> {
    cfg.validate()?;
    if opts.level_max == 0 || opts.trials == 0 {
        return Err(Error::shape("level_max and trials must be at least 1"));
    }
    let mut report = Report::new(format!("suite {suite}"), cfg, opts.level_max);
    match suite {
        Suite::Composition => composition(&mut report, cfg, opts)?,
        Suite::RangeBounds => range_bounds(&mut report, cfg, opts)?,
        Suite::Sandwich => sandwich(&mut report, cfg, opts)?,
        Suite::CommutativeCollection => commutative_collection(&mut report, cfg, opts)?,
        Suite::DualGap => dual_gap(&mut report, cfg)?,
        Suite::FlipInvariance => flip_invariance(&mut report, cfg, opts)?,
        Suite::ProductAsymmetrySearch => product_asymmetry_search(&mut report, cfg, opts)?,
    }
    Ok(report)
}

fn trial_rng(cfg: &EstimatorConfig, salt: u64, t: usize) -> SeededRng {
    rng_from_seed(cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(salt * 10_000 + t as u64))
}

/// Random subspace of `M_d` with dimension in `1..=max_dim`.
pub fn random_space(rng: &mut SeededRng, d: usize, max_dim: usize, label: &str) -> Arc<ConcreteSpace> {
    use rand::Rng;
    let m = rng.random_range(1..=max_dim.min(d * d));
    Arc::new(random_subspace(rng, d, m, label))
}

pub fn random_map(rng: &mut SeededRng, domain: Arc<ConcreteSpace>, codomain: Arc<ConcreteSpace>) -> LinearMapRep {
    let coeff = random_matrix(rng, codomain.dim(), domain.dim());
    LinearMapRep::new(domain, codomain, coeff, false).expect("shapes match")
}

/// A unitary-conjugation weight with random unitaries up to `n_max`.
pub fn random_unitary_weight(rng: &mut SeededRng, n_max: usize) -> WeightSequence {
    let us = (1..=n_max).map(|n| random_unitary(rng, n)).collect();
    WeightSequence::unitary_conjugation(us).expect("random unitaries are unitary")
}

fn composition(report: &mut Report, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<()> {
    let weight = WeightSequence::transpose();
    for t in 0..opts.trials {
        let mut rng = trial_rng(cfg, 1, t);
        let e = random_space(&mut rng, 2, 3, "E");
        let f = random_space(&mut rng, 2, 3, "F");
        let g = random_space(&mut rng, 2, 3, "G");
        let phi = random_map(&mut rng, e, f.clone());
        let psi = random_map(&mut rng, f, g);
        let comp = psi.compose(&phi)?;
        let lam_comp = lambda_cb_norm(&comp, &weight, opts.level_max, cfg)?;
        let lam_phi = lambda_cb_norm(&phi, &weight, opts.level_max, cfg)?;
        let lam_psi = lambda_cb_norm(&psi, &weight, opts.level_max, cfg)?;
        let cb_phi = cb_norm(&phi, opts.level_max, cfg)?;
        let cb_psi = cb_norm(&psi, opts.level_max, cfg)?;
        let rhs = cb_psi.upper * lam_phi.upper;
        report.assert(
            &format!("trial{t}.cb_after_lambda"),
            format!("‖ψ∘φ‖_λ ≥ {:.6e} ≤ ‖ψ‖_cb ‖φ‖_λ ≤ {rhs:.6e}", lam_comp.lower),
            rhs - lam_comp.lower,
            SUITE_TOL,
        );
        let rhs = lam_psi.upper * cb_phi.upper;
        report.assert(
            &format!("trial{t}.lambda_after_cb"),
            format!("‖ψ∘φ‖_λ ≥ {:.6e} ≤ ‖ψ‖_λ ‖φ‖_cb ≤ {rhs:.6e}", lam_comp.lower),
            rhs - lam_comp.lower,
            SUITE_TOL,
        );
    }
    report.notes.push(format!("weight: transpose, levels 1..={}", opts.level_max));
    Ok(())
}

fn range_bounds(report: &mut Report, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<()> {
    let scalars = Arc::new(ConcreteSpace::scalars());
    let d4 = Arc::new(ConcreteSpace::diagonal(4));
    let m2 = Arc::new(ConcreteSpace::full_matrix(2));
    for t in 0..opts.trials {
        let mut rng = trial_rng(cfg, 2, t);
        let weight = if t % 2 == 0 {
            WeightSequence::transpose()
        } else {
            random_unitary_weight(&mut rng, opts.level_max)
        };
        let rb = weight.range_bound();
        let e = random_space(&mut rng, 3, 4, "E");
        for (tag, cod) in [("functional", &scalars), ("commutative", &d4)] {
            let phi = random_map(&mut rng, e.clone(), cod.clone());
            let ind = induced_norm(&phi, cfg)?;
            let lam = lambda_cb_norm(&phi, &weight, opts.level_max, cfg)?;
            for (n, v) in lam.level_profile.iter().enumerate() {
                report.assert(
                    &format!("trial{t}.{tag}.level{}", n + 1),
                    format!("‖φ⊗λ_{}‖ ≥ {v:.6e} ≤ range_bound ‖φ‖ ≤ {:.6e}", n + 1, rb * ind.upper),
                    rb * ind.upper - v,
                    SUITE_TOL,
                );
            }
        }
        let phi = random_map(&mut rng, e.clone(), m2.clone());
        let bound = rb * phi.finite_rank_bound();
        let lam = lambda_cb_norm(&phi, &weight, opts.level_max, cfg)?;
        for (n, v) in lam.level_profile.iter().enumerate() {
            report.assert(
                &format!("trial{t}.finite_rank.level{}", n + 1),
                format!("‖φ⊗λ_{}‖ ≥ {v:.6e} ≤ range_bound Σ‖g_k‖‖F_k‖ = {bound:.6e}", n + 1),
                bound - v,
                SUITE_TOL,
            );
        }
    }
    Ok(())
}

fn default_sandwich_collection() -> LambdaCollection {
    LambdaCollection::from_shorthand("{M:2, D:4}", &["M:2", "D:4"]).expect("valid shorthand")
}

fn sandwich(report: &mut Report, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<()> {
    let coll = opts.collection.clone().unwrap_or_else(default_sandwich_collection);
    for t in 0..opts.trials {
        let mut rng = trial_rng(cfg, 3, t);
        let e = random_space(&mut rng, 2, 3, "E");
        let f = random_space(&mut rng, 2, 3, "F");
        let phi = random_map(&mut rng, e, f);
        let s = sandwich_check(&phi, &coll, opts.level_max, cfg)?;
        report.assert(
            &format!("trial{t}.norm_le_class"),
            format!("‖φ‖ ≥ {:.6e} ≤ ‖φ‖_Λ ≤ {:.6e}", s.induced.lower, s.class.upper),
            s.slack[0],
            SUITE_TOL,
        );
        report.assert(
            &format!("trial{t}.class_le_cb"),
            format!("‖φ‖_Λ ≥ {:.6e} ≤ ‖φ‖_cb ≤ {:.6e}", s.class.lower, s.cb.upper),
            s.slack[1],
            SUITE_TOL,
        );
    }
    report.notes.push(format!("collection {}", coll.label()));
    Ok(())
}

fn commutative_collection(report: &mut Report, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<()> {
    let coll = opts
        .collection
        .clone()
        .unwrap_or_else(|| LambdaCollection::commutative_family(4));
    if !coll.members().iter().all(|x| x.is_commutative_subspace()) {
        return Err(Error::Unsupported(format!(
            "collection {} has a noncommutative member",
            coll.label()
        )));
    }
    for t in 0..opts.trials {
        let mut rng = trial_rng(cfg, 4, t);
        let e = random_space(&mut rng, 3, 4, "E");
        let f = random_space(&mut rng, 3, 4, "F");
        let phi = random_map(&mut rng, e, f);
        let ind = induced_norm(&phi, cfg)?;
        let class = lambda_class_norm(&phi, &coll, cfg)?;
        let gap = (class.lower - ind.lower).abs();
        report.assert(
            &format!("trial{t}.class_equals_norm"),
            format!("|‖φ‖_Λ − ‖φ‖| lower bounds differ by {gap:.3e}"),
            -gap,
            SUITE_TOL,
        );
        let overlap = class.upper.min(ind.upper) - class.lower.max(ind.lower);
        report.assert(
            &format!("trial{t}.brackets_overlap"),
            format!(
                "[{:.6e}, {:.6e}] meets [{:.6e}, {:.6e}]",
                class.lower, class.upper, ind.lower, ind.upper
            ),
            overlap,
            SUITE_TOL,
        );
    }
    report.notes.push(format!("collection {}", coll.label()));
    Ok(())
}

fn dual_gap(report: &mut Report, cfg: &EstimatorConfig) -> Result<()> {
    let psi = transpose_functionals(3);
    let coll = LambdaCollection::from_shorthand("{M:2}", &["M:2"])?;
    let lam = lambda_dual_matrix_norm(&psi, &coll, cfg)?;
    let cb = matrix_of_maps_norm(&psi, MapStructure::Cb, 3, cfg)?;
    report.push_estimate("lambda_dual", &lam, None);
    report.push_estimate("cb_dual", &cb, Some(3));
    report.assert(
        "lambda_dual_is_two",
        format!("Λ-dual lower {:.9e} within 1e-3 of 2", lam.lower),
        1e-3 - (lam.lower - 2.0).abs(),
        0.0,
    );
    report.assert(
        "cb_dual_at_least_three",
        format!("cb-dual lower {:.9e} ≥ 3 − 1e-3", cb.lower),
        cb.lower - (3.0 - 1e-3),
        0.0,
    );
    let t3 = LinearMapRep::transpose(3);
    let amp = induced_norm(&t3.amplify(2), cfg)?;
    for k in 1..=3 {
        let c = ckmn_model_norm(&t3, 2, k, cfg)?;
        report.assert(
            &format!("ckmn_k{k}"),
            format!("‖φ_C(K,M_2)‖ ≥ {:.9e} matches ‖φ^(2)‖ ≥ {:.9e}", c.lower, amp.lower),
            -(c.lower - amp.lower).abs(),
            1e-9,
        );
    }
    Ok(())
}

fn random_tensor(rng: &mut SeededRng) -> TensorElement {
    let m2 = Arc::new(ConcreteSpace::full_matrix(2));
    TensorElement::new(m2.clone(), m2, 1, gaussian_vec(rng, 16)).expect("shapes match")
}

fn flip_invariance(report: &mut Report, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<()> {
    for weight in [BilinearWeight::kronecker(), BilinearWeight::schur()] {
        let sym = symmetry_check(&weight, 2, cfg.seed)?;
        report.assert(
            &format!("{}.symmetric", weight.label()),
            format!("max ‖λ(b,a) − u*λ(a,b)u‖ = {:.3e}", sym.residual),
            -sym.residual,
            SUITE_TOL,
        );
        for t in 0..opts.trials {
            let mut rng = trial_rng(cfg, 6, t);
            let u = random_tensor(&mut rng);
            let a = lambda_tensor_norm_lower(&u, &weight, 2, cfg)?;
            let b = lambda_tensor_norm_lower(&u.flip(), &weight, 2, cfg)?;
            let rel = (a.lower - b.lower).abs() / a.lower.max(b.lower).max(f64::MIN_POSITIVE);
            report.assert(
                &format!("{}.trial{t}.flip", weight.label()),
                format!("lower(u) = {:.9e}, lower(flip u) = {:.9e}", a.lower, b.lower),
                FLIP_TOL - rel,
                0.0,
            );
        }
    }
    Ok(())
}

fn product_asymmetry_search(report: &mut Report, cfg: &EstimatorConfig, opts: &SuiteOptions) -> Result<()> {
    let weight = BilinearWeight::product();
    let sym = symmetry_check(&weight, 2, cfg.seed)?;
    report.notes.push(format!(
        "product weight symmetric: {} (best unitary fit residual {:.3e})",
        sym.symmetric, sym.residual
    ));
    let m2 = Arc::new(ConcreteSpace::full_matrix(2));
    let mut candidates: Vec<(String, BilinearMapRep)> = vec![("matmul:2".into(), BilinearMapRep::matrix_multiplication(2))];
    for t in 0..opts.trials.saturating_sub(1) {
        let mut rng = trial_rng(cfg, 7, t);
        let target = Arc::new(ConcreteSpace::scalars());
        candidates.push((format!("random{t}"), random_bilinear(&mut rng, m2.clone(), m2.clone(), target)));
    }
    let level = opts.level_max.min(2);
    let mut found = None;
    for (name, phi) in &candidates {
        let a = bilinear_lambda_norm(phi, &weight, level, cfg)?;
        let b = bilinear_lambda_norm(&phi.transposed(), &weight, level, cfg)?;
        report.push_estimate(&format!("{name}.phi"), &a, Some(level));
        report.push_estimate(&format!("{name}.phi_transposed"), &b, Some(level));
        if found.is_none() && (b.lower > a.upper + SUITE_TOL || a.lower > b.upper + SUITE_TOL) {
            found = Some((name.clone(), a.lower, a.upper, b.lower, b.upper));
        }
    }
    match found {
        Some((name, al, au, bl, bu)) => report.notes.push(format!(
            "found: `{name}` has ‖φ‖_λ in [{al:.6e}, {au:.6e}] and ‖φ^t‖_λ in [{bl:.6e}, {bu:.6e}]"
        )),
        None => report.notes.push(format!(
            "not found among {} candidates at levels ≤ {level}",
            candidates.len()
        )),
    }
    Ok(())
}

/// Whether a product-weight asymmetry search recorded a separating instance.
pub fn search_found(report: &Report) -> bool {
    report.notes.iter().any(|n| n.starts_with("found:"))
}
