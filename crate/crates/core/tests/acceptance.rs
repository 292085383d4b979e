//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use opspace::bilinear::{bundle_forms, random_bilinear};
use opspace::decomp::decomposition_bound;
use opspace::maps::swap_element;
use opspace::quantcheck::{check_r1, check_r2, FrobeniusOracle, MinOracle, SamplerConfig};
use opspace::random::{gaussian_vec, random_element, random_subspace, rng_from_seed, SeededRng};
use opspace::suites::{run_suite, Suite, SuiteOptions};
use opspace::*;
use rand::Rng;

type Outcome = std::result::Result<String, String>;

const TOL: f64 = 1e-6;

fn cfg() -> EstimatorConfig {
    EstimatorConfig::default()
}

fn m(d: usize) -> Arc<ConcreteSpace> {
    Arc::new(ConcreteSpace::full_matrix(d))
}

fn space(rng: &mut SeededRng, dmax: usize, label: &str) -> Arc<ConcreteSpace> {
    let d = rng.random_range(1..=dmax);
    let k = rng.random_range(1..=d * d);
    Arc::new(random_subspace(rng, d, k, label))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn suite(s: Suite, trials: usize, level_max: usize, collection: Option<LambdaCollection>) -> Outcome {
    let opts = SuiteOptions {
        trials,
        level_max,
        collection,
    };
    let r = run_suite(s, &cfg(), &opts).map_err(|e| e.to_string())?;
    let failed: Vec<_> = r.assertions.iter().filter(|a| !a.pass).collect();
    let worst = r.assertions.iter().map(|a| a.slack).fold(f64::INFINITY, f64::min);
    match failed.first() {
        None => Ok(format!("{} assertions, min slack {:.3e}", r.assertions.len(), worst + 0.0)),
        Some(a) => Err(format!("{} of {} failed; first {}: {}", failed.len(), r.assertions.len(), a.name, a.statement)),
    }
}

fn matrix_cross() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let e = space(&mut rng, 3, "E");
        let f = space(&mut rng, 3, "F");
        let (p, q) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let x = random_element(&mut rng, e, p);
        let y = random_element(&mut rng, f, q);
        let t = min_tensor(&x, &y).map_err(|e| e.to_string())?;
        worst = worst.max((t.min_norm() - x.min_norm() * y.min_norm()).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-9 && secs < 10.0, format!("max deviation {worst:.3e}, {secs:.2}s"))
}

fn ruan_min() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(102);
    let mut spaces = vec![m(1), m(2), m(3), Arc::new(ConcreteSpace::diagonal(3))];
    for d in [2, 3] {
        let k = rng.random_range(1..=d * d);
        spaces.push(Arc::new(random_subspace(&mut rng, d, k, "E")));
    }
    let mut total = 0;
    for (i, s) in spaces.iter().enumerate() {
        let oracle = MinOracle::new(s.clone());
        let sampler = SamplerConfig::new(200 + i as u64, 1000);
        for rep in [check_r1(&oracle, &sampler), check_r2(&oracle, &sampler)] {
            let rep = rep.map_err(|e| e.to_string())?;
            if rep.has_violation() {
                return Err(rep.summary());
            }
            total += rep.budget;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, format!("{total} samples over {} spaces, no violations, {secs:.2}s", spaces.len()))
}

fn swap_matrix(n: usize) -> DMatrix<Complex64> {
    let mut s = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            s[(i * n + j, j * n + i)] = Complex64::new(1.0, 0.0);
        }
    }
    s
}

fn top_singular_value(a: &DMatrix<Complex64>) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}

fn transpose_cb_growth() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    for n in 2..=4 {
        let est = cb_norm(&LinearMapRep::transpose(n), n, &cfg()).map_err(|e| e.to_string())?;
        if est.lower < n as f64 - TOL {
            return Err(format!("n={n}: cb lower {}", est.lower));
        }
        // SWAP = Σ ε_ij ⊗ ε_ji has norm 1; its image Σ ε_ij ⊗ ε_ij has norm n.
        let swap = swap_matrix(n);
        let mut image = DMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                image[(i * n + i, j * n + j)] = Complex64::new(1.0, 0.0);
            }
        }
        let ratio = top_singular_value(&image) / top_singular_value(&swap);
        let lib = swap_element(n).realize();
        if (lib - &swap).norm() > 1e-12 || (ratio - n as f64).abs() > 1e-9 {
            return Err(format!("n={n}: SWAP witness ratio {ratio}"));
        }
        details.push(format!("n={n}: {:.9}", est.lower));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, format!("{}, {secs:.2}s", details.join(", ")))
}

fn transpose_weight_separation() -> Outcome {
    let w = WeightSequence::transpose();
    let id = lambda_cb_norm(&LinearMapRep::identity(m(4)), &w, 4, &cfg()).map_err(|e| e.to_string())?;
    let adj = lambda_cb_norm(&LinearMapRep::adjoint(4), &w, 4, &cfg()).map_err(|e| e.to_string())?;
    let grows = id.level_profile.len() == 4
        && id.level_profile.iter().enumerate().all(|(k, v)| *v >= (k + 1) as f64 - TOL);
    let flat = adj.level_profile.len() == 4 && adj.level_profile.iter().all(|v| (v - 1.0).abs() <= TOL);
    check(
        grows && flat,
        format!("identity {:.6?}, adjoint {:.9?}", id.level_profile, adj.level_profile),
    )
}

fn pairing_bound() -> Outcome {
    let weight = BilinearWeight::product();
    let mut rng = rng_from_seed(110);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let e_space = space(&mut rng, 2, "E");
        let f_space = space(&mut rng, 2, "F");
        let n = rng.random_range(1..=2);
        let e = random_element(&mut rng, e_space.clone(), n);
        let f = random_element(&mut rng, f_space.clone(), n);
        let k = rng.random_range(1..=2);
        let scalars = Arc::new(ConcreteSpace::scalars());
        let psi: Vec<Vec<BilinearMapRep>> = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| random_bilinear(&mut rng, e_space.clone(), f_space.clone(), scalars.clone()))
                    .collect()
            })
            .collect();
        let bundled = bundle_forms(&psi).map_err(|e| e.to_string())?;
        let psi_norm = bilinear_lambda_norm(&bundled, &weight, 1, &cfg()).map_err(|e| e.to_string())?;
        let u = weighted_tensor(&e, &f, &weight).map_err(|e| e.to_string())?;
        let pairing = matrix_pairing(&u, &psi).map_err(|e| e.to_string())?;
        let lhs = pairing.svd(false, false).singular_values.max();
        let rhs = psi_norm.upper * e.min_norm() * f.min_norm();
        worst = worst.min(rhs - lhs);
    }
    check(worst >= -TOL, format!("min slack {:.3e}", worst + 0.0))
}

fn random_tensor(rng: &mut SeededRng) -> TensorElement {
    let l = space(rng, 2, "E");
    let r = space(rng, 2, "F");
    let coeffs = gaussian_vec(rng, l.dim() * r.dim());
    TensorElement::new(l, r, 1, coeffs).expect("shapes match")
}

fn duality_decomposition() -> Outcome {
    let cases = [
        (BilinearWeight::product(), DecompMode::Odot),
        (BilinearWeight::kronecker(), DecompMode::Otimes),
        (BilinearWeight::schur(), DecompMode::Bullet),
    ];
    let mut rng = rng_from_seed(112);
    let mut worst = f64::INFINITY;
    for _ in 0..30 {
        let u = random_tensor(&mut rng);
        for (w, mode) in &cases {
            let lower = lambda_tensor_norm_lower(&u, w, 2, &cfg()).map_err(|e| e.to_string())?.lower;
            let upper = decomposition_bound(&u, *mode, 16, &cfg()).map_err(|e| e.to_string())?.upper;
            worst = worst.min(upper + TOL - lower);
        }
    }
    let mut pin_err = 0.0f64;
    for _ in 0..5 {
        let l = space(&mut rng, 2, "E");
        let r = space(&mut rng, 2, "F");
        let x = random_element(&mut rng, l, 1);
        let y = random_element(&mut rng, r, 1);
        let u = TensorElement::from_min_tensor(&x, &y).map_err(|e| e.to_string())?;
        let target = x.min_norm() * y.min_norm();
        for (w, mode) in &cases {
            let lower = lambda_tensor_norm_lower(&u, w, 2, &cfg()).map_err(|e| e.to_string())?.lower;
            let upper = decomposition_bound(&u, *mode, 16, &cfg()).map_err(|e| e.to_string())?.upper;
            pin_err = pin_err.max((lower - target).abs()).max((upper - target).abs());
        }
    }
    check(
        worst >= 0.0 && pin_err <= TOL,
        format!("min slack {worst:.3e}, rank-one pin error {pin_err:.3e}"),
    )
}

fn falsification() -> Outcome {
    let oracle = FrobeniusOracle::new(m(2));
    let rep = check_r1(&oracle, &SamplerConfig::new(113, 1000)).map_err(|e| e.to_string())?;
    let best = rep.best_certificate().map(|c| c.excess()).unwrap_or(0.0);
    let target = 2f64.sqrt() - 1.0 - 1e-9;
    check(best >= target, format!("best certificate excess {best:.12} (need {target:.12})"))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("matrix cross exactness", Box::new(matrix_cross)),
        ("Ruan axioms hold for min norms", Box::new(ruan_min)),
        ("transpose cb growth", Box::new(transpose_cb_growth)),
        ("transpose weight separation", Box::new(transpose_weight_separation)),
        ("composition bounds", Box::new(|| suite(Suite::Composition, 50, 3, None))),
        ("functional and commutative range bounds", Box::new(|| suite(Suite::RangeBounds, 50, 4, None))),
        ("commutative collections give the operator norm", Box::new(|| suite(Suite::CommutativeCollection, 50, 3, None))),
        ("norm sandwich", Box::new(|| suite(Suite::Sandwich, 50, 3, None))),
        ("collection dual versus cb dual", Box::new(|| suite(Suite::DualGap, 1, 3, None))),
        ("pairing bound", Box::new(pairing_bound)),
        ("flip invariance for symmetric weights", Box::new(|| suite(Suite::FlipInvariance, 20, 2, None))),
        ("duality and decomposition consistency", Box::new(duality_decomposition)),
        ("falsification power", Box::new(falsification)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
