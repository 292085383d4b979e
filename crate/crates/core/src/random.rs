//! Seeded random instances: matrices, unitaries, subspaces, elements, maps.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, CMat, C64};
use crate::space::{ConcreteSpace, MatElement};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian (real and imaginary parts each `N(0, 1/2)`).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    (0..len).map(|_| gaussian(rng)).collect()
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix
/// with the phases of `R`'s diagonal absorbed.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let qr = random_matrix(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// A random `m`-dimensional subspace of `M_d` with a Gaussian basis.
pub fn random_subspace<R: Rng + ?Sized>(rng: &mut R, d: usize, m: usize, label: &str) -> ConcreteSpace {
    loop {
        let basis = (0..m).map(|_| random_matrix(rng, d, d)).collect();
        if let Ok(space) = ConcreteSpace::new(label, basis) {
            return space;
        }
    }
}

pub fn random_element<R: Rng + ?Sized>(rng: &mut R, space: Arc<ConcreteSpace>, level: usize) -> MatElement {
    let len = level * level * space.dim();
    MatElement::new(space, level, gaussian_vec(rng, len)).expect("length matches")
}

/// Random element rescaled to min norm one (or zero if degenerate).
pub fn random_unit_element<R: Rng + ?Sized>(rng: &mut R, space: Arc<ConcreteSpace>, level: usize) -> MatElement {
    let x = random_element(rng, space, level);
    let n = x.min_norm();
    if n > 0.0 {
        x.scale(c(1.0 / n, 0.0))
    } else {
        x
    }
}
