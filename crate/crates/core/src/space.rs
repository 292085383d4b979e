//! Concrete operator spaces and their matrix levels.
//!
//! An operator space `E` is a subspace of `M_d` given by a basis of complex
//! `d × d` matrices. An element of `M_n(E)` is stored as a coefficient tensor
//! `n × n × m` and realized as the `nd × nd` block matrix whose `(i, j)` block
//! is `Σ_r coeffs(i, j, r) B_r`. The norm on `M_n(E)` is the spectral norm of
//! that realization, which is the min (spatial) structure.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, spectral_norm, CMat, SparseMat, C64, ONE, ZERO};

const GRAM_RATIO: f64 = 1e-12;

pub struct ConcreteSpace {
    label: String,
    ambient: usize,
    basis: Vec<CMat>,
    sparse: Vec<SparseMat>,
    dual: OnceLock<CMat>,
}

impl fmt::Debug for ConcreteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConcreteSpace")
            .field("label", &self.label)
            .field("ambient", &self.ambient)
            .field("dim", &self.basis.len())
            .finish()
    }
}

impl PartialEq for ConcreteSpace {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient && self.basis == other.basis
    }
}

impl ConcreteSpace {
    /// Builds a space from a user supplied basis, checking linear independence
    /// through the Gram matrix of the vectorized basis.
    pub fn new(label: impl Into<String>, basis: Vec<CMat>) -> Result<Self> {
        let label = label.into();
        let first = basis
            .first()
            .ok_or_else(|| Error::InvalidSpace(format!("`{label}` has an empty basis")))?;
        let d = first.nrows();
        if d == 0 {
            return Err(Error::InvalidSpace(format!("`{label}` has ambient dimension 0")));
        }
        for (k, b) in basis.iter().enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::InvalidSpace(format!(
                    "`{label}` basis matrix {k} is {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "`{label}` basis matrix {k} has non-finite entries"
                )));
            }
        }
        if basis.len() > d * d {
            return Err(Error::InvalidSpace(format!(
                "`{label}` has {} basis matrices in M_{d}",
                basis.len()
            )));
        }
        let m = basis.len();
        let gram = CMat::from_fn(m, m, |i, j| linalg::frob_inner(&basis[i], &basis[j]));
        let eig = gram.symmetric_eigenvalues();
        let max = eig.iter().fold(0.0_f64, |a, &b| a.max(b));
        let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if max <= 0.0 || min <= GRAM_RATIO * max {
            return Err(Error::DependentBasis {
                ratio: if max > 0.0 { min / max } else { 0.0 },
            });
        }
        Ok(Self::from_trusted(label, basis))
    }

    /// Skips the independence check; used for spaces whose independence is
    /// structural (amplifications, tensor products of independent bases).
    pub(crate) fn from_trusted(label: impl Into<String>, basis: Vec<CMat>) -> Self {
        let ambient = basis[0].nrows();
        let sparse = basis.iter().map(SparseMat::from_dense).collect();
        ConcreteSpace {
            label: label.into(),
            ambient,
            basis,
            sparse,
            dual: OnceLock::new(),
        }
    }

    /// `M_d` with the matrix-unit basis `ε_ij` in row-major order.
    pub fn full_matrix(d: usize) -> Self {
        assert!(d >= 1, "M_d needs d >= 1");
        let basis = (0..d * d).map(|k| linalg::unit(d, k / d, k % d)).collect();
        Self::from_trusted(format!("M:{d}"), basis)
    }

    /// The diagonal algebra `D_d ⊂ M_d`, i.e. `C(K)` for a `d`-point `K`.
    pub fn diagonal(d: usize) -> Self {
        assert!(d >= 1, "D_d needs d >= 1");
        let basis = (0..d).map(|k| linalg::unit(d, k, k)).collect();
        Self::from_trusted(format!("D:{d}"), basis)
    }

    /// The scalars as `M_1`.
    pub fn scalars() -> Self {
        Self::full_matrix(1)
    }

    /// `k` orthogonal block-diagonal copies of this space inside
    /// `M_{k d}`; `C(K, M_n)` for a `k`-point `K` is `copies(M_n, k)`.
    pub fn block_copies(&self, k: usize) -> Self {
        assert!(k >= 1);
        let d = self.ambient;
        let mut basis = Vec::with_capacity(k * self.dim());
        for copy in 0..k {
            for b in &self.basis {
                let mut big = CMat::zeros(k * d, k * d);
                big.view_mut((copy * d, copy * d), (d, d)).copy_from(b);
                basis.push(big);
            }
        }
        Self::from_trusted(format!("{}^{k}", self.label), basis)
    }

    /// `M_n(E)` as a concrete space in `M_{nd}`; basis `ε_ij ⊗ B_r` indexed
    /// by `(i n + j) m + r`, matching the [`MatElement`] coefficient layout.
    pub fn amplified(&self, n: usize) -> Self {
        assert!(n >= 1);
        if n == 1 {
            return Self::from_trusted(self.label.clone(), self.basis.clone());
        }
        let mut basis = Vec::with_capacity(n * n * self.dim());
        for i in 0..n {
            for j in 0..n {
                for b in &self.basis {
                    basis.push(kron(&linalg::unit(n, i, j), b));
                }
            }
        }
        Self::from_trusted(format!("M{n}({})", self.label), basis)
    }

    /// `E ⊗ F` with basis `B_r ⊗ C_s` indexed by `r m_F + s`.
    pub fn tensor(&self, other: &ConcreteSpace) -> Self {
        let mut basis = Vec::with_capacity(self.dim() * other.dim());
        for b in &self.basis {
            for cmat in &other.basis {
                basis.push(kron(b, cmat));
            }
        }
        Self::from_trusted(format!("{}(x){}", self.label, other.label), basis)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub(crate) fn sparse_basis(&self) -> &[SparseMat] {
        &self.sparse
    }

    /// True when every basis matrix is diagonal, i.e. the space sits inside
    /// a commutative C*-algebra.
    pub fn is_commutative_subspace(&self) -> bool {
        self.sparse
            .iter()
            .all(|s| s.entries.iter().all(|&(i, j, _)| i == j))
    }

    /// `m × d²` left inverse of the vectorized basis.
    fn dual(&self) -> &CMat {
        self.dual.get_or_init(|| {
            let d2 = self.ambient * self.ambient;
            let mut v = CMat::zeros(d2, self.dim());
            for (r, b) in self.basis.iter().enumerate() {
                v.set_column(r, &linalg::vec_rows(b));
            }
            linalg::pinv(&v)
        })
    }

    /// Coordinates of an ambient matrix under the dual functionals, together
    /// with the residual `‖x − Σ coords_r B_r‖_F`.
    pub fn coordinates(&self, x: &CMat) -> Result<(Vec<C64>, f64)> {
        if x.nrows() != self.ambient || x.ncols() != self.ambient {
            return Err(Error::shape(format!(
                "matrix is {}x{}, space `{}` lives in M_{}",
                x.nrows(),
                x.ncols(),
                self.label,
                self.ambient
            )));
        }
        let coords: Vec<C64> = (self.dual() * linalg::vec_rows(x)).iter().copied().collect();
        let resid = (self.combine(&coords) - x).norm();
        Ok((coords, resid))
    }

    /// `Σ_r coords_r B_r`
    pub fn combine(&self, coords: &[C64]) -> CMat {
        let mut out = CMat::zeros(self.ambient, self.ambient);
        for (s, b) in coords.iter().zip(&self.sparse) {
            b.axpy_into(*s, &mut out);
        }
        out
    }

    pub(crate) fn same_as(&self, other: &ConcreteSpace) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

/// An element of `M_n(E)`.
#[derive(Debug, Clone)]
pub struct MatElement {
    space: Arc<ConcreteSpace>,
    level: usize,
    coeffs: Vec<C64>,
}

impl MatElement {
    pub fn new(space: Arc<ConcreteSpace>, level: usize, coeffs: Vec<C64>) -> Result<Self> {
        if level == 0 {
            return Err(Error::shape("level must be at least 1"));
        }
        let want = level * level * space.dim();
        if coeffs.len() != want {
            return Err(Error::shape(format!(
                "expected {want} coefficients for level {level} over `{}`, got {}",
                space.label(),
                coeffs.len()
            )));
        }
        Ok(MatElement {
            space,
            level,
            coeffs,
        })
    }

    pub fn zeros(space: Arc<ConcreteSpace>, level: usize) -> Self {
        let len = level * level * space.dim();
        MatElement {
            space,
            level,
            coeffs: vec![ZERO; len],
        }
    }

    /// `ε_ij ⊗ B_r` at the given level.
    pub fn elementary(space: Arc<ConcreteSpace>, level: usize, i: usize, j: usize, r: usize) -> Self {
        let mut x = Self::zeros(space, level);
        let m = x.space.dim();
        x.coeffs[(i * level + j) * m + r] = ONE;
        x
    }

    /// `a ⊗ e` for a scalar matrix `a` and an element `e ∈ E` given by coordinates.
    pub fn scalar_tensor(space: Arc<ConcreteSpace>, a: &CMat, e: &[C64]) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || e.len() != space.dim() {
            return Err(Error::shape("scalar_tensor needs a square matrix and dim-many coordinates"));
        }
        let m = space.dim();
        let mut coeffs = vec![ZERO; n * n * m];
        for i in 0..n {
            for j in 0..n {
                for r in 0..m {
                    coeffs[(i * n + j) * m + r] = a[(i, j)] * e[r];
                }
            }
        }
        Self::new(space, n, coeffs)
    }

    /// Builds an element from an `n × n` array of ambient matrices, which
    /// must lie in the space.
    pub fn from_blocks(space: Arc<ConcreteSpace>, blocks: &[Vec<CMat>]) -> Result<Self> {
        let n = blocks.len();
        let m = space.dim();
        let mut coeffs = vec![ZERO; n * n * m];
        for (i, row) in blocks.iter().enumerate() {
            if row.len() != n {
                return Err(Error::shape("block array must be square"));
            }
            for (j, b) in row.iter().enumerate() {
                let (cs, resid) = space.coordinates(b)?;
                if resid > 1e-9 * (1.0 + b.norm()) {
                    return Err(Error::shape(format!(
                        "block ({i},{j}) is not in `{}` (residual {resid:.2e})",
                        space.label()
                    )));
                }
                coeffs[(i * n + j) * m..(i * n + j + 1) * m].copy_from_slice(&cs);
            }
        }
        Self::new(space, n, coeffs)
    }

    /// Reads coefficients back from a realization through the dual basis.
    pub fn from_realization(space: Arc<ConcreteSpace>, level: usize, big: &CMat) -> Result<(Self, f64)> {
        let d = space.ambient_dim();
        if big.nrows() != level * d || big.ncols() != level * d {
            return Err(Error::shape("realization has the wrong size"));
        }
        let m = space.dim();
        let mut coeffs = vec![ZERO; level * level * m];
        let mut worst = 0.0_f64;
        for i in 0..level {
            for j in 0..level {
                let block = big.view((i * d, j * d), (d, d)).into_owned();
                let (cs, resid) = space.coordinates(&block)?;
                worst = worst.max(resid);
                coeffs[(i * level + j) * m..(i * level + j + 1) * m].copy_from_slice(&cs);
            }
        }
        Ok((Self::new(space, level, coeffs)?, worst))
    }

    pub fn space(&self) -> &Arc<ConcreteSpace> {
        &self.space
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Coordinates of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> &[C64] {
        let m = self.space.dim();
        let k = (i * self.level + j) * m;
        &self.coeffs[k..k + m]
    }

    /// The `(n d) × (n d)` block matrix `Σ coeffs(i,j,r) ε_ij ⊗ B_r`.
    pub fn realize(&self) -> CMat {
        let n = self.level;
        let d = self.space.ambient_dim();
        let mut out = CMat::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                let block = self.space.combine(self.entry(i, j));
                out.view_mut((i * d, j * d), (d, d)).copy_from(&block);
            }
        }
        out
    }

    /// The min norm: largest singular value of the realization.
    pub fn min_norm(&self) -> f64 {
        spectral_norm(&self.realize())
    }

    pub fn scale(&self, s: C64) -> Self {
        MatElement {
            space: self.space.clone(),
            level: self.level,
            coeffs: self.coeffs.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &MatElement) -> Result<Self> {
        self.check_space(other)?;
        if self.level != other.level {
            return Err(Error::shape("levels differ"));
        }
        Ok(MatElement {
            space: self.space.clone(),
            level: self.level,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    fn check_space(&self, other: &MatElement) -> Result<()> {
        if !self.space.same_as(&other.space) {
            return Err(Error::SpaceMismatch {
                expected: self.space.label().to_string(),
                found: other.space.label().to_string(),
            });
        }
        Ok(())
    }

    /// `x1 ⊕ x2 ∈ M_{n+k}(E)`.
    pub fn direct_sum(&self, other: &MatElement) -> Result<Self> {
        self.check_space(other)?;
        let (n, k) = (self.level, other.level);
        let total = n + k;
        let m = self.space.dim();
        let mut coeffs = vec![ZERO; total * total * m];
        for i in 0..n {
            for j in 0..n {
                let dst = (i * total + j) * m;
                coeffs[dst..dst + m].copy_from_slice(self.entry(i, j));
            }
        }
        for i in 0..k {
            for j in 0..k {
                let dst = ((n + i) * total + (n + j)) * m;
                coeffs[dst..dst + m].copy_from_slice(other.entry(i, j));
            }
        }
        Self::new(self.space.clone(), total, coeffs)
    }

    /// `x ⊕ 0` at the given larger level.
    pub fn embed(&self, level: usize) -> Result<Self> {
        if level < self.level {
            return Err(Error::shape("cannot embed into a smaller level"));
        }
        if level == self.level {
            return Ok(self.clone());
        }
        self.direct_sum(&MatElement::zeros(self.space.clone(), level - self.level))
    }

    /// `α x β` with `α: p × n` and `β: n × q`; scalars act on the matrix
    /// indices only. Elements are square, so `α` must have as many rows as
    /// `β` has columns.
    pub fn compress(&self, alpha: &CMat, beta: &CMat) -> Result<Self> {
        let n = self.level;
        if alpha.ncols() != n || beta.nrows() != n {
            return Err(Error::shape(format!(
                "compress: alpha is {}x{}, beta is {}x{}, element level {n}",
                alpha.nrows(),
                alpha.ncols(),
                beta.nrows(),
                beta.ncols()
            )));
        }
        let p = alpha.nrows();
        if beta.ncols() != p {
            return Err(Error::shape("compress: result must be square (alpha rows = beta cols)"));
        }
        let m = self.space.dim();
        let mut coeffs = vec![ZERO; p * p * m];
        for a in 0..p {
            for b in 0..p {
                let dst = (a * p + b) * m;
                for i in 0..n {
                    let ai = alpha[(a, i)];
                    if ai == ZERO {
                        continue;
                    }
                    for j in 0..n {
                        let w = ai * beta[(j, b)];
                        if w == ZERO {
                            continue;
                        }
                        for (r, z) in self.entry(i, j).iter().enumerate() {
                            coeffs[dst + r] += w * z;
                        }
                    }
                }
            }
        }
        Self::new(self.space.clone(), p, coeffs)
    }

    /// The same coefficients viewed as a level-one element of `M_n(E)`
    /// realized as a concrete space (see [`ConcreteSpace::amplified`]).
    pub fn flatten(&self, amplified: Arc<ConcreteSpace>) -> Result<Self> {
        if amplified.dim() != self.coeffs.len() {
            return Err(Error::shape("amplified space does not match this level"));
        }
        Self::new(amplified, 1, self.coeffs.clone())
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(&self, base: Arc<ConcreteSpace>, level: usize) -> Result<Self> {
        if self.level != 1 {
            return Err(Error::shape("unflatten expects a level-one element"));
        }
        Self::new(base, level, self.coeffs.clone())
    }
}

/// `x ⊗ y ∈ M_{nk}(E ⊗ F)` over the given tensor space, with entry
/// `((i,i'),(j,j'))` equal to `x_ij ⊗ y_i'j'`.
pub fn min_tensor_in(x: &MatElement, y: &MatElement, tensor_space: Arc<ConcreteSpace>) -> Result<MatElement> {
    let (me, mf) = (x.space.dim(), y.space.dim());
    if tensor_space.dim() != me * mf
        || tensor_space.ambient_dim() != x.space.ambient_dim() * y.space.ambient_dim()
    {
        return Err(Error::shape("tensor space does not match the factors"));
    }
    let (n, k) = (x.level, y.level);
    let nk = n * k;
    let mut coeffs = vec![ZERO; nk * nk * me * mf];
    for i in 0..n {
        for j in 0..n {
            let xe = x.entry(i, j);
            for i2 in 0..k {
                for j2 in 0..k {
                    let ye = y.entry(i2, j2);
                    let row = i * k + i2;
                    let col = j * k + j2;
                    let dst = (row * nk + col) * me * mf;
                    for (r, a) in xe.iter().enumerate() {
                        if *a == ZERO {
                            continue;
                        }
                        for (s, b) in ye.iter().enumerate() {
                            coeffs[dst + r * mf + s] = a * b;
                        }
                    }
                }
            }
        }
    }
    MatElement::new(tensor_space, nk, coeffs)
}

/// [`min_tensor_in`] over a freshly constructed `E ⊗ F`.
pub fn min_tensor(x: &MatElement, y: &MatElement) -> Result<MatElement> {
    let space = Arc::new(x.space.tensor(&y.space));
    min_tensor_in(x, y, space)
}

/// An element of `M_n(E ⊗ F)` that remembers both tensor factors.
#[derive(Debug, Clone)]
pub struct TensorElement {
    left: Arc<ConcreteSpace>,
    right: Arc<ConcreteSpace>,
    element: MatElement,
}

impl TensorElement {
    /// Coefficients are indexed `(i, j, r, s)` with `r` over `E`'s basis and
    /// `s` over `F`'s.
    pub fn new(left: Arc<ConcreteSpace>, right: Arc<ConcreteSpace>, level: usize, coeffs: Vec<C64>) -> Result<Self> {
        let space = Arc::new(left.tensor(&right));
        let element = MatElement::new(space, level, coeffs)?;
        Ok(TensorElement { left, right, element })
    }

    pub fn zeros(left: Arc<ConcreteSpace>, right: Arc<ConcreteSpace>, level: usize) -> Self {
        let len = level * level * left.dim() * right.dim();
        Self::new(left, right, level, vec![ZERO; len]).expect("length matches")
    }

    /// `x ⊗ y` for `x ∈ M_n(E)`, `y ∈ M_k(F)`.
    pub fn from_min_tensor(x: &MatElement, y: &MatElement) -> Result<Self> {
        let element = min_tensor(x, y)?;
        Ok(TensorElement {
            left: x.space().clone(),
            right: y.space().clone(),
            element,
        })
    }

    pub fn left(&self) -> &Arc<ConcreteSpace> {
        &self.left
    }

    pub fn right(&self) -> &Arc<ConcreteSpace> {
        &self.right
    }

    pub fn element(&self) -> &MatElement {
        &self.element
    }

    pub fn level(&self) -> usize {
        self.element.level()
    }

    pub fn coeffs(&self) -> &[C64] {
        self.element.coeffs()
    }

    pub fn min_norm(&self) -> f64 {
        self.element.min_norm()
    }

    /// Coefficient of `ε_il ⊗ B_r ⊗ C_s`.
    pub fn coeff(&self, i: usize, l: usize, r: usize, s: usize) -> C64 {
        let (me, mf) = (self.left.dim(), self.right.dim());
        self.element.coeffs()[(i * self.level() + l) * me * mf + r * mf + s]
    }

    /// The same element over `F ⊗ E`, with tensor factors exchanged.
    pub fn flip(&self) -> TensorElement {
        let n = self.level();
        let (me, mf) = (self.left.dim(), self.right.dim());
        let mut coeffs = vec![ZERO; n * n * me * mf];
        for il in 0..n * n {
            for r in 0..me {
                for s in 0..mf {
                    coeffs[il * me * mf + s * me + r] = self.element.coeffs()[il * me * mf + r * mf + s];
                }
            }
        }
        TensorElement::new(self.right.clone(), self.left.clone(), n, coeffs).expect("length matches")
    }
}

/// Scalar matrix with all entries real, convenience for tests and suites.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    DMatrix::from_row_slice(rows, cols, &data.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_element, rng_from_seed};

    fn m2() -> Arc<ConcreteSpace> {
        Arc::new(ConcreteSpace::full_matrix(2))
    }

    #[test]
    fn realize_elementary_unit() {
        let x = MatElement::elementary(m2(), 1, 0, 0, 0);
        let r = x.realize();
        assert_eq!(r, linalg::unit(2, 0, 0));
        assert_eq!(x.min_norm(), 1.0);
    }

    #[test]
    fn zero_element_realizes_to_zero() {
        let x = MatElement::zeros(m2(), 3);
        assert!(x.realize().iter().all(|z| *z == ZERO));
        assert_eq!(x.min_norm(), 0.0);
    }

    #[test]
    fn realization_roundtrip_on_subspace() {
        let e = Arc::new(
            ConcreteSpace::new("row", vec![linalg::unit(2, 0, 0), linalg::unit(2, 0, 1)]).unwrap(),
        );
        let mut rng = rng_from_seed(7);
        for _ in 0..10 {
            let x = random_element(&mut rng, e.clone(), 2);
            let (back, resid) = MatElement::from_realization(e.clone(), 2, &x.realize()).unwrap();
            assert!(resid <= 1e-12);
            for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
                assert!((a - b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn kronecker_element_norm_is_product() {
        // a has spectral norm 2, B has spectral norm 3
        let a = real_matrix(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let space = m2();
        let b = [c(0.0, 0.0), c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let x = MatElement::scalar_tensor(space, &a, &b).unwrap();
        assert!((x.min_norm() - 6.0).abs() < 1e-10);
    }

    #[test]
    fn dependent_basis_rejected() {
        let b = linalg::unit(2, 0, 1);
        let err = ConcreteSpace::new("bad", vec![b.clone(), b * c(2.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::DependentBasis { .. }));
    }

    #[test]
    fn too_many_basis_matrices_rejected() {
        let basis = vec![linalg::unit(1, 0, 0), linalg::unit(1, 0, 0) * c(0.0, 1.0)];
        assert!(ConcreteSpace::new("c2", basis).is_err());
    }

    #[test]
    fn direct_sum_of_units() {
        let x = MatElement::elementary(m2(), 1, 0, 0, 0);
        let s = x.direct_sum(&x).unwrap();
        assert_eq!(s.level(), 2);
        assert!((s.min_norm() - 1.0).abs() < 1e-15);
        let z = MatElement::zeros(m2(), 2);
        let s2 = x.direct_sum(&z).unwrap();
        assert!((s2.min_norm() - x.min_norm()).abs() < 1e-15);
    }

    #[test]
    fn direct_sum_space_mismatch() {
        let x = MatElement::elementary(m2(), 1, 0, 0, 0);
        let y = MatElement::elementary(Arc::new(ConcreteSpace::diagonal(2)), 1, 0, 0, 0);
        assert!(matches!(x.direct_sum(&y), Err(Error::SpaceMismatch { .. })));
    }

    #[test]
    fn compress_identity_and_zero() {
        let mut rng = rng_from_seed(3);
        let x = random_element(&mut rng, m2(), 2);
        let id = CMat::identity(2, 2);
        let same = x.compress(&id, &id).unwrap();
        assert_eq!(same.coeffs(), x.coeffs());
        let zero = CMat::zeros(2, 2);
        let z = x.compress(&zero, &zero).unwrap();
        assert!(z.coeffs().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn compress_shape_mismatch() {
        let x = MatElement::zeros(m2(), 2);
        assert!(x.compress(&CMat::identity(2, 3), &CMat::identity(2, 2)).is_err());
    }

    #[test]
    fn min_tensor_of_units_and_identity() {
        let x = MatElement::elementary(m2(), 2, 0, 1, 2);
        let y = MatElement::elementary(m2(), 2, 1, 0, 3);
        let t = min_tensor(&x, &y).unwrap();
        assert_eq!(t.level(), 4);
        assert!((t.min_norm() - 1.0).abs() < 1e-12);

        let mut rng = rng_from_seed(11);
        let x = random_element(&mut rng, m2(), 2);
        let one = MatElement::new(Arc::new(ConcreteSpace::scalars()), 1, vec![ONE]).unwrap();
        let t = min_tensor(&x, &one).unwrap();
        assert!((t.min_norm() - x.min_norm()).abs() < 1e-12);
    }

    #[test]
    fn subspace_norm_matches_ambient() {
        // E' = span{ε_11, ε_22} ⊂ M_2: same realization, same norm.
        let sub = Arc::new(
            ConcreteSpace::new("diag", vec![linalg::unit(2, 0, 0), linalg::unit(2, 1, 1)]).unwrap(),
        );
        let x = MatElement::new(sub, 2, (0..8).map(|k| c(k as f64 - 3.0, 0.5)).collect()).unwrap();
        let mut full = MatElement::zeros(m2(), 2);
        let mut coeffs = full.coeffs().to_vec();
        for i in 0..2 {
            for j in 0..2 {
                let e = x.entry(i, j);
                coeffs[(i * 2 + j) * 4] = e[0];
                coeffs[(i * 2 + j) * 4 + 3] = e[1];
            }
        }
        full = MatElement::new(m2(), 2, coeffs).unwrap();
        assert_eq!(x.realize(), full.realize());
        assert_eq!(x.min_norm(), full.min_norm());
    }

    #[test]
    fn flatten_preserves_realization() {
        let mut rng = rng_from_seed(5);
        let x = random_element(&mut rng, m2(), 3);
        let amp = Arc::new(x.space().amplified(3));
        let flat = x.flatten(amp).unwrap();
        assert!((flat.realize() - x.realize()).norm() < 1e-14);
    }
}
