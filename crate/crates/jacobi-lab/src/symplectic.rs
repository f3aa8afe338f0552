//! Symplectic vector spaces, subspaces and the affine charts of the Lagrangian Grassmannian.
//!
//! Coordinates are ordered `z = (p, x)`: covector block first. The fiber plane `{(p, 0)}`
//! is returned by [`fiber_plane`], the base plane `{(0, x)}` by [`base_plane`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, frobenius, hstack, null_space, range_basis, vstack};
use crate::scalar::Scalar;

/// Block matrix `[[0, I], [-I, 0]]`.
pub fn standard_form<T: Scalar>(n: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = T::one();
        j[(n + i, i)] = -T::one();
    }
    j
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpace<T: Scalar> {
    n: usize,
    form: DMatrix<T>,
}

impl<T: Scalar> SymplecticSpace<T> {
    pub fn standard(n: usize) -> Self {
        Self {
            n,
            form: standard_form(n),
        }
    }

    /// Space with a custom antisymmetric nondegenerate form.
    pub fn with_form(form: DMatrix<T>, tol: T) -> Result<Self> {
        let (r, c) = form.shape();
        if r != c || r % 2 != 0 {
            return Err(Error::Dimension(format!(
                "form must be even square, got {r}x{c}"
            )));
        }
        let scale = frobenius(&form).max(T::one());
        if frobenius(&(&form + form.transpose())) > tol * scale {
            return Err(Error::Invalid("form is not antisymmetric".into()));
        }
        if linalg::rank(&form, tol) != r {
            return Err(Error::Invalid("form is degenerate".into()));
        }
        Ok(Self { n: r / 2, form })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn form(&self) -> &DMatrix<T> {
        &self.form
    }

    /// Operator norm scale of the form, used to make eigenvalue cut-offs dimensionless.
    pub(crate) fn scale(&self) -> T {
        linalg::singular_values(&self.form)
            .first()
            .copied()
            .unwrap_or(T::one())
    }

    pub fn product(&self, u: &DVector<T>, v: &DVector<T>) -> Result<T> {
        if u.len() != self.dim() || v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vectors of length {} and {} in a space of dimension {}",
                u.len(),
                v.len(),
                self.dim()
            )));
        }
        Ok(u.dot(&(&self.form * v)))
    }

    /// Gram matrix `Aᵀ Ω B` of the form between two families of vectors.
    pub fn pairing(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
        a.transpose() * &self.form * b
    }

    fn check(&self, s: &LinearSubspace<T>) -> Result<()> {
        if s.ambient() != self.dim() {
            return Err(Error::Dimension(format!(
                "subspace of R^{} in a space of dimension {}",
                s.ambient(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn skew_complement(&self, g: &LinearSubspace<T>, tol: T) -> Result<LinearSubspace<T>> {
        self.check(g)?;
        if g.dim() == 0 {
            return Ok(LinearSubspace::whole(self.dim()));
        }
        let m = g.basis().transpose() * &self.form;
        Ok(LinearSubspace::from_orthonormal(null_space(&m, tol)))
    }

    /// Largest `|σ(bᵢ, bⱼ)|` over basis columns.
    pub fn isotropy_defect(&self, s: &LinearSubspace<T>) -> T {
        let g = self.pairing(s.basis(), s.basis());
        g.iter().fold(T::zero(), |a, x| a.max(x.abs()))
    }

    pub fn is_isotropic(&self, s: &LinearSubspace<T>, tol: T) -> bool {
        s.ambient() == self.dim() && self.isotropy_defect(s) <= tol
    }

    pub fn is_lagrangian(&self, s: &LinearSubspace<T>, tol: T) -> bool {
        s.dim() == self.n && self.is_isotropic(s, tol)
    }

    pub fn require_lagrangian(&self, s: &LinearSubspace<T>, what: &str, tol: T) -> Result<()> {
        self.check(s)?;
        if s.dim() != self.n {
            return Err(Error::Invalid(format!(
                "{what} has dimension {} but a Lagrangian plane needs {}",
                s.dim(),
                self.n
            )));
        }
        let defect = self.isotropy_defect(s);
        if defect > tol.max(T::lit(1e-6)) * self.scale() {
            return Err(Error::Invalid(format!(
                "{what} is not isotropic (defect {})",
                defect.as_f64()
            )));
        }
        Ok(())
    }

    /// Reduction `Γ^∠ / Γ` realised on the orthonormal complement of `Γ` inside `Γ^∠`.
    pub fn reduction(&self, g: &LinearSubspace<T>, tol: T) -> Result<Reduction<T>> {
        self.check(g)?;
        if self.isotropy_defect(g) > tol.max(T::lit(1e-6)) * self.scale() {
            return Err(Error::Invalid(
                "reduction needs an isotropic subspace".into(),
            ));
        }
        let angle = self.skew_complement(g, tol)?;
        let reps = if g.dim() == 0 {
            angle.basis().clone()
        } else {
            // Kill the Γ directions inside Γ^∠.
            // Singular values of P·B are 0 or 1 here.
            let p = DMatrix::identity(self.dim(), self.dim()) - g.projector();
            let (u, s, _) = linalg::svd(&(p * angle.basis()));
            let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > T::lit(0.5)).collect();
            linalg::select_columns(&u, &keep)
        };
        let reduced_form = self.pairing(&reps, &reps);
        let reduced_form = (&reduced_form - reduced_form.transpose()) * T::lit(0.5);
        let space = if reps.ncols() == 0 {
            SymplecticSpace {
                n: 0,
                form: DMatrix::zeros(0, 0),
            }
        } else {
            SymplecticSpace::with_form(reduced_form, tol)?
        };
        Ok(Reduction {
            space,
            representatives: reps,
            isotropic: g.clone(),
            complement: angle,
        })
    }
}

/// Concrete realisation of a symplectic reduction `Γ^∠ / Γ`.
#[derive(Debug, Clone)]
pub struct Reduction<T: Scalar> {
    pub space: SymplecticSpace<T>,
    /// Orthonormal columns spanning the chosen complement of `Γ` in `Γ^∠`.
    pub representatives: DMatrix<T>,
    pub isotropic: LinearSubspace<T>,
    pub complement: LinearSubspace<T>,
}

impl<T: Scalar> Reduction<T> {
    /// Quotient coordinates of a vector of `Γ^∠`; the kernel is `Γ`.
    pub fn project(&self, v: &DVector<T>) -> DVector<T> {
        self.representatives.transpose() * v
    }

    pub fn projection_matrix(&self) -> DMatrix<T> {
        self.representatives.transpose()
    }

    pub fn lift(&self, c: &DVector<T>) -> DVector<T> {
        &self.representatives * c
    }
}

/// Subspace of `R^m` stored through an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSubspace<T: Scalar> {
    basis: DMatrix<T>,
}

impl<T: Scalar> LinearSubspace<T> {
    /// Span of the columns of `m`, re-orthonormalised with a relative rank cut-off.
    pub fn span(m: &DMatrix<T>, tol: T) -> Self {
        Self {
            basis: range_basis(m, tol),
        }
    }

    pub fn from_orthonormal(basis: DMatrix<T>) -> Self {
        Self { basis }
    }

    pub fn from_columns(ambient: usize, cols: &[Vec<T>], tol: T) -> Result<Self> {
        let mut m = DMatrix::zeros(ambient, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != ambient {
                return Err(Error::Dimension(format!(
                    "column {j} has length {}, expected {ambient}",
                    c.len()
                )));
            }
            for (i, x) in c.iter().enumerate() {
                m[(i, j)] = *x;
            }
        }
        Ok(Self::span(&m, tol))
    }

    pub fn zero(ambient: usize) -> Self {
        Self {
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    pub fn whole(ambient: usize) -> Self {
        Self {
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projector(&self) -> DMatrix<T> {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn residual(&self, v: &DVector<T>) -> T {
        (v - &self.basis * (self.basis.transpose() * v)).norm()
    }

    pub fn contains(&self, v: &DVector<T>, tol: T) -> bool {
        self.residual(v) <= tol * v.norm().max(T::one())
    }

    pub fn contains_subspace(&self, other: &LinearSubspace<T>, tol: T) -> bool {
        let r = &other.basis - self.projector() * &other.basis;
        frobenius(&r) <= tol
    }

    pub fn sum(&self, other: &LinearSubspace<T>, tol: T) -> Self {
        Self::span(&hstack(&[&self.basis, &other.basis]), tol)
    }

    pub fn map(&self, m: &DMatrix<T>, tol: T) -> Self {
        Self::span(&(m * &self.basis), tol)
    }

    pub fn to_f64(&self) -> LinearSubspace<f64> {
        LinearSubspace {
            basis: self.basis.map(|x| x.as_f64()),
        }
    }
}

/// Numerical intersection from the kernel of the stacked system `[A, -B]`.
pub fn intersect<T: Scalar>(
    a: &LinearSubspace<T>,
    b: &LinearSubspace<T>,
    tol: T,
) -> Result<LinearSubspace<T>> {
    if a.ambient() != b.ambient() {
        return Err(Error::Dimension(
            "intersecting subspaces of different spaces".into(),
        ));
    }
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(LinearSubspace::zero(a.ambient()));
    }
    let stacked = hstack(&[a.basis(), &(-b.basis())]);
    let k = null_space(&stacked, tol);
    let top = k.rows(0, a.dim()).into_owned();
    Ok(LinearSubspace::span(&(a.basis() * top), tol))
}

pub fn intersection_dim<T: Scalar>(a: &LinearSubspace<T>, b: &LinearSubspace<T>, tol: T) -> usize {
    intersect(a, b, tol).map(|s| s.dim()).unwrap_or(0)
}

/// Frobenius norm of the difference of orthogonal projectors.
pub fn plane_distance<T: Scalar>(a: &LinearSubspace<T>, b: &LinearSubspace<T>) -> Result<T> {
    if a.ambient() != b.ambient() || a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "comparing a {}-plane in R^{} with a {}-plane in R^{}",
            a.dim(),
            a.ambient(),
            b.dim(),
            b.ambient()
        )));
    }
    Ok(frobenius(&(a.projector() - b.projector())))
}

/// The plane `{(p, 0)}` of `R^{2n}`.
pub fn fiber_plane<T: Scalar>(n: usize) -> LinearSubspace<T> {
    let mut b = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        b[(i, i)] = T::one();
    }
    LinearSubspace::from_orthonormal(b)
}

/// The plane `{(0, x)}` of `R^{2n}`.
pub fn base_plane<T: Scalar>(n: usize) -> LinearSubspace<T> {
    let mut b = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        b[(n + i, i)] = T::one();
    }
    LinearSubspace::from_orthonormal(b)
}

/// Annihilator-times-tangent plane `{(p, x) : p ⟂ span(tangent), x ∈ span(tangent)}`.
pub fn conormal_plane<T: Scalar>(
    n: usize,
    tangent: &DMatrix<T>,
    tol: T,
) -> Result<LinearSubspace<T>> {
    if tangent.nrows() != n {
        return Err(Error::Dimension(format!(
            "tangent basis has {} rows, expected {n}",
            tangent.nrows()
        )));
    }
    let t = range_basis(tangent, tol);
    let ann = if t.ncols() == 0 {
        DMatrix::identity(n, n)
    } else {
        null_space(&t.transpose(), tol)
    };
    let top = hstack(&[&ann, &DMatrix::zeros(n, t.ncols())]);
    let bottom = hstack(&[&DMatrix::zeros(n, ann.ncols()), &t]);
    Ok(LinearSubspace::from_orthonormal(vstack(&[&top, &bottom])))
}

/// Symmetric matrix representing a quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T: Scalar> {
    matrix: DMatrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub plus: usize,
    pub minus: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.plus as i64 - self.minus as i64
    }
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn new(matrix: DMatrix<T>, tol: T) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(
                "quadratic form needs a square matrix".into(),
            ));
        }
        let scale = frobenius(&matrix).max(T::one());
        if frobenius(&(&matrix - matrix.transpose())) > tol * scale {
            return Err(Error::Invalid(
                "quadratic form matrix is not symmetric".into(),
            ));
        }
        Ok(Self { matrix })
    }

    /// Symmetric part of an arbitrary square matrix.
    pub fn symmetrized(matrix: &DMatrix<T>) -> Self {
        Self {
            matrix: (matrix + matrix.transpose()) * T::lit(0.5),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn restrict(&self, basis: &DMatrix<T>) -> Self {
        Self::symmetrized(&(basis.transpose() * &self.matrix * basis))
    }

    /// Eigenvalue counts with an absolute cut-off.
    pub fn signature(&self, tol: T) -> Inertia {
        let ev = linalg::sym_eigenvalues(&self.matrix);
        let plus = ev.iter().filter(|e| **e > tol).count();
        let minus = ev.iter().filter(|e| **e < -tol).count();
        Inertia {
            plus,
            minus,
            zero: ev.len() - plus - minus,
        }
    }

    /// Eigenvalue counts with a cut-off relative to the spectral radius.
    pub fn signature_relative(&self, tol: T) -> Inertia {
        let ev = linalg::sym_eigenvalues(&self.matrix);
        let radius = ev.iter().fold(T::zero(), |a, e| a.max(e.abs()));
        self.signature(tol * radius)
    }
}

pub fn signature<T: Scalar>(q: &QuadraticForm<T>, tol: T) -> Inertia {
    q.signature(tol)
}

pub fn pseudoinverse<T: Scalar>(a: &DMatrix<T>, tol: T) -> DMatrix<T> {
    linalg::pseudoinverse(a, tol)
}

/// Dual frame of `Π` against `Δ`: columns `f'` with `σ(eᵢ, f'ⱼ) = δᵢⱼ`.
fn dual_frame<T: Scalar>(
    space: &SymplecticSpace<T>,
    delta: &LinearSubspace<T>,
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<DMatrix<T>> {
    space.require_lagrangian(delta, "Delta", tol)?;
    space.require_lagrangian(pi, "Pi", tol)?;
    let m = space.pairing(delta.basis(), pi.basis());
    if linalg::rank(&m, tol) < space.n() || m.clone().try_inverse().is_none() {
        return Err(Error::Invalid("Delta and Pi are not transversal".into()));
    }
    let inv = m.try_inverse().expect("checked");
    Ok(pi.basis() * inv)
}

/// Symmetric `S` with `L = span(e + S f')` in the splitting `Δ ⊕ Π`.
pub fn chart_coordinates<T: Scalar>(
    space: &SymplecticSpace<T>,
    l: &LinearSubspace<T>,
    delta: &LinearSubspace<T>,
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<DMatrix<T>> {
    space.require_lagrangian(l, "L", tol)?;
    let f = dual_frame(space, delta, pi, tol)?;
    let frame = hstack(&[delta.basis(), &f]);
    let coeffs = frame
        .lu()
        .solve(l.basis())
        .ok_or_else(|| Error::Degenerate("singular chart frame".into()))?;
    let n = space.n();
    let a = coeffs.rows(0, n).into_owned();
    let c = coeffs.rows(n, n).into_owned();
    let smin = linalg::singular_values(&a)
        .last()
        .copied()
        .unwrap_or(T::zero());
    if smin <= tol.max(T::lit(1e-10)) {
        return Err(Error::ChartDomain("plane meets Pi".into()));
    }
    let ainv = a
        .try_inverse()
        .ok_or_else(|| Error::ChartDomain("plane meets Pi".into()))?;
    let s = c * ainv;
    Ok((&s + s.transpose()) * T::lit(0.5))
}

/// Inverse of [`chart_coordinates`].
pub fn plane_from_graph<T: Scalar>(
    space: &SymplecticSpace<T>,
    s: &DMatrix<T>,
    delta: &LinearSubspace<T>,
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<LinearSubspace<T>> {
    let n = space.n();
    if s.shape() != (n, n) {
        return Err(Error::Dimension(format!("graph matrix must be {n}x{n}")));
    }
    let f = dual_frame(space, delta, pi, tol)?;
    Ok(LinearSubspace::span(&(delta.basis() + f * s), tol))
}

/// Integer stored as twice its value, so halves are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInteger {
    doubled: i64,
}

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger { doubled: 0 };

    pub fn from_halves(doubled: i64) -> Self {
        Self { doubled }
    }

    pub fn from_int(v: i64) -> Self {
        Self { doubled: 2 * v }
    }

    pub fn halves(self) -> i64 {
        self.doubled
    }

    pub fn is_integer(self) -> bool {
        self.doubled % 2 == 0
    }

    /// Exact value when integral.
    pub fn to_int(self) -> Option<i64> {
        self.is_integer().then_some(self.doubled / 2)
    }

    pub fn value(self) -> f64 {
        self.doubled as f64 / 2.0
    }
}

impl std::ops::Add for HalfInteger {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            doubled: self.doubled + o.doubled,
        }
    }
}

impl std::ops::Sub for HalfInteger {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            doubled: self.doubled - o.doubled,
        }
    }
}

impl std::ops::Neg for HalfInteger {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            doubled: -self.doubled,
        }
    }
}

impl std::iter::Sum for HalfInteger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl std::fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.to_int() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}/2", self.doubled),
        }
    }
}
