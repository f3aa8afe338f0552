//! Pair L-derivatives in `(Σ × Σ, −σ ⊕ σ)` and their composition.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lderiv::{jacobi_curve, VariationBasis};
use crate::linalg::{frobenius, hstack, null_space, pseudoinverse, vstack};
use crate::linearization::MovingFrameFields;
use crate::sampling::random_matrix;
use crate::scalar::Scalar;
use crate::symplectic::{
    conormal_plane, intersect, plane_distance, standard_form, LinearSubspace, Reduction,
    SymplecticSpace,
};

/// `Σ × Σ` with the form `block-diag(−J, J)`.
pub fn pair_space<T: Scalar>(n: usize) -> SymplecticSpace<T> {
    let j = standard_form::<T>(n);
    let mut form = DMatrix::zeros(4 * n, 4 * n);
    form.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&(-&j));
    form.view_mut((2 * n, 2 * n), (2 * n, 2 * n)).copy_from(&j);
    SymplecticSpace::with_form(form, T::default_tol()).expect("block form is nondegenerate")
}

/// `Λ = (Γ₁, 0) ⊕ graph Φ ⊕ (0, Γ₂)` with `Φ : Γ₁^∠/Γ₁ → Γ₂^∠/Γ₂`.
#[derive(Debug, Clone)]
pub struct Decomposition<T: Scalar> {
    pub gamma1: LinearSubspace<T>,
    pub gamma2: LinearSubspace<T>,
    pub reduction1: Reduction<T>,
    pub reduction2: Reduction<T>,
    /// Matrix of `Φ` between the reduction representatives.
    pub phi: DMatrix<T>,
}

impl<T: Scalar> Decomposition<T> {
    /// `(Γ₁, 0) ⊕ graph Φ ⊕ (0, Γ₂)` as a subspace of `R^{4n}`.
    pub fn reconstruct(&self, tol: T) -> LinearSubspace<T> {
        let m = self.gamma1.ambient();
        let g1 = vstack(&[self.gamma1.basis(), &DMatrix::zeros(m, self.gamma1.dim())]);
        let g2 = vstack(&[&DMatrix::zeros(m, self.gamma2.dim()), self.gamma2.basis()]);
        let graph = vstack(&[
            &self.reduction1.representatives,
            &(&self.reduction2.representatives * &self.phi),
        ]);
        LinearSubspace::span(&hstack(&[&g1, &graph, &g2]), tol)
    }
}

/// Lagrangian plane of `(Σ × Σ, −σ ⊕ σ)` with its decomposition.
#[derive(Debug, Clone)]
pub struct PairPlane<T: Scalar> {
    pub n: usize,
    pub plane: LinearSubspace<T>,
    pub decomposition: Decomposition<T>,
}

fn loose<T: Scalar>(tol: T) -> T {
    tol.sqrt() * T::lit(10.0)
}

impl<T: Scalar> PairPlane<T> {
    pub fn new(plane: LinearSubspace<T>, n: usize, tol: T) -> Result<Self> {
        let space = pair_space::<T>(n);
        if plane.ambient() != 4 * n || plane.dim() != 2 * n {
            return Err(Error::Dimension(format!(
                "pair plane must be a {}-plane in R^{}",
                2 * n,
                4 * n
            )));
        }
        if space.isotropy_defect(&plane) > loose(tol) {
            return Err(Error::Degenerate(
                "pair plane is not Lagrangian for −σ ⊕ σ".into(),
            ));
        }
        let decomposition = decompose(&plane, n, tol)?;
        Ok(Self {
            n,
            plane,
            decomposition,
        })
    }

    /// Graph `{(λ, Mλ)}` of a linear map.
    pub fn graph(m: &DMatrix<T>, tol: T) -> Result<Self> {
        let dim = m.nrows();
        if !m.is_square() || !dim.is_multiple_of(2) {
            return Err(Error::Dimension("graph needs an even square matrix".into()));
        }
        let plane = LinearSubspace::span(&vstack(&[&DMatrix::identity(dim, dim), m]), tol);
        Self::new(plane, dim / 2, tol)
    }

    pub fn identity(n: usize, tol: T) -> Result<Self> {
        Self::graph(&DMatrix::identity(2 * n, 2 * n), tol)
    }

    /// Product `Λ₀ × Λ₁` of two Lagrangian planes.
    pub fn product(l0: &LinearSubspace<T>, l1: &LinearSubspace<T>, tol: T) -> Result<Self> {
        let m = l0.ambient();
        let b = vstack(&[
            &hstack(&[l0.basis(), &DMatrix::zeros(m, l1.dim())]),
            &hstack(&[&DMatrix::zeros(m, l0.dim()), l1.basis()]),
        ]);
        Self::new(LinearSubspace::from_orthonormal(b), m / 2, tol)
    }

    fn first(&self) -> DMatrix<T> {
        self.plane.basis().rows(0, 2 * self.n).into_owned()
    }

    fn second(&self) -> DMatrix<T> {
        self.plane.basis().rows(2 * self.n, 2 * self.n).into_owned()
    }

    /// Image under `(u, w) ↦ (G₀u, G₁w)`; moves a plane from the moving frame to physical coordinates.
    pub fn to_physical(&self, g0: &DMatrix<T>, g1: &DMatrix<T>, tol: T) -> Result<Self> {
        let b = vstack(&[&(g0 * self.first()), &(g1 * self.second())]);
        Self::new(LinearSubspace::span(&b, tol), self.n, tol)
    }
}

/// Splits a pair plane into its isotropic parts and the symplectic map between reductions.
pub fn decompose<T: Scalar>(
    plane: &LinearSubspace<T>,
    n: usize,
    tol: T,
) -> Result<Decomposition<T>> {
    let space = SymplecticSpace::<T>::standard(n);
    let p1 = plane.basis().rows(0, 2 * n).into_owned();
    let p2 = plane.basis().rows(2 * n, 2 * n).into_owned();
    let gamma1 = LinearSubspace::span(&(&p1 * null_space(&p2, tol)), tol);
    let gamma2 = LinearSubspace::span(&(&p2 * null_space(&p1, tol)), tol);
    if gamma1.dim() != gamma2.dim() {
        return Err(Error::Degenerate(format!(
            "isotropic parts have dimensions {} and {}",
            gamma1.dim(),
            gamma2.dim()
        )));
    }
    let reduction1 = space.reduction(&gamma1, tol)?;
    let reduction2 = space.reduction(&gamma2, tol)?;
    let a = reduction1.representatives.transpose() * &p1;
    let b = reduction2.representatives.transpose() * &p2;
    let phi = &b * pseudoinverse(&a, tol);
    let mismatch = frobenius(&(&phi * &a - &b));
    if mismatch > loose(tol) {
        return Err(Error::Degenerate(format!(
            "pair plane is not a graph over the reductions (mismatch {})",
            mismatch.as_f64()
        )));
    }
    let dec = Decomposition {
        gamma1,
        gamma2,
        reduction1,
        reduction2,
        phi,
    };
    let back = dec.reconstruct(tol);
    let dist = if back.dim() == plane.dim() {
        plane_distance(&back, plane)?
    } else {
        T::max_value().unwrap_or(T::one())
    };
    if dist > loose(tol) {
        return Err(Error::Degenerate(format!(
            "decomposition does not reconstruct the plane (distance {})",
            dist.as_f64()
        )));
    }
    Ok(dec)
}

/// Coordinates `(p', p, x', x)` of the doubled problem to pair coordinates `((-p', x'), (p, x))`.
fn doubled_to_pair<T: Scalar>(n: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        m[(i, i)] = -T::one();
        m[(n + i, 2 * n + i)] = T::one();
        m[(2 * n + i, n + i)] = T::one();
        m[(3 * n + i, 3 * n + i)] = T::one();
    }
    m
}

/// Pair L-derivative over the grid of `fields`, i.e. from its first to its last grid point.
pub fn pair_lderivative<T: Scalar>(
    fields: &MovingFrameFields<T>,
    basis: &VariationBasis<T>,
    tol: T,
) -> Result<PairPlane<T>> {
    let n = fields.n;
    let doubled = fields.doubled();
    let mut dbasis = basis.clone();
    dbasis.include_boundary = true;
    let last = *fields.grid.last().expect("nonempty grid");
    if (*dbasis.partition.last().expect("nonempty partition") - last).abs()
        > T::lit(1e-9) * last.abs().max(T::one())
    {
        return Err(Error::Invalid(
            "partition must end at the last grid point".into(),
        ));
    }
    let curve = jacobi_curve(&doubled, &dbasis, tol)?;
    let plane = curve.end().map(&doubled_to_pair::<T>(n), tol);
    PairPlane::new(plane, n, tol)
}

/// Composition of the Lagrangian relations `p01` and `p12`.
pub fn glue<T: Scalar>(p01: &PairPlane<T>, p12: &PairPlane<T>, tol: T) -> Result<PairPlane<T>> {
    let n = p01.n;
    if p12.n != n {
        return Err(Error::Dimension(
            "glued pair planes live over different spaces".into(),
        ));
    }
    let (alpha, beta) = fiber_product(p01, p12, tol);
    let out = vstack(&[&(p01.first() * &alpha), &(p12.second() * &beta)]);
    let plane = LinearSubspace::span(&out, tol);
    if plane.dim() != 2 * n {
        let audit = glue_audit(p01, p12, tol)?;
        return Err(Error::Degenerate(format!(
            "glued plane has dimension {} instead of {} (fiber product {}, ker σ on Γ₁+Γ̃₁ {})",
            plane.dim(),
            2 * n,
            alpha.ncols(),
            audit.kernel_dim
        )));
    }
    PairPlane::new(plane, n, tol)
}

/// Coefficients `(α, β)` with `π₁(p01 α) = π₀(p12 β)`.
fn fiber_product<T: Scalar>(
    p01: &PairPlane<T>,
    p12: &PairPlane<T>,
    tol: T,
) -> (DMatrix<T>, DMatrix<T>) {
    let d = 2 * p01.n;
    let k = null_space(&hstack(&[&p01.second(), &(-p12.first())]), tol);
    (k.rows(0, d).into_owned(), k.rows(d, d).into_owned())
}

/// Dimensions entering the glueing corollary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlueAudit {
    /// `dim Γ₁` of the first plane (its second-factor isotropic part).
    pub gamma_left: usize,
    /// `dim Γ̃₁` of the second plane (its first-factor isotropic part).
    pub gamma_right: usize,
    /// `dim ker σ|_{Γ₁ + Γ̃₁}`.
    pub kernel_dim: usize,
}

pub fn glue_audit<T: Scalar>(p01: &PairPlane<T>, p12: &PairPlane<T>, tol: T) -> Result<GlueAudit> {
    let space = SymplecticSpace::<T>::standard(p01.n);
    let g = &p01.decomposition.gamma2;
    let gt = &p12.decomposition.gamma1;
    let sum = g.sum(gt, tol);
    let form = space.pairing(sum.basis(), sum.basis());
    let kernel_dim = if sum.dim() == 0 {
        0
    } else {
        crate::linalg::null_space_abs(&form, tol).ncols()
    };
    Ok(GlueAudit {
        gamma_left: g.dim(),
        gamma_right: gt.dim(),
        kernel_dim,
    })
}

/// Samples matched pairs `x₀₁ ∈ p01`, `x₁₂ ∈ p12` and checks `(π₀ x₀₁, π₂ x₁₂) ∈ p02`.
pub fn chain_rule_check<T: Scalar>(
    p01: &PairPlane<T>,
    p12: &PairPlane<T>,
    p02: &PairPlane<T>,
    samples: usize,
    seed: u64,
    tol: T,
) -> bool {
    if p01.n != p12.n || p01.n != p02.n {
        return false;
    }
    let (alpha, beta) = fiber_product(p01, p12, tol);
    if alpha.ncols() == 0 {
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u0, v2) = (p01.first() * &alpha, p12.second() * &beta);
    for _ in 0..samples {
        let r = random_matrix::<T, _>(alpha.ncols(), 1, &mut rng);
        let x: DVector<T> = vstack(&[&(&u0 * &r), &(&v2 * &r)]).column(0).into_owned();
        if p02.plane.residual(&x) > loose(tol) * x.norm().max(T::one()) {
            return false;
        }
    }
    true
}

/// `π₁(p ∩ π₀⁻¹(T^⊥N₀ × TN₀))`.
pub fn restrict_boundary<T: Scalar>(
    p: &PairPlane<T>,
    n0_tangent: &DMatrix<T>,
    tol: T,
) -> Result<LinearSubspace<T>> {
    let n = p.n;
    let l0 = conormal_plane(n, n0_tangent, tol)?;
    let pre = LinearSubspace::from_orthonormal(vstack(&[
        &hstack(&[l0.basis(), &DMatrix::zeros(2 * n, 2 * n)]),
        &hstack(&[&DMatrix::zeros(2 * n, n), &DMatrix::identity(2 * n, 2 * n)]),
    ]));
    let cut = intersect(&p.plane, &pre, tol)?;
    let out = LinearSubspace::span(&cut.basis().rows(2 * n, 2 * n).into_owned(), tol);
    let space = SymplecticSpace::<T>::standard(n);
    if out.dim() != n || space.isotropy_defect(&out) > loose(tol) {
        return Err(Error::Degenerate(format!(
            "restriction gave a {}-dimensional non-Lagrangian subspace",
            out.dim()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_lagrangian, random_symplectic_rotation};

    #[test]
    fn identity_graph_has_trivial_parts() {
        let p = PairPlane::<f64>::identity(2, 1e-10).unwrap();
        assert_eq!(p.decomposition.gamma1.dim(), 0);
        assert!(
            (&p.decomposition.phi.transpose() * &p.decomposition.phi - DMatrix::identity(4, 4))
                .norm()
                < 1e-10
        );
        let fiber = restrict_boundary(&p, &DMatrix::zeros(2, 0), 1e-10).unwrap();
        assert!(plane_distance(&fiber, &crate::symplectic::fiber_plane(2)).unwrap() < 1e-12);
    }

    #[test]
    fn products_decompose_into_their_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (
            random_lagrangian::<f64, _>(2, &mut rng),
            random_lagrangian(2, &mut rng),
        );
        let p = PairPlane::product(&a, &b, 1e-10).unwrap();
        assert!(plane_distance(&p.decomposition.gamma1, &a).unwrap() < 1e-10);
        assert!(plane_distance(&p.decomposition.gamma2, &b).unwrap() < 1e-10);
        assert_eq!(p.decomposition.phi.len(), 0);
    }

    #[test]
    fn graphs_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m1 = random_symplectic_rotation::<f64, _>(2, &mut rng);
        let m2 = random_symplectic_rotation::<f64, _>(2, &mut rng);
        let g = glue(
            &PairPlane::graph(&m1, 1e-10).unwrap(),
            &PairPlane::graph(&m2, 1e-10).unwrap(),
            1e-10,
        )
        .unwrap();
        let direct = PairPlane::graph(&(&m2 * &m1), 1e-10).unwrap();
        assert!(plane_distance(&g.plane, &direct.plane).unwrap() < 1e-10);
    }

    #[test]
    fn products_glue_to_the_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l: Vec<_> = (0..3)
            .map(|_| random_lagrangian::<f64, _>(2, &mut rng))
            .collect();
        let g = glue(
            &PairPlane::product(&l[0], &l[1], 1e-10).unwrap(),
            &PairPlane::product(&l[1], &l[2], 1e-10).unwrap(),
            1e-10,
        )
        .unwrap();
        let direct = PairPlane::product(&l[0], &l[2], 1e-10).unwrap();
        assert!(plane_distance(&g.plane, &direct.plane).unwrap() < 1e-10);
    }
}
