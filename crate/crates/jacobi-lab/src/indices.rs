//! Kashiwara, positive Maslov and Leray indices of Lagrangian planes.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, hstack, null_space_abs, pseudoinverse, range_basis};
use crate::sampling::random_lagrangian;
use crate::scalar::Scalar;
use crate::symplectic::{
    intersect, intersection_dim, plane_distance, standard_form, HalfInteger, LinearSubspace,
    QuadraticForm, SymplecticSpace,
};

/// Form `σ(λ₁, λ₃)` on `(Λ₁ + Λ₃) ∩ M` modulo its known kernel `Λ₁ ∩ M + Λ₃ ∩ M`,
/// with the eigenvalue cut-off it supports.
///
/// The decomposition `λ = λ₁ + λ₃` amplifies roundoff by the inverse conditioning of `[Λ₁ Λ₃]`,
/// so the cut-off is `‖Ω‖ · max(tol, 64 ε / ρ)` with `ρ` the smallest kept relative singular value.
fn triple_form<T: Scalar>(
    space: &SymplecticSpace<T>,
    l1: &LinearSubspace<T>,
    mid: &LinearSubspace<T>,
    l3: &LinearSubspace<T>,
    tol: T,
) -> (QuadraticForm<T>, T) {
    let sum = hstack(&[l1.basis(), l3.basis()]);
    let q = range_basis(&sum, tol);
    let sv = linalg::singular_values(&sum);
    let top = sv.first().copied().unwrap_or(T::one());
    let rho = sv
        .iter()
        .copied()
        .filter(|s| *s > tol * top)
        .fold(top, |a, s| a.min(s))
        / top;
    let cut = space.scale() * tol.max(T::lit(64.0) * T::default_epsilon() / rho);
    let b = mid.basis();
    let outside = b - &q * (q.transpose() * b);
    let w = null_space_abs(&outside, tol);
    if w.ncols() == 0 {
        return (QuadraticForm::symmetrized(&DMatrix::zeros(0, 0)), cut);
    }
    // Λ₁ ∩ M and Λ₃ ∩ M lie in the kernel; drop them before decomposing.
    let domain = b * &w;
    let k1 = intersect(l1, mid, tol).map(|x| x.basis().clone());
    let k3 = intersect(l3, mid, tol).map(|x| x.basis().clone());
    let known = match (k1, k3) {
        (Ok(k1), Ok(k3)) => hstack(&[&k1, &k3]),
        _ => DMatrix::zeros(b.nrows(), 0),
    };
    let inside = range_basis(&(domain.transpose() * known), tol);
    let keep = linalg::complement(&inside, domain.ncols());
    if keep.ncols() == 0 {
        return (QuadraticForm::symmetrized(&DMatrix::zeros(0, 0)), cut);
    }
    let coeffs = pseudoinverse(&sum, tol) * (&domain * keep);
    let a = l1.basis() * coeffs.rows(0, l1.dim());
    let c = l3.basis() * coeffs.rows(l1.dim(), l3.dim());
    (QuadraticForm::symmetrized(&space.pairing(&a, &c)), cut)
}

fn check_all<T: Scalar>(
    space: &SymplecticSpace<T>,
    planes: &[&LinearSubspace<T>],
    tol: T,
) -> Result<()> {
    for (i, p) in planes.iter().enumerate() {
        space.require_lagrangian(p, &format!("plane {i}"), tol)?;
    }
    Ok(())
}

/// Kashiwara index `Ki(Λ₁, M, Λ₃)`: signature of `σ(λ₁, λ₃)` over `λ₁ + λ₃ ∈ M`.
pub fn kashiwara<T: Scalar>(
    space: &SymplecticSpace<T>,
    l1: &LinearSubspace<T>,
    mid: &LinearSubspace<T>,
    l3: &LinearSubspace<T>,
    tol: T,
) -> Result<i64> {
    check_all(space, &[l1, mid, l3], tol)?;
    let (q, cut) = triple_form(space, l1, mid, l3, tol);
    Ok(q.signature(cut).signature())
}

/// Positive Maslov index `ind_Π(Λ₁, Λ₂)`.
pub fn positive_maslov<T: Scalar>(
    space: &SymplecticSpace<T>,
    l1: &LinearSubspace<T>,
    pi: &LinearSubspace<T>,
    l2: &LinearSubspace<T>,
    tol: T,
) -> Result<HalfInteger> {
    check_all(space, &[l1, pi, l2], tol)?;
    let (q, cut) = triple_form(space, l1, pi, l2, tol);
    // Directions of Λ₁ ∩ Π ∩ Λ₂ lie in the kernel of q and never add to ind⁺.
    let plus = q.signature(cut).plus as i64;
    let d1 = intersection_dim(l1, pi, tol) as i64;
    let d2 = intersection_dim(l2, pi, tol) as i64;
    let l12 = intersect(l1, l2, tol)?;
    let d12 = intersection_dim(&l12, pi, tol) as i64;
    Ok(HalfInteger::from_halves(2 * plus + d1 + d2 - 2 * d12))
}

/// Lagrangian planes sampled at increasing times.
#[derive(Debug, Clone)]
pub struct SampledCurve<T: Scalar> {
    pub times: Vec<T>,
    pub planes: Vec<LinearSubspace<T>>,
}

impl<T: Scalar> SampledCurve<T> {
    pub fn new(times: Vec<T>, planes: Vec<LinearSubspace<T>>) -> Result<Self> {
        if times.len() != planes.len() {
            return Err(Error::Dimension(format!(
                "{} times for {} planes",
                times.len(),
                planes.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(
                "curve times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, planes })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sum of `ind_Π` over consecutive samples.
pub fn partition_index<T: Scalar>(
    space: &SymplecticSpace<T>,
    planes: &[LinearSubspace<T>],
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<HalfInteger> {
    if planes.is_empty() {
        return Err(Error::Invalid("empty curve".into()));
    }
    planes
        .windows(2)
        .map(|w| positive_maslov(space, &w[0], pi, &w[1], tol))
        .sum()
}

/// Rotation `exp(θJ) = cos θ · I + sin θ · J` of the standard space.
pub fn rotation<T: Scalar>(n: usize, theta: T) -> DMatrix<T> {
    DMatrix::identity(2 * n, 2 * n) * theta.cos() + standard_form::<T>(n) * theta.sin()
}

const SEARCH_BUDGET: usize = 4000;

/// Smallest singular value of `[Δ, L]`; zero exactly when the planes meet.
fn transversality<T: Scalar>(a: &LinearSubspace<T>, b: &LinearSubspace<T>) -> T {
    linalg::singular_values(&hstack(&[a.basis(), b.basis()]))
        .last()
        .copied()
        .unwrap_or(T::zero())
}

/// Seeded search for a Lagrangian plane transversal to every listed plane.
/// With `constraint = Some((a, b))` the result also satisfies `ind_Δ(a, b) = 0`.
pub fn find_transversal<T: Scalar>(
    space: &SymplecticSpace<T>,
    planes: &[&LinearSubspace<T>],
    constraint: Option<(&LinearSubspace<T>, &LinearSubspace<T>)>,
    seed: u64,
    tol: T,
) -> Result<LinearSubspace<T>> {
    let n = space.n();
    if space.form() != &standard_form::<T>(n) {
        return Err(Error::Invalid(
            "transversal search needs the standard form".into(),
        ));
    }
    check_all(space, planes, tol)?;
    let margin = tol.sqrt() * T::lit(0.1);
    let accept = |d: &LinearSubspace<T>, margin: T| -> Result<bool> {
        if planes.iter().any(|p| transversality(d, p) < margin) {
            return Ok(false);
        }
        if let Some((a, b)) = constraint {
            if transversality(d, a) < margin || transversality(d, b) < margin {
                return Ok(false);
            }
            return Ok(positive_maslov(space, a, d, b, tol)? == HalfInteger::ZERO);
        }
        Ok(true)
    };
    if let Some((a, b)) = constraint {
        // Planes just behind `a` or just ahead of `b` along the rotation flow. Small steps
        // are needed when `b` sits just behind `a`; the margin shrinks with the step.
        let floor = T::default_epsilon().sqrt();
        for k in 1..=80 {
            let eps = T::lit(0.6f64.powi(k));
            if eps < floor {
                break;
            }
            let m = margin.min(eps * T::lit(0.25));
            let behind = a.map(&rotation(n, eps), tol);
            if accept(&behind, m)? {
                return Ok(behind);
            }
            let ahead = b.map(&rotation(n, -eps), tol);
            if accept(&ahead, m)? {
                return Ok(ahead);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SEARCH_BUDGET {
        let d = random_lagrangian::<T, _>(n, &mut rng);
        if accept(&d, margin)? {
            return Ok(d);
        }
    }
    Err(Error::SearchExhausted(SEARCH_BUDGET))
}

/// Lagrangian plane with a point of the universal cover over it, recorded as `Li(Λ̃, Π̃_base)`.
#[derive(Debug, Clone)]
pub struct LiftedPlane<T: Scalar> {
    pub plane: LinearSubspace<T>,
    pub lift: i64,
    pub base: LinearSubspace<T>,
}

impl<T: Scalar> LiftedPlane<T> {
    /// The base plane itself, with lift zero.
    pub fn base_point(base: &LinearSubspace<T>) -> Self {
        Self {
            plane: base.clone(),
            lift: 0,
            base: base.clone(),
        }
    }
}

fn same_base<T: Scalar>(a: &LinearSubspace<T>, b: &LinearSubspace<T>, tol: T) -> Result<()> {
    let d = plane_distance(a, b)?;
    if d > tol.sqrt() {
        return Err(Error::Invalid(
            "lifted planes use different base planes".into(),
        ));
    }
    Ok(())
}

/// Moves a lifted plane to `next` along a simple monotone join.
pub fn lift_extend<T: Scalar>(
    space: &SymplecticSpace<T>,
    current: &LiftedPlane<T>,
    next: &LinearSubspace<T>,
    seed: u64,
    tol: T,
) -> Result<LiftedPlane<T>> {
    space.require_lagrangian(next, "next plane", tol)?;
    let pi = &current.base;
    let delta = find_transversal(
        space,
        &[&current.plane, next, pi],
        Some((&current.plane, next)),
        seed,
        tol,
    )?;
    let k_cur = kashiwara(space, &current.plane, &delta, pi, tol)?;
    let k_next = kashiwara(space, next, &delta, pi, tol)?;
    Ok(LiftedPlane {
        plane: next.clone(),
        lift: current.lift + k_cur - k_next,
        base: pi.clone(),
    })
}

/// Lifts every sample of a curve, starting from `start`.
pub fn lift_curve<T: Scalar>(
    space: &SymplecticSpace<T>,
    start: LiftedPlane<T>,
    planes: &[LinearSubspace<T>],
    seed: u64,
    tol: T,
) -> Result<Vec<LiftedPlane<T>>> {
    let mut out = Vec::with_capacity(planes.len() + 1);
    out.push(start);
    for (i, p) in planes.iter().enumerate() {
        let cur = out.last().expect("nonempty");
        let next = lift_extend(space, cur, p, seed.wrapping_add(i as u64), tol)?;
        out.push(next);
    }
    Ok(out)
}

/// Leray index `Li(ã, b̃)` from stored lifts and one Kashiwara evaluation.
pub fn leray<T: Scalar>(
    space: &SymplecticSpace<T>,
    a: &LiftedPlane<T>,
    b: &LiftedPlane<T>,
    tol: T,
) -> Result<i64> {
    same_base(&a.base, &b.base, tol)?;
    let k = kashiwara(space, &a.plane, &b.plane, &a.base, tol)?;
    Ok(k + a.lift - b.lift)
}
