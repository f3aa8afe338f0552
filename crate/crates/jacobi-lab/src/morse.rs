//! Discretized second variation, its negative index, and the curve-side index formulas.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indices::{partition_index, positive_maslov};
use crate::lderiv::{block, jacobi_curve, JacobiCurve, VariationBasis};
use crate::linalg::{self, hstack, null_space, vstack};
use crate::linearization::MovingFrameFields;
use crate::scalar::Scalar;
use crate::symplectic::{
    intersect, intersection_dim, standard_form, HalfInteger, LinearSubspace, QuadraticForm,
    SymplecticSpace,
};

/// Second variation on boundary directions and piecewise-constant controls.
///
/// Variables are ordered `(ζ, v₁, …, v_m)` with `ζ` in coordinates of the tangent space of the
/// initial manifold. `q` is the symmetric form `∫ [σ(ζ + ∫₀^τ X v, X v) + b(v, v)]`; the Hessian is `−q`.
#[derive(Debug, Clone)]
pub struct DiscretizedHessian<T: Scalar> {
    pub q: DMatrix<T>,
    /// Base component of `ζ + ∫ X v`.
    pub a: DMatrix<T>,
    pub partition: Vec<T>,
    pub boundary_dim: usize,
    pub k: usize,
}

impl<T: Scalar> DiscretizedHessian<T> {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Hessian `−q` restricted to an orthonormal basis of `ker A`.
    pub fn restricted(&self, tol: T) -> QuadraticForm<T> {
        let kernel = if self.a.nrows() == 0 {
            DMatrix::identity(self.dim(), self.dim())
        } else {
            null_space(&self.a, tol)
        };
        QuadraticForm::symmetrized(&(-(kernel.transpose() * &self.q * &kernel)))
    }

    /// `n − rank A`.
    pub fn codim_image(&self, tol: T) -> usize {
        self.a.nrows() - linalg::rank(&self.a, tol)
    }
}

pub fn hessian_assemble<T: Scalar>(
    fields: &MovingFrameFields<T>,
    basis: &VariationBasis<T>,
) -> Result<DiscretizedHessian<T>> {
    let n = fields.n;
    let k = if basis.controls { fields.k } else { 0 };
    let idx = basis.grid_indices(fields)?;
    let tangent = if basis.include_boundary {
        fields.n0_tangent.clone()
    } else {
        DMatrix::zeros(n, 0)
    };
    let d = tangent.ncols();
    let j = standard_form::<T>(n);
    let blocks: Vec<(DMatrix<T>, DMatrix<T>)> = if k == 0 {
        Vec::new()
    } else {
        idx.windows(2).map(|w| block(fields, w[0], w[1])).collect()
    };
    let dim = d + k * blocks.len();
    let zeta = vstack(&[&DMatrix::zeros(n, d), &tangent]);
    let mut qf = DMatrix::zeros(dim, dim);
    let mut a = DMatrix::zeros(n, dim);
    a.view_mut((0, 0), (n, d)).copy_from(&tangent);
    for (m, (s_m, q_m)) in blocks.iter().enumerate() {
        let c = d + m * k;
        qf.view_mut((0, c), (d, k))
            .copy_from(&(zeta.transpose() * &j * s_m));
        for (l, (s_l, _)) in blocks.iter().enumerate().take(m) {
            qf.view_mut((d + l * k, c), (k, k))
                .copy_from(&(s_l.transpose() * &j * s_m));
        }
        qf.view_mut((c, c), (k, k)).copy_from(q_m);
        a.view_mut((0, c), (n, k)).copy_from(&s_m.rows(n, n));
    }
    Ok(DiscretizedHessian {
        q: (&qf + qf.transpose()) * T::lit(0.5),
        a,
        partition: basis.partition.clone(),
        boundary_dim: d,
        k,
    })
}

/// Negative index and kernel dimension of the Hessian on `ker A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BruteForceIndex {
    pub neg_index: usize,
    pub kernel_dim: usize,
}

/// Eigenvalue count with cut-off `tol × spectral radius`.
pub fn brute_force_index<T: Scalar>(h: &DiscretizedHessian<T>, tol: T) -> BruteForceIndex {
    let form = h.restricted(tol);
    if form.dim() == 0 {
        return BruteForceIndex {
            neg_index: 0,
            kernel_dim: 0,
        };
    }
    let inertia = form.signature_relative(tol);
    BruteForceIndex {
        neg_index: inertia.minus,
        kernel_dim: inertia.zero,
    }
}

/// Intersection cut-off along computed curves: they meet `Π` up to roundoff but may leave it
/// at high order, so near-passes at `tol` are not intersections.
pub fn curve_tol<T: Scalar>(tol: T) -> T {
    tol * tol.sqrt()
}

fn common_intersection<T: Scalar>(planes: &[&LinearSubspace<T>], tol: T) -> Result<usize> {
    let mut acc = planes[0].clone();
    for p in &planes[1..] {
        if acc.dim() == 0 {
            break;
        }
        acc = intersect(&acc, p, tol)?;
    }
    Ok(acc.dim())
}

fn closed_loop<T: Scalar>(
    curve: &JacobiCurve<T>,
    pi: &LinearSubspace<T>,
) -> Vec<LinearSubspace<T>> {
    let mut planes = Vec::with_capacity(curve.planes.len() + 2);
    planes.push(pi.clone());
    planes.extend(curve.planes.iter().cloned());
    planes.push(pi.clone());
    planes
}

/// `Σ ind_Π(𝓛ᵢ, 𝓛ᵢ₊₁) + dim ∩ᵢ 𝓛ᵢ − n` over `Π, 𝓛₀, …, 𝓛_N, Π`.
pub fn morse_index_piecewise<T: Scalar>(
    curve: &JacobiCurve<T>,
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<i64> {
    let n = pi.dim();
    let space = SymplecticSpace::<T>::standard(n);
    let tol = curve_tol(tol);
    let planes = closed_loop(curve, pi);
    let sum = partition_index(&space, &planes, pi, tol)?;
    let refs: Vec<&LinearSubspace<T>> = planes.iter().collect();
    let cap = common_intersection(&refs, tol)?;
    let total = sum + HalfInteger::from_int(cap as i64 - n as i64);
    total.to_int().ok_or_else(|| {
        Error::Degenerate(format!(
            "piecewise index formula gave the half-integer {total}"
        ))
    })
}

/// Curve extended by `Π` one time unit before and after, with lifts against `Π` starting at zero.
pub fn extend_and_lift<T: Scalar>(
    curve: &JacobiCurve<T>,
    pi: &LinearSubspace<T>,
    seed: u64,
    tol: T,
) -> Result<JacobiCurve<T>> {
    let first = *curve.times.first().expect("nonempty curve");
    let last = *curve.times.last().expect("nonempty curve");
    let mut times = Vec::with_capacity(curve.times.len() + 2);
    times.push(first - T::one());
    times.extend(curve.times.iter().copied());
    times.push(last + T::one());
    let mut out = JacobiCurve {
        times,
        planes: closed_loop(curve, pi),
        lifts: None,
        diagnostics: curve.diagnostics.clone(),
    };
    out.attach_lifts(pi, seed, tol)?;
    Ok(out)
}

/// `½(Li(𝓛̃₋₁, Π̃) − Li(𝓛̃_{T+1}, Π̃)) + dim(∩ 𝓛_s ∩ Π) − n` on a curve from [`extend_and_lift`].
pub fn morse_index_leray<T: Scalar>(
    extended: &JacobiCurve<T>,
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<i64> {
    let lifts = extended
        .lifts
        .as_ref()
        .ok_or_else(|| Error::Invalid("curve carries no lifts".into()))?;
    let n = pi.dim();
    let diff = lifts[0] - lifts[lifts.len() - 1];
    if diff % 2 != 0 {
        return Err(Error::Degenerate(format!(
            "odd Leray difference {diff} over a closed curve"
        )));
    }
    let mut refs: Vec<&LinearSubspace<T>> = extended.planes.iter().collect();
    refs.push(pi);
    let cap = common_intersection(&refs, curve_tol(tol))?;
    Ok(diff / 2 + cap as i64 - n as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePoint {
    pub t: f64,
    pub mult: usize,
}

/// Times where the curve meets `Π`.
///
/// Samples on `Π` count with their intersection dimension. Crossings strictly between two samples
/// are placed at the midpoint with multiplicity `ind⁺` of the pair. The start sample is skipped and
/// events at adjacent positions are merged.
pub fn conjugate_points<T: Scalar>(
    curve: &JacobiCurve<T>,
    pi: &LinearSubspace<T>,
    tol: T,
) -> Result<Vec<ConjugatePoint>> {
    let tol = curve_tol(tol);
    let space = SymplecticSpace::<T>::standard(pi.dim());
    let hits: Vec<usize> = curve
        .planes
        .iter()
        .map(|l| intersection_dim(l, pi, tol))
        .collect();
    // Events on the doubled index: 2i for sample i, 2i + 1 for the gap after it.
    let mut raw: Vec<(usize, f64, usize)> = Vec::new();
    for i in 0..curve.planes.len() {
        if i > 0 && hits[i] > 0 {
            raw.push((2 * i, curve.times[i].as_f64(), hits[i]));
        }
        if i + 1 < curve.planes.len() {
            let (a, b) = (&curve.planes[i], &curve.planes[i + 1]);
            let ind = positive_maslov(&space, a, pi, b, tol)?;
            let triple = intersect(a, b, tol)?;
            let d_ab = intersection_dim(&triple, pi, tol) as i64;
            let plus = ind.halves() - hits[i] as i64 - hits[i + 1] as i64 + 2 * d_ab;
            if plus > 0 {
                let mid = (curve.times[i] + curve.times[i + 1]) * T::lit(0.5);
                raw.push((2 * i + 1, mid.as_f64(), (plus / 2) as usize));
            }
        }
    }
    let mut out: Vec<ConjugatePoint> = Vec::new();
    let mut cluster: Vec<(usize, f64, usize)> = Vec::new();
    let flush = |cluster: &mut Vec<(usize, f64, usize)>, out: &mut Vec<ConjugatePoint>| {
        if cluster.is_empty() {
            return;
        }
        let t = (cluster[0].1 + cluster[cluster.len() - 1].1) / 2.0;
        let mult = cluster.iter().map(|c| c.2).max().unwrap_or(0);
        out.push(ConjugatePoint { t, mult });
        cluster.clear();
    };
    for ev in raw {
        if let Some(prev) = cluster.last() {
            if ev.0 > prev.0 + 1 {
                flush(&mut cluster, &mut out);
            }
        }
        cluster.push(ev);
    }
    flush(&mut cluster, &mut out);
    Ok(out)
}

/// `dim(𝓛_t ∩ Π)` plus the caller's `dim(ker Q ∩ ker dF)`.
pub fn kernel_dim_via_curve<T: Scalar>(
    plane_t: &LinearSubspace<T>,
    pi: &LinearSubspace<T>,
    degeneracy_correction: usize,
    tol: T,
) -> usize {
    intersection_dim(plane_t, pi, tol) + degeneracy_correction
}

/// `ind₂ − ind₁ ≥ ⌊ind_Π(𝓛(V₁), 𝓛(V₂))⌋`.
pub fn index_jump_check<T: Scalar>(
    l_v1: &LinearSubspace<T>,
    l_v2: &LinearSubspace<T>,
    pi: &LinearSubspace<T>,
    ind1: i64,
    ind2: i64,
    tol: T,
) -> Result<bool> {
    let space = SymplecticSpace::<T>::standard(pi.dim());
    let bound = positive_maslov(&space, l_v1, pi, l_v2, tol)?;
    Ok(ind2 - ind1 >= bound.halves().div_euclid(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    NotOptimal,
    Inconclusive,
}

pub fn optimality_certificate(neg_index: usize, codim_image: usize) -> Verdict {
    if neg_index >= codim_image && neg_index > 0 {
        Verdict::NotOptimal
    } else {
        Verdict::Inconclusive
    }
}

/// Both sides of `ind⁺Q = ind⁺Q|_V + ind⁺Q|_{V^⊥} + dim(V ∩ V^⊥) − dim(V ∩ ker Q)`,
/// with `V^⊥` the `Q`-orthogonal complement.
pub fn index_decomposition<T: Scalar>(
    q: &QuadraticForm<T>,
    v: &LinearSubspace<T>,
    tol: T,
) -> (i64, i64) {
    let m = q.matrix();
    let plus = |f: &QuadraticForm<T>| f.signature(tol).plus as i64;
    let perp = if v.dim() == 0 {
        LinearSubspace::whole(q.dim())
    } else {
        LinearSubspace::from_orthonormal(linalg::null_space_abs(&(v.basis().transpose() * m), tol))
    };
    let ker = LinearSubspace::from_orthonormal(linalg::null_space_abs(m, tol));
    let meet = |a: &LinearSubspace<T>, b: &LinearSubspace<T>| intersection_dim(a, b, tol) as i64;
    let lhs = plus(q);
    let rhs = plus(&q.restrict(v.basis())) + plus(&q.restrict(perp.basis())) + meet(v, &perp)
        - meet(v, &ker);
    (lhs, rhs)
}

/// Direct and annihilator-based descriptions of `(V₁^N)^⊥ ⊂ V₂^N` and of `ker Q ∩ V₁^N`,
/// where `V₂ = R^m`, `Vᵢ^N = Vᵢ ∩ A⁻¹(N)`.
#[derive(Debug, Clone)]
pub struct ComplementCheck<T: Scalar> {
    pub complement_direct: LinearSubspace<T>,
    pub complement_annihilator: LinearSubspace<T>,
    pub kernel_direct: LinearSubspace<T>,
    pub kernel_annihilator: LinearSubspace<T>,
}

impl<T: Scalar> ComplementCheck<T> {
    pub fn agrees(&self, tol: T) -> bool {
        let same = |a: &LinearSubspace<T>, b: &LinearSubspace<T>| {
            a.dim() == b.dim() && a.contains_subspace(b, tol) && b.contains_subspace(a, tol)
        };
        same(&self.complement_direct, &self.complement_annihilator)
            && same(&self.kernel_direct, &self.kernel_annihilator)
    }
}

pub fn complement_characterization<T: Scalar>(
    q: &DMatrix<T>,
    a: &DMatrix<T>,
    n_basis: &DMatrix<T>,
    v1: &LinearSubspace<T>,
    tol: T,
) -> ComplementCheck<T> {
    let m = q.nrows();
    let rows = a.nrows();
    let n_sub = LinearSubspace::span(n_basis, tol);
    let ann = if n_sub.dim() == 0 {
        DMatrix::identity(rows, rows)
    } else {
        null_space(&n_sub.basis().transpose(), tol)
    };
    let preimage = |basis: &DMatrix<T>| -> DMatrix<T> {
        if basis.ncols() == 0 {
            return basis.clone();
        }
        let c = null_space(&(ann.transpose() * a * basis), tol);
        linalg::range_basis(&(basis * c), tol)
    };
    let v2n = preimage(&DMatrix::identity(m, m));
    let v1n = preimage(v1.basis());
    let span = |b: DMatrix<T>| LinearSubspace::from_orthonormal(linalg::range_basis(&b, tol));

    let complement_direct = if v1n.ncols() == 0 {
        span(v2n.clone())
    } else {
        span(&v2n * null_space(&(v1n.transpose() * q * &v2n), tol))
    };
    let kernel_direct = if v1n.ncols() == 0 {
        LinearSubspace::zero(m)
    } else {
        span(&v1n * null_space(&(v2n.transpose() * q * &v1n), tol))
    };

    // Pairs (v, ξ) with ξ ∈ N^⊥ and ⟨ξ, A w⟩ + Q(v, w) = 0 for w in the test space.
    let solve = |v_space: &DMatrix<T>, tests: &DMatrix<T>| -> LinearSubspace<T> {
        if v_space.ncols() == 0 {
            return LinearSubspace::zero(m);
        }
        if tests.ncols() == 0 {
            return span(v_space.clone());
        }
        let sys = hstack(&[
            &(tests.transpose() * q * v_space),
            &(tests.transpose() * a.transpose() * &ann),
        ]);
        let k = null_space(&sys, tol);
        span(v_space * k.rows(0, v_space.ncols()))
    };
    ComplementCheck {
        complement_direct,
        complement_annihilator: solve(&v2n, v1.basis()),
        kernel_direct,
        kernel_annihilator: solve(&v1n, &DMatrix::identity(m, m)),
    }
}

/// Every index of one problem instance on one partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseReport {
    pub n: usize,
    pub horizon: f64,
    pub intervals: usize,
    pub piecewise: i64,
    pub leray: i64,
    pub brute: usize,
    pub kernel_dim: usize,
    pub kernel_dim_via_curve: usize,
    pub codim_image: usize,
    pub conjugate: Vec<ConjugatePoint>,
    pub certificate: Verdict,
}

impl MorseReport {
    /// All index computations agree exactly.
    pub fn consistent(&self) -> bool {
        self.piecewise == self.leray
            && self.piecewise == self.brute as i64
            && self.kernel_dim == self.kernel_dim_via_curve
    }
}

pub fn verify<T: Scalar>(
    fields: &MovingFrameFields<T>,
    basis: &VariationBasis<T>,
    seed: u64,
    tol: T,
) -> Result<MorseReport> {
    let n = fields.n;
    let pi = crate::symplectic::fiber_plane::<T>(n);
    let curve = jacobi_curve(fields, basis, tol)?;
    let hess = hessian_assemble(fields, basis)?;
    let brute = brute_force_index(&hess, tol);
    let piecewise = morse_index_piecewise(&curve, &pi, tol)?;
    let extended = extend_and_lift(&curve, &pi, seed, tol)?;
    let leray = morse_index_leray(&extended, &pi, tol)?;
    let codim_image = hess.codim_image(tol);
    Ok(MorseReport {
        n,
        horizon: curve.times.last().expect("nonempty").as_f64(),
        intervals: curve.times.len() - 1,
        piecewise,
        leray,
        brute: brute.neg_index,
        kernel_dim: brute.kernel_dim,
        kernel_dim_via_curve: kernel_dim_via_curve(curve.end(), &pi, 0, tol),
        codim_image,
        conjugate: conjugate_points(&curve, &pi, tol)?,
        certificate: optimality_certificate(brute.neg_index, codim_image),
    })
}
