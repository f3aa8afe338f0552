//! L-derivatives over piecewise-constant control variations and the Jacobi curve.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::indices::{lift_curve, LiftedPlane};
use crate::linalg::{
    complement, hstack, null_space, pseudoinverse, range_basis, select_columns, svd,
};
use crate::linearization::MovingFrameFields;
use crate::scalar::Scalar;
use crate::symplectic::{fiber_plane, standard_form, LinearSubspace, SymplecticSpace};

/// Piecewise-constant variations with jumps at `partition`, plus optional boundary directions.
#[derive(Debug, Clone)]
pub struct VariationBasis<T: Scalar> {
    pub partition: Vec<T>,
    pub include_boundary: bool,
    /// When false the basis carries no control variations at all.
    pub controls: bool,
}

impl<T: Scalar> VariationBasis<T> {
    pub fn new(partition: Vec<T>, include_boundary: bool) -> Result<Self> {
        if partition.len() < 2 {
            return Err(Error::Invalid("partition needs at least two points".into()));
        }
        if partition.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(
                "partition must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            partition,
            include_boundary,
            controls: true,
        })
    }

    /// One variation interval per grid interval.
    pub fn full(fields: &MovingFrameFields<T>) -> Self {
        Self {
            partition: fields.grid.clone(),
            include_boundary: true,
            controls: true,
        }
    }

    pub fn without_controls(mut self) -> Self {
        self.controls = false;
        self
    }

    /// Grid indices of the partition points.
    pub fn grid_indices(&self, fields: &MovingFrameFields<T>) -> Result<Vec<usize>> {
        let idx: Vec<usize> = self
            .partition
            .iter()
            .map(|t| fields.grid_index(*t))
            .collect::<Result<_>>()?;
        if idx[0] != 0 {
            return Err(Error::Invalid(
                "partition must start at the first grid point".into(),
            ));
        }
        Ok(idx)
    }

    pub fn start_plane(&self, fields: &MovingFrameFields<T>) -> LinearSubspace<T> {
        if self.include_boundary {
            fields.boundary_plane.clone()
        } else {
            fiber_plane(fields.n)
        }
    }
}

/// `(∫X, Q)` over grid intervals `from..to`, where `Q(v, w) = vᵀ Q w` is
/// `∫ [σ(∫_{t_from}^τ X v, X(τ) w) + b(τ)(v, w)] dτ`.
pub fn block<T: Scalar>(
    fields: &MovingFrameFields<T>,
    from: usize,
    to: usize,
) -> (DMatrix<T>, DMatrix<T>) {
    let j = standard_form::<T>(fields.n);
    let mut s = DMatrix::zeros(2 * fields.n, fields.k);
    let mut q = DMatrix::zeros(fields.k, fields.k);
    for iv in &fields.intervals[from..to] {
        q += &iv.q_local + s.transpose() * &j * &iv.x_total;
        s += &iv.x_total;
    }
    (s, q)
}

/// Dimension bookkeeping of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub dim_e: usize,
    pub dim_l_sub: usize,
    pub residual: f64,
}

/// One incremental step from `L` across grid intervals `from..to`.
pub fn lderiv_step<T: Scalar>(
    l: &LinearSubspace<T>,
    fields: &MovingFrameFields<T>,
    from: usize,
    to: usize,
    tol: T,
) -> Result<(LinearSubspace<T>, StepDiagnostics)> {
    let n = fields.n;
    let k = fields.k;
    let space = fields.space();
    if l.ambient() != 2 * n || l.dim() != n {
        return Err(Error::Dimension(
            "step needs a Lagrangian plane of the phase space".into(),
        ));
    }
    if from >= to || to > fields.intervals.len() {
        return Err(Error::Invalid(format!("bad step range {from}..{to}")));
    }
    let eps = fields.grid[to] - fields.grid[from];
    let (s, qf) = block(fields, from, to);
    let y = &s / eps;
    let lb = l.basis();
    let m = space.pairing(lb, &y);

    let (u, sv, v) = svd(&m);
    let cut = tol * sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let live: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > cut).collect();
    let e_perp = select_columns(&v, &live);
    let e = complement(&e_perp, k);
    let l_sub_coeffs = complement(&select_columns(&u, &live), n);
    let dim_l = e_perp.ncols();

    let mut cols: Vec<DMatrix<T>> = vec![lb * &l_sub_coeffs];
    let mut residual = T::zero();
    if dim_l > 0 {
        let qt = qf.transpose() / eps;
        // Components along E solve the E-rows of the equation.
        let z = if e.ncols() > 0 {
            let q_ee = e.transpose() * &qt * &e;
            let gamma = -(pseudoinverse(&q_ee, tol) * (e.transpose() * &qt * &e_perp));
            let z = &e_perp + &e * &gamma;
            let r = e.transpose() * &qt * &z;
            residual = residual.max(r.amax());
            z
        } else {
            e_perp.clone()
        };
        let a_r = e_perp.transpose() * m.transpose();
        let q_r = e_perp.transpose() * &qt * &z;
        let h = -(pseudoinverse(&a_r, tol) * &q_r);
        residual = residual.max((&a_r * &h + &q_r).amax());
        cols.push(lb * h + &s * z);
    }
    let scale = qf.amax().max(m.amax()).max(T::one());
    if residual > tol.sqrt() * scale {
        return Err(Error::Degenerate(format!(
            "step over [{}, {}] is inconsistent (residual {}, dim E = {}, dim L_sub = {})",
            fields.grid[from].as_f64(),
            fields.grid[to].as_f64(),
            residual.as_f64(),
            e.ncols(),
            l_sub_coeffs.ncols()
        )));
    }
    let refs: Vec<&DMatrix<T>> = cols.iter().collect();
    let out = LinearSubspace::span(&hstack(&refs), tol);
    let diag = StepDiagnostics {
        dim_e: e.ncols(),
        dim_l_sub: l_sub_coeffs.ncols(),
        residual: residual.as_f64(),
    };
    if out.dim() != n {
        return Err(Error::Degenerate(format!(
            "step over [{}, {}] produced a {}-plane (dim E = {}, dim L_sub = {})",
            fields.grid[from].as_f64(),
            fields.grid[to].as_f64(),
            out.dim(),
            diag.dim_e,
            diag.dim_l_sub
        )));
    }
    check_lagrangian(&space, &out, "step output")?;
    Ok((out, diag))
}

fn check_lagrangian<T: Scalar>(
    space: &SymplecticSpace<T>,
    l: &LinearSubspace<T>,
    what: &str,
) -> Result<()> {
    let defect = space.isotropy_defect(l);
    if defect > T::lit(1e-6).max(T::default_tol() * T::lit(100.0)) {
        return Err(Error::Degenerate(format!(
            "{what} is not Lagrangian (defect {})",
            defect.as_f64()
        )));
    }
    Ok(())
}

/// L-derivative at partition time `t` from one linear solve over all variations up to `t`.
pub fn galerkin_lderivative<T: Scalar>(
    fields: &MovingFrameFields<T>,
    basis: &VariationBasis<T>,
    t: T,
    tol: T,
) -> Result<LinearSubspace<T>> {
    let n = fields.n;
    let k = fields.k;
    let idx = basis.grid_indices(fields)?;
    let target = fields.grid_index(t)?;
    let pos = idx
        .iter()
        .position(|i| *i == target)
        .ok_or_else(|| Error::Invalid(format!("time {} is not a partition point", t.as_f64())))?;
    let l0 = basis.start_plane(fields);
    if pos == 0 || !basis.controls || k == 0 {
        return Ok(l0);
    }
    let j = standard_form::<T>(n);
    let blocks: Vec<(DMatrix<T>, DMatrix<T>)> = idx[..=pos]
        .windows(2)
        .map(|w| block(fields, w[0], w[1]))
        .collect();
    let m = blocks.len();
    let mut sys = DMatrix::zeros(k * m, n + k * m);
    for (row, (s_row, q_row)) in blocks.iter().enumerate() {
        let r0 = row * k;
        sys.view_mut((r0, 0), (k, n))
            .copy_from(&(s_row.transpose() * j.transpose() * l0.basis()));
        for (col, (s_col, _)) in blocks.iter().enumerate().take(row) {
            sys.view_mut((r0, n + col * k), (k, k))
                .copy_from(&(s_row.transpose() * j.transpose() * s_col));
        }
        sys.view_mut((r0, n + row * k), (k, k))
            .copy_from(&q_row.transpose());
    }
    let kernel = null_space(&sys, tol);
    let mut to_eta = DMatrix::zeros(2 * n, n + k * m);
    to_eta.view_mut((0, 0), (2 * n, n)).copy_from(l0.basis());
    for (col, (s_col, _)) in blocks.iter().enumerate() {
        to_eta
            .view_mut((0, n + col * k), (2 * n, k))
            .copy_from(s_col);
    }
    let eta = to_eta * kernel;
    let out = LinearSubspace::from_orthonormal(range_basis(&eta, tol));
    if out.dim() != n {
        return Err(Error::Degenerate(format!(
            "Galerkin solve at t = {} gave a {}-plane (solution space dimension {})",
            t.as_f64(),
            out.dim(),
            eta.ncols()
        )));
    }
    check_lagrangian(&fields.space(), &out, "Galerkin plane")?;
    Ok(out)
}

/// Jacobi curve sampled at the partition points.
#[derive(Debug, Clone)]
pub struct JacobiCurve<T: Scalar> {
    pub times: Vec<T>,
    pub planes: Vec<LinearSubspace<T>>,
    pub lifts: Option<Vec<i64>>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl<T: Scalar> JacobiCurve<T> {
    pub fn end(&self) -> &LinearSubspace<T> {
        self.planes.last().expect("curve has a start plane")
    }

    /// Attaches lifts against `base`, starting from the lifted base plane.
    pub fn attach_lifts(&mut self, base: &LinearSubspace<T>, seed: u64, tol: T) -> Result<()> {
        let n = self.planes[0].dim();
        let space = SymplecticSpace::standard(n);
        let lifted = lift_curve(
            &space,
            LiftedPlane::base_point(base),
            &self.planes,
            seed,
            tol,
        )?;
        self.lifts = Some(lifted[1..].iter().map(|l| l.lift).collect());
        Ok(())
    }
}

/// Iterates [`lderiv_step`] across the partition, starting from the boundary plane.
pub fn jacobi_curve<T: Scalar>(
    fields: &MovingFrameFields<T>,
    basis: &VariationBasis<T>,
    tol: T,
) -> Result<JacobiCurve<T>> {
    let idx = basis.grid_indices(fields)?;
    let mut planes = vec![basis.start_plane(fields)];
    let mut diagnostics = Vec::with_capacity(idx.len() - 1);
    for (i, w) in idx.windows(2).enumerate() {
        let cur = planes.last().expect("nonempty");
        if !basis.controls || fields.k == 0 {
            planes.push(cur.clone());
            continue;
        }
        let (next, diag) = lderiv_step(cur, fields, w[0], w[1], tol).map_err(|e| match e {
            Error::Degenerate(msg) => Error::Degenerate(format!("interval {i}: {msg}")),
            other => other,
        })?;
        planes.push(next);
        diagnostics.push(diag);
    }
    Ok(JacobiCurve {
        times: basis.partition.clone(),
        planes,
        lifts: None,
        diagnostics,
    })
}
