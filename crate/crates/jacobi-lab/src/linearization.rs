//! Linearized extremal data and its pull-back by the linearized Hamiltonian flow.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hstack, vstack};
use crate::quadrature::{gauss_legendre_on, integrate_flow};
use crate::sampling::{random_matrix, random_symmetric};
use crate::scalar::Scalar;
use crate::symplectic::{conormal_plane, standard_form, LinearSubspace, SymplecticSpace};

pub type MatrixField<T> = Arc<dyn Fn(T) -> DMatrix<T> + Send + Sync>;

fn constant<T: Scalar>(m: DMatrix<T>) -> MatrixField<T> {
    Arc::new(move |_| m.clone())
}

/// Linearization of a control problem along an extremal, in `(p, x)` coordinates.
#[derive(Clone)]
pub struct ProblemLinearization<T: Scalar> {
    pub name: String,
    pub n: usize,
    pub k: usize,
    /// Linear Hamiltonian system matrix, `2n × 2n`.
    pub c: MatrixField<T>,
    /// Control injection directions, `2n × k`.
    pub d: MatrixField<T>,
    /// Second derivative of the Hamiltonian in the controls, `k × k`.
    pub b: MatrixField<T>,
    /// Projector onto two-sided control variations.
    pub p: Option<MatrixField<T>>,
    /// Hamiltonian vector field along the extremal, `2n × 1`; zero when absent.
    pub flow: Option<MatrixField<T>>,
    /// Basis of the tangent space of the initial manifold, `n × d`.
    pub n0_tangent: DMatrix<T>,
    pub horizon: T,
    /// Times where the data may jump; the integrator stops there.
    pub breakpoints: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for ProblemLinearization<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemLinearization")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("k", &self.k)
            .field("horizon", &self.horizon.as_f64())
            .field("n0_dim", &self.n0_tangent.ncols())
            .finish()
    }
}

impl<T: Scalar> ProblemLinearization<T> {
    /// Linear–quadratic problem `ẋ = Ax + Bu` with `C = [[-Aᵀ, W], [0, A]]`, `D = [0; B]`, `b = -R`.
    pub fn lq(
        a: DMatrix<T>,
        b: DMatrix<T>,
        w: DMatrix<T>,
        r: DMatrix<T>,
        horizon: T,
        n0_tangent: DMatrix<T>,
    ) -> Result<Self> {
        let n = a.nrows();
        let k = b.ncols();
        if a.shape() != (n, n) || b.nrows() != n || w.shape() != (n, n) || r.shape() != (k, k) {
            return Err(Error::Dimension(format!(
                "lq data shapes A {:?}, B {:?}, W {:?}, R {:?}",
                a.shape(),
                b.shape(),
                w.shape(),
                r.shape()
            )));
        }
        if n == 0 {
            return Err(Error::Invalid("state dimension must be positive".into()));
        }
        if n0_tangent.nrows() != n && n0_tangent.ncols() != 0 {
            return Err(Error::Dimension("N0 basis must have n rows".into()));
        }
        let scale = frobenius(&w).max(T::one());
        if frobenius(&(&w - w.transpose())) > T::lit(1e-10) * scale {
            return Err(Error::Invalid("W must be symmetric".into()));
        }
        let rs = (&r + r.transpose()) * T::lit(0.5);
        if frobenius(&(&r - &rs)) > T::lit(1e-10) * frobenius(&r).max(T::one()) {
            return Err(Error::Invalid("R must be symmetric".into()));
        }
        if k > 0 && rs.clone().cholesky().is_none() {
            return Err(Error::Invalid("R must be positive definite".into()));
        }
        if horizon.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        let c = vstack(&[
            &hstack(&[&(-a.transpose()), &w]),
            &hstack(&[&DMatrix::zeros(n, n), &a]),
        ]);
        let d = vstack(&[&DMatrix::zeros(n, k), &b]);
        let n0 = if n0_tangent.ncols() == 0 {
            DMatrix::zeros(n, 0)
        } else {
            n0_tangent
        };
        Ok(Self {
            name: "lq".into(),
            n,
            k,
            c: constant(c),
            d: constant(d),
            b: constant(-rs),
            p: None,
            flow: None,
            n0_tangent: n0,
            horizon,
            breakpoints: Vec::new(),
        })
    }

    /// Piecewise-constant data: value `i` holds on `[times[i], times[i+1])`, the last one up to the horizon.
    pub fn piecewise(
        n: usize,
        k: usize,
        c: PiecewiseTable<T>,
        d: PiecewiseTable<T>,
        b: PiecewiseTable<T>,
        horizon: T,
        n0_tangent: DMatrix<T>,
    ) -> Result<Self> {
        c.check(2 * n, 2 * n, "C")?;
        d.check(2 * n, k, "D")?;
        b.check(k, k, "b")?;
        let mut breakpoints: Vec<T> = c
            .times
            .iter()
            .chain(&d.times)
            .chain(&b.times)
            .copied()
            .filter(|t| *t > T::zero() && *t < horizon)
            .collect();
        breakpoints.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        breakpoints.dedup();
        let prob = Self {
            name: "table".into(),
            n,
            k,
            c: c.into_field(),
            d: d.into_field(),
            b: b.into_field(),
            p: None,
            flow: None,
            n0_tangent: if n0_tangent.ncols() == 0 {
                DMatrix::zeros(n, 0)
            } else {
                n0_tangent
            },
            horizon,
            breakpoints,
        };
        prob.validate(T::lit(1e-8))?;
        Ok(prob)
    }

    pub fn with_horizon(mut self, horizon: T) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_n0(mut self, n0_tangent: DMatrix<T>) -> Self {
        self.n0_tangent = if n0_tangent.ncols() == 0 {
            DMatrix::zeros(self.n, 0)
        } else {
            n0_tangent
        };
        self
    }

    pub fn with_projector(mut self, p: MatrixField<T>) -> Self {
        self.p = Some(p);
        self
    }

    /// Checks shapes and structural identities at the breakpoints and a few interior times.
    pub fn validate(&self, tol: T) -> Result<()> {
        let (n, k) = (self.n, self.k);
        if self.n0_tangent.nrows() != n {
            return Err(Error::Dimension("N0 basis must have n rows".into()));
        }
        let j = standard_form::<T>(n);
        let mut probe: Vec<T> = (0..=8)
            .map(|i| self.horizon * T::lit(i as f64 / 8.0))
            .collect();
        probe.extend(self.breakpoints.iter().copied());
        for t in probe {
            let c = (self.c)(t);
            let d = (self.d)(t);
            let b = (self.b)(t);
            if c.shape() != (2 * n, 2 * n) || d.shape() != (2 * n, k) || b.shape() != (k, k) {
                return Err(Error::Dimension(format!(
                    "data shapes at t = {}",
                    t.as_f64()
                )));
            }
            let jc = &j * &c;
            let scale = frobenius(&c).max(T::one());
            if frobenius(&(&jc - jc.transpose())) > tol * scale {
                return Err(Error::Invalid(format!(
                    "C is not infinitesimally symplectic at t = {}",
                    t.as_f64()
                )));
            }
            if frobenius(&(&b - b.transpose())) > tol * frobenius(&b).max(T::one()) {
                return Err(Error::Invalid(format!(
                    "b is not symmetric at t = {}",
                    t.as_f64()
                )));
            }
            if let Some(p) = &self.p {
                let pm = p(t);
                if pm.shape() != (k, k)
                    || frobenius(&(&pm * &pm - &pm)) > tol.max(T::lit(1e-8))
                    || frobenius(&(&pm - pm.transpose())) > tol.max(T::lit(1e-8))
                {
                    return Err(Error::Invalid(format!(
                        "P is not an orthogonal projector at t = {}",
                        t.as_f64()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Boundary plane `T^⊥N₀ × TN₀`.
    pub fn boundary_plane(&self, tol: T) -> Result<LinearSubspace<T>> {
        conormal_plane(self.n, &self.n0_tangent, tol)
    }
}

/// Piecewise-constant matrix data.
#[derive(Debug, Clone)]
pub struct PiecewiseTable<T: Scalar> {
    pub times: Vec<T>,
    pub values: Vec<DMatrix<T>>,
}

impl<T: Scalar> PiecewiseTable<T> {
    fn check(&self, r: usize, c: usize, what: &str) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::Invalid(format!(
                "{what} table needs one value per time"
            )));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(format!("{what} table times must increase")));
        }
        if self.values.iter().any(|v| v.shape() != (r, c)) {
            return Err(Error::Dimension(format!(
                "{what} table values must be {r}x{c}"
            )));
        }
        Ok(())
    }

    fn into_field(self) -> MatrixField<T> {
        Arc::new(move |t| {
            let i = self.times.partition_point(|s| *s <= t).saturating_sub(1);
            self.values[i].clone()
        })
    }
}

/// Adds the time variable as an extra state and `u₀` (with `ṫ = 1 + u₀`) as an extra control.
pub fn augment_time<T: Scalar>(prob: &ProblemLinearization<T>) -> ProblemLinearization<T> {
    let (n, k) = (prob.n, prob.k);
    let (c0, d0, b0, f0) = (
        prob.c.clone(),
        prob.d.clone(),
        prob.b.clone(),
        prob.flow.clone(),
    );
    let p0 = prob.p.clone();
    // (p, p_t, x, t) ordering
    let embed = move |m: &DMatrix<T>, cols: usize| {
        let mut out = DMatrix::zeros(2 * n + 2, cols);
        out.view_mut((0, 0), (n, cols)).copy_from(&m.rows(0, n));
        out.view_mut((n + 1, 0), (n, cols)).copy_from(&m.rows(n, n));
        out
    };
    let c: MatrixField<T> = Arc::new(move |t| {
        let m = c0(t);
        let mut out = DMatrix::zeros(2 * n + 2, 2 * n + 2);
        let idx = |i: usize| if i < n { i } else { i + 1 };
        for i in 0..2 * n {
            for j in 0..2 * n {
                out[(idx(i), idx(j))] = m[(i, j)];
            }
        }
        out
    });
    let d: MatrixField<T> = Arc::new(move |t| {
        let mut out = DMatrix::zeros(2 * n + 2, k + 1);
        out.view_mut((0, 0), (2 * n + 2, k))
            .copy_from(&embed(&d0(t), k));
        if let Some(f) = &f0 {
            out.view_mut((0, k), (2 * n + 2, 1))
                .copy_from(&embed(&f(t), 1));
        }
        out[(2 * n + 1, k)] = T::one();
        out
    });
    let b: MatrixField<T> = Arc::new(move |t| {
        let mut out = DMatrix::zeros(k + 1, k + 1);
        out.view_mut((0, 0), (k, k)).copy_from(&b0(t));
        out
    });
    let p = p0.map(|p0| -> MatrixField<T> {
        Arc::new(move |t| {
            let mut out = DMatrix::zeros(k + 1, k + 1);
            out.view_mut((0, 0), (k, k)).copy_from(&p0(t));
            out[(k, k)] = T::one();
            out
        })
    });
    let mut n0 = DMatrix::zeros(n + 1, prob.n0_tangent.ncols());
    n0.view_mut((0, 0), (n, prob.n0_tangent.ncols()))
        .copy_from(&prob.n0_tangent);
    ProblemLinearization {
        name: format!("{}+time", prob.name),
        n: n + 1,
        k: k + 1,
        c,
        d,
        b,
        p,
        // The extremal does not move in the new coordinates.
        flow: None,
        n0_tangent: n0,
        horizon: prob.horizon,
        breakpoints: prob.breakpoints.clone(),
    }
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "free_particle",
    "harmonic_oscillator",
    "isotropic_oscillator_2d",
    "lq",
];

/// Built-in problems along the trivial extremal. `lq` takes its data from [`LqParams`].
pub fn builtin<T: Scalar>(
    name: &str,
    horizon: T,
    lq: Option<LqParams<T>>,
) -> Result<ProblemLinearization<T>> {
    let one = |n: usize| DMatrix::<T>::identity(n, n);
    let mut prob = match name {
        "free_particle" => ProblemLinearization::lq(
            DMatrix::zeros(1, 1),
            one(1),
            DMatrix::zeros(1, 1),
            one(1),
            horizon,
            DMatrix::zeros(1, 0),
        )?,
        "harmonic_oscillator" => ProblemLinearization::lq(
            DMatrix::zeros(1, 1),
            one(1),
            -one(1),
            one(1),
            horizon,
            DMatrix::zeros(1, 0),
        )?,
        "isotropic_oscillator_2d" => ProblemLinearization::lq(
            DMatrix::zeros(2, 2),
            one(2),
            -one(2),
            one(2),
            horizon,
            DMatrix::zeros(2, 0),
        )?,
        "lq" => {
            let p = lq.ok_or_else(|| Error::Invalid("lq builtin needs A, B, W, R".into()))?;
            ProblemLinearization::lq(p.a, p.b, p.w, p.r, horizon, p.n0_tangent)?
        }
        other => return Err(Error::Invalid(format!("unknown builtin problem '{other}'"))),
    };
    prob.name = name.to_string();
    Ok(prob)
}

#[derive(Debug, Clone)]
pub struct LqParams<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub w: DMatrix<T>,
    pub r: DMatrix<T>,
    pub n0_tangent: DMatrix<T>,
}

/// Ranges for seeded random LQ instances.
#[derive(Debug, Clone)]
pub struct RandomLq {
    pub max_n: usize,
    pub max_k: usize,
    pub a_scale: f64,
    pub w_scale: f64,
    pub horizon: (f64, f64),
}

impl Default for RandomLq {
    fn default() -> Self {
        Self {
            max_n: 3,
            max_k: 2,
            a_scale: 0.3,
            w_scale: 0.6,
            horizon: (1.0, 10.0),
        }
    }
}

impl RandomLq {
    pub fn sample<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<ProblemLinearization<T>> {
        let n = rng.random_range(1..=self.max_n);
        let k = rng.random_range(1..=self.max_k);
        let a = random_matrix::<T, R>(n, n, rng) * T::lit(self.a_scale);
        let b = random_matrix::<T, R>(n, k, rng);
        let w = random_symmetric::<T, R>(n, rng) * T::lit(self.w_scale);
        let m = random_matrix::<T, R>(k, k, rng);
        let r = &m * m.transpose() * T::lit(0.5) + DMatrix::identity(k, k) * T::lit(0.5);
        let d = rng.random_range(0..=n);
        let n0 = random_matrix::<T, R>(n, d, rng);
        let horizon = T::lit(rng.random_range(self.horizon.0..=self.horizon.1));
        let mut prob = ProblemLinearization::lq(a, b, w, r, horizon, n0)?;
        prob.name = format!("random_lq(n={n},k={k},d={d})");
        Ok(prob)
    }
}

/// Pulled-back fields on one grid interval, sampled at Gauss–Legendre nodes.
#[derive(Debug, Clone)]
pub struct IntervalFields<T: Scalar> {
    pub start: T,
    pub end: T,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub x: Vec<DMatrix<T>>,
    pub b: Vec<DMatrix<T>>,
    /// `∫_start^{node_j} X`.
    pub x_partial: Vec<DMatrix<T>>,
    /// `∫_start^end X`.
    pub x_total: DMatrix<T>,
    /// Matrix of `(v, w) ↦ ∫ [σ(∫_start^τ X v, X(τ) w) + b(τ)(v, w)] dτ`.
    pub q_local: DMatrix<T>,
}

/// `X(t)`, `b(t)` and the boundary plane on a time grid.
#[derive(Debug, Clone)]
pub struct MovingFrameFields<T: Scalar> {
    pub n: usize,
    pub k: usize,
    pub grid: Vec<T>,
    pub x_grid: Vec<DMatrix<T>>,
    pub b_grid: Vec<DMatrix<T>>,
    /// Flow `G(t)` at grid points.
    pub g_grid: Vec<DMatrix<T>>,
    pub intervals: Vec<IntervalFields<T>>,
    pub boundary_plane: LinearSubspace<T>,
    pub n0_tangent: DMatrix<T>,
}

/// Uniform grid with `intervals` steps on `[0, horizon]`.
pub fn uniform_grid<T: Scalar>(horizon: T, intervals: usize) -> Vec<T> {
    (0..=intervals)
        .map(|i| horizon * T::from_usize_lossy(i) / T::from_usize_lossy(intervals))
        .collect()
}

/// Pulls `D` and `b` back to time zero along `Ġ = C G` and samples them for quadrature.
pub fn moving_frame<T: Scalar>(
    prob: &ProblemLinearization<T>,
    grid: &[T],
    order: usize,
) -> Result<MovingFrameFields<T>> {
    let (n, k) = (prob.n, prob.k);
    if grid.len() < 2 {
        return Err(Error::Invalid("grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("grid must be strictly increasing".into()));
    }
    let slack = T::lit(1e-12) * prob.horizon.max(T::one());
    if grid[0] < T::zero() || *grid.last().expect("nonempty") > prob.horizon + slack {
        return Err(Error::Invalid("grid must lie in [0, T]".into()));
    }
    if !(1..=10).contains(&order) {
        return Err(Error::Invalid("quadrature order must be in 1..=10".into()));
    }
    let tol = T::default_tol();
    prob.validate(tol.max(T::lit(1e-8)))?;

    // Every time at which X is needed.
    struct Plan<T> {
        nodes: Vec<T>,
        weights: Vec<T>,
        sub: Vec<(Vec<T>, Vec<T>)>,
    }
    let mut plans = Vec::with_capacity(grid.len() - 1);
    let mut times: Vec<T> = grid.to_vec();
    times.extend(prob.breakpoints.iter().copied().filter(|t| *t > grid[0]));
    for w in grid.windows(2) {
        let (nodes, weights) = gauss_legendre_on(order, w[0], w[1]);
        let sub: Vec<(Vec<T>, Vec<T>)> = nodes
            .iter()
            .map(|tau| gauss_legendre_on(order, w[0], *tau))
            .collect();
        times.extend(nodes.iter().copied());
        for (s, _) in &sub {
            times.extend(s.iter().copied());
        }
        plans.push(Plan {
            nodes,
            weights,
            sub,
        });
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    let c = prob.c.clone();
    let flows = integrate_flow(&move |t| c(t), 2 * n, T::zero(), &times, T::ode_tol())?;

    let j = standard_form::<T>(n);
    let lookup = |t: T| -> usize {
        times
            .binary_search_by(|s| s.partial_cmp(&t).expect("finite"))
            .expect("time was scheduled")
    };
    let x_at = |t: T| -> Result<DMatrix<T>> {
        let g = &flows[lookup(t)];
        let defect = frobenius(&(g.transpose() * &j * g - &j));
        let gn = frobenius(g);
        if defect > T::lit(1e-7).max(T::ode_tol() * T::lit(100.0)) * (T::one() + gn * gn) {
            return Err(Error::Integration(format!(
                "flow lost symplecticity at t = {} (defect {})",
                t.as_f64(),
                defect.as_f64()
            )));
        }
        // G⁻¹ = -J Gᵀ J for symplectic G.
        let ginv = -(&j * g.transpose() * &j);
        let mut x = ginv * (prob.d)(t);
        if let Some(p) = &prob.p {
            x *= p(t);
        }
        Ok(x)
    };
    let b_at = |t: T| -> DMatrix<T> {
        let b = (prob.b)(t);
        match &prob.p {
            Some(p) => {
                let pm = p(t);
                pm.transpose() * b * pm
            }
            None => b,
        }
    };

    let mut intervals = Vec::with_capacity(plans.len());
    for (i, plan) in plans.into_iter().enumerate() {
        let x: Vec<DMatrix<T>> = plan.nodes.iter().map(|t| x_at(*t)).collect::<Result<_>>()?;
        let b: Vec<DMatrix<T>> = plan.nodes.iter().map(|t| b_at(*t)).collect();
        let mut x_partial = Vec::with_capacity(plan.nodes.len());
        for (s_nodes, s_weights) in &plan.sub {
            let mut acc = DMatrix::zeros(2 * n, k);
            for (s, w) in s_nodes.iter().zip(s_weights) {
                acc += x_at(*s)? * *w;
            }
            x_partial.push(acc);
        }
        let mut x_total = DMatrix::zeros(2 * n, k);
        let mut q_local = DMatrix::zeros(k, k);
        for q in 0..plan.nodes.len() {
            x_total += &x[q] * plan.weights[q];
            q_local += (x_partial[q].transpose() * &j * &x[q] + &b[q]) * plan.weights[q];
        }
        intervals.push(IntervalFields {
            start: grid[i],
            end: grid[i + 1],
            nodes: plan.nodes,
            weights: plan.weights,
            x,
            b,
            x_partial,
            x_total,
            q_local,
        });
    }
    let x_grid = grid.iter().map(|t| x_at(*t)).collect::<Result<Vec<_>>>()?;
    let b_grid = grid.iter().map(|t| b_at(*t)).collect();
    let g_grid = grid.iter().map(|t| flows[lookup(*t)].clone()).collect();
    let boundary_plane = prob.boundary_plane(tol)?;
    Ok(MovingFrameFields {
        n,
        k,
        grid: grid.to_vec(),
        x_grid,
        b_grid,
        g_grid,
        intervals,
        boundary_plane,
        n0_tangent: prob.n0_tangent.clone(),
    })
}

impl<T: Scalar> MovingFrameFields<T> {
    pub fn space(&self) -> SymplecticSpace<T> {
        SymplecticSpace::standard(self.n)
    }

    /// Index of the grid point equal to `t` up to rounding.
    pub fn grid_index(&self, t: T) -> Result<usize> {
        let scale = self
            .grid
            .last()
            .copied()
            .unwrap_or(T::one())
            .abs()
            .max(T::one());
        self.grid
            .iter()
            .position(|g| (*g - t).abs() <= T::lit(1e-9) * scale)
            .ok_or_else(|| Error::Invalid(format!("time {} is not a grid point", t.as_f64())))
    }

    /// Fields restricted to grid points `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to >= self.grid.len() {
            return Err(Error::Invalid(format!("bad grid slice {from}..={to}")));
        }
        Ok(Self {
            n: self.n,
            k: self.k,
            grid: self.grid[from..=to].to_vec(),
            x_grid: self.x_grid[from..=to].to_vec(),
            b_grid: self.b_grid[from..=to].to_vec(),
            g_grid: self.g_grid[from..=to].to_vec(),
            intervals: self.intervals[from..to].to_vec(),
            boundary_plane: self.boundary_plane.clone(),
            n0_tangent: self.n0_tangent.clone(),
        })
    }

    /// Same fields for the problem on `M × M` with a frozen first copy, coordinates `(p', p, x', x)`,
    /// starting from the conormal of the diagonal.
    pub fn doubled(&self) -> Self {
        let n = self.n;
        let embed = |m: &DMatrix<T>| {
            let cols = m.ncols();
            let mut out = DMatrix::zeros(4 * n, cols);
            out.view_mut((n, 0), (n, cols)).copy_from(&m.rows(0, n));
            out.view_mut((3 * n, 0), (n, cols)).copy_from(&m.rows(n, n));
            out
        };
        let intervals = self
            .intervals
            .iter()
            .map(|iv| IntervalFields {
                start: iv.start,
                end: iv.end,
                nodes: iv.nodes.clone(),
                weights: iv.weights.clone(),
                x: iv.x.iter().map(embed).collect(),
                b: iv.b.clone(),
                x_partial: iv.x_partial.iter().map(embed).collect(),
                x_total: embed(&iv.x_total),
                q_local: iv.q_local.clone(),
            })
            .collect();
        let mut diag = DMatrix::zeros(4 * n, 2 * n);
        let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        for i in 0..n {
            diag[(i, i)] = -h;
            diag[(n + i, i)] = h;
            diag[(2 * n + i, n + i)] = h;
            diag[(3 * n + i, n + i)] = h;
        }
        let g_grid = self
            .g_grid
            .iter()
            .map(|_| DMatrix::identity(4 * n, 4 * n))
            .collect();
        Self {
            n: 2 * n,
            k: self.k,
            grid: self.grid.clone(),
            x_grid: self.x_grid.iter().map(embed).collect(),
            b_grid: self.b_grid.clone(),
            g_grid,
            intervals,
            boundary_plane: LinearSubspace::from_orthonormal(diag),
            n0_tangent: DMatrix::identity(n, n),
        }
    }

    /// Flow matrix at a grid point.
    pub fn flow_at(&self, i: usize) -> &DMatrix<T> {
        &self.g_grid[i]
    }

    /// Evaluates `X` at a grid point.
    pub fn x_at_grid(&self, i: usize) -> &DMatrix<T> {
        &self.x_grid[i]
    }
}

/// `exp(C t)` applied to a vector, for constant `C`; used by tests as a closed-form oracle.
pub fn constant_flow_apply<T: Scalar>(c: &DMatrix<T>, t: T, v: &DVector<T>) -> DVector<T> {
    let mut term = v.clone();
    let mut acc = v.clone();
    for i in 1..60 {
        term = c * term * (t / T::from_usize_lossy(i));
        acc += &term;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_frame_is_linear_in_time() {
        let prob = builtin::<f64>("harmonic_oscillator", 10.0, None).unwrap();
        let grid = uniform_grid(10.0, 20);
        let f = moving_frame(&prob, &grid, 4).unwrap();
        for (t, x) in grid.iter().zip(&f.x_grid) {
            assert!((x[(0, 0)] - t).abs() < 1e-9);
            assert!((x[(1, 0)] - 1.0).abs() < 1e-9);
        }
        // ∫ X over an interval of the linear field is exact.
        let iv = &f.intervals[3];
        let exact = (iv.end * iv.end - iv.start * iv.start) / 2.0;
        assert!((iv.x_total[(0, 0)] - exact).abs() < 1e-9);
    }

    #[test]
    fn free_particle_frame_is_constant() {
        let prob = builtin::<f64>("free_particle", 5.0, None).unwrap();
        let f = moving_frame(&prob, &uniform_grid(5.0, 5), 3).unwrap();
        for x in &f.x_grid {
            assert!((x - DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_projector_kills_variations() {
        let prob = builtin::<f64>("harmonic_oscillator", 2.0, None)
            .unwrap()
            .with_projector(Arc::new(|_| DMatrix::zeros(1, 1)));
        let f = moving_frame(&prob, &uniform_grid(2.0, 4), 4).unwrap();
        assert!(f.x_grid.iter().all(|x| x.norm() == 0.0));
        assert!(f.b_grid.iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn lq_rejects_indefinite_cost() {
        let r = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let err = ProblemLinearization::<f64>::lq(
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            r,
            1.0,
            DMatrix::zeros(1, 0),
        );
        assert!(matches!(err, Err(Error::Invalid(_))));
        assert!(builtin::<f64>("pendulum", 1.0, None).is_err());
    }

    #[test]
    fn grid_outside_horizon_is_rejected() {
        let prob = builtin::<f64>("free_particle", 1.0, None).unwrap();
        assert!(moving_frame(&prob, &[0.0, 2.0], 4).is_err());
    }
}
