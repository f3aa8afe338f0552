//! Gauss–Legendre rules and an adaptive Dormand–Prince integrator for matrix flows.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let m = order;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if m == 1 {
                p1 = x;
                p0 = 1.0;
            } else {
                for j in 2..=m {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_m(x), p0 = P_{m-1}(x)
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Rule mapped to `[a, b]`.
pub fn gauss_legendre_on<T: Scalar>(order: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre(order);
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    (
        x.iter().map(|xi| mid + half * T::lit(*xi)).collect(),
        w.iter().map(|wi| half * T::lit(*wi)).collect(),
    )
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Solves `Ġ = C(t) G`, `G(t₀) = I`, returning `G` at each of the increasing `times` (all ≥ `t₀`).
pub fn integrate_flow<T: Scalar>(
    c: &dyn Fn(T) -> DMatrix<T>,
    dim: usize,
    t0: T,
    times: &[T],
    tol: T,
) -> Result<Vec<DMatrix<T>>> {
    let mut out = Vec::with_capacity(times.len());
    let mut g = DMatrix::<T>::identity(dim, dim);
    let mut t = t0;
    let span = times
        .last()
        .map(|l| *l - t0)
        .unwrap_or(T::one())
        .abs()
        .max(T::lit(1e-3));
    let mut h = span * T::lit(1e-2);
    let min_h = span * T::lit(1e-14);
    for &target in times {
        if target < t {
            return Err(Error::Invalid(
                "integration times must be increasing".into(),
            ));
        }
        while t < target {
            let last = target - t <= h;
            let step = if last { target - t } else { h };
            let mut k: Vec<DMatrix<T>> = Vec::with_capacity(7);
            k.push(c(t) * &g);
            for s in 1..7 {
                let mut y = g.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        y += kj * (step * T::lit(a));
                    }
                }
                k.push(c(t + step * T::lit(C[s])) * y);
            }
            let mut err = DMatrix::<T>::zeros(dim, dim);
            let mut next = g.clone();
            for j in 0..7 {
                if B5[j] != 0.0 {
                    next += &k[j] * (step * T::lit(B5[j]));
                }
                let e = B5[j] - B4[j];
                if e != 0.0 {
                    err += &k[j] * (step * T::lit(e));
                }
            }
            let scale = tol * (T::one() + next.amax());
            let ratio = err.amax() / scale;
            if !ratio.is_finite() {
                return Err(Error::Integration(format!(
                    "non-finite flow at t = {}",
                    t.as_f64()
                )));
            }
            if ratio <= T::one() {
                t = if last { target } else { t + step };
                g = next;
            }
            let factor = if ratio == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * ratio.powf(T::lit(-0.2))).clamp(T::lit(0.2), T::lit(5.0))
            };
            if !(last && ratio <= T::one()) {
                h = step * factor;
            }
            if h < min_h {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {}",
                    t.as_f64()
                )));
            }
        }
        out.push(g.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for order in 1..=10 {
            let (x, w) = gauss_legendre(order);
            for deg in 0..(2 * order) {
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn rotation_flow_matches_closed_form() {
        let c = |_t: f64| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let times = [0.5, 1.0, 3.0, 10.0];
        let gs = integrate_flow(&c, 2, 0.0, &times, 1e-12).unwrap();
        for (t, g) in times.iter().zip(gs) {
            let exact = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            assert!((g - exact).norm() < 1e-9);
        }
    }
}
