//! Seeded random Lagrangian planes and symplectic frames.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::vstack;
use crate::scalar::Scalar;
use crate::symplectic::LinearSubspace;

fn gaussian<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed unitary `U = X + iY`, returned as the pair `(X, Y)`.
pub fn random_unitary<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> (DMatrix<T>, DMatrix<T>) {
    loop {
        let mut re = DMatrix::from_fn(n, n, |_, _| gaussian::<T, R>(rng));
        let mut im = DMatrix::from_fn(n, n, |_, _| gaussian::<T, R>(rng));
        let mut ok = true;
        for j in 0..n {
            for i in 0..j {
                // z = <u_i, v_j> in C^n
                let zr = re.column(i).dot(&re.column(j)) + im.column(i).dot(&im.column(j));
                let zi = re.column(i).dot(&im.column(j)) - im.column(i).dot(&re.column(j));
                let (ri, ii) = (re.column(i).into_owned(), im.column(i).into_owned());
                let new_re = re.column(j) - (&ri * zr - &ii * zi);
                let new_im = im.column(j) - (&ri * zi + &ii * zr);
                re.set_column(j, &new_re);
                im.set_column(j, &new_im);
            }
            let norm = (re.column(j).norm_squared() + im.column(j).norm_squared()).sqrt();
            if norm < T::lit(1e-8) {
                ok = false;
                break;
            }
            let scaled_re = re.column(j) / norm;
            let scaled_im = im.column(j) / norm;
            re.set_column(j, &scaled_re);
            im.set_column(j, &scaled_im);
        }
        if ok {
            return (re, im);
        }
    }
}

/// Orthogonal symplectic matrix `[[X, -Y], [Y, X]]` for the standard form.
pub fn random_symplectic_rotation<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let (x, y) = random_unitary::<T, R>(n, rng);
    let top = crate::linalg::hstack(&[&x, &(-&y)]);
    let bottom = crate::linalg::hstack(&[&y, &x]);
    vstack(&[&top, &bottom])
}

/// Lagrangian plane drawn from the invariant measure of the Grassmannian.
pub fn random_lagrangian<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> LinearSubspace<T> {
    let (x, y) = random_unitary::<T, R>(n, rng);
    LinearSubspace::from_orthonormal(vstack(&[&x, &y]))
}

/// Lagrangian planes `M · span{cos θᵢ eᵢ + sin θᵢ fᵢ}` sharing one random frame `M`,
/// with angles drawn from a small discrete set so that intersections of many
/// dimensions occur with positive probability.
pub fn random_stratified_lagrangians<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    count: usize,
    rng: &mut R,
) -> Vec<LinearSubspace<T>> {
    let frame = random_symplectic_rotation::<T, R>(n, rng);
    let angles = [0.0, 0.25, 0.5, 0.75].map(|a: f64| a * std::f64::consts::PI);
    (0..count)
        .map(|_| {
            let mut b = DMatrix::zeros(2 * n, n);
            for i in 0..n {
                let th = angles[rng.random_range(0..angles.len())];
                b[(i, i)] = T::lit(th.cos());
                b[(n + i, i)] = T::lit(th.sin());
            }
            LinearSubspace::from_orthonormal(&frame * b)
        })
        .collect()
}

/// Random symmetric matrix with standard normal entries.
pub fn random_symmetric<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let m = DMatrix::from_fn(n, n, |_, _| gaussian::<T, R>(rng));
    (&m + m.transpose()) * T::lit(0.5)
}

pub fn random_matrix<T: Scalar, R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> DMatrix<T> {
    DMatrix::from_fn(r, c, |_, _| gaussian::<T, R>(rng))
}
