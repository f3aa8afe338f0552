//! Dense helpers built on nalgebra's SVD and symmetric eigensolver.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Scalar;

/// Thin SVD `m = U diag(s) Vᵀ` of a matrix with at least as many rows as columns,
/// by one-sided Jacobi rotations. nalgebra's bidiagonal SVD can lose accuracy on
/// clustered singular values, which breaks exact intersection counts.
fn jacobi_svd_tall<T: Scalar>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    let (r, c) = m.shape();
    let mut a = m.clone();
    let mut v = DMatrix::<T>::identity(c, c);
    let eps = T::default_epsilon() * T::lit(8.0);
    for _sweep in 0..80 {
        let mut rotated = false;
        // Squared column norms, refreshed each sweep and updated exactly by each rotation.
        let mut norms: Vec<T> = (0..c).map(|j| a.column(j).norm_squared()).collect();
        for p in 0..c {
            for q in (p + 1)..c {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma = column_dot(a.as_slice(), r, p, q);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(a.as_mut_slice(), r, p, q, cs, sn);
                rotate_columns(v.as_mut_slice(), c, p, q, cs, sn);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<T> = (0..c).map(|j| a.column(j).norm()).collect();
    let mut u = a;
    for (j, sj) in s.iter().enumerate() {
        if *sj > T::zero() {
            let col = u.column(j) / *sj;
            u.set_column(j, &col);
        }
    }
    (u, s, v)
}

fn column_dot<T: Scalar>(data: &[T], rows: usize, p: usize, q: usize) -> T {
    let (x, y) = (
        &data[p * rows..(p + 1) * rows],
        &data[q * rows..(q + 1) * rows],
    );
    x.iter().zip(y).fold(T::zero(), |acc, (a, b)| acc + *a * *b)
}

/// Columns `p < q` of a column-major buffer become `(c·x_p − s·x_q, s·x_p + c·x_q)`.
fn rotate_columns<T: Scalar>(data: &mut [T], rows: usize, p: usize, q: usize, cs: T, sn: T) {
    let (head, tail) = data.split_at_mut(q * rows);
    let xp = &mut head[p * rows..(p + 1) * rows];
    let xq = &mut tail[..rows];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (u, w) = (*a, *b);
        *a = cs * u - sn * w;
        *b = sn * u + cs * w;
    }
}

/// Orthonormal basis of the orthogonal complement of the orthonormal columns `q` in `R^m`.
pub fn complement<T: Scalar>(q: &DMatrix<T>, m: usize) -> DMatrix<T> {
    if q.ncols() == 0 {
        return DMatrix::identity(m, m);
    }
    let p = DMatrix::<T>::identity(m, m) - q * q.transpose();
    let eig = p.symmetric_eigen();
    let cols: Vec<usize> = (0..m)
        .filter(|&i| eig.eigenvalues[i] > T::lit(0.5))
        .collect();
    select_columns(&eig.eigenvectors, &cols)
}

fn threshold<T: Scalar>(values: &[T], tol: T) -> T {
    let max = values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    tol * max
}

/// Thin SVD of any shape: `(U, s, V)` with `m = U diag(s) Vᵀ`.
pub fn svd<T: Scalar>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    if m.nrows() >= m.ncols() {
        jacobi_svd_tall(m)
    } else {
        let (u, s, v) = jacobi_svd_tall(&m.transpose());
        (v, s, u)
    }
}

/// Orthonormal basis of the kernel of `m`, as columns. Rank cut-off is `tol` times the largest singular value.
pub fn null_space<T: Scalar>(m: &DMatrix<T>, tol: T) -> DMatrix<T> {
    null_space_with(m, |s| threshold(s, tol))
}

/// Kernel with singular values up to the absolute cut-off `abs_tol` treated as zero.
pub fn null_space_abs<T: Scalar>(m: &DMatrix<T>, abs_tol: T) -> DMatrix<T> {
    null_space_with(m, |_| abs_tol)
}

fn null_space_with<T: Scalar>(m: &DMatrix<T>, cut: impl Fn(&[T]) -> T) -> DMatrix<T> {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let (_, s, v) = svd(m);
    let thr = cut(&s);
    let live: Vec<usize> = (0..s.len()).filter(|&i| s[i] > thr).collect();
    complement(&select_columns(&v, &live), c)
}

/// Orthonormal basis of the column space of `m`.
pub fn range_basis<T: Scalar>(m: &DMatrix<T>, tol: T) -> DMatrix<T> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(r, 0);
    }
    let (u, s, _) = svd(m);
    let thr = threshold(&s, tol);
    let cols: Vec<usize> = (0..s.len())
        .filter(|&i| s[i] > thr && s[i] > T::zero())
        .collect();
    select_columns(&u, &cols)
}

/// Numerical rank with relative cut-off.
pub fn rank<T: Scalar>(m: &DMatrix<T>, tol: T) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let (_, s, _) = svd(m);
    let thr = threshold(&s, tol);
    s.iter().filter(|x| **x > thr && **x > T::zero()).count()
}

/// Singular values in decreasing order.
pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let (_, mut s, _) = svd(m);
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn select_columns<T: Scalar>(m: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        out.set_column(j, &m.column(c));
    }
    out
}

pub fn hstack<T: Scalar>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        if b.ncols() > 0 {
            out.view_mut((0, at), b.shape()).copy_from(*b);
        }
        at += b.ncols();
    }
    out
}

pub fn vstack<T: Scalar>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        if b.nrows() > 0 {
            out.view_mut((at, 0), b.shape()).copy_from(*b);
        }
        at += b.nrows();
    }
    out
}

/// Moore–Penrose pseudoinverse with relative singular-value cut-off.
pub fn pseudoinverse<T: Scalar>(a: &DMatrix<T>, tol: T) -> DMatrix<T> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let (u, s, v) = svd(a);
    let thr = threshold(&s, tol);
    let mut out = DMatrix::zeros(c, r);
    for (i, &si) in s.iter().enumerate() {
        if si > thr && si > T::zero() {
            out += v.column(i) * u.column(i).transpose() * (T::one() / si);
        }
    }
    out
}

/// Eigenvalues of the symmetric part of `m`.
pub fn sym_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * T::lit(0.5);
    let e: DVector<T> = sym.symmetric_eigenvalues();
    e.iter().copied().collect()
}

pub fn frobenius<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_recomposes_clustered_spectra() {
        // Block-orthogonal matrix with repeated singular values.
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DMatrix::<f64>::zeros(6, 6);
        for i in 0..3 {
            m[(i, i)] = 1.0;
            m[(i, i + 3)] = c;
            m[(i + 3, i + 3)] = c;
        }
        let rot = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) as f64).sin());
        let q = rot.qr().q();
        let m = &q * m * q.transpose();
        for mat in [
            m.clone(),
            m.transpose(),
            m.columns(0, 4).into_owned(),
            m.rows(0, 4).into_owned(),
        ] {
            let (u, s, v) = svd(&mat);
            let back = &u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose();
            assert!((back - &mat).norm() < 1e-12);
        }
    }

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
        assert!((k.transpose() * &k - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pseudoinverse_of_column() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let p = pseudoinverse(&a, 1e-10);
        assert!((p - DMatrix::from_row_slice(1, 2, &[0.5, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn pseudoinverse_truncates() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = pseudoinverse(&a, 1e-10);
        assert!((p - DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.0]))).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(null_space(&m, 1e-8).ncols(), 3);
        assert_eq!(range_basis(&m, 1e-8).ncols(), 0);
    }
}
