use jacobi_lab::lderiv::{galerkin_lderivative, jacobi_curve, VariationBasis};
use jacobi_lab::linalg::sym_eigenvalues;
use jacobi_lab::linearization::{builtin, moving_frame, uniform_grid, RandomLq};
use jacobi_lab::morse::*;
use jacobi_lab::sampling::{random_matrix, random_symmetric};
use jacobi_lab::symplectic::{fiber_plane, LinearSubspace, QuadraticForm};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const TOL: f64 = 1e-8;

fn report(name: &str, t: f64, n: usize) -> MorseReport {
    let prob = builtin::<f64>(name, t, None).unwrap();
    let f = moving_frame(&prob, &uniform_grid(t, n), 4).unwrap();
    verify(&f, &VariationBasis::full(&f), 0, TOL).unwrap()
}

#[test]
fn free_particle_has_no_negative_directions() {
    let r = report("free_particle", 10.0, 40);
    assert!(r.consistent());
    assert_eq!((r.piecewise, r.brute, r.kernel_dim), (0, 0, 0));
    assert!(r.conjugate.is_empty());
    assert_eq!(r.certificate, Verdict::Inconclusive);

    let prob = builtin::<f64>("free_particle", 2.0, None).unwrap();
    let f = moving_frame(&prob, &uniform_grid(2.0, 4), 4).unwrap();
    let h = hessian_assemble(&f, &VariationBasis::full(&f)).unwrap();
    let reduced = sym_eigenvalues(h.restricted(TOL).matrix());
    assert_eq!(reduced.len(), 3);
    assert!(reduced.iter().all(|e| *e > 0.0));
}

#[test]
fn harmonic_oscillator_counts_three_conjugate_points() {
    let r = report("harmonic_oscillator", 10.0, 200);
    assert_eq!((r.piecewise, r.leray, r.brute as i64), (3, 3, 3));
    assert_eq!(r.certificate, Verdict::NotOptimal);
    assert_eq!(r.conjugate.len(), 3);
    for (k, c) in r.conjugate.iter().enumerate() {
        assert_eq!(c.mult, 1);
        assert!((c.t - (k + 1) as f64 * PI).abs() <= 0.05, "{c:?}");
    }
}

#[test]
fn isotropic_oscillator_doubles_multiplicities() {
    let r = report("isotropic_oscillator_2d", 10.0, 200);
    assert_eq!((r.piecewise, r.leray, r.brute as i64), (6, 6, 6));
    assert!(r.conjugate.iter().all(|c| c.mult == 2));
    assert_eq!(r.conjugate.len(), 3);
}

#[test]
fn before_the_first_conjugate_time_the_index_vanishes() {
    for t in [0.5, 1.5, 3.0] {
        let r = report("harmonic_oscillator", t, 60);
        assert!(r.consistent());
        assert_eq!(r.piecewise, 0);
    }
}

#[test]
fn index_is_a_step_function_of_the_horizon() {
    let mut last = 0;
    for i in 1..=20 {
        let t = 0.5 * i as f64;
        let r = report("harmonic_oscillator", t, (t * 20.0) as usize);
        assert!(r.consistent());
        assert!(r.piecewise >= last);
        assert_eq!(r.piecewise, (t / PI).floor() as i64, "T = {t}");
        last = r.piecewise;
    }
}

#[test]
fn near_kernel_at_pi_closes_at_third_order() {
    for (name, mult) in [("harmonic_oscillator", 1), ("isotropic_oscillator_2d", 2)] {
        let mut smallest = Vec::new();
        for n in [50, 100, 200] {
            let prob = builtin::<f64>(name, PI, None).unwrap();
            let f = moving_frame(&prob, &uniform_grid(PI, n), 4).unwrap();
            let h = hessian_assemble(&f, &VariationBasis::full(&f)).unwrap();
            let mut ev = sym_eigenvalues(h.restricted(TOL).matrix());
            ev.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
            assert!(ev[mult] > 1e3 * ev[mult - 1]);
            smallest.push(ev[0]);
            if n == 200 {
                assert_eq!(
                    brute_force_index(&h, 1e-4).kernel_dim,
                    mult,
                    "{name}: {ev:?}"
                );
            }
        }
        for w in smallest.windows(2) {
            let ratio = w[0] / w[1];
            assert!((6.0..10.0).contains(&ratio), "{name}: {smallest:?}");
        }
    }
}

#[test]
fn empty_control_basis_leaves_the_boundary_block() {
    let prob = builtin::<f64>("harmonic_oscillator", 1.0, None)
        .unwrap()
        .with_n0(DMatrix::identity(1, 1));
    let f = moving_frame(&prob, &uniform_grid(1.0, 4), 4).unwrap();
    let h = hessian_assemble(&f, &VariationBasis::full(&f).without_controls()).unwrap();
    assert_eq!(h.q, DMatrix::zeros(1, 1));
    assert_eq!(h.a, DMatrix::identity(1, 1));
}

#[test]
fn kernel_via_curve_on_builtins() {
    let pi = fiber_plane::<f64>(1);
    assert_eq!(kernel_dim_via_curve(&pi, &pi, 0, TOL), 1);
    let line = LinearSubspace::span(&DMatrix::from_column_slice(2, 1, &[1.0, 3.0]), 1e-14);
    assert_eq!(kernel_dim_via_curve(&line, &pi, 0, TOL), 0);
    assert_eq!(
        kernel_dim_via_curve(&fiber_plane::<f64>(2), &fiber_plane(2), 0, TOL),
        2
    );
}

#[test]
fn random_lq_formulas_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..20 {
        let prob = RandomLq::default().sample::<f64, _>(&mut rng).unwrap();
        let f = moving_frame(&prob, &uniform_grid(prob.horizon, 48), 4).unwrap();
        let r = verify(&f, &VariationBasis::full(&f), i, TOL).unwrap();
        assert!(r.consistent(), "{}: {r:?}", prob.name);
    }
}

#[test]
fn refinement_respects_the_jump_inequality() {
    let prob = builtin::<f64>("harmonic_oscillator", 10.0, None).unwrap();
    let f = moving_frame(&prob, &uniform_grid(10.0, 100), 4).unwrap();
    let fine = VariationBasis::full(&f);
    let coarse = VariationBasis::new(uniform_grid(10.0, 50), true).unwrap();
    let pi = fiber_plane::<f64>(1);
    let index = |b: &VariationBasis<f64>| {
        brute_force_index(&hessian_assemble(&f, b).unwrap(), TOL).neg_index as i64
    };
    let l1 = galerkin_lderivative(&f, &coarse, 10.0, TOL).unwrap();
    let l2 = galerkin_lderivative(&f, &fine, 10.0, TOL).unwrap();
    assert!(index_jump_check(&l1, &l2, &pi, index(&coarse), index(&fine), TOL).unwrap());
    assert!(index_jump_check(&l1, &l1, &pi, 2, 2, TOL).unwrap());
    let curve = jacobi_curve(&f, &coarse, TOL).unwrap();
    assert_eq!(
        morse_index_piecewise(&curve, &pi, TOL).unwrap(),
        index(&coarse)
    );
}

#[test]
fn certificate_examples() {
    assert_eq!(optimality_certificate(3, 0), Verdict::NotOptimal);
    assert_eq!(optimality_certificate(0, 0), Verdict::Inconclusive);
}

fn degenerate_form(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let rank = rng.random_range(1..=m);
    let b = random_matrix::<f64, _>(m, rank, rng);
    let d = random_symmetric::<f64, _>(rank, rng);
    &b * d * b.transpose()
}

#[test]
fn index_splits_over_a_subspace_and_its_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..300 {
        let m = rng.random_range(2..=7);
        let q = if trial % 2 == 0 {
            random_symmetric::<f64, _>(m, &mut rng)
        } else {
            degenerate_form(&mut rng, m)
        };
        let form = QuadraticForm::new(q, 1e-12).unwrap();
        let dim_v = rng.random_range(0..=m);
        let mut v = random_matrix::<f64, _>(m, dim_v, &mut rng);
        if trial % 3 == 0 && dim_v > 0 {
            // Put an isotropic direction of Q into V.
            let ker = jacobi_lab::linalg::null_space_abs(form.matrix(), 1e-9);
            if ker.ncols() > 0 {
                v.set_column(0, &ker.column(0));
            }
        }
        let (lhs, rhs) = index_decomposition(&form, &LinearSubspace::span(&v, 1e-12), 1e-9);
        assert_eq!(lhs, rhs, "trial {trial}");
    }
}

#[test]
fn annihilator_describes_the_orthogonal_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let m = rng.random_range(2..=7);
        let rows = rng.random_range(1..=3);
        let q = if rng.random_bool(0.5) {
            random_symmetric::<f64, _>(m, &mut rng)
        } else {
            degenerate_form(&mut rng, m)
        };
        let a = random_matrix::<f64, _>(rows, m, &mut rng);
        let dn = rng.random_range(0..=rows);
        let n_basis = random_matrix::<f64, _>(rows, dn, &mut rng);
        let d1 = rng.random_range(0..=m);
        let v1 = LinearSubspace::span(&random_matrix::<f64, _>(m, d1, &mut rng), 1e-12);
        let check = complement_characterization(&q, &a, &n_basis, &v1, 1e-10);
        assert!(check.agrees(1e-7));
    }
}
