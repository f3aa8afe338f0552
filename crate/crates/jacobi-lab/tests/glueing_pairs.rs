use jacobi_lab::glueing::{
    chain_rule_check, glue, pair_lderivative, pair_space, restrict_boundary, PairPlane,
};
use jacobi_lab::lderiv::{galerkin_lderivative, jacobi_curve, VariationBasis};
use jacobi_lab::linearization::{builtin, moving_frame, uniform_grid, MovingFrameFields, RandomLq};
use jacobi_lab::symplectic::{plane_distance, LinearSubspace};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

fn pair_on(f: &MovingFrameFields<f64>, from: usize, to: usize) -> PairPlane<f64> {
    let s = f.slice(from, to).unwrap();
    pair_lderivative(&s, &VariationBasis::full(&s), TOL).unwrap()
}

fn lagrangian_and_reconstructs(p: &PairPlane<f64>) {
    let space = pair_space::<f64>(p.n);
    assert!(space.is_lagrangian(&p.plane, 1e-8));
    let d = &p.decomposition;
    assert_eq!(d.gamma1.dim(), d.gamma2.dim());
    assert!(plane_distance(&d.reconstruct(1e-10), &p.plane).unwrap() < 1e-8);
}

#[test]
fn free_particle_pair_is_the_flow_graph() {
    let prob = builtin::<f64>("free_particle", 1.0, None).unwrap();
    let f = moving_frame(&prob, &uniform_grid(1.0, 8), 4).unwrap();
    let p = pair_on(&f, 0, 8);
    let flow = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    let exact = PairPlane::graph(&flow, 1e-12).unwrap();
    assert!(plane_distance(&p.plane, &exact.plane).unwrap() < 1e-9);
    lagrangian_and_reconstructs(&p);
}

#[test]
fn pair_without_controls_is_the_identity_in_the_moving_frame() {
    let prob = builtin::<f64>("harmonic_oscillator", 2.0, None).unwrap();
    let f = moving_frame(&prob, &uniform_grid(2.0, 10), 4).unwrap();
    let p = pair_lderivative(&f, &VariationBasis::full(&f).without_controls(), TOL).unwrap();
    let id = PairPlane::<f64>::identity(1, 1e-12).unwrap();
    assert!(plane_distance(&p.plane, &id.plane).unwrap() < 1e-10);
    // In physical coordinates this becomes the graph of G(t₁)G(t₀)⁻¹.
    let (g0, g1) = (f.flow_at(0).clone(), f.flow_at(10).clone());
    let phys = p.to_physical(&g0, &g1, TOL).unwrap();
    let transport = &g1 * g0.clone().try_inverse().unwrap();
    let exact = PairPlane::graph(&transport, 1e-12).unwrap();
    assert!(plane_distance(&phys.plane, &exact.plane).unwrap() < 1e-9);
}

#[test]
fn free_particle_glues_and_chains() {
    let prob = builtin::<f64>("free_particle", 2.0, None).unwrap();
    let f = moving_frame(&prob, &uniform_grid(2.0, 8), 4).unwrap();
    let (p01, p12, p02) = (pair_on(&f, 0, 4), pair_on(&f, 4, 8), pair_on(&f, 0, 8));
    let g = glue(&p01, &p12, TOL).unwrap();
    assert!(plane_distance(&g.plane, &p02.plane).unwrap() < 1e-7);
    assert!(chain_rule_check(&p01, &p12, &p02, 100, 3, TOL));
    let end = restrict_boundary(&g, &DMatrix::zeros(1, 0), TOL).unwrap();
    let line = LinearSubspace::span(&DMatrix::from_column_slice(2, 1, &[1.0, 2.0]), 1e-14);
    assert!(plane_distance(&end, &line).unwrap() < 1e-9);
}

#[test]
fn random_lq_glueing_matches_direct_pairs() {
    let gen = RandomLq {
        horizon: (2.0, 2.0),
        ..RandomLq::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..8 {
        let prob = gen.sample::<f64, _>(&mut rng).unwrap();
        let f = moving_frame(&prob, &uniform_grid(2.0, 12), 4).unwrap();
        let (p01, p12, p02) = (pair_on(&f, 0, 6), pair_on(&f, 6, 12), pair_on(&f, 0, 12));
        for p in [&p01, &p12, &p02] {
            lagrangian_and_reconstructs(p);
        }
        let g = glue(&p01, &p12, TOL).unwrap();
        assert!(
            plane_distance(&g.plane, &p02.plane).unwrap() < 1e-7,
            "{}",
            prob.name
        );
        assert!(chain_rule_check(&p01, &p12, &g, 100, 5, TOL));
        let curve = jacobi_curve(&f, &VariationBasis::full(&f), TOL).unwrap();
        let r = restrict_boundary(&g, &prob.n0_tangent, TOL).unwrap();
        assert!(
            plane_distance(&r, curve.end()).unwrap() < 1e-7,
            "{}",
            prob.name
        );
        let gal = galerkin_lderivative(&f, &VariationBasis::full(&f), 2.0, TOL).unwrap();
        assert!(plane_distance(&r, &gal).unwrap() < 1e-7);
    }
}

#[test]
fn glue_is_associative() {
    let gen = RandomLq {
        horizon: (3.0, 3.0),
        ..RandomLq::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..4 {
        let prob = gen.sample::<f64, _>(&mut rng).unwrap();
        let f = moving_frame(&prob, &uniform_grid(3.0, 12), 4).unwrap();
        let (a, b, c) = (pair_on(&f, 0, 4), pair_on(&f, 4, 8), pair_on(&f, 8, 12));
        let left = glue(&glue(&a, &b, TOL).unwrap(), &c, TOL).unwrap();
        let right = glue(&a, &glue(&b, &c, TOL).unwrap(), TOL).unwrap();
        assert!(plane_distance(&left.plane, &right.plane).unwrap() < 1e-7);
    }
}
