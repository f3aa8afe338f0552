use jacobi_lab::indices::{kashiwara, positive_maslov};
use jacobi_lab::sampling::{
    random_lagrangian, random_matrix, random_symmetric, random_symplectic_rotation,
};
use jacobi_lab::symplectic::{
    base_plane, chart_coordinates, fiber_plane, plane_distance, plane_from_graph, pseudoinverse,
    HalfInteger, LinearSubspace, SymplecticSpace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn remix(l: &LinearSubspace<f64>, rng: &mut ChaCha8Rng) -> LinearSubspace<f64> {
    let n = l.dim();
    let mix = random_matrix::<f64, _>(n, n, rng) + nalgebra::DMatrix::identity(n, n) * 3.0;
    LinearSubspace::span(&(l.basis() * mix), 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_integers_form_a_group(a in -1000i64..1000, b in -1000i64..1000, c in -1000i64..1000) {
        let (x, y, z) = (HalfInteger::from_halves(a), HalfInteger::from_halves(b), HalfInteger::from_halves(c));
        prop_assert_eq!((x + y) + z, x + (y + z));
        prop_assert_eq!(x + y, y + x);
        prop_assert_eq!(x - x, HalfInteger::ZERO);
        prop_assert_eq!((x + y).halves(), a + b);
        prop_assert_eq!(x.is_integer(), a % 2 == 0);
    }

    #[test]
    fn pseudoinverse_satisfies_penrose(seed in any::<u64>(), r in 1usize..6, c in 1usize..6, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(r).min(c);
        let a = random_matrix::<f64, _>(r, k, &mut rng) * random_matrix::<f64, _>(k, c, &mut rng);
        let p = pseudoinverse(&a, 1e-10);
        let scale = a.norm().max(1.0);
        prop_assert!((&a * &p * &a - &a).norm() <= 1e-8 * scale);
        prop_assert!((&p * &a * &p - &p).norm() <= 1e-8 * p.norm().max(1.0));
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!((&ap - ap.transpose()).norm() <= 1e-8);
        prop_assert!((&pa - pa.transpose()).norm() <= 1e-8);
    }

    #[test]
    fn chart_round_trip(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SymplecticSpace::<f64>::standard(n);
        let s = random_symmetric::<f64, _>(n, &mut rng);
        let (delta, pi) = (base_plane::<f64>(n), fiber_plane::<f64>(n));
        let l = plane_from_graph(&space, &s, &delta, &pi, TOL).unwrap();
        prop_assert!(space.is_lagrangian(&l, 1e-9));
        let back = chart_coordinates(&space, &l, &delta, &pi, TOL).unwrap();
        prop_assert!((back - s).norm() <= 1e-8 * (1.0 + l.dim() as f64));
    }

    #[test]
    fn indices_ignore_the_choice_of_basis(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SymplecticSpace::<f64>::standard(n);
        let (a, m, b) = (
            random_lagrangian::<f64, _>(n, &mut rng),
            random_lagrangian::<f64, _>(n, &mut rng),
            random_lagrangian::<f64, _>(n, &mut rng),
        );
        let (a2, m2, b2) = (remix(&a, &mut rng), remix(&m, &mut rng), remix(&b, &mut rng));
        prop_assert_eq!(
            kashiwara(&space, &a, &m, &b, TOL).unwrap(),
            kashiwara(&space, &a2, &m2, &b2, TOL).unwrap()
        );
        prop_assert_eq!(
            positive_maslov(&space, &a, &m, &b, TOL).unwrap(),
            positive_maslov(&space, &a2, &m2, &b2, TOL).unwrap()
        );
    }

    #[test]
    fn indices_are_symplectic_invariants(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SymplecticSpace::<f64>::standard(n);
        let planes: Vec<_> = (0..3).map(|_| random_lagrangian::<f64, _>(n, &mut rng)).collect();
        let g = random_symplectic_rotation::<f64, _>(n, &mut rng);
        let moved: Vec<_> = planes.iter().map(|p| p.map(&g, 1e-12)).collect();
        prop_assert_eq!(
            kashiwara(&space, &planes[0], &planes[1], &planes[2], TOL).unwrap(),
            kashiwara(&space, &moved[0], &moved[1], &moved[2], TOL).unwrap()
        );
        prop_assert_eq!(
            positive_maslov(&space, &planes[0], &planes[1], &planes[2], TOL).unwrap(),
            positive_maslov(&space, &moved[0], &moved[1], &moved[2], TOL).unwrap()
        );
    }

    #[test]
    fn plane_distance_is_a_symmetric_gap(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_lagrangian::<f64, _>(n, &mut rng);
        let b = random_lagrangian::<f64, _>(n, &mut rng);
        let ab = plane_distance(&a, &b).unwrap();
        prop_assert!((ab - plane_distance(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(plane_distance(&a, &remix(&a, &mut rng)).unwrap() <= 1e-10);
        prop_assert!(ab <= (2.0 * n as f64).sqrt() + 1e-12);
    }
}
