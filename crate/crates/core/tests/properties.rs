use grasmle::existence::{check_r1, evaluate_witness, feasible_profile, intersection_range, witness_search};
use grasmle::grassmann::{intersection_dim, projector, uniform_sample, DEFAULT_RANK_TOLERANCE};
use grasmle::likelihood::{hessian_quadratic, neg_log_likelihood};
use grasmle::manifold::{geodesic, metric_inner, tangent_project};
use grasmle::solver::{fit_fixed_point, random_parameter, tangent_basis};
use grasmle::{CovarianceParameter, EmpiricalMeasure, FitOptions, Subspace, VerdictStatus};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn measure(m: usize, r: usize, n: usize, rng: &mut ChaCha8Rng) -> EmpiricalMeasure<f64> {
    EmpiricalMeasure::uniform((0..n).map(|_| uniform_sample::<f64, _>(m, r, rng)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesics_stay_on_the_manifold(seed in any::<u64>(), m in 2usize..6, t in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = random_parameter::<Complex64>(m, &mut rng);
        let mut v = tangent_project(&sigma, &random_matrix(m, m, &mut rng));
        let norm = v.frobenius_norm();
        if norm > 0.0 {
            // ‖2tv‖ ≤ 20
            v = v.scale(10.0 / norm);
        }
        let end = geodesic(&v, t);
        prop_assert!((end.determinant() - 1.0).abs() < 1e-8);
        prop_assert!(end.eigenvalues().iter().all(|&l| l > 0.0));
        let asym = (end.entries() - end.entries().adjoint()).norm() / end.entries().norm();
        prop_assert!(asym < 1e-12);
    }

    #[test]
    fn tangent_projection_is_idempotent(seed in any::<u64>(), m in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = random_parameter::<Complex64>(m, &mut rng);
        let once = tangent_project(&sigma, &random_matrix(m, m, &mut rng));
        let twice = tangent_project(&sigma, once.entries());
        prop_assert!((once.entries() - twice.entries()).norm() <= 1e-12 * once.entries().norm().max(1.0));
        let sq = metric_inner(&once, &once).unwrap();
        prop_assert!(sq >= 0.0);
        prop_assert_eq!(sq == 0.0, once.entries().norm() == 0.0);
    }

    #[test]
    fn intersection_dim_is_symmetric_and_bounded(seed in any::<u64>(), m in 2usize..7, r in 1usize..6, s in 1usize..6) {
        prop_assume!(r < m && s < m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = uniform_sample::<f64, _>(m, r, &mut rng);
        // Share a random number of directions with u.
        let shared = rng.random_range(0..=r.min(s));
        let mut x = DMatrix::<f64>::from_fn(m, s, |_, _| rng.random::<f64>() - 0.5);
        for j in 0..shared {
            x.set_column(j, &u.frame().column(j));
        }
        let v = Subspace::from_matrix(&x).unwrap();
        let d = intersection_dim(&u, &v, DEFAULT_RANK_TOLERANCE).unwrap();
        prop_assert_eq!(d, intersection_dim(&v, &u, DEFAULT_RANK_TOLERANCE).unwrap());
        let (lo, hi) = intersection_range(m, r, s);
        prop_assert!(lo <= d && d <= hi);
        prop_assert!(d >= shared);
    }

    #[test]
    fn projector_ignores_the_frame(seed in any::<u64>(), m in 3usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(1..m);
        let sigma = random_parameter::<Complex64>(m, &mut rng);
        let x = random_matrix(m, r, &mut rng);
        let b = random_matrix(r, r, &mut rng) + DMatrix::identity(r, r);
        let u = Subspace::from_matrix(&x).unwrap();
        let v = Subspace::from_matrix(&(&x * b)).unwrap();
        let diff = (projector(&sigma, &u) - projector(&sigma, &v)).norm();
        prop_assert!(diff < 1e-10);
    }

    #[test]
    fn hessian_is_positive_semidefinite(seed in any::<u64>(), m in 2usize..6, n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(1..m);
        let p = measure(m, r, n, &mut rng);
        let sigma = random_parameter::<f64>(m, &mut rng);
        for v in tangent_basis(&sigma) {
            prop_assert!(hessian_quadratic(&p, &sigma, &v) >= -1e-9);
        }
    }

    #[test]
    fn fixed_point_never_increases_the_objective(seed in any::<u64>(), m in 2usize..5, extra in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.random_range(1..m);
        let n = m * m / (r * (m - r)) + 1 + extra;
        let p = measure(m, r, n, &mut rng);
        let start = random_parameter::<f64>(m, &mut rng);
        let opts = FitOptions { max_iterations: 200, ..FitOptions::default() };
        let fit = fit_fixed_point(&p, &start, &opts).unwrap();
        prop_assert!((fit.trace[0].objective - neg_log_likelihood(&p, &start)).abs() < 1e-12);
        for pair in fit.trace.windows(2) {
            prop_assert!(pair[1].objective <= pair[0].objective + 1e-12);
        }
        prop_assert!((fit.estimate.determinant() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lowering_a_profile_keeps_it_feasible(
        m in 2usize..9,
        r in 1usize..8,
        s in 1usize..8,
        raw in proptest::collection::vec(0usize..8, 1..8),
        which in any::<prop::sample::Index>(),
    ) {
        prop_assume!(r < m && s < m);
        let (lo, hi) = intersection_range(m, r, s);
        let dims: Vec<usize> = raw.iter().map(|&d| lo + d % (hi - lo + 1)).collect();
        prop_assume!(feasible_profile(m, r, s, &dims));
        let k = which.index(dims.len());
        if dims[k] > lo {
            let mut lowered = dims.clone();
            lowered[k] -= 1;
            prop_assert!(feasible_profile(m, r, s, &lowered));
        }
    }

    #[test]
    fn verdicts_are_certificates(seed in any::<u64>(), m in 2usize..5, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = measure(m, 1, n, &mut rng);
        let exact = check_r1(&p).unwrap();
        if let Some(w) = &exact.witness {
            let again = evaluate_witness(&p, &w.subspace, DEFAULT_RANK_TOLERANCE).unwrap();
            prop_assert_eq!(&again.intersection_dims, &w.intersection_dims);
            prop_assert!(again.value >= 0.0);
        }
        let search = witness_search(&p, 10, &mut rng).unwrap();
        if search.status == VerdictStatus::NotUnique {
            prop_assert_eq!(exact.status, VerdictStatus::NotUnique);
            prop_assert!(search.witness.unwrap().value >= 0.0);
        }
    }
}

#[test]
fn identity_is_a_fixed_point_of_symmetric_samples() {
    let atoms = (0..3).map(|i| Subspace::<f64>::coordinate(3, &[i]).unwrap()).collect();
    let p = EmpiricalMeasure::uniform(atoms).unwrap();
    let fit = fit_fixed_point(&p, &CovarianceParameter::identity(3), &FitOptions::default()).unwrap();
    assert!(fit.converged && fit.iterations == 0);
}
