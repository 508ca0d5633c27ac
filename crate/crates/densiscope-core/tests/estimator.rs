use densiscope_core::density::{l1_distance, trapezoid_weights, DensityFn, GridCurve};
use densiscope_core::transforms::{inverse_lqd, LqdCurve};
use densiscope_core::regoutlier::{detect_regression_outliers, RegDetectParams};
use densiscope_core::regression::{
    default_lambda_grid, fit, fpca, gaussian_gram, gcv_scores, gcv_select_matrix, normal_equation_residual, objective, sigma_heuristic,
    solve_coefficients, solve_fast, solve_general, FitParams,
};
use densiscope_core::simgen::{exchange_contaminate, gen_pairs, gen_scenario_pdfs, PairVariant, RandomStream, Scenario};
use nalgebra::DMatrix;
use proptest::prelude::*;

struct Instance {
    a: DMatrix<f64>,
    y: DMatrix<f64>,
    w: Vec<f64>,
    k: DMatrix<f64>,
    lambda: f64,
}

/// Gaussian Gram matrix of random cosine series (well conditioned), random
/// scores, random positive weights and a random PSD output Gram.
fn instance(seed: u64, n: usize, m: usize) -> Instance {
    let mut rng = RandomStream::new(seed);
    let curves: Vec<GridCurve> = (0..n)
        .map(|_| {
            let c: Vec<f64> = (0..16).map(|_| rng.normal(0.0, 1.0)).collect();
            GridCurve::from_fn(0.0, 1.0, 65, |t| {
                c.iter().enumerate().map(|(k, v)| v * (std::f64::consts::PI * k as f64 * t).cos()).sum()
            })
            .unwrap()
        })
        .collect();
    let a = gaussian_gram(&curves, sigma_heuristic(&curves).unwrap()).unwrap();
    let y = DMatrix::from_fn(n, m, |_, _| rng.normal(0.0, 1.0));
    let w = (0..n).map(|_| rng.uniform(0.1, 2.0)).collect();
    let l = DMatrix::from_fn(m, m, |_, _| rng.normal(0.0, 1.0));
    let k = &l * l.transpose();
    let lambda = 10f64.powf(rng.uniform(-3.0, 0.0));
    Instance { a, y, w, k, lambda }
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normal_equations_hold(seed in any::<u64>(), n in 3usize..12, m in 1usize..4) {
        let t = instance(seed, n, m);
        let b = solve_general(&t.a, &t.y, &t.w, t.lambda, &t.k).unwrap();
        prop_assert!(normal_equation_residual(&t.a, &t.y, &t.w, t.lambda, &t.k, &b) <= 1e-6);
    }

    #[test]
    fn estimate_minimizes_objective(seed in any::<u64>(), n in 3usize..10, m in 1usize..4) {
        let t = instance(seed, n, m);
        let b = solve_general(&t.a, &t.y, &t.w, t.lambda, &t.k).unwrap();
        let j0 = objective(&t.a, &t.y, &t.w, t.lambda, &t.k, &b);
        let mut rng = RandomStream::new(seed ^ 0x5eed);
        for _ in 0..100 {
            let scale = 10f64.powf(rng.uniform(-4.0, 0.0));
            let db = DMatrix::from_fn(n, m, |_, _| scale * rng.normal(0.0, 1.0));
            prop_assert!(j0 <= objective(&t.a, &t.y, &t.w, t.lambda, &t.k, &(&b + db)) + 1e-8);
        }
    }

    #[test]
    fn fast_and_general_agree_for_identity(seed in any::<u64>(), n in 3usize..12, m in 1usize..4) {
        let t = instance(seed, n, m);
        let id = DMatrix::identity(m, m);
        let fast = solve_fast(&t.a, &t.y, &t.w, t.lambda).unwrap();
        let general = solve_general(&t.a, &t.y, &t.w, t.lambda, &id).unwrap();
        prop_assert!(rel_frobenius(&fast, &general) <= 1e-8);
    }

    #[test]
    fn unit_weights_give_standard_estimator(seed in any::<u64>(), n in 3usize..12, m in 1usize..4) {
        let t = instance(seed, n, m);
        let b = solve_coefficients(&t.a, &t.y, &vec![1.0; n], t.lambda, None).unwrap();
        let shifted = &t.a + DMatrix::identity(n, n) * t.lambda;
        let standard = shifted.lu().solve(&t.y).unwrap();
        prop_assert!(rel_frobenius(&b, &standard) <= 1e-8);
    }

    #[test]
    fn single_pair_closed_form(y in -5.0f64..5.0, s in 0.05f64..3.0, lambda in 1e-4f64..10.0) {
        // s is the diagonal entry of W, so the pair weight is s².
        let a = DMatrix::from_element(1, 1, 1.0);
        let ym = DMatrix::from_element(1, 1, y);
        let b = solve_coefficients(&a, &ym, &[s * s], lambda, None).unwrap();
        let expected = y * s * s / (s * s + lambda);
        prop_assert!((b[(0, 0)] - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn downweighted_pair_fits_no_better(seed in any::<u64>(), n in 4usize..10, pick in 0usize..4) {
        let t = instance(seed, n, 2);
        let id = DMatrix::identity(2, 2);
        let resid = |b: &DMatrix<f64>| (&t.y - &t.a * b).row(pick).norm();
        let full = solve_fast(&t.a, &t.y, &t.w, t.lambda).unwrap();
        let mut w = t.w.clone();
        w[pick] = 0.0;
        let dropped = solve_general(&t.a, &t.y, &w, t.lambda, &id).unwrap();
        prop_assert!(resid(&dropped) >= resid(&full) - 1e-9);
    }

    #[test]
    fn fpca_basis_orthonormal(seed in any::<u64>(), m in 1usize..6) {
        let mut rng = RandomStream::new(seed);
        let curves = gen_scenario_pdfs(15, Scenario::I, 0.3, &mut rng).unwrap();
        let curves: Vec<GridCurve> = curves.into_iter().map(DensityFn::into_curve).collect();
        let (basis, scores) = fpca(&curves, m).unwrap();
        let w = trapezoid_weights(curves[0].len(), curves[0].step());
        for (i, p) in basis.functions.iter().enumerate() {
            for (j, q) in basis.functions.iter().enumerate() {
                let ip: f64 = w.iter().zip(p.values()).zip(q.values()).map(|((w, a), b)| w * a * b).sum();
                let delta = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - delta).abs() < 1e-8);
            }
        }
        for k in 0..m {
            let mean: f64 = scores.column(k).iter().sum::<f64>() / 15.0;
            prop_assert!(mean.abs() < 1e-8);
        }
        prop_assert!(basis.eigenvalues.windows(2).all(|e| e[0] >= e[1] - 1e-15));
    }
}

#[test]
fn gcv_prefers_smallest_on_ties() {
    // With A = I and K = I the hat matrix is a scalar multiple of I, so
    // every λ on a grid of equal shrinkage ties only if Y vanishes.
    let a = DMatrix::identity(4, 4);
    let y = DMatrix::zeros(4, 2);
    assert_eq!(gcv_select_matrix(&a, &y, None, &[0.5, 0.1, 2.0]).unwrap(), 0.1);
}

#[test]
fn zero_lambda_interpolates() {
    let mut rng = RandomStream::new(3);
    let pairs = gen_pairs(8, PairVariant::MixtureA5, &mut rng).unwrap();
    let model = fit(&pairs.g, &pairs.f, &[1.0; 8], &FitParams { m: 3, ..FitParams::new(0.0) }).unwrap();
    let fitted = model.fitted_scores();
    assert!((&fitted - &model.scores).abs().max() <= 1e-6);
}

#[test]
fn zero_lambda_recovers_training_responses() {
    let mut rng = RandomStream::new(4);
    let pairs = gen_pairs(8, PairVariant::MixtureA5, &mut rng).unwrap();
    // m = n - 1 keeps every nonzero principal component.
    let model = fit(&pairs.g, &pairs.f, &[1.0; 8], &FitParams { m: 7, ..FitParams::new(0.0) }).unwrap();
    for i in 0..8 {
        let d = l1_distance(&model.predict(&pairs.g[i]).unwrap(), &pairs.f[i]).unwrap();
        assert!(d <= 0.05, "pair {i}: {d}");
    }
}

#[test]
fn gcv_constant_for_single_pair() {
    let a = DMatrix::from_element(1, 1, 1.0);
    let y = DMatrix::from_element(1, 1, 0.7);
    let grid = [3.0, 0.01, 0.5];
    let scores = gcv_scores(&a, &y, None, &grid).unwrap();
    assert!(scores.iter().all(|s| (s - scores[0]).abs() < 1e-12 * scores[0]));
    assert_eq!(gcv_select_matrix(&a, &y, None, &grid).unwrap(), 0.01);
}

#[test]
fn gcv_small_for_noiseless_low_rank_responses() {
    // Responses that are a smooth function of the predictors are fitted with
    // little shrinkage.
    let t = instance(9, 10, 2);
    let y = &t.a * DMatrix::from_fn(10, 2, |i, j| ((i + 2 * j) as f64).sin());
    let grid = default_lambda_grid();
    let pick = gcv_select_matrix(&t.a, &y, None, &grid).unwrap();
    assert!(pick <= grid[3], "{pick}");
}

#[test]
fn heavy_shrinkage_predicts_mean_response() {
    let mut rng = RandomStream::new(6);
    let pairs = gen_pairs(10, PairVariant::MixtureA5, &mut rng).unwrap();
    let model = fit(&pairs.g, &pairs.f, &[1.0; 10], &FitParams { m: 3, ..FitParams::new(1e9) }).unwrap();
    let mean = inverse_lqd(&LqdCurve { curve: model.basis.mean.clone(), alpha: 0.3 }, 0.3).unwrap();
    let d = l1_distance(&model.predict(&pairs.g[0]).unwrap(), &mean).unwrap();
    assert!(d < 1e-6, "{d}");
}

#[test]
fn reverse_detector_is_forward_on_swapped_pairs() {
    let mut rng = RandomStream::new(21);
    let base = gen_pairs(40, PairVariant::MixtureA5, &mut rng).unwrap();
    let (pairs, _) = exchange_contaminate(&base, 0, 2, &mut rng).unwrap();
    let params = RegDetectParams { iterations: 1, ..RegDetectParams::default() };
    let a = detect_regression_outliers(&pairs.g, &pairs.f, &params).unwrap();
    let b = detect_regression_outliers(&pairs.f, &pairs.g, &params).unwrap();
    assert_eq!(a.reverse, b.forward);
    assert_eq!(a.forward, b.reverse);
    assert_eq!(a.lambda_reverse, b.lambda_forward);
}

#[test]
fn stepwise_deletion_shrinks_training_set() {
    let mut rng = RandomStream::new(8);
    let base = gen_pairs(50, PairVariant::MixtureA5, &mut rng).unwrap();
    let (pairs, _) = exchange_contaminate(&base, 2, 3, &mut rng).unwrap();
    let params = RegDetectParams { theta_lambda: 0.5, ..RegDetectParams::default() };
    let rep = detect_regression_outliers(&pairs.g, &pairs.f, &params).unwrap();
    assert!(rep.lambda_forward >= 0.5 && rep.lambda_reverse >= 0.5);
    for w in rep.training.windows(2) {
        assert!(w[1].iter().all(|i| w[0].contains(i)));
        assert!(w[1].len() <= w[0].len());
    }
    assert_eq!(rep.flagged, *rep.iterations.last().unwrap());
}

#[test]
fn too_few_pairs_rejected() {
    let mut rng = RandomStream::new(2);
    let pairs = gen_pairs(7, PairVariant::SimpleA9, &mut rng).unwrap();
    assert!(detect_regression_outliers(&pairs.g, &pairs.f, &RegDetectParams::default()).is_err());
}

#[test]
fn clean_pairs_rarely_flagged() {
    let root = RandomStream::new(1234);
    let params = RegDetectParams::default();
    let mut flagged = 0usize;
    for r in 0..20 {
        let pairs = gen_pairs(100, PairVariant::SimpleA9, &mut root.split(r)).unwrap();
        flagged += detect_regression_outliers(&pairs.g, &pairs.f, &params).unwrap().flagged.len();
    }
    let rate = flagged as f64 / 2000.0;
    assert!(rate <= 0.10, "{rate}");
}
