use fracamg::assembly::{coefficient_matrix, mass, stiffness};
use fracamg::spectral::{extreme_eigs, kappa_scaling_study, predicted_ratio, EigMethod};
use fracamg::toeplitz::SymToeplitz;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn system(alpha: f64, beta: f64, cells: usize, tau: f64) -> SymToeplitz {
    let h = 1.0 / cells as f64;
    coefficient_matrix(alpha, tau, &mass(cells, h).unwrap(), &stiffness(beta, cells, h).unwrap()).unwrap()
}

fn oracle(c: &SymToeplitz) -> (f64, f64) {
    let d = c.to_dense();
    let n = d.rows();
    let e = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| d[(i, j)])).eigenvalues;
    (e.min(), e.max())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn extreme_eigs_invariants(
        alpha in 0.05f64..0.95,
        beta in 0.52f64..0.99,
        cells in 3usize..160,
        log_tau in -5.0f64..0.0,
    ) {
        let c = system(alpha, beta, cells, 10f64.powf(log_tau));
        let (lo, hi) = oracle(&c);
        for method in [EigMethod::Dense, EigMethod::Lanczos] {
            let r = extreme_eigs(&c, method).unwrap();
            prop_assert!(r.lambda_min <= r.lambda_max);
            prop_assert!(r.kappa >= 1.0);
            prop_assert!(r.residuals.iter().all(|v| *v <= 1e-10 * c.norm1()), "{:?}", r.residuals);
            prop_assert!((r.lambda_min - lo).abs() <= 1e-9 * hi, "{method:?} {} {lo}", r.lambda_min);
            prop_assert!((r.lambda_max - hi).abs() <= 1e-9 * hi, "{method:?} {} {hi}", r.lambda_max);
        }
    }
}

#[test]
fn lanczos_matches_dense_on_large_system() {
    let c = system(0.6, 0.8, 1024, 1.0 / 32.0);
    let d = extreme_eigs(&c, EigMethod::Dense).unwrap();
    let l = extreme_eigs(&c, EigMethod::Lanczos).unwrap();
    assert_eq!(d.method, EigMethod::Dense);
    assert_eq!(l.method, EigMethod::Lanczos);
    assert!((d.kappa - l.kappa).abs() <= 1e-8 * d.kappa, "{} {}", d.kappa, l.kappa);
}

#[test]
fn kappa_ratios_approach_prediction() {
    // tau = h: mu = 1, ratio tends to 2^(2 beta - alpha)
    let (alpha, beta) = (0.3, 0.8);
    let rows = kappa_scaling_study(&[64, 128, 256, 512], EigMethod::Auto, |m| Ok(system(alpha, beta, m, 1.0 / m as f64))).unwrap();
    assert!(rows[0].ratio.is_none());
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let want = predicted_ratio(alpha, beta, 1.0);
    // the mass part of lambda_min decays more slowly, so the approach is from above
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(ratios.iter().all(|r| *r > want && (r - want) / want < 0.12), "{ratios:?} vs {want}");
    // tau = h^2 with alpha = beta: bounded condition numbers
    let rows = kappa_scaling_study(&[64, 128, 256], EigMethod::Auto, |m| Ok(system(0.6, 0.6, m, (1.0 / m as f64).powi(2)))).unwrap();
    assert!(rows.iter().skip(1).all(|r| (r.ratio.unwrap() - 1.0).abs() < 0.05));
}
