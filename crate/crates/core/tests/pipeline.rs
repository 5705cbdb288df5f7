use mdpde::asymptotics::{confidence_intervals, model_matrices_at, sensitivity};
use mdpde::chain::{count_transitions, simulate_chain, simulate_contaminated};
use mdpde::dpd::estimate;
use mdpde::extensions::{multi_sequence_estimate, SequenceBundle};
use mdpde::hypothesis::{wald_composite, Constraint};
use mdpde::models::multi_binomial_walk;
use mdpde::rng::child_seed;
use mdpde::{DpdConfig, FamilyId, ParametricFamily, StateSequence};

#[test]
fn simulate_fit_and_test() {
    let id: FamilyId = "multi-binomial-walk:5".parse().unwrap();
    let family = id.build().unwrap();
    let theta = [0.6, 0.5, 0.4];
    let seq = simulate_chain(&family.matrix(&theta).unwrap(), 0, 4000, 17).unwrap();
    let emp = count_transitions(&seq).unwrap().empirical().unwrap();

    for alpha in [0.0, 0.5] {
        let est = estimate(&family, &emp, &DpdConfig::with_alpha(alpha)).unwrap();
        assert!(est.converged);
        let report = model_matrices_at(&family, &est.theta_hat, alpha).unwrap().with_sample_size(emp.total);
        let ci = confidence_intervals(&est, &report, 0.99, true).unwrap();
        for (c, t) in ci.iter().zip(theta) {
            assert!(c.lower < t && t < c.upper, "{c:?} misses {t}");
        }
        let w = wald_composite(&est, &report, &Constraint::simple(theta.to_vec()), emp.total).unwrap();
        assert_eq!(w.df, 3);
        assert!(w.p_value > 0.001);
    }
}

#[test]
fn larger_alpha_resists_upward_contamination() {
    let family = multi_binomial_walk(5).unwrap();
    let theta = [0.3, 0.3, 0.3];
    let p = family.matrix(&theta).unwrap();
    let upward = family.matrix(&[1.0, 1.0, 1.0]).unwrap();
    let (mut err0, mut err1) = (0.0, 0.0);
    for r in 0..30 {
        let seq = simulate_contaminated(&p, &upward, 0, 1000, 0.15, child_seed(5, r)).unwrap();
        let emp = count_transitions(&seq).unwrap().empirical().unwrap();
        let dist = |alpha| {
            let est = estimate(&family, &emp, &DpdConfig::with_alpha(alpha)).unwrap();
            est.theta_hat.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        err0 += dist(0.0);
        err1 += dist(1.0);
    }
    assert!(err1 < err0, "α=1 error {err1} not below α=0 error {err0}");
}

#[test]
fn sensitivity_of_the_binomial_walk() {
    // brute-force values over all 3^3 contamination maps
    let family = mdpde::models::binomial_walk(5).unwrap();
    let theta = [0.25];
    let p = family.matrix(&theta).unwrap();
    let w = mdpde::asymptotics::model_stationary(&family, &theta).unwrap();
    for (alpha, expected) in [(0.0, 0.75), (0.5, 0.4239), (1.0, 0.4107)] {
        let g = sensitivity(&family, &theta, &p, &w, alpha).unwrap().sensitivity;
        assert!((g - expected).abs() < 1e-4, "α={alpha}: {g}");
    }
}

#[test]
fn bundles_from_text() {
    let bundle = SequenceBundle::parse("K=4\n1 2 3 4 3\n2 3 2 1 2 3\n").unwrap();
    let family: mdpde::models::MonomialFamily = "binomial-walk:4".parse::<FamilyId>().unwrap().build().unwrap();
    let fit = multi_sequence_estimate(&bundle, &family, &DpdConfig::with_alpha(0.3)).unwrap();
    assert_eq!(fit.sequences, 2);
    assert_eq!(fit.transitions, 9);
    assert!(fit.estimate.converged);
    assert_eq!(StateSequence::parse("1 2 1").unwrap().to_one_based(), vec![1, 2, 1]);
}
