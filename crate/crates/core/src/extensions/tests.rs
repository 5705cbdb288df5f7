use nalgebra::DVector;

use super::*;
use crate::asymptotics::model_stationary;
use crate::chain::{count_transitions, simulate_chain, EmpiricalTransition, StateSequence};
use crate::dpd::{estimate, objective, DpdConfig};
use crate::models::{binomial_walk, greenwood, ParametricFamily};
use crate::rng::child_seed;

fn bundle_from(p: &nalgebra::DMatrix<f64>, x0: usize, n: usize, len: usize, seed: u64) -> SequenceBundle {
    let seqs = (0..n).map(|l| simulate_chain(p, x0, len - 1, child_seed(seed, l as u64)).unwrap()).collect();
    SequenceBundle::new(seqs).unwrap()
}

#[test]
fn bundle_text_round_trip() {
    let text = "K=3\n1 2 3 2\n\n2 2 1\n";
    let b = SequenceBundle::parse(text).unwrap();
    assert_eq!(b.len(), 2);
    assert_eq!(b.lengths(), vec![4, 3]);
    assert_eq!(SequenceBundle::parse(&b.to_text()).unwrap(), b);

    let inferred = SequenceBundle::parse("1 2\n3 1\n").unwrap();
    assert_eq!(inferred.num_states(), 3);

    match SequenceBundle::parse("K=2\n1 2\n1 3\n") {
        Err(crate::Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    match SequenceBundle::parse("K=2\n1 x\n") {
        Err(crate::Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(SequenceBundle::parse("K=2\n").is_err());
    assert!(SequenceBundle::new(vec![]).is_err());
    let a = StateSequence::new(vec![0, 1], 2).unwrap();
    let c = StateSequence::new(vec![0, 1], 3).unwrap();
    assert!(SequenceBundle::new(vec![a, c]).is_err());
}

#[test]
fn pooled_reductions() {
    let f = binomial_walk(5).unwrap();
    let p = f.matrix(&[0.3]).unwrap();
    let seq = simulate_chain(&p, 2, 300, 5).unwrap();
    let single = SequenceBundle::new(vec![seq.clone()]).unwrap();
    let pooled = pooled_counts(&single).unwrap();
    assert_eq!(pooled.sums, count_transitions(&seq).unwrap());
    assert_eq!(pooled.n, 1);

    let twice = SequenceBundle::new(vec![seq.clone(), seq.clone()]).unwrap();
    let pooled2 = pooled_counts(&twice).unwrap();
    let (e1, e2) = (pooled.sums.empirical().unwrap(), pooled2.sums.empirical().unwrap());
    assert_eq!(e2.pi_hat, e1.pi_hat);
    assert_eq!(e2.pi_init_hat, e1.pi_init_hat);
    assert_eq!(pooled2.averaged(1, 2), pooled.averaged(1, 2));
    assert_eq!(pooled2.effective_total(), 600);

    let cfg = DpdConfig::with_alpha(0.5);
    let fit = multi_sequence_estimate(&single, &f, &cfg).unwrap();
    let direct = estimate(&f, &count_transitions(&seq).unwrap().empirical().unwrap(), &cfg).unwrap();
    assert_eq!(fit.estimate, direct);
    assert_eq!(fit.transitions, 300);
}

#[test]
fn pooled_short_sequences_recover_theta() {
    let f = binomial_walk(5).unwrap();
    let p = f.matrix(&[0.25]).unwrap();
    let b = bundle_from(&p, 2, 50, 21, 77);
    let fit = multi_sequence_estimate(&b, &f, &DpdConfig::with_alpha(0.5)).unwrap();
    let se = fit.se.unwrap()[0];
    assert!((fit.estimate.theta_hat[0] - 0.25).abs() < 3.0 * se, "{} ± {se}", fit.estimate.theta_hat[0]);
    assert_eq!(fit.transitions, 1000);
}

#[test]
fn pooled_greenwood_matches_closed_form() {
    let k = 9;
    let f = greenwood(k).unwrap();
    let p = f.matrix(&[0.25]).unwrap();
    let b = bundle_from(&p, k, 100, 11, 3);
    let fit = multi_sequence_estimate(&b, &f, &DpdConfig::with_alpha(0.0)).unwrap();
    let counts = pooled_counts(&b).unwrap().sums;
    let closed = f.closed_form_mle(&counts).unwrap().unwrap();
    assert!((fit.estimate.theta_hat[0] - closed[0]).abs() < 1e-8);
    // the pooled visit frequencies keep the transient rows, so Σ is finite
    assert!(fit.se.is_some(), "{:?}", fit.variance_error);
}

#[test]
fn doubling_sequences_halves_variance() {
    let f = binomial_walk(5).unwrap();
    let p = f.matrix(&[0.3]).unwrap();
    let cfg = DpdConfig::with_alpha(0.5);
    let mean_se2 = |n: usize| -> f64 {
        (0..20)
            .map(|r| {
                let b = bundle_from(&p, 2, n, 30, 1000 * n as u64 + r);
                multi_sequence_estimate(&b, &f, &cfg).unwrap().se.unwrap()[0].powi(2)
            })
            .sum::<f64>()
            / 20.0
    };
    let ratio = mean_se2(80) / mean_se2(40);
    assert!((0.4..=0.6).contains(&ratio), "{ratio}");
}

#[test]
fn codec_round_trips() {
    for k in 1..=6 {
        for r in 1..=3 {
            let spec = HigherOrderSpec::new(k, r).unwrap();
            assert_eq!(spec.augmented, k.pow(r as u32));
            for code in 0..spec.augmented {
                let t = spec.decode(code);
                assert!(t.iter().all(|&s| s < k));
                assert_eq!(spec.encode(&t), code);
            }
        }
    }
    assert!(HigherOrderSpec::new(3, 0).is_err());
    assert!(HigherOrderSpec::new(10, 4).is_err());
}

#[test]
fn augmentation_by_hand() {
    let seq = StateSequence::from_one_based(&[1, 2, 1, 2, 1], Some(2)).unwrap();
    let (aug, spec) = augment_order(&seq, 2).unwrap();
    assert_eq!(spec.augmented, 4);
    assert_eq!(aug.to_one_based(), vec![2, 3, 2, 3]);
    let (same, _) = augment_order(&seq, 1).unwrap();
    assert_eq!(same, seq);
    assert!(augment_order(&seq, 5).is_err());
}

#[test]
fn augmented_pairs_are_trigram_tallies() {
    let k = 3;
    let mut rng_seed = 0;
    for len in [10, 57, 400] {
        rng_seed += 1;
        let p = nalgebra::DMatrix::from_element(k, k, 1.0 / k as f64);
        let seq = simulate_chain(&p, 0, len, rng_seed).unwrap();
        let (aug, spec) = augment_order(&seq, 2).unwrap();
        let pairs = count_transitions(&aug).unwrap();
        let tri = ngram_counts(&seq, 3).unwrap();
        for h in 0..spec.augmented {
            for g in 0..spec.augmented {
                let n = pairs.get(h, g);
                if h % k != g / k {
                    assert_eq!(n, 0);
                } else {
                    assert_eq!(n, tri[h * k + g % k]);
                }
            }
        }
    }
}

#[test]
fn momentum_jacobian_matches_differences() {
    let f = MomentumBinomial::new(4).unwrap();
    let theta = [0.3, 0.65];
    let j = f.jacobian(&theta).unwrap();
    for u in 0..2 {
        let mut a = theta;
        let mut b = theta;
        a[u] += 1e-6;
        b[u] -= 1e-6;
        let pa = f.support_probs(&a).unwrap();
        let pb = f.support_probs(&b).unwrap();
        for r in 0..pa.len() {
            assert!((j[(r, u)] - (pa[r] - pb[r]) / 2e-6).abs() < 1e-8);
        }
    }
    let probs = f.support_probs(&theta).unwrap();
    for h in 0..16 {
        let s: f64 = probs[h * 4..(h + 1) * 4].iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
}

#[test]
fn order_one_reduces_to_first_order_estimate() {
    let f = binomial_walk(5).unwrap();
    let seq = simulate_chain(&f.matrix(&[0.35]).unwrap(), 1, 500, 9).unwrap();
    let cfg = DpdConfig::with_alpha(0.4);
    let base = estimate(&f, &count_transitions(&seq).unwrap().empirical().unwrap(), &cfg).unwrap();
    let fo = FirstOrder(&f);
    let direct = higher_order_estimate(&seq, 1, &fo, &cfg).unwrap();
    let aug = augmented_estimate(&seq, 1, &fo, &cfg).unwrap();
    assert!((direct.theta_hat[0] - base.theta_hat[0]).abs() < 1e-12);
    assert_eq!(aug.theta_hat, base.theta_hat);
}

#[test]
fn second_order_two_routes_agree() {
    let f = MomentumBinomial::new(3).unwrap();
    let seq = simulate_higher_order(&f, &[0.7, 0.2], &[0, 1], 3000, 4).unwrap();
    assert_eq!(seq.len(), 3002);
    for alpha in [0.0, 0.5, 1.0] {
        let cfg = DpdConfig::with_alpha(alpha);
        let a = higher_order_estimate(&seq, 2, &f, &cfg).unwrap();
        let b = augmented_estimate(&seq, 2, &f, &cfg).unwrap();
        for (x, y) in a.theta_hat.iter().zip(&b.theta_hat) {
            assert!((x - y).abs() < 1e-8, "α={alpha}: {:?} vs {:?}", a.theta_hat, b.theta_hat);
        }
        assert!((a.theta_hat[0] - 0.7).abs() < 0.05 && (a.theta_hat[1] - 0.2).abs() < 0.05);
        let emp = HigherOrderEmpirical::from_sequence(&seq, 2).unwrap();
        let h = higher_order_objective(&f, &emp, &a.theta_hat, alpha).unwrap();
        assert!((h - a.objective_value).abs() < 1e-14);
    }
}

#[test]
fn second_order_fisher_consistency() {
    let f = MomentumBinomial::new(3).unwrap();
    let theta = [0.62, 0.27];
    let spec = HigherOrderSpec::new(3, 2).unwrap();
    let probs = f.support_probs(&theta).unwrap();
    let weights = vec![1.0 / 9.0; 9];
    let emp = HigherOrderEmpirical::from_population(spec, probs, weights).unwrap();
    for alpha in [0.0, 0.5] {
        let est = higher_order_fit(&f, &emp, &DpdConfig::with_alpha(alpha)).unwrap();
        assert!((est.theta_hat[0] - theta[0]).abs() < 1e-8 && (est.theta_hat[1] - theta[1]).abs() < 1e-8);
        let aug = AugmentedFamily::new(&f).unwrap();
        let est = estimate(&aug, &emp.to_augmented().unwrap(), &DpdConfig::with_alpha(alpha)).unwrap();
        assert!((est.theta_hat[0] - theta[0]).abs() < 1e-8 && (est.theta_hat[1] - theta[1]).abs() < 1e-8);
    }
}

#[test]
fn constant_family_reduces_to_pooled() {
    let f = binomial_walk(4).unwrap();
    let p = f.matrix(&[0.4]).unwrap();
    let b = bundle_from(&p, 1, 40, 16, 21);
    let slices = time_slices(&b).unwrap();
    assert_eq!(slices.len(), 15);
    let tf = ConstantInTime(&f);
    for alpha in [0.0, 0.5] {
        let theta = [0.37];
        let h = nonstationary_objective(&b, &tf, &theta, alpha).unwrap();
        let sum: f64 = slices.iter().map(|s| objective(&f, s, &theta, alpha).unwrap()).sum();
        assert!((h - sum).abs() < 1e-12 * sum.abs().max(1.0));

        let cfg = DpdConfig::with_alpha(alpha);
        let ns = nonstationary_estimate(&b, &tf, &cfg).unwrap();
        let pooled = estimate(&f, &pooled_counts(&b).unwrap().sums.empirical().unwrap(), &cfg).unwrap();
        assert!((ns.theta_hat[0] - pooled.theta_hat[0]).abs() < 1e-8);
    }
}

#[test]
fn time_dependent_fisher_consistency() {
    let f = binomial_walk(5).unwrap();
    let horizon = 12;
    let tf = InterpolatedFamily::new(&f, horizon).unwrap();
    let truth = [0.2, 0.6];
    let slices: Vec<EmpiricalTransition> = (0..horizon)
        .map(|t| {
            let theta_t = tf.theta_at(t, &truth).unwrap();
            let pi = f.matrix(&theta_t).unwrap();
            let w: DVector<f64> = model_stationary(&f, &theta_t).unwrap();
            EmpiricalTransition::from_population(pi, w).unwrap()
        })
        .collect();
    for alpha in [0.0, 0.5] {
        let est = nonstationary_fit(&tf, &slices, &DpdConfig::with_alpha(alpha)).unwrap();
        assert!((est.theta_hat[0] - truth[0]).abs() < 1e-8, "{:?}", est.theta_hat);
        assert!((est.theta_hat[1] - truth[1]).abs() < 1e-8, "{:?}", est.theta_hat);
    }
}

#[test]
fn time_dependent_gradient_matches_differences() {
    let f = binomial_walk(5).unwrap();
    let b = bundle_from(&f.matrix(&[0.3]).unwrap(), 2, 30, 9, 8);
    let tf = InterpolatedFamily::new(&f, 8).unwrap();
    for alpha in [0.0, 0.3, 1.0] {
        for theta in [[0.2, 0.5], [0.45, 0.3], [0.7, 0.65]] {
            let g = nonstationary_gradient(&b, &tf, &theta, alpha).unwrap();
            for u in 0..2 {
                let mut a = theta;
                let mut c = theta;
                a[u] += 1e-6;
                c[u] -= 1e-6;
                let fd = (nonstationary_objective(&b, &tf, &a, alpha).unwrap()
                    - nonstationary_objective(&b, &tf, &c, alpha).unwrap())
                    / 2e-6;
                assert!((fd - g[u]).abs() <= 1e-4 * g[u].abs().max(1e-3), "α={alpha} {theta:?}: {fd} vs {}", g[u]);
            }
        }
    }
    let uneven = SequenceBundle::new(vec![
        StateSequence::new(vec![0, 1, 2], 5).unwrap(),
        StateSequence::new(vec![0, 1], 5).unwrap(),
    ])
    .unwrap();
    assert!(time_slices(&uneven).is_err());
}
