use super::*;
use crate::asymptotics::{influence_function, model_stationary, sensitivity};
use crate::chain::{count_transitions, simulate_chain, EmpiricalTransition};
use crate::dpd::{estimate, DpdConfig};
use crate::models::{bernoulli_laplace, binomial_walk, reflecting_walk, ParametricFamily};
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Composite Simpson rule on [a, b] with n (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn chi2_reference_quantiles() {
    assert!((chi2_quantile(0.95, 1.0).unwrap() - 3.841458820694124).abs() < 1e-8);
    assert!((chi2_quantile(0.95, 6.0).unwrap() - 12.591587243743977).abs() < 1e-8);
    assert!((chi2_quantile(0.99, 2.0).unwrap() - 9.210340371976182).abs() < 1e-8);
    for df in [1.0, 2.0, 3.0, 7.0, 30.0] {
        for p in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
            let x = chi2_quantile(p, df).unwrap();
            assert!((chi2_cdf(x, df).unwrap() - p).abs() < 1e-10, "df={df} p={p}");
        }
    }
}

#[test]
fn chi2_cdf_special_cases() {
    // χ²₂ is exponential with mean 2
    for x in [0.1, 1.0, 5.0] {
        assert!((chi2_cdf(x, 2.0).unwrap() - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
    }
    assert_eq!(chi2_cdf(0.0, 3.0).unwrap(), 0.0);
    assert!(chi2_cdf(-1.0, 3.0).is_err());
    assert!(chi2_cdf(1.0, 0.0).is_err());
    assert!(chi2_quantile(1.0, 2.0).is_err());
}

#[test]
fn noncentral_cdf_matches_quadrature() {
    // with one degree of freedom χ²₁(δ) is (Z + √δ)², so its CDF is the
    // standard normal mass of [−√x − √δ, √x − √δ]
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for delta in [0.5f64, 2.0, 7.5] {
        for x in [0.3f64, 1.0, 3.84, 10.0] {
            let (a, b) = (-x.sqrt() - delta.sqrt(), x.sqrt() - delta.sqrt());
            let quad = simpson(phi, a, b, 2000);
            let got = noncentral_chi2_cdf(x, 1.0, delta).unwrap();
            assert!((got - quad).abs() < 1e-9, "δ={delta} x={x}: {got} vs {quad}");
            assert!((got - (normal_cdf(b) - normal_cdf(a))).abs() < 1e-10);
        }
    }
    assert_eq!(noncentral_chi2_cdf(2.0, 3.0, 0.0).unwrap(), chi2_cdf(2.0, 3.0).unwrap());
}

#[test]
fn noncentral_cdf_for_higher_df_matches_quadrature() {
    // χ²₃(δ) = (Z₁ + √δ)² + χ²₂ where χ²₂ has density e^{−y/2}/2
    let delta: f64 = 4.0;
    let x: f64 = 6.0;
    let inner = |z: f64| {
        let s = (z + delta.sqrt()).powi(2);
        let dens = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if s >= x {
            0.0
        } else {
            dens * (1.0 - (-(x - s) / 2.0).exp())
        }
    };
    let (a, b) = (-x.sqrt() - delta.sqrt(), x.sqrt() - delta.sqrt());
    let quad = simpson(inner, a, b, 4000);
    assert!((noncentral_chi2_cdf(x, 3.0, delta).unwrap() - quad).abs() < 1e-8);
}

#[test]
fn power_grows_with_noncentrality() {
    let p0 = asymptotic_power(0.0, 2, 0.05).unwrap();
    assert!((p0 - 0.05).abs() < 1e-10);
    let mut last = p0;
    for delta in [1.0, 4.0, 10.0, 25.0] {
        let p = asymptotic_power(delta, 2, 0.05).unwrap();
        assert!(p > last);
        last = p;
    }
}

#[test]
fn fd_constraint_jacobian() {
    let c = Constraint::new(1, |t| vec![t[0] * t[1] - 0.2]);
    let h = c.jacobian(&[0.4, 0.7]).unwrap();
    assert!((h[(0, 0)] - 0.7).abs() < 1e-9);
    assert!((h[(1, 0)] - 0.4).abs() < 1e-9);
    let bad = Constraint::new(2, |t| vec![t[0]]);
    assert!(bad.h(&[0.1]).is_err());
}

fn fit(family: &dyn ParametricFamily, p: &nalgebra::DMatrix<f64>, t: usize, seed: u64, alpha: f64) -> DpdEstimate {
    let seq = simulate_chain(p, 0, t, seed).unwrap();
    let emp = count_transitions(&seq).unwrap().empirical().unwrap();
    estimate(family, &emp, &DpdConfig::with_alpha(alpha)).unwrap()
}

#[test]
fn simple_null_statistic() {
    let f = binomial_walk(5).unwrap();
    let theta0 = 0.3;
    let rep = model_matrices_at(&f, &[theta0], 0.5).unwrap();
    let est = fit(&f, &f.matrix(&[theta0]).unwrap(), 3000, 11, 0.5);
    let w = wald_composite(&est, &rep, &Constraint::simple(vec![theta0]), 3000.0).unwrap();
    let direct = 3000.0 * (est.theta_hat[0] - theta0).powi(2) / rep.sigma[(0, 0)];
    assert!((w.statistic - direct).abs() < 1e-9 * direct.max(1.0));
    assert_eq!(w.df, 1);
    assert_eq!(w.reject_at.len(), 3);
    assert!((w.p_value - (1.0 - chi2_cdf(w.statistic, 1.0).unwrap())).abs() < 1e-15);
}

#[test]
fn wald_size_under_the_null() {
    let f = binomial_walk(5).unwrap();
    let theta0 = 0.3;
    let p = f.matrix(&[theta0]).unwrap();
    let c = Constraint::simple(vec![theta0]);
    for alpha in [0.0, 0.5] {
        let rep = model_matrices_at(&f, &[theta0], alpha).unwrap();
        let reps = 400;
        let rejected = (0..reps)
            .filter(|&r| {
                let est = fit(&f, &p, 500, 1000 + r, alpha);
                wald_composite(&est, &rep, &c, 500.0).unwrap().rejects(0.05)
            })
            .count();
        let rate = rejected as f64 / reps as f64;
        assert!((0.02..=0.09).contains(&rate), "α={alpha}: size {rate}");
    }
}

#[test]
fn bernoulli_laplace_null_and_alternative() {
    let k = 5;
    let family = crate::models::multi_binomial_walk(k).unwrap();
    let rep = bernoulli_laplace_report(k, 0.3).unwrap();
    for u in 0..k - 2 {
        for v in 0..k - 2 {
            if u != v {
                assert!(rep.sigma[(u, v)].abs() < 1e-10);
            }
        }
    }
    let p = bernoulli_laplace(k).unwrap();
    let est = fit(&family, &p, 5000, 3, 0.3);
    let w = wald_bernoulli_laplace(&est, &rep, 5000.0, k).unwrap();
    assert_eq!(w.df, 3);
    assert!(w.statistic < 20.0);

    let mut alt = bernoulli_laplace_theta(k);
    alt[1] = 0.35;
    let est = fit(&family, &family.matrix(&alt).unwrap(), 5000, 3, 0.3);
    let w = wald_bernoulli_laplace(&est, &rep, 5000.0, k).unwrap();
    assert!(w.rejects(0.01), "{}", w.statistic);
}

#[test]
fn two_sample_basics() {
    let f = reflecting_walk(5).unwrap();
    let p = f.matrix(&[0.4]).unwrap();
    let a = fit(&f, &p, 2000, 1, 0.5);
    let b = fit(&f, &p, 3000, 2, 0.5);
    let ra = model_matrices_at(&f, &a.theta_hat, 0.5).unwrap();
    let rb = model_matrices_at(&f, &b.theta_hat, 0.5).unwrap();
    let ab = two_sample(&a, &b, &ra, &rb, 2000.0, 3000.0).unwrap();
    let ba = two_sample(&b, &a, &rb, &ra, 3000.0, 2000.0).unwrap();
    assert!((ab.statistic - ba.statistic).abs() < 1e-9 * ab.statistic.max(1.0));
    let same = two_sample(&a, &a, &ra, &ra, 2000.0, 2000.0).unwrap();
    assert_eq!(same.statistic, 0.0);
    assert_eq!(same.p_value, 1.0);

    let c = fit(&f, &f.matrix(&[0.55]).unwrap(), 3000, 2, 0.5);
    let rc = model_matrices_at(&f, &c.theta_hat, 0.5).unwrap();
    assert!(two_sample(&a, &c, &ra, &rc, 2000.0, 3000.0).unwrap().rejects(0.01));
}

#[test]
fn second_order_influence_matches_curvature() {
    let f = reflecting_walk(5).unwrap();
    let theta0 = [0.4];
    let alpha = 0.5;
    let pi = f.matrix(&theta0).unwrap();
    let w0 = model_stationary(&f, &theta0).unwrap();
    let t = sensitivity(&f, &theta0, &pi, &w0, alpha).unwrap().t;
    let ifv = influence_function(&f, &theta0, &pi, &w0, &t, alpha).unwrap();

    let c = Constraint::simple(theta0.to_vec());
    let rep = model_matrices_at(&f, &theta0, alpha).unwrap();
    let star = sigma_star(&c, &theta0, &rep.sigma).unwrap();
    let if2 = test_if2(&c, &theta0, &ifv, &star).unwrap();

    let functional = |eps: f64| {
        let mut pe = &pi * (1.0 - eps);
        for (i, &j) in t.iter().enumerate() {
            pe[(i, j)] += eps;
        }
        let emp = EmpiricalTransition::from_population(pe, w0.clone()).unwrap();
        let cfg = DpdConfig { tol_grad: 1e-14, ..DpdConfig::with_alpha(alpha) };
        let est = estimate(&f, &emp, &cfg).unwrap();
        let h = c.h(&est.theta_hat).unwrap();
        h.dot(&(star.clone().try_inverse().unwrap() * &h))
    };
    let eps = 1e-3;
    let curvature = (functional(eps) + functional(-eps) - 2.0 * functional(0.0)) / (eps * eps);
    assert!((curvature - if2).abs() < 1e-2 * if2, "{curvature} vs {if2}");
    // the first-order influence vanishes
    assert!(functional(1e-5) < 1e-8);
}
