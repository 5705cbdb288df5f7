use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

fn check_df(df: f64) -> Result<()> {
    if df > 0.0 && df.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("degrees of freedom must be positive, got {df}")))
    }
}

/// P(χ²_df ≤ x) as the regularized lower incomplete gamma P(df/2, x/2).
pub fn chi2_cdf(x: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!("chi-square argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(df / 2.0, x / 2.0))
}

fn chi2_pdf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = df / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * 2f64.ln() - ln_gamma(k)).exp()
}

/// Inverse of `chi2_cdf` by bracketing and safeguarded Newton steps.
pub fn chi2_quantile(p: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability must be in (0,1), got {p}")));
    }
    let mut lo = 0.0;
    let mut hi = df.max(1.0);
    while chi2_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = chi2_cdf(x, df)? - p;
        if f.abs() < 1e-14 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = chi2_pdf(x, df);
        let newton = x - f / dens;
        x = if dens > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(x)
}

/// Noncentral chi-square CDF as a Poisson(δ/2) mixture of central CDFs with
/// df + 2j degrees of freedom, summed until the Poisson tail is below 1e-12.
pub fn noncentral_chi2_cdf(x: f64, df: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("noncentrality must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return chi2_cdf(x, df);
    }
    chi2_cdf(x, df)?;
    let lambda = delta / 2.0;
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut j = 0u32;
    loop {
        let log_w = -lambda + j as f64 * lambda.ln() - ln_gamma(j as f64 + 1.0);
        let w = log_w.exp();
        total += w * chi2_cdf(x, df + 2.0 * j as f64)?;
        mass += w;
        if (j as f64 > lambda && 1.0 - mass < 1e-12) || j > 100_000 {
            break;
        }
        j += 1;
    }
    Ok(total.clamp(0.0, 1.0))
}
