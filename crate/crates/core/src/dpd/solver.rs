//! Bounded minimization for smooth low-dimensional objectives.
//!
//! One-dimensional problems: a grid scan, golden-section search around every
//! grid-local minimum, then a safeguarded Newton polish on the derivative.
//! Higher dimensions: projected Newton from a grid of starts, with the Hessian
//! built from central differences of the analytic gradient.

use nalgebra::{DMatrix, DVector};

/// A differentiable objective on a box.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn bounds(&self) -> &[(f64, f64)];
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol_grad: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    pub multistart: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub value: f64,
    /// ‖∇‖_∞ over coordinates not pinned at a bound.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub at_boundary: Vec<bool>,
}

/// Most starting points tried by the multistart search.
const MAX_STARTS: usize = 1000;
/// Starts kept after screening a larger grid by objective value.
const SCREENED_STARTS: usize = 64;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Smallest value wins; near-ties go to the lexicographically smaller θ.
fn better(a: &Minimum, b: &Minimum) -> bool {
    let scale = a.value.abs().max(b.value.abs()).max(1.0);
    if (a.value - b.value).abs() > 1e-12 * scale {
        return a.value < b.value;
    }
    a.theta.partial_cmp(&b.theta) == Some(std::cmp::Ordering::Less)
}

fn pick_best(cands: Vec<Minimum>) -> Option<Minimum> {
    let mut best: Option<Minimum> = None;
    for c in cands {
        best = match best {
            None => Some(c),
            Some(b) => Some(if better(&c, &b) { c } else { b }),
        };
    }
    best
}

pub fn minimize(obj: &dyn Objective, cfg: &SolverConfig) -> Minimum {
    if obj.dim() == 1 {
        let (lo, hi) = obj.bounds()[0];
        return minimize_scalar(|t| obj.value(&[t]), |t| obj.gradient(&[t])[0], lo, hi, cfg);
    }
    minimize_box(obj, cfg)
}

/// Global minimum of a scalar function on [lo, hi].
pub fn minimize_scalar(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    cfg: &SolverConfig,
) -> Minimum {
    let f = |t: f64| finite_or_inf(f(t));
    let n = cfg.multistart.max(3) + 1;
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut cands = Vec::new();
    for k in 0..=n {
        let left = if k == 0 { f64::INFINITY } else { fs[k - 1] };
        let right = if k == n { f64::INFINITY } else { fs[k + 1] };
        if fs[k] <= left && fs[k] <= right {
            let a = xs[k.saturating_sub(1)];
            let b = xs[(k + 1).min(n)];
            cands.push(local_scalar(&f, &g, a, b, lo, hi, cfg));
        }
    }
    if cands.is_empty() {
        // every grid value is infinite; report the lower bound, unconverged
        let value = fs[0];
        return Minimum {
            theta: vec![lo],
            value,
            residual: f64::INFINITY,
            iterations: 0,
            converged: false,
            at_boundary: vec![true],
        };
    }
    pick_best(cands).expect("non-empty")
}

fn local_scalar(
    f: &impl Fn(f64) -> f64,
    g: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    lo: f64,
    hi: f64,
    cfg: &SolverConfig,
) -> Minimum {
    let mut iterations = 0;
    // golden section down to a width where the objective stops resolving
    let width_goal = 1e-6 * (hi - lo).max(1e-300);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > width_goal && iterations < cfg.max_iter {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    // widen by one golden step so the true minimizer stays inside
    let pad = (b - a).max(width_goal);
    let (a, b) = ((a - pad).max(lo), (b + pad).min(hi));
    let (t, extra, bracketed) = polish_root(g, a, b, cfg);
    iterations += extra;
    finish_scalar(f, g, t, lo, hi, bracketed, iterations, cfg)
}

/// Safeguarded Newton on g over [a, b]. Returns the point, the iteration count
/// and whether a sign change localized the root to within tol_step.
fn polish_root(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, cfg: &SolverConfig) -> (f64, usize, bool) {
    let (mut ga, mut gb) = (g(a), g(b));
    if !(ga < 0.0 && gb > 0.0) {
        // no interior sign change: the minimizer is at whichever end the
        // gradient points away from, or the midpoint when flat
        let t = if ga >= 0.0 && gb >= 0.0 {
            a
        } else if ga <= 0.0 && gb <= 0.0 {
            b
        } else {
            0.5 * (a + b)
        };
        return (t, 0, false);
    }
    let mut t = 0.5 * (a + b);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let gt = g(t);
        if gt.abs() <= cfg.tol_grad * 1e-3 {
            return (t, iterations, true);
        }
        if gt < 0.0 {
            a = t;
            ga = gt;
        } else {
            b = t;
            gb = gt;
        }
        if b - a <= cfg.tol_step * 1e-2 {
            break;
        }
        let h = 1e-7 * t.abs().max(1.0);
        let slope = (g((t + h).min(b)) - g((t - h).max(a))) / ((t + h).min(b) - (t - h).max(a));
        let newton = t - gt / slope;
        t = if slope > 0.0 && newton > a && newton < b {
            newton
        } else {
            // secant on the bracket, bisection if that stalls
            let s = a - ga * (b - a) / (gb - ga);
            if s > a && s < b && (s - t).abs() < 0.5 * (b - a) {
                s
            } else {
                0.5 * (a + b)
            }
        };
    }
    let t = if g(a).abs() < g(b).abs() { a } else { b };
    (t, iterations, b - a <= cfg.tol_step)
}

#[allow(clippy::too_many_arguments)]
fn finish_scalar(
    f: &impl Fn(f64) -> f64,
    g: &impl Fn(f64) -> f64,
    t: f64,
    lo: f64,
    hi: f64,
    bracketed: bool,
    iterations: usize,
    cfg: &SolverConfig,
) -> Minimum {
    let gt = g(t);
    let at_lo = t <= lo && gt >= 0.0;
    let at_hi = t >= hi && gt <= 0.0;
    let binding = at_lo || at_hi;
    let residual = if binding { 0.0 } else { gt.abs() };
    Minimum {
        theta: vec![t],
        value: f(t),
        residual,
        iterations,
        converged: binding || residual <= cfg.tol_grad || bracketed,
        at_boundary: vec![binding],
    }
}

fn project(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, &(lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(lo, hi);
    }
}

fn start_points(bounds: &[(f64, f64)], per_coord: usize) -> Vec<Vec<f64>> {
    let m = per_coord.max(1);
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| (0..m).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / m as f64).collect())
        .collect();
    let mut pts = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(pts.len() * axis.len());
        for p in &pts {
            for &x in axis {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
            if next.len() > 10 * MAX_STARTS * axis.len() {
                break;
            }
        }
        pts = next;
    }
    pts
}

fn minimize_box(obj: &dyn Objective, cfg: &SolverConfig) -> Minimum {
    let bounds = obj.bounds().to_vec();
    let mut starts = start_points(&bounds, cfg.multistart);
    if starts.len() > MAX_STARTS {
        let mut scored: Vec<(f64, Vec<f64>)> =
            starts.into_iter().map(|s| (finite_or_inf(obj.value(&s)), s)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.partial_cmp(&b.1).unwrap()));
        starts = scored.into_iter().take(SCREENED_STARTS).map(|(_, s)| s).collect();
    }
    let cands: Vec<Minimum> = starts.into_iter().map(|s| projected_newton(obj, s, &bounds, cfg)).collect();
    pick_best(cands).expect("at least one start")
}

fn active_set(theta: &[f64], grad: &[f64], bounds: &[(f64, f64)]) -> Vec<bool> {
    theta
        .iter()
        .zip(grad)
        .zip(bounds)
        .map(|((&t, &g), &(lo, hi))| (t <= lo && g > 0.0) || (t >= hi && g < 0.0))
        .collect()
}

fn fd_hessian(obj: &dyn Objective, theta: &[f64], bounds: &[(f64, f64)], free: &[usize]) -> DMatrix<f64> {
    let n = free.len();
    let mut h = DMatrix::zeros(n, n);
    for (col, &v) in free.iter().enumerate() {
        let step = 1e-6 * theta[v].abs().max(1.0);
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[v] = (tp[v] + step).min(bounds[v].1);
        tm[v] = (tm[v] - step).max(bounds[v].0);
        let span = tp[v] - tm[v];
        let gp = obj.gradient(&tp);
        let gm = obj.gradient(&tm);
        for (row, &u) in free.iter().enumerate() {
            h[(row, col)] = (gp[u] - gm[u]) / span;
        }
    }
    (&h + h.transpose()) * 0.5
}

fn projected_newton(obj: &dyn Objective, mut theta: Vec<f64>, bounds: &[(f64, f64)], cfg: &SolverConfig) -> Minimum {
    project(&mut theta, bounds);
    let mut value = finite_or_inf(obj.value(&theta));
    let mut iterations = 0;
    let mut step_small = false;
    loop {
        let grad = obj.gradient(&theta);
        let active = active_set(&theta, &grad, bounds);
        let free: Vec<usize> = (0..theta.len()).filter(|&u| !active[u]).collect();
        let residual = free.iter().map(|&u| grad[u].abs()).fold(0.0, f64::max);
        if residual <= cfg.tol_grad || step_small || iterations >= cfg.max_iter {
            let at_boundary = theta
                .iter()
                .zip(bounds)
                .zip(&active)
                .map(|((&t, &(lo, hi)), &a)| a || ((t <= lo || t >= hi) && grad.is_empty()))
                .collect();
            return Minimum {
                theta,
                value,
                residual,
                iterations,
                converged: residual <= cfg.tol_grad || step_small,
                at_boundary,
            };
        }
        iterations += 1;
        let g_free = DVector::from_iterator(free.len(), free.iter().map(|&u| grad[u]));
        let hess = fd_hessian(obj, &theta, bounds, &free);
        let dir = newton_direction(&hess, &g_free);
        // backtracking along the projected path
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = theta.clone();
            for (k, &u) in free.iter().enumerate() {
                trial[u] += tau * dir[k];
            }
            project(&mut trial, bounds);
            let fv = finite_or_inf(obj.value(&trial));
            let decrease: f64 = free.iter().map(|&u| grad[u] * (trial[u] - theta[u])).sum();
            if fv <= value + 1e-4 * decrease || (fv <= value && decrease.abs() < 1e-300) {
                accepted = Some((trial, fv));
                break;
            }
            tau *= 0.5;
        }
        match accepted {
            Some((trial, fv)) => {
                let step = trial.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                step_small = step <= cfg.tol_step;
                theta = trial;
                value = fv;
            }
            None => step_small = true,
        }
    }
}

/// Newton direction, damped towards steepest descent until the system is
/// positive definite.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    let scale = hess.diagonal().iter().map(|v| v.abs()).fold(1e-12, f64::max);
    let mut lambda = 0.0;
    for _ in 0..30 {
        let damped = hess + DMatrix::identity(n, n) * lambda;
        if let Some(ch) = damped.cholesky() {
            return -ch.solve(grad);
        }
        lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
    }
    -grad / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolverConfig {
        SolverConfig { tol_grad: 1e-10, tol_step: 1e-12, max_iter: 200, multistart: 9 }
    }

    #[test]
    fn scalar_interior_minimum() {
        let m = minimize_scalar(|t| (t - 0.3).powi(2), |t| 2.0 * (t - 0.3), 0.0, 1.0, &cfg());
        assert!((m.theta[0] - 0.3).abs() < 1e-10);
        assert!(m.converged && !m.at_boundary[0]);
    }

    #[test]
    fn scalar_boundary_minimum() {
        let m = minimize_scalar(|t| t, |_| 1.0, 0.0, 1.0, &cfg());
        assert_eq!(m.theta[0], 0.0);
        assert!(m.converged && m.at_boundary[0]);
    }

    #[test]
    fn scalar_picks_global_of_two_wells() {
        // wells near 0.2 (shallower) and 0.8 (deeper)
        let f = |t: f64| (t - 0.2).powi(2) * (t - 0.8).powi(2) - 0.01 * t;
        let g = |t: f64| 2.0 * (t - 0.2) * (t - 0.8).powi(2) + 2.0 * (t - 0.2).powi(2) * (t - 0.8) - 0.01;
        let m = minimize_scalar(f, g, 0.0, 1.0, &cfg());
        assert!(m.theta[0] > 0.7);
    }

    struct Quad;
    impl Objective for Quad {
        fn dim(&self) -> usize {
            2
        }
        fn bounds(&self) -> &[(f64, f64)] {
            &[(0.0, 1.0), (0.0, 1.0)]
        }
        fn value(&self, t: &[f64]) -> f64 {
            (t[0] - 0.4).powi(2) + 2.0 * (t[1] + 0.5).powi(2) + 0.5 * t[0] * t[1]
        }
        fn gradient(&self, t: &[f64]) -> Vec<f64> {
            vec![2.0 * (t[0] - 0.4) + 0.5 * t[1], 4.0 * (t[1] + 0.5) + 0.5 * t[0]]
        }
    }

    #[test]
    fn box_minimum_with_active_bound() {
        let m = minimize(&Quad, &cfg());
        assert!((m.theta[0] - 0.4).abs() < 1e-8);
        assert_eq!(m.theta[1], 0.0);
        assert_eq!(m.at_boundary, vec![false, true]);
        assert!(m.converged);
    }
}
