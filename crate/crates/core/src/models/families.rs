use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::monomial::{Cell, FamilyKind, MonomialFamily};
use super::{ParametricFamily, BOUNDARY_DELTA};
use crate::error::{Error, Result};

/// Rating labels of the clubbed credit chain, best to worst, default last.
pub const CREDIT_STATES: [&str; 8] = ["AAA", "AA", "A", "BBB", "BB", "B", "CCC/C", "D"];

fn need_k(k: usize, min: usize, name: &str) -> Result<()> {
    if k < min {
        Err(Error::InvalidArgument(format!("{name} needs K >= {min}, got {k}")))
    } else {
        Ok(())
    }
}

/// Interior row i moves to i−1, i, i+1 with Bin(2, θ_u) probabilities.
fn bin2_row(i: usize, u: usize) -> [Cell; 3] {
    [
        Cell::mono(i, i - 1, 1.0, u, 0, 2),
        Cell::mono(i, i, 2.0, u, 1, 1),
        Cell::mono(i, i + 1, 1.0, u, 2, 0),
    ]
}

fn reflecting_ends(k: usize) -> [Cell; 2] {
    [Cell::constant(0, 1, 1.0), Cell::constant(k - 1, k - 2, 1.0)]
}

/// Random walk on {1..K} with reflecting ends and Bin(2, θ) interior moves.
pub fn binomial_walk(k: usize) -> Result<MonomialFamily> {
    need_k(k, 3, "binomial-walk")?;
    let mut cells = reflecting_ends(k).to_vec();
    for i in 1..k - 1 {
        cells.extend(bin2_row(i, 0));
    }
    MonomialFamily::new(format!("binomial-walk(K={k})"), k, vec![(0.0, 1.0)], cells, FamilyKind::BinomialWalk)
}

/// The binomial walk with a separate θ_i for each interior state i = 2..K−1.
pub fn multi_binomial_walk(k: usize) -> Result<MonomialFamily> {
    need_k(k, 3, "multi-binomial-walk")?;
    let mut cells = reflecting_ends(k).to_vec();
    for i in 1..k - 1 {
        cells.extend(bin2_row(i, i - 1));
    }
    MonomialFamily::new(
        format!("multi-binomial-walk(K={k})"),
        k,
        vec![(0.0, 1.0); k - 2],
        cells,
        FamilyKind::MultiBinomialWalk,
    )
}

/// Chain-binomial epidemic on {0..K} uninfected individuals: from i, the
/// number still uninfected is Bin(i, 1 − θ). State s has index s.
pub fn greenwood(k: usize) -> Result<MonomialFamily> {
    need_k(k, 2, "greenwood")?;
    let mut cells = vec![Cell::constant(0, 0, 1.0)];
    for i in 1..=k {
        for j in 0..=i {
            cells.push(Cell::mono(i, j, binom(i, j), 0, (i - j) as i32, j as i32));
        }
    }
    MonomialFamily::new(
        format!("greenwood(K={k})"),
        k + 1,
        vec![(BOUNDARY_DELTA, 1.0 - BOUNDARY_DELTA)],
        cells,
        FamilyKind::Greenwood,
    )
}

fn binom(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64).round()
}

/// Simple random walk with reflecting ends: interior rows move down with
/// probability 1 − θ and up with probability θ.
pub fn reflecting_walk(k: usize) -> Result<MonomialFamily> {
    need_k(k, 3, "reflecting-walk")?;
    let mut cells = reflecting_ends(k).to_vec();
    for i in 1..k - 1 {
        cells.push(Cell::mono(i, i - 1, 1.0, 0, 0, 1));
        cells.push(Cell::mono(i, i + 1, 1.0, 0, 1, 0));
    }
    MonomialFamily::new(format!("reflecting-walk(K={k})"), k, vec![(0.0, 1.0)], cells, FamilyKind::ReflectingWalk)
}

/// Clubbed rating chain on AAA..CCC/C, D. Each of AA..CCC/C moves up one
/// state with (1 − θ_i)², stays with θ_i², and moves down one state with
/// 2θ_i(1 − θ_i). AAA stays put and D absorbs; neither is estimated.
pub fn credit_clubbed() -> Result<MonomialFamily> {
    let k = CREDIT_STATES.len();
    let mut cells = vec![Cell::constant(0, 0, 1.0), Cell::constant(k - 1, k - 1, 1.0)];
    for i in 1..k - 1 {
        let u = i - 1;
        cells.push(Cell::mono(i, i - 1, 1.0, u, 0, 2));
        cells.push(Cell::mono(i, i, 1.0, u, 2, 0));
        cells.push(Cell::mono(i, i + 1, 2.0, u, 1, 1));
    }
    MonomialFamily::new("credit-clubbed", k, vec![(0.0, 1.0); k - 2], cells, FamilyKind::CreditClubbed)
}

/// θ_i = (K − i)/(K − 1) for the interior states i = 2..K−1.
pub fn bernoulli_laplace_theta(k: usize) -> Vec<f64> {
    (2..k).map(|i| (k - i) as f64 / (k - 1) as f64).collect()
}

/// Bernoulli–Laplace diffusion matrix: row i is Bin(2, (K − i)/(K − 1))
/// over i−1, i, i+1.
pub fn bernoulli_laplace(k: usize) -> Result<DMatrix<f64>> {
    need_k(k, 2, "bernoulli-laplace")?;
    let km1 = (k - 1) as f64;
    let mut p = DMatrix::zeros(k, k);
    for i in 1..=k {
        let up = ((k - i) as f64 / km1).powi(2);
        let down = ((i - 1) as f64 / km1).powi(2);
        let stay = 2.0 * ((k - i) as f64 / km1) * ((i - 1) as f64 / km1);
        let r = i - 1;
        if r > 0 {
            p[(r, r - 1)] = down;
        }
        p[(r, r)] = stay;
        if r + 1 < k {
            p[(r, r + 1)] = up;
        }
    }
    Ok(p)
}

/// Named built-in family plus its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyId {
    BinomialWalk(usize),
    MultiBinomialWalk(usize),
    Greenwood(usize),
    BernoulliLaplace(usize),
    ReflectingWalk(usize),
    CreditClubbed,
}

impl FamilyId {
    /// Parses a family name; `k` is required for every family except credit.
    pub fn parse(name: &str, k: Option<usize>) -> Result<Self> {
        let need = || k.ok_or_else(|| Error::InvalidArgument(format!("family `{name}` needs K")));
        Ok(match name {
            "binomial-walk" => Self::BinomialWalk(need()?),
            "multi-binomial-walk" => Self::MultiBinomialWalk(need()?),
            "greenwood" => Self::Greenwood(need()?),
            "bernoulli-laplace" => Self::BernoulliLaplace(need()?),
            "reflecting-walk" => Self::ReflectingWalk(need()?),
            "credit-clubbed" => Self::CreditClubbed,
            other => return Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        })
    }

    pub fn slug(&self) -> &'static str {
        match self {
            Self::BinomialWalk(_) => "binomial-walk",
            Self::MultiBinomialWalk(_) => "multi-binomial-walk",
            Self::Greenwood(_) => "greenwood",
            Self::BernoulliLaplace(_) => "bernoulli-laplace",
            Self::ReflectingWalk(_) => "reflecting-walk",
            Self::CreditClubbed => "credit-clubbed",
        }
    }

    /// The family used for fitting. Bernoulli–Laplace data are fitted with
    /// the multi-binomial walk, which contains it.
    pub fn build(&self) -> Result<MonomialFamily> {
        match *self {
            Self::BinomialWalk(k) => binomial_walk(k),
            Self::MultiBinomialWalk(k) | Self::BernoulliLaplace(k) => multi_binomial_walk(k),
            Self::Greenwood(k) => greenwood(k),
            Self::ReflectingWalk(k) => reflecting_walk(k),
            Self::CreditClubbed => credit_clubbed(),
        }
    }

    /// Transition matrix at θ; Bernoulli–Laplace ignores θ.
    pub fn matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        match *self {
            Self::BernoulliLaplace(k) => bernoulli_laplace(k),
            _ => self.build()?.matrix(theta),
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BinomialWalk(k)
            | Self::MultiBinomialWalk(k)
            | Self::Greenwood(k)
            | Self::BernoulliLaplace(k)
            | Self::ReflectingWalk(k) => write!(f, "{}:{k}", self.slug()),
            Self::CreditClubbed => f.write_str(self.slug()),
        }
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    /// Accepts `name` or `name:K`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((name, k)) => {
                let k = k.parse().map_err(|_| Error::InvalidArgument(format!("bad K in `{s}`")))?;
                Self::parse(name, Some(k))
            }
            None => Self::parse(s, None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary_distribution;
    use crate::models::score_matrix;
    use approx::assert_relative_eq;

    fn all_families() -> Vec<MonomialFamily> {
        vec![
            binomial_walk(6).unwrap(),
            multi_binomial_walk(5).unwrap(),
            greenwood(4).unwrap(),
            reflecting_walk(5).unwrap(),
            credit_clubbed().unwrap(),
        ]
    }

    #[test]
    fn support_sizes() {
        assert_eq!(binomial_walk(10).unwrap().support().len(), 3 * 10 - 4);
        assert_eq!(greenwood(9).unwrap().support().len(), 10 * 11 / 2);
        assert_eq!(reflecting_walk(7).unwrap().support().len(), 2 * 6);
    }

    #[test]
    fn binomial_walk_boundary_and_symmetry() {
        let f = binomial_walk(5).unwrap();
        let p0 = f.matrix(&[0.0]).unwrap();
        for i in 1..4 {
            assert_eq!(p0[(i, i - 1)], 1.0);
        }
        let p = f.matrix(&[0.5]).unwrap();
        for i in 1..4 {
            assert_eq!((p[(i, i - 1)], p[(i, i)], p[(i, i + 1)]), (0.25, 0.5, 0.25));
        }
        assert!(matches!(f.matrix(&[1.2]), Err(Error::ParameterOutOfBounds { .. })));
    }

    #[test]
    fn multi_binomial_reduces_and_evaluates() {
        let single = binomial_walk(6).unwrap().matrix(&[0.3]).unwrap();
        let multi = multi_binomial_walk(6).unwrap().matrix(&[0.3; 4]).unwrap();
        assert_eq!(single, multi);
        let p = multi_binomial_walk(5).unwrap().matrix(&[0.2, 0.5, 0.8]).unwrap();
        assert_relative_eq!(p[(1, 0)], 0.64, epsilon = 1e-15);
        assert_relative_eq!(p[(1, 1)], 0.32, epsilon = 1e-15);
        assert_relative_eq!(p[(1, 2)], 0.04, epsilon = 1e-15);
        assert_relative_eq!(p[(3, 2)], 0.04, epsilon = 1e-15);
        assert_relative_eq!(p[(3, 4)], 0.64, epsilon = 1e-15);
    }

    #[test]
    fn greenwood_rows() {
        let f = greenwood(9).unwrap();
        let p = f.matrix(&[0.25]).unwrap();
        assert_relative_eq!(p[(2, 0)], 0.0625, epsilon = 1e-15);
        assert_relative_eq!(p[(2, 1)], 0.375, epsilon = 1e-15);
        assert_relative_eq!(p[(2, 2)], 0.5625, epsilon = 1e-15);
        let q = f.matrix(&[BOUNDARY_DELTA]).unwrap();
        for i in 0..10 {
            assert!((q[(i, i)] - 1.0).abs() < 1e-7);
        }
        assert!(f.matrix(&[0.0]).is_err());
    }

    #[test]
    fn reflecting_walk_interior() {
        let p = reflecting_walk(4).unwrap().matrix(&[0.5]).unwrap();
        assert_eq!((p[(1, 0)], p[(1, 1)], p[(1, 2)]), (0.5, 0.0, 0.5));
    }

    #[test]
    fn credit_certain_steady() {
        let p = credit_clubbed().unwrap().matrix(&[1.0; 6]).unwrap();
        for i in 1..7 {
            assert_eq!((p[(i, i - 1)], p[(i, i)], p[(i, i + 1)]), (0.0, 1.0, 0.0));
        }
    }

    #[test]
    fn bernoulli_laplace_small_cases() {
        let p = bernoulli_laplace(2).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        for k in 3..=10 {
            let bl = bernoulli_laplace(k).unwrap();
            let mb = multi_binomial_walk(k).unwrap().matrix(&bernoulli_laplace_theta(k)).unwrap();
            assert!((bl - mb).abs().max() < 1e-15, "K={k}");
        }
        for k in 3..=20 {
            let bl = bernoulli_laplace(k).unwrap();
            for i in 0..k {
                assert!((bl.row(i).sum() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(bernoulli_laplace_theta(5), vec![0.75, 0.5, 0.25]);
    }

    #[test]
    fn rows_sum_to_one_and_jacobian_rows_cancel() {
        for f in all_families() {
            let theta: Vec<f64> = (0..f.dim()).map(|u| 0.2 + 0.1 * (u % 6) as f64).collect();
            let p = f.matrix(&theta).unwrap();
            for i in 0..f.num_states() {
                assert!((p.row(i).sum() - 1.0).abs() < 1e-10, "{} row {i}", f.name());
            }
            let j = f.jacobian(&theta).unwrap();
            let mut sums = vec![vec![0.0; f.dim()]; f.num_states()];
            for (r, &(i, _)) in f.support().iter().enumerate() {
                for u in 0..f.dim() {
                    sums[i][u] += j[(r, u)];
                }
            }
            assert!(sums.iter().flatten().all(|s| s.abs() < 1e-12), "{}", f.name());
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        for f in all_families() {
            let theta: Vec<f64> = (0..f.dim()).map(|u| 0.3 + 0.07 * u as f64).collect();
            let j = f.jacobian(&theta).unwrap();
            for u in 0..f.dim() {
                let h = 1e-6;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[u] += h;
                tm[u] -= h;
                let pp = f.support_probs(&tp).unwrap();
                let pm = f.support_probs(&tm).unwrap();
                for r in 0..pp.len() {
                    let fd = (pp[r] - pm[r]) / (2.0 * h);
                    assert!((fd - j[(r, u)]).abs() <= 1e-5 * j[(r, u)].abs().max(1e-3), "{}", f.name());
                }
            }
        }
    }

    #[test]
    fn analytic_log_hessian_matches_differences() {
        for f in all_families() {
            let theta: Vec<f64> = (0..f.dim()).map(|u| 0.35 + 0.05 * u as f64).collect();
            let exact = f.log_hessian(&theta).unwrap().unwrap();
            let h = 1e-6;
            for u in 0..f.dim() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[u] += h;
                tm[u] -= h;
                let (_, sp) = score_matrix(&f, &tp).unwrap();
                let (_, sm) = score_matrix(&f, &tm).unwrap();
                for (r, m) in exact.iter().enumerate() {
                    for v in 0..f.dim() {
                        let fd = (sp[(r, v)] - sm[(r, v)]) / (2.0 * h);
                        assert!((fd - m[(v, u)]).abs() < 1e-4 * m[(v, u)].abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_stationary_matches_solver() {
        let cases: Vec<(MonomialFamily, Vec<f64>)> = vec![
            (binomial_walk(10).unwrap(), vec![0.25]),
            (binomial_walk(10).unwrap(), vec![0.5]),
            (binomial_walk(7).unwrap(), vec![0.8]),
            (multi_binomial_walk(5).unwrap(), vec![0.3, 0.6, 0.4]),
            (reflecting_walk(6).unwrap(), vec![0.3]),
        ];
        for (f, theta) in cases {
            let closed = f.stationary(&theta).unwrap().unwrap();
            let solved = stationary_distribution(&f.matrix(&theta).unwrap()).unwrap();
            assert!(solved.unique);
            assert!((closed - solved.pi).abs().max() < 1e-10, "{} at {theta:?}", f.name());
        }
    }

    #[test]
    fn bernoulli_laplace_stationary_k5() {
        let st = stationary_distribution(&bernoulli_laplace(5).unwrap()).unwrap();
        let expected = [1.0, 16.0, 36.0, 16.0, 1.0];
        for (v, e) in st.pi.iter().zip(expected) {
            assert!((v - e / 70.0).abs() < 1e-12);
        }
    }

    #[test]
    fn greenwood_is_absorbing() {
        let st = stationary_distribution(&greenwood(4).unwrap().matrix(&[0.3]).unwrap()).unwrap();
        assert!((st.pi[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn family_ids_round_trip() {
        for s in ["binomial-walk:10", "greenwood:9", "credit-clubbed", "bernoulli-laplace:5"] {
            let id: FamilyId = s.parse().unwrap();
            assert_eq!(id.to_string(), s);
        }
        assert!("binomial-walk".parse::<FamilyId>().is_err());
        assert!("nope:3".parse::<FamilyId>().is_err());
    }
}
