//! Sampled (4,2) hypercontractivity of the noise semigroup on the band
//! spanned by the trivial and standard representations.
//!
//! Samples are mean-zero, so `T_t f = σf` and
//! `‖T_t f‖₄⁴ / ‖f‖₂⁴ = σ⁴ E f⁴ / (E f²)²`, a scale-free exact rational.
//! A violation is a sample whose ratio exceeds 1.

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    big_to_f64, build_tables, m_pow, mean_and_norm2_from, moments_of_ints, q_frac, q_int,
    random_equal_margin, random_sparse_equal_margin, MomentTables, BigQ,
};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Fixed noise levels reported alongside `σ = m^{-1/2}`.
pub const SIGMA_GRID: [(i64, i64); 6] = [(1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)];

const MAX_M: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sigma {
    /// `σ = m^{-1/2}`; only `σ⁴ = 1/m²` is ever needed.
    InverseSqrtM,
    Value(BigQ),
}

impl Sigma {
    /// `"auto"` for `m^{-1/2}`, otherwise an integer or `p/q` in `[0, 1]`.
    pub fn parse(text: &str) -> Result<Sigma> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("auto") {
            return Ok(Sigma::InverseSqrtM);
        }
        let bad = || Error::Input(format!("noise level {text:?} is not \"auto\" or p/q"));
        let (p, q) = text.split_once('/').unwrap_or((text, "1"));
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        let sigma = Sigma::Value(q_frac(p, q));
        sigma.check()?;
        Ok(sigma)
    }

    fn fourth_power(&self, m: usize) -> BigQ {
        match self {
            Sigma::InverseSqrtM => m_pow(m, -2),
            Sigma::Value(s) => num_traits::pow(s.clone(), 4),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Sigma::InverseSqrtM => "m^-1/2".to_string(),
            Sigma::Value(s) => s.to_string(),
        }
    }

    fn check(&self) -> Result<()> {
        if let Sigma::Value(s) = self {
            if s < &BigQ::zero() || s > &BigQ::one() {
                return Err(Error::Precondition(format!(
                    "noise parameter must lie in [0, 1], got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperCheck {
    pub m: usize,
    pub sigma: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub max_ratio_exact: String,
    pub violations: usize,
    /// Normalized moment bounds held on every sample.
    pub moment_bounds_hold: bool,
    /// Products `f(x)g(y)` of consecutive samples on two voters, checked
    /// against `‖F‖₄⁴ ≤ σ⁻⁸ ‖F‖₂⁴`.
    pub product_pairs: usize,
    pub product_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperSweep {
    pub seed: u64,
    pub samples: usize,
    pub ms: Vec<usize>,
    pub at_inverse_sqrt: Vec<HyperCheck>,
    pub grid: Vec<HyperCheck>,
    /// Least swept m from which every larger swept m has no violation at
    /// `σ = m^{-1/2}`.
    pub empirical_m0: Option<usize>,
    pub violations_nonincreasing: bool,
}

struct SampleStat {
    /// `E f⁴ / (E f²)²`
    kurtosis: BigQ,
    bounds_ok: bool,
}

fn sample_stats(
    m: usize,
    samples: usize,
    seed: u64,
    tables: &MomentTables,
    exec: Exec,
) -> Vec<SampleStat> {
    exec.map(samples, |idx| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((m as u64) << 32) | idx as u64);
        loop {
            let a = if idx % 2 == 0 {
                random_equal_margin(m, &mut rng, 5, 0)
            } else {
                let support = 1 + idx % 3;
                random_sparse_equal_margin(m, &mut rng, support, 3, 0)
            };
            let mv = moments_of_ints(m, &a);
            let (_, n2) = mean_and_norm2_from(&mv, m).expect("m >= 4");
            if n2.is_zero() {
                continue;
            }
            let f4 = tables.fourth_moment(&mv);
            let mi = q_int(m as i128);
            let m1_ok = &mv.m1 * &mv.m1 * (&mi - q_int(2)) <= &mi * &mi * (&mi - q_int(1)) * &n2;
            let m2_ok = mv.m2 <= (&mi - q_int(1)) * &n2;
            let mq_ok = mv.mq <= &mv.m2 * &mv.m2;
            return SampleStat {
                kurtosis: f4 / (&n2 * &n2),
                bounds_ok: m1_ok && m2_ok && mq_ok,
            };
        }
    })
}

fn summarize(m: usize, sigma: &Sigma, stats: &[SampleStat]) -> HyperCheck {
    let s4 = sigma.fourth_power(m);
    let one = BigQ::one();
    let ratios: Vec<BigQ> = stats.iter().map(|s| &s4 * &s.kurtosis).collect();
    let max = ratios.iter().max().cloned().unwrap_or_else(BigQ::zero);
    let pairs: Vec<BigQ> = ratios.chunks_exact(2).map(|p| &p[0] * &p[1]).collect();
    HyperCheck {
        m,
        sigma: sigma.label(),
        samples: stats.len(),
        max_ratio: big_to_f64(&max),
        max_ratio_exact: max.to_string(),
        violations: ratios.iter().filter(|r| **r > one).count(),
        moment_bounds_hold: stats.iter().all(|s| s.bounds_ok),
        product_pairs: pairs.len(),
        product_violations: pairs.iter().filter(|r| **r > one).count(),
    }
}

fn check_m(m: usize) -> Result<()> {
    if !(4..=MAX_M).contains(&m) {
        return Err(Error::OutOfRange { m, min: 4, max: MAX_M });
    }
    Ok(())
}

pub fn hypercontractivity_check(
    m: usize,
    sigma: &Sigma,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<HyperCheck> {
    check_m(m)?;
    sigma.check()?;
    let tables = build_tables(m)?;
    let stats = sample_stats(m, samples, seed, &tables, exec);
    Ok(summarize(m, sigma, &stats))
}

/// Runs `σ = m^{-1/2}` and the fixed grid on the same samples for each m.
pub fn hypercontractivity_sweep(
    ms: &[usize],
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<HyperSweep> {
    let mut at_inverse_sqrt = Vec::new();
    let mut grid = Vec::new();
    for &m in ms {
        check_m(m)?;
        let tables = build_tables(m)?;
        let stats = sample_stats(m, samples, seed, &tables, exec);
        at_inverse_sqrt.push(summarize(m, &Sigma::InverseSqrtM, &stats));
        for &(p, q) in &SIGMA_GRID {
            grid.push(summarize(m, &Sigma::Value(q_frac(p, q)), &stats));
        }
    }
    let mut empirical_m0 = None;
    for (k, row) in at_inverse_sqrt.iter().enumerate().rev() {
        if row.violations > 0 {
            break;
        }
        empirical_m0 = Some(ms[k]);
    }
    let violations_nonincreasing = at_inverse_sqrt
        .windows(2)
        .all(|w| w[1].violations <= w[0].violations);
    Ok(HyperSweep {
        seed,
        samples,
        ms: ms.to_vec(),
        at_inverse_sqrt,
        grid,
        empirical_m0,
        violations_nonincreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_kills_everything() {
        let r = hypercontractivity_check(5, &Sigma::Value(BigQ::zero()), 20, 1, Exec::Sequential)
            .unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert_eq!(r.violations, 0);
        assert!(r.moment_bounds_hold);
    }

    #[test]
    fn no_noise_violates_for_spiky_samples() {
        let r = hypercontractivity_check(6, &Sigma::Value(BigQ::one()), 40, 2, Exec::Sequential)
            .unwrap();
        assert!(r.violations > 0);
        assert!(r.max_ratio > 1.0);
    }

    #[test]
    fn modes_agree() {
        let a = hypercontractivity_sweep(&[4, 5], 30, 7, Exec::Sequential).unwrap();
        let b = hypercontractivity_sweep(&[4, 5], 30, 7, Exec::Parallel).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.grid.len(), 2 * SIGMA_GRID.len());
    }

    #[test]
    fn parses_noise_levels() {
        assert_eq!(Sigma::parse("auto").unwrap(), Sigma::InverseSqrtM);
        assert_eq!(Sigma::parse(" 2/6 ").unwrap(), Sigma::Value(q_frac(1, 3)));
        assert_eq!(Sigma::parse("1").unwrap(), Sigma::Value(q_int(1)));
        for bad in ["3/2", "-1/4", "x", "1/0"] {
            assert!(Sigma::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn refuses_bad_inputs() {
        assert!(hypercontractivity_check(3, &Sigma::InverseSqrtM, 5, 0, Exec::Sequential).is_err());
        assert!(
            hypercontractivity_check(5, &Sigma::Value(q_int(2)), 5, 0, Exec::Sequential).is_err()
        );
    }
}
