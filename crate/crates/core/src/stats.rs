//! Goodness-of-fit primitives used by the verification suites.
//!
//! Every stochastic check takes an explicit seed. Work is split into fixed
//! chunks, each with its own ChaCha stream, so results do not depend on the
//! number of threads.

use std::collections::HashMap;
use std::hash::Hash;

use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::oracle::PermutationDistribution;
use crate::perm::Perm;
use crate::rational::{format_rational, Rational};

/// Significance for a single stand-alone test.
pub const ALPHA_SINGLE: f64 = 0.01;
/// Significance for each test inside a multi-test suite.
pub const ALPHA_SUITE: f64 = 0.001;

const CHUNK: u64 = 1 << 15;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no observations")]
    EmptyCounts,
    #[error("expected probabilities sum to {0}, not 1")]
    ExpectedNotNormalized(String),
    #[error("sample {0} lies outside [0,1]")]
    OutOfRange(f64),
    #[error("outcome of size {found} compared against distribution on S_{expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: u64,
    pub alpha: f64,
    pub passed: bool,
}

impl TestReport {
    fn new(statistic: f64, p_value: f64, samples: u64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            statistic,
            p_value,
            samples,
            alpha,
            passed: p_value >= alpha,
        }
    }
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(statistic: f64, df: f64) -> f64 {
    if statistic.is_nan() {
        return f64::NAN;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    if !statistic.is_finite() {
        return 0.0;
    }
    gamma_ur(df / 2.0, statistic / 2.0)
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson goodness-of-fit against exact probabilities. Cells whose expected
/// count is below 5 are pooled, smallest first.
pub fn chi_square_goodness<'a, K, I>(
    counts: &HashMap<K, u64>,
    expected: I,
    alpha: f64,
) -> Result<TestReport, StatsError>
where
    K: Hash + Eq + 'a,
    I: IntoIterator<Item = (&'a K, &'a Rational)>,
{
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(StatsError::EmptyCounts);
    }
    let mut sum = Rational::zero();
    let mut covered = 0u64;
    // (expected count, observed count)
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut impossible = false;
    for (key, p) in expected {
        sum += p;
        let observed = counts.get(key).copied().unwrap_or(0);
        covered += observed;
        if p.is_zero() {
            impossible |= observed > 0;
            continue;
        }
        let e = p.to_f64().unwrap_or(0.0) * total as f64;
        cells.push((e, observed as f64));
    }
    if !sum.is_one() {
        return Err(StatsError::ExpectedNotNormalized(format_rational(&sum)));
    }
    if impossible || covered != total {
        return Ok(TestReport::new(f64::INFINITY, 0.0, total, alpha));
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    while cells.len() > 1 && cells[0].0 < 5.0 {
        let (e, o) = cells.remove(0);
        cells[0].0 += e;
        cells[0].1 += o;
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let statistic: f64 = cells.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let df = cells.len().saturating_sub(1);
    let p = if df == 0 { 1.0 } else { chi_square_sf(statistic, df as f64) };
    Ok(TestReport::new(statistic, p, total, alpha))
}

/// Two-sample chi-square homogeneity test on a 2×K contingency table.
pub fn chi_square_two_sample<K: Hash + Eq + Clone>(
    first: &HashMap<K, u64>,
    second: &HashMap<K, u64>,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    let n1: u64 = first.values().sum();
    let n2: u64 = second.values().sum();
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::EmptyCounts);
    }
    let mut keys: Vec<&K> = first.keys().collect();
    keys.extend(second.keys().filter(|k| !first.contains_key(*k)));
    let total = (n1 + n2) as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for key in keys {
        let a = first.get(key).copied().unwrap_or(0) as f64;
        let b = second.get(key).copied().unwrap_or(0) as f64;
        let row = a + b;
        if row == 0.0 {
            continue;
        }
        cells += 1;
        let ea = row * n1 as f64 / total;
        let eb = row * n2 as f64 / total;
        statistic += (a - ea) * (a - ea) / ea + (b - eb) * (b - eb) / eb;
    }
    let df = cells.saturating_sub(1);
    let p = if df == 0 { 1.0 } else { chi_square_sf(statistic, df as f64) };
    Ok(TestReport::new(statistic, p, n1 + n2, alpha))
}

/// One-sample Kolmogorov-Smirnov test against the uniform law on `[0,1]`.
pub fn ks_uniform(samples: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyCounts);
    }
    if let Some(&bad) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(StatsError::OutOfRange(bad));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / n - x;
            let below = x - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(TestReport::new(statistic, kolmogorov_sf(lambda), samples.len() as u64, alpha))
}

/// Total variation between empirical frequencies and an exact distribution.
pub fn empirical_tv(
    counts: &HashMap<Perm, u64>,
    reference: &PermutationDistribution,
) -> Result<f64, StatsError> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(StatsError::EmptyCounts);
    }
    if let Some(p) = counts.keys().find(|p| p.len() != reference.n()) {
        return Err(StatsError::DimensionMismatch {
            expected: reference.n(),
            found: p.len(),
        });
    }
    let total = total as f64;
    let mut sum = 0.0;
    for (perm, p) in reference.iter() {
        let freq = counts.get(perm).copied().unwrap_or(0) as f64 / total;
        sum += (freq - p.to_f64().unwrap_or(0.0)).abs();
    }
    for (perm, &c) in counts {
        if reference.prob(perm).is_zero() {
            sum += c as f64 / total;
        }
    }
    Ok(0.5 * sum)
}

/// Total variation between two count maps, each normalized.
pub fn counts_tv<K: Hash + Eq>(first: &HashMap<K, u64>, second: &HashMap<K, u64>) -> f64 {
    let n1 = first.values().sum::<u64>().max(1) as f64;
    let n2 = second.values().sum::<u64>().max(1) as f64;
    let mut sum = 0.0;
    for (k, &a) in first {
        let b = second.get(k).copied().unwrap_or(0) as f64;
        sum += (a as f64 / n1 - b / n2).abs();
    }
    for (k, &b) in second {
        if !first.contains_key(k) {
            sum += b as f64 / n2;
        }
    }
    0.5 * sum
}

/// Hoeffding radius: a mean of `n` variables in `[0,1]` lies within this
/// distance of its expectation with probability at least `1 - delta`.
pub fn hoeffding_radius(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Independent ChaCha stream `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `samples` outcomes in parallel and tallies them. Reproducible for a
/// given seed regardless of thread count.
pub fn parallel_counts<K, F>(seed: u64, samples: u64, draw: F) -> HashMap<K, u64>
where
    K: Hash + Eq + Send,
    F: Fn(&mut ChaCha8Rng) -> K + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut counts = HashMap::new();
            for _ in 0..len {
                *counts.entry(draw(&mut rng)).or_insert(0u64) += 1;
            }
            counts
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// Draws `samples` values in parallel, in a reproducible order.
pub fn parallel_draws<T, F>(seed: u64, samples: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(seed, c);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rational;
    use rand::Rng;

    #[test]
    fn chi_square_exact_fit() {
        let counts: HashMap<&str, u64> = [("a", 300), ("b", 100)].into_iter().collect();
        let expected: HashMap<&str, Rational> =
            [("a", rational(3, 4)), ("b", rational(1, 4))].into_iter().collect();
        let r = chi_square_goodness(&counts, &expected, ALPHA_SINGLE).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.passed);

        let coin: HashMap<u8, u64> = [(0, 50_000), (1, 50_000)].into_iter().collect();
        let half: HashMap<u8, Rational> = [(0, rational(1, 2)), (1, rational(1, 2))].into_iter().collect();
        assert_eq!(chi_square_goodness(&coin, &half, ALPHA_SINGLE).unwrap().statistic, 0.0);
    }

    #[test]
    fn chi_square_errors_and_impossible_outcomes() {
        let empty: HashMap<u8, u64> = HashMap::new();
        let half: HashMap<u8, Rational> = [(0, rational(1, 2)), (1, rational(1, 2))].into_iter().collect();
        assert!(matches!(chi_square_goodness(&empty, &half, 0.01), Err(StatsError::EmptyCounts)));
        let bad: HashMap<u8, Rational> = [(0, rational(1, 2))].into_iter().collect();
        let some: HashMap<u8, u64> = [(0, 3)].into_iter().collect();
        assert!(matches!(
            chi_square_goodness(&some, &bad, 0.01),
            Err(StatsError::ExpectedNotNormalized(_))
        ));
        let stray: HashMap<u8, u64> = [(0, 3), (7, 1)].into_iter().collect();
        let r = chi_square_goodness(&stray, &half, 0.01).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert!(!r.passed);
    }

    #[test]
    fn chi_square_tail_reference_values() {
        // P(chi2_1 > 3.841459) = 0.05, P(chi2_10 > 23.209251) = 0.01
        assert!((chi_square_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(23.209_251_158_954_36, 10.0) - 0.01).abs() < 1e-9);
        assert_eq!(chi_square_sf(0.0, 3.0), 1.0);
    }

    #[test]
    fn ks_examples() {
        let n = 1000;
        let grid: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        assert!(ks_uniform(&grid, 0.01).unwrap().statistic <= 1.0 / n as f64);
        let constant = vec![0.5; 10_000];
        let r = ks_uniform(&constant, 0.01).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
        assert!(matches!(ks_uniform(&[1.5], 0.01), Err(StatsError::OutOfRange(_))));
        assert!(matches!(ks_uniform(&[], 0.01), Err(StatsError::EmptyCounts)));
    }

    #[test]
    fn kolmogorov_reference_value() {
        // P(K > 1.3581) ≈ 0.05
        assert!((kolmogorov_sf(1.358_099) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn empirical_tv_examples() {
        let uniform = PermutationDistribution::uniform(3);
        let exact: HashMap<Perm, u64> = Perm::all(3).into_iter().map(|p| (p, 5)).collect();
        assert_eq!(empirical_tv(&exact, &uniform).unwrap(), 0.0);
        let spike: HashMap<Perm, u64> = [(Perm::identity(3), 10)].into_iter().collect();
        assert!((empirical_tv(&spike, &uniform).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        let wrong: HashMap<Perm, u64> = [(Perm::identity(2), 10)].into_iter().collect();
        assert!(matches!(
            empirical_tv(&wrong, &uniform),
            Err(StatsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn counts_tv_is_symmetric_and_bounded() {
        let a: HashMap<u8, u64> = [(0, 3), (1, 1)].into_iter().collect();
        let b: HashMap<u8, u64> = [(1, 2), (2, 2)].into_iter().collect();
        let ab = counts_tv(&a, &b);
        assert_eq!(ab, counts_tv(&b, &a));
        assert!((0.0..=1.0).contains(&ab));
        assert!((ab - 0.75).abs() < 1e-12);
    }

    #[test]
    fn parallel_counts_are_reproducible() {
        let draw = |rng: &mut ChaCha8Rng| rng.gen_range(0..6u8);
        let a = parallel_counts(9, 100_000, draw);
        let b = parallel_counts(9, 100_000, draw);
        assert_eq!(a, b);
        assert_eq!(a.values().sum::<u64>(), 100_000);
        let v = parallel_draws(9, 70_000, |rng: &mut ChaCha8Rng| rng.gen::<f64>());
        assert_eq!(v.len(), 70_000);
        assert_eq!(v, parallel_draws(9, 70_000, |rng: &mut ChaCha8Rng| rng.gen::<f64>()));
    }

    #[test]
    fn null_p_values_are_roughly_uniform() {
        let expected: HashMap<u8, Rational> = (0..6u8).map(|k| (k, rational(1, 6))).collect();
        let rejections = (0..1000u64)
            .filter(|&seed| {
                let counts = parallel_counts(seed, 1200, |rng: &mut ChaCha8Rng| rng.gen_range(0..6u8));
                chi_square_goodness(&counts, &expected, 0.05).unwrap().p_value < 0.05
            })
            .count();
        let frac = rejections as f64 / 1000.0;
        assert!((0.03..=0.08).contains(&frac), "rejection rate {frac}");
    }
}
