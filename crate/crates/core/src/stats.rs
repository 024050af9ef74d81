//! Specialization statistics: per-firm coefficient of variation across
//! markets, and a circular block bootstrap test of its mean against a
//! benchmark value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::RoundRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("data error: {0}")]
    Data(String),
}

/// Population coefficient of variation (divisor `m`) of one firm's
/// quantities across `m >= 2` markets. An all-zero vector yields 0.
pub fn coefficient_of_variation(quantities: &[f64]) -> Result<f64, StatsError> {
    let m = quantities.len();
    if m < 2 {
        return Err(StatsError::Domain(format!(
            "coefficient of variation needs at least 2 markets, got {m}"
        )));
    }
    if quantities.iter().any(|q| !q.is_finite()) {
        return Err(StatsError::Domain("quantities must be finite".into()));
    }
    let mean = quantities.iter().sum::<f64>() / m as f64;
    if mean == 0.0 && quantities.iter().all(|q| *q == 0.0) {
        return Ok(0.0);
    }
    if mean <= 0.0 {
        return Err(StatsError::Domain(format!(
            "coefficient of variation needs a positive mean, got {mean}"
        )));
    }
    let var = quantities.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / m as f64;
    Ok(var.sqrt() / mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub round: usize,
    pub firm: usize,
    pub cv: f64,
    /// Set when the firm produced nothing and the CV was defined as 0.
    #[serde(default)]
    pub zero_mean: bool,
}

/// One CV point per round for `firm` (0-based).
pub fn cv_series(records: &[RoundRecord], firm: usize) -> Result<Vec<CvPoint>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Data("run has no rounds".into()));
    }
    records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            if rec.round != k + 1 {
                return Err(StatsError::Data(format!(
                    "expected round {}, found round {}",
                    k + 1,
                    rec.round
                )));
            }
            let q = rec
                .quantities
                .get(firm)
                .ok_or_else(|| StatsError::Data(format!("round {} has no firm {}", rec.round, firm + 1)))?;
            let cv = coefficient_of_variation(q)?;
            Ok(CvPoint {
                round: rec.round,
                firm,
                cv,
                zero_mean: q.iter().all(|x| *x == 0.0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub block_size: usize,
    pub resamples: usize,
    pub significance: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            block_size: 7,
            resamples: 10_000,
            significance: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub observed_mean: f64,
    pub null_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub resample_means: ResampleSummary,
    pub config: BootstrapConfig,
}

/// Draws circular block bootstrap resample means of `series`.
pub fn circular_block_means(series: &[f64], block_size: usize, resamples: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = series.len();
    // prefix[k] = sum of the series repeated twice, up to index k
    let mut prefix = Vec::with_capacity(2 * n + 1);
    prefix.push(0.0);
    for k in 0..2 * n {
        prefix.push(prefix[k] + series[k % n]);
    }
    let full_blocks = n / block_size;
    let tail = n % block_size;
    (0..resamples)
        .map(|_| {
            let mut sum = 0.0;
            for _ in 0..full_blocks {
                let s = rng.random_range(0..n);
                sum += prefix[s + block_size] - prefix[s];
            }
            if tail > 0 {
                let s = rng.random_range(0..n);
                sum += prefix[s + tail] - prefix[s];
            }
            sum / n as f64
        })
        .collect()
}

/// One-sided test of `mean(series) > null_value`.
///
/// The bootstrap distribution of the mean is shifted to be centered at
/// `null_value`; the p-value is the share of shifted resample means at or
/// above the observed mean.
pub fn bootstrap_test(
    series: &[f64],
    null_value: f64,
    config: &BootstrapConfig,
) -> Result<BootstrapResult, StatsError> {
    if config.block_size == 0 {
        return Err(StatsError::Domain("block size must be >= 1".into()));
    }
    if config.resamples == 0 {
        return Err(StatsError::Domain("resamples must be >= 1".into()));
    }
    if series.len() < config.block_size {
        return Err(StatsError::Domain(format!(
            "series of length {} is shorter than the block size {}",
            series.len(),
            config.block_size
        )));
    }
    if series.iter().any(|x| !x.is_finite()) || !null_value.is_finite() {
        return Err(StatsError::Domain("series and null value must be finite".into()));
    }

    let n = series.len() as f64;
    let observed_mean = series.iter().sum::<f64>() / n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let means = circular_block_means(series, config.block_size, config.resamples, &mut rng);

    // Resample means and the observed mean are sums in different orders;
    // differences at rounding level count as ties.
    let scale = series.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let tie = 1e-12 * scale;
    let exceed = means
        .iter()
        .filter(|&&mb| mb - observed_mean + null_value >= observed_mean - tie)
        .count();
    let p_value = exceed as f64 / config.resamples as f64;

    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let std_dev = (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / b).sqrt();
    let resample_means = ResampleSummary {
        mean,
        std_dev,
        min: means.iter().copied().fold(f64::INFINITY, f64::min),
        max: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };

    Ok(BootstrapResult {
        observed_mean,
        null_value,
        p_value,
        reject: p_value < config.significance,
        resample_means,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[7.0, 7.0]).unwrap(), 0.0);
        assert_eq!(coefficient_of_variation(&[60.0, 0.0]).unwrap(), 1.0);
        let nash = coefficient_of_variation(&[140.0 / 3.0, 80.0 / 3.0]).unwrap();
        assert!((nash - 3.0 / 11.0).abs() < 1e-12);
        assert!((nash - 0.2727).abs() < 1e-4);
        let cv = coefficient_of_variation(&[80.0, 5.0]).unwrap();
        assert!((cv - 15.0 / 17.0).abs() < 1e-12);
        assert_eq!(coefficient_of_variation(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn cv_domain_errors() {
        assert!(coefficient_of_variation(&[5.0]).is_err());
        assert!(coefficient_of_variation(&[-1.0, -2.0]).is_err());
        assert!(coefficient_of_variation(&[f64::NAN, 1.0]).is_err());
    }

    fn record(round: usize, q: Vec<Vec<f64>>) -> RoundRecord {
        RoundRecord {
            round,
            prices: vec![0.0; 2],
            quantities: q,
            market_shares: vec![],
            product_profits: vec![],
            profits: vec![],
            cumulative_profits: vec![],
        }
    }

    #[test]
    fn cv_series_examples() {
        let recs: Vec<_> = (1..=50).map(|t| record(t, vec![vec![80.0, 5.0]])).collect();
        let s = cv_series(&recs, 0).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.iter().all(|p| (p.cv - 0.8824).abs() < 1e-4));

        let recs: Vec<_> = (1..=6)
            .map(|t| record(t, vec![if t % 2 == 0 { vec![100.0, 0.0] } else { vec![0.0, 100.0] }]))
            .collect();
        assert!(cv_series(&recs, 0).unwrap().iter().all(|p| p.cv == 1.0));

        let one = cv_series(&[record(1, vec![vec![1.0, 2.0]])], 0).unwrap();
        assert_eq!(one.len(), 1);

        let idle = cv_series(&[record(1, vec![vec![0.0, 0.0]])], 0).unwrap();
        assert!(idle[0].zero_mean && idle[0].cv == 0.0);
    }

    #[test]
    fn cv_series_detects_gaps() {
        let recs = vec![record(1, vec![vec![1.0, 2.0]]), record(3, vec![vec![1.0, 2.0]])];
        assert!(matches!(cv_series(&recs, 0), Err(StatsError::Data(_))));
        assert!(matches!(cv_series(&[], 0), Err(StatsError::Data(_))));
    }

    #[test]
    fn bootstrap_degenerate_series() {
        let cfg = BootstrapConfig::default();
        let at_null = vec![0.3; 50];
        assert_eq!(bootstrap_test(&at_null, 0.3, &cfg).unwrap().p_value, 1.0);

        let above = vec![10.3; 50];
        let res = bootstrap_test(&above, 0.3, &cfg).unwrap();
        assert_eq!(res.p_value, 0.0);
        assert!(res.reject);
    }

    #[test]
    fn bootstrap_rejects_short_series() {
        let cfg = BootstrapConfig::default();
        assert!(bootstrap_test(&[1.0; 6], 0.0, &cfg).is_err());
        assert!(bootstrap_test(&[1.0; 7], 0.0, &cfg).is_ok());
    }

    #[test]
    fn circular_blocks_wrap_around() {
        // With block size n every resample is a rotation, so its mean is exact.
        let series = [1.0, 2.0, 3.0, 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in circular_block_means(&series, 4, 100, &mut rng) {
            assert!((m - 2.5).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn cv_scale_and_permutation_invariant(q in prop::collection::vec(0.0f64..1000.0, 2..8), lambda in 1e-3f64..1e3, rot in 0usize..8) {
            prop_assume!(q.iter().sum::<f64>() > 1e-6);
            let base = coefficient_of_variation(&q).unwrap();
            let scaled: Vec<f64> = q.iter().map(|x| x * lambda).collect();
            prop_assert!((coefficient_of_variation(&scaled).unwrap() - base).abs() < 1e-12 * (1.0 + base));
            let mut p = q.clone();
            p.rotate_left(rot % q.len());
            prop_assert!((coefficient_of_variation(&p).unwrap() - base).abs() < 1e-12 * (1.0 + base));
            prop_assert!(base <= ((q.len() - 1) as f64).sqrt() + 1e-12);
        }

        #[test]
        fn cv_two_markets_range(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(a + b > 0.0);
            let cv = coefficient_of_variation(&[a, b]).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&cv));
            if a == 0.0 || b == 0.0 {
                prop_assert!((cv - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn bootstrap_deterministic_and_monotone(series in prop::collection::vec(-5.0f64..5.0, 10..40), seed in any::<u64>(), null in -3.0f64..3.0, bump in 0.0f64..2.0) {
            let cfg = BootstrapConfig { resamples: 300, seed, ..Default::default() };
            let a = bootstrap_test(&series, null, &cfg).unwrap();
            let b = bootstrap_test(&series, null, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.reject, a.p_value < cfg.significance);
            let c = bootstrap_test(&series, null + bump, &cfg).unwrap();
            prop_assert!(c.p_value >= a.p_value);
        }
    }
}
