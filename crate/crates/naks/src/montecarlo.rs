//! Reproducible sampling experiments over the space of 1-Lipschitz maps.
//!
//! [`run_experiment`] draws uniform maps, builds their Kakeya sets, and
//! aggregates the covered fractions `X_n` into [`SampleStats`] (mean,
//! population standard deviation, extremes, parity counter, histogram).
//! [`exact_experiment`] computes the same mean by full enumeration of the
//! map space, giving an oracle for small parameters.
//!
//! # Determinism
//!
//! Sample `i` at level `n` uses its own ChaCha8 stream derived from the
//! experiment seed, so results depend only on `(seed, samples)` -- never on
//! the worker count.  Aggregation sums exact integer cell counts (division
//! happens once at the end), so no floating-point reassociation can creep in
//! either.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kakeya::{KakeyaBuilder, KakeyaError};
use crate::lipschitz::{enumerate_omega, LipschitzError, MapSampler};
use crate::ring::{RingDescriptor, RingError, RingFamily};
use crate::theory;

/// Default sample count for survey runs.
pub const DEFAULT_SAMPLES: u64 = 100_000;

/// Default number of histogram bins.
pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

/// Errors from the sampling layer.
#[derive(Debug, Error)]
pub enum MonteCarloError {
    /// The experiment configuration is inconsistent.
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    /// A sampled planar Kakeya set fell below the deterministic lower bound.
    /// This cannot happen for correctly built sets; it indicates a bug and is
    /// treated as a hard error.
    #[error("planar lower bound violated at n={n}: measure {measure} < bound {bound}")]
    LowerBoundViolation {
        /// Level of the offending sample.
        n: u32,
        /// Observed measure, as a rational string.
        measure: String,
        /// Lower bound, as a rational string.
        bound: String,
    },
    /// Error from the map-space layer.
    #[error(transparent)]
    Lipschitz(#[from] LipschitzError),
    /// Error from the Kakeya-set layer.
    #[error(transparent)]
    Kakeya(#[from] KakeyaError),
    /// Error from the underlying ring.
    #[error(transparent)]
    Ring(#[from] RingError),
}

type McResult<T> = Result<T, MonteCarloError>;

/// Parameters of a sampling experiment.
///
/// One experiment covers the inclusive level range `n_min ..= n_max`; each
/// level draws its own fresh batch of `samples` maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Ring family of the truncated ring.
    pub family: RingFamily,
    /// Residue characteristic.
    pub p: u64,
    /// Ambient dimension `d`.
    pub d: usize,
    /// First level.
    pub n_min: u32,
    /// Last level (inclusive).
    pub n_max: u32,
    /// Number of sampled maps per level.
    pub samples: u64,
    /// Base seed; combined with the level and the sample index to derive
    /// per-sample RNG streams.
    pub seed: u64,
    /// Worker threads; `0` uses the global thread pool.
    pub workers: usize,
    /// Number of histogram bins.
    pub histogram_bins: usize,
    /// Optional destination recorded for the stats table.
    #[serde(default)]
    pub out: Option<String>,
    /// Optional destination recorded for the histogram table.
    #[serde(default)]
    pub histogram_out: Option<String>,
}

impl ExperimentConfig {
    /// Configuration for a single level with default histogram size and the
    /// global thread pool.
    pub fn single(family: RingFamily, p: u64, d: usize, n: u32, samples: u64, seed: u64) -> Self {
        ExperimentConfig {
            family,
            p,
            d,
            n_min: n,
            n_max: n,
            samples,
            seed,
            workers: 0,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            out: None,
            histogram_out: None,
        }
    }

    fn validate(&self) -> McResult<()> {
        if self.samples == 0 {
            return Err(MonteCarloError::InvalidConfig(
                "samples must be at least 1".into(),
            ));
        }
        if self.samples >= 1 << 32 {
            return Err(MonteCarloError::InvalidConfig(
                "samples must fit in 32 bits (per-sample RNG streams)".into(),
            ));
        }
        if self.histogram_bins == 0 {
            return Err(MonteCarloError::InvalidConfig(
                "histogram_bins must be at least 1".into(),
            ));
        }
        if self.n_min > self.n_max || self.n_min == 0 {
            return Err(MonteCarloError::InvalidConfig(
                "level range must be non-empty and start at 1".into(),
            ));
        }
        Ok(())
    }
}

/// One histogram bin over the measure axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge.
    pub lower: f64,
    /// Upper edge (inclusive for the last bin).
    pub upper: f64,
    /// Number of samples in the bin.
    pub count: u64,
    /// `count / (total * bin_width)`.
    pub density: f64,
}

/// Aggregated statistics of one level's sampled measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    /// Number of samples.
    pub count: u64,
    /// Empirical mean of the measure `X_n`.
    pub mean: f64,
    /// Population standard deviation (divides by `count`, not `count - 1`).
    pub std: f64,
    /// Smallest observed measure.
    pub min: f64,
    /// Largest observed measure.
    pub max: f64,
    /// Number of samples whose cell count is even.
    pub parity_even: u64,
    /// Equal-width histogram over `[min, max]`.
    pub histogram: Vec<HistogramBin>,
}

impl SampleStats {
    /// Fraction of samples with an even cell count.
    pub fn parity_even_fraction(&self) -> f64 {
        self.parity_even as f64 / self.count as f64
    }
}

/// Statistics of one level, bundled with the matching closed-form mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    /// Level `n`.
    pub n: u32,
    /// Closed-form `E[X_n]`, evaluated in floating point.
    pub mean_theoretical: f64,
    /// Sampled statistics.
    pub stats: SampleStats,
}

/// Equal-width histogram of `values` with `bins` bins over
/// `[min(values), max(values)]`.
///
/// Densities are `count / (len * width)`, so they integrate to one.  When all
/// values coincide the range is degenerate; a single bin with a nominal width
/// of one is returned (density `1`).
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    assert!(bins >= 1, "histogram needs at least one bin");
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = values.len() as u64;
    if min == max {
        return vec![HistogramBin {
            lower: min,
            upper: max,
            count: total,
            density: 1.0,
        }];
    }
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: min + i as f64 * width,
            upper: min + (i + 1) as f64 * width,
            count,
            density: count as f64 / (total as f64 * width),
        })
        .collect()
}

/// RNG for sample `index` at level `n` under the base `seed`: every sample
/// owns a ChaCha8 stream of its own, so results do not depend on how samples
/// are scheduled across workers (and sequential re-runs reproduce parallel
/// ones exactly).
pub fn sample_rng(seed: u64, n: u32, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(n) << 32 | index);
    rng
}

/// Draws `samples` maps at the given level and returns their Kakeya-set cell
/// counts, in sample order.
fn sample_cards(
    ring: RingDescriptor,
    d: usize,
    samples: u64,
    seed: u64,
) -> McResult<Vec<u64>> {
    let sampler = MapSampler::new(ring, d)?;
    // Fail fast on impossible cell counts before spawning workers.
    KakeyaBuilder::new(ring, d)?;
    let cards = (0..samples)
        .into_par_iter()
        .map_init(
            || KakeyaBuilder::new(ring, d).expect("builder parameters validated above"),
            |builder, i| {
                let map = sampler.sample(&mut sample_rng(seed, ring.n(), i));
                builder.cardinality_of(&map)
            },
        )
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cards)
}

/// Exact measure of a cell count at the given level.
fn measure_of(card: u64, ring: &RingDescriptor, d: usize) -> BigRational {
    let cells = BigUint::from(ring.size()).pow(d as u32);
    BigRational::new(BigInt::from(card), BigInt::from(cells))
}

/// Aggregates cell counts into [`SampleStats`] using exact integer sums.
///
/// For planar sets the smallest observed measure is checked against the
/// deterministic lower bound; a violation is a hard error.  Public so
/// sequential frontends (for example the browser demo, which cannot spawn
/// worker threads) can aggregate their own card lists identically to
/// [`run_experiment`].
pub fn stats_from_cards(
    cards: &[u64],
    ring: &RingDescriptor,
    d: usize,
    bins: usize,
) -> McResult<SampleStats> {
    let count = cards.len() as u64;
    let mut sum = 0u128;
    let mut sum_sq = 0u128;
    let mut min_card = u64::MAX;
    let mut max_card = 0u64;
    let mut parity_even = 0u64;
    for &c in cards {
        sum = sum.checked_add(u128::from(c)).expect("sum overflow");
        sum_sq = sum_sq
            .checked_add(u128::from(c) * u128::from(c))
            .expect("sum of squares overflow");
        min_card = min_card.min(c);
        max_card = max_card.max(c);
        parity_even += u64::from(c % 2 == 0);
    }

    if d == 2 {
        let min_measure = measure_of(min_card, ring, d);
        let bound = theory::lower_bound_dim2(ring.p(), ring.n());
        if min_measure < bound {
            return Err(MonteCarloError::LowerBoundViolation {
                n: ring.n(),
                measure: min_measure.to_string(),
                bound: bound.to_string(),
            });
        }
    }

    let cells = BigInt::from(BigUint::from(ring.size()).pow(d as u32));
    let mean = BigRational::new(BigInt::from(sum), BigInt::from(count) * &cells);
    // Population variance: (N * sum(c^2) - sum(c)^2) / (N^2 * cells^2).
    let variance = BigRational::new(
        BigInt::from(count) * BigInt::from(sum_sq) - BigInt::from(sum) * BigInt::from(sum),
        BigInt::from(count) * BigInt::from(count) * (&cells * &cells),
    );
    let measures: Vec<f64> = cards
        .iter()
        .map(|&c| measure_of(c, ring, d).to_f64().expect("measure fits in f64"))
        .collect();

    Ok(SampleStats {
        count,
        mean: mean.to_f64().expect("mean fits in f64"),
        std: variance.to_f64().expect("variance fits in f64").sqrt(),
        min: measure_of(min_card, ring, d).to_f64().expect("min fits in f64"),
        max: measure_of(max_card, ring, d).to_f64().expect("max fits in f64"),
        parity_even,
        histogram: histogram(&measures, bins),
    })
}

/// Runs the experiment and returns one report per level in `n_min ..= n_max`.
///
/// Reports are bit-identical for identical `(seed, samples, parameters)`
/// regardless of `workers`.
pub fn run_experiment(config: &ExperimentConfig) -> McResult<Vec<LevelReport>> {
    config.validate()?;
    let run = || -> McResult<Vec<LevelReport>> {
        let mut reports = Vec::new();
        for n in config.n_min..=config.n_max {
            let ring = RingDescriptor::new(config.family, config.p, n)?;
            let cards = sample_cards(ring, config.d, config.samples, config.seed)?;
            let stats = stats_from_cards(&cards, &ring, config.d, config.histogram_bins)?;
            reports.push(LevelReport {
                n,
                mean_theoretical: theory::expected_measure_f64(config.p, config.d, n),
                stats,
            });
        }
        Ok(reports)
    };
    if config.workers == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| MonteCarloError::InvalidConfig(e.to_string()))?;
        pool.install(run)
    }
}

/// Exact mean of the measure `X_n` over the *entire* map space, by full
/// enumeration.
///
/// Only feasible when the map space is small (its cardinality must fall
/// under the enumeration cap); use it as an oracle against both
/// [`run_experiment`] and the closed-form expectation.
pub fn exact_experiment(ring: RingDescriptor, d: usize) -> McResult<BigRational> {
    let mut builder = KakeyaBuilder::new(ring, d)?;
    let mut sum = 0u128;
    let mut count = 0u64;
    for map in enumerate_omega(ring, d)? {
        sum += u128::from(builder.cardinality_of(&map)?);
        count += 1;
    }
    let cells = BigInt::from(BigUint::from(ring.size()).pow(d as u32));
    Ok(BigRational::new(
        BigInt::from(sum),
        BigInt::from(count) * cells,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn series(p: u64, n: u32) -> RingDescriptor {
        RingDescriptor::new(RingFamily::Series, p, n).unwrap()
    }

    fn padic(p: u64, n: u32) -> RingDescriptor {
        RingDescriptor::new(RingFamily::Padic, p, n).unwrap()
    }

    #[test]
    fn exact_experiment_matches_closed_form_small_cases() {
        assert_eq!(exact_experiment(series(2, 1), 2).unwrap(), ratio(7, 8));
        assert_eq!(exact_experiment(padic(2, 1), 2).unwrap(), ratio(7, 8));
        // q = 3, d = 2: 1 - (1 - 1/3)^4 = 65/81, over 9^4 maps.
        assert_eq!(exact_experiment(series(3, 1), 2).unwrap(), ratio(65, 81));
    }

    #[test]
    fn exact_experiment_matches_closed_form_level_2() {
        assert_eq!(exact_experiment(series(2, 2), 2).unwrap(), ratio(387, 512));
    }

    #[test]
    fn exact_experiment_rejects_huge_map_spaces() {
        assert!(matches!(
            exact_experiment(series(2, 4), 2),
            Err(MonteCarloError::Lipschitz(
                LipschitzError::EnumerationTooLarge { .. }
            ))
        ));
    }

    #[test]
    fn run_experiment_is_worker_count_independent() {
        let mut config = ExperimentConfig::single(RingFamily::Series, 2, 2, 3, 400, 42);
        config.n_min = 1;
        config.workers = 1;
        let serial = run_experiment(&config).unwrap();
        config.workers = 4;
        let parallel = run_experiment(&config).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 3);
    }

    #[test]
    fn run_experiment_depends_on_seed_and_level() {
        let config_a = ExperimentConfig::single(RingFamily::Series, 2, 2, 3, 200, 1);
        let config_b = ExperimentConfig::single(RingFamily::Series, 2, 2, 3, 200, 2);
        let a = run_experiment(&config_a).unwrap();
        let b = run_experiment(&config_b).unwrap();
        assert_ne!(a[0].stats.mean, b[0].stats.mean);
    }

    #[test]
    fn empirical_mean_matches_exact_mean_within_five_standard_errors() {
        for (ring, d) in [(series(2, 1), 2usize), (series(2, 2), 2)] {
            let exact = exact_experiment(ring, d).unwrap().to_f64().unwrap();
            let config = ExperimentConfig::single(ring.family(), ring.p(), d, ring.n(), 20_000, 7);
            let report = &run_experiment(&config).unwrap()[0];
            let se = report.stats.std / (report.stats.count as f64).sqrt();
            assert!(
                (report.stats.mean - exact).abs() <= 5.0 * se,
                "ring {ring}: mean {} vs exact {exact} (se {se})",
                report.stats.mean
            );
        }
    }

    #[test]
    fn empirical_mean_tracks_closed_form_on_small_grid() {
        for (d, n_max) in [(2usize, 6u32), (3, 4)] {
            for n in 1..=n_max {
                let config = ExperimentConfig::single(RingFamily::Series, 2, d, n, 2_000, 11);
                let report = &run_experiment(&config).unwrap()[0];
                let se = (report.stats.std / (report.stats.count as f64).sqrt()).max(1e-12);
                assert!(
                    (report.stats.mean - report.mean_theoretical).abs() <= 5.0 * se,
                    "d={d} n={n}: mean {} vs theory {} (se {se})",
                    report.stats.mean,
                    report.mean_theoretical
                );
            }
        }
    }

    #[test]
    fn sampled_minimum_respects_planar_lower_bound() {
        for n in 1..=5 {
            let config = ExperimentConfig::single(RingFamily::Padic, 2, 2, n, 1_000, 3);
            let report = &run_experiment(&config).unwrap()[0];
            let bound = theory::lower_bound_dim2(2, n).to_f64().unwrap();
            assert!(report.stats.min >= bound - 1e-12);
        }
    }

    #[test]
    fn lower_bound_violation_is_a_hard_error() {
        // A one-cell "set" at level 3 is far below the planar bound; the
        // aggregator must refuse it.
        let ring = series(2, 3);
        let err = stats_from_cards(&[1], &ring, 2, 10).unwrap_err();
        assert!(matches!(err, MonteCarloError::LowerBoundViolation { n: 3, .. }));
    }

    #[test]
    fn parity_counter_matches_exhaustive_enumeration_at_level_one() {
        // Over all 64 maps at (p=2, d=2, n=1) exactly half of the cell
        // counts are even, so the counter must report 32.
        let ring = series(2, 1);
        let measure = exact_experiment(ring, 2).unwrap();
        assert_eq!(measure, ratio(7, 8));
        let mut builder = KakeyaBuilder::new(ring, 2).unwrap();
        let mut even = 0u64;
        for map in enumerate_omega(ring, 2).unwrap() {
            even += u64::from(builder.cardinality_of(&map).unwrap().is_multiple_of(2));
        }
        assert_eq!(even, 32);
    }

    #[test]
    fn parity_counter_tracks_even_cardinality_bias() {
        // Frozen even-cardinality fractions for (p=2, d=2): exhaustive
        // enumeration of all 2^18 maps gives exactly 0.59375 at n=2, and
        // 100k-sample runs give 0.699 at n=3 and 0.578 at n=5 (stable
        // across seeds and across both ring families).  The bias peaks at
        // n=3 and decays from there.
        let mut fractions = Vec::new();
        for (n, lo, hi) in [(2u32, 0.565, 0.625), (3, 0.67, 0.73), (5, 0.55, 0.61)] {
            let config = ExperimentConfig::single(RingFamily::Series, 2, 2, n, 5_000, 13);
            let report = &run_experiment(&config).unwrap()[0];
            let fraction = report.stats.parity_even_fraction();
            assert!(
                (lo..=hi).contains(&fraction),
                "n={n}: even fraction {fraction} outside [{lo}, {hi}]"
            );
            fractions.push(fraction);
        }
        assert!(fractions[1] > fractions[0] && fractions[1] > fractions[2]);
    }

    #[test]
    fn histogram_of_constant_values_is_a_single_full_bin() {
        let bins = histogram(&[0.25; 10], 7);
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].count, 10);
        assert_eq!(bins[0].density, 1.0);
    }

    #[test]
    fn histogram_of_uniform_values_has_unit_density() {
        let values: Vec<f64> = (0..10_000).map(|i| i as f64 / 9_999.0).collect();
        let bins = histogram(&values, 10);
        assert_eq!(bins.len(), 10);
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 10_000);
        for bin in &bins {
            assert!((bin.density - 1.0).abs() < 0.05, "density {}", bin.density);
        }
        // Densities integrate to one.
        let mass: f64 = bins.iter().map(|b| b.density * (b.upper - b.lower)).sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_bin_counts_cover_every_sample() {
        let config = ExperimentConfig::single(RingFamily::Series, 2, 2, 4, 500, 5);
        let report = &run_experiment(&config).unwrap()[0];
        let total: u64 = report.stats.histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, 500);
    }

    #[test]
    fn stats_use_population_standard_deviation() {
        // Two one-dimensional samples of measures 1/4 and 3/4: mean 1/2,
        // population variance 1/16, std 1/4 (the sample convention would
        // give sqrt(1/8)).
        let ring = series(2, 2);
        let stats = stats_from_cards(&[1, 3], &ring, 1, 4).unwrap();
        assert_eq!(stats.mean, 0.5);
        assert_eq!(stats.std, 0.25);
        assert_eq!(stats.min, 0.25);
        assert_eq!(stats.max, 0.75);
        assert_eq!(stats.parity_even, 0);
    }

    #[test]
    fn mean_theoretical_matches_exact_rational_at_small_levels() {
        let config = ExperimentConfig::single(RingFamily::Series, 2, 2, 1, 10, 1);
        let report = &run_experiment(&config).unwrap()[0];
        let exact = theory::expected_measure(2, 2, 1);
        assert!((report.mean_theoretical - exact.to_f64().unwrap()).abs() < 1e-12);
        assert!(BigRational::one() > exact);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = ExperimentConfig::single(RingFamily::Series, 2, 2, 3, 100, 0);
        config.samples = 0;
        assert!(matches!(
            run_experiment(&config),
            Err(MonteCarloError::InvalidConfig(_))
        ));
        let mut config = ExperimentConfig::single(RingFamily::Series, 2, 2, 3, 100, 0);
        config.histogram_bins = 0;
        assert!(matches!(
            run_experiment(&config),
            Err(MonteCarloError::InvalidConfig(_))
        ));
        let mut config = ExperimentConfig::single(RingFamily::Series, 2, 2, 2, 100, 0);
        config.n_min = 3;
        assert!(matches!(
            run_experiment(&config),
            Err(MonteCarloError::InvalidConfig(_))
        ));
        let mut config = ExperimentConfig::single(RingFamily::Series, 2, 2, 3, 100, 0);
        config.samples = 1 << 32;
        assert!(matches!(
            run_experiment(&config),
            Err(MonteCarloError::InvalidConfig(_))
        ));
    }

    #[test]
    fn reports_survive_a_json_round_trip() {
        let config = ExperimentConfig::single(RingFamily::Padic, 3, 2, 2, 50, 9);
        let reports = run_experiment(&config).unwrap();
        let json = serde_json::to_string(&reports).unwrap();
        let back: Vec<LevelReport> = serde_json::from_str(&json).unwrap();
        assert_eq!(reports, back);
        let config_json = serde_json::to_string(&config).unwrap();
        assert!(config_json.contains("\"family\":\"padic\""));
        let config_back: ExperimentConfig = serde_json::from_str(&config_json).unwrap();
        assert_eq!(config, config_back);
    }
}
