//! Finite-sample inference: exact Fisherian randomization tests of the sharp
//! null (outcomes unaffected by the seed set) and nonparametric bootstrap
//! intervals.
//!
//! The randomization test redraws every village's seed set from the design,
//! keeps the observed outcomes fixed, and recomputes the test statistic;
//! under the sharp null this reproduces the statistic's exact distribution.

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{Arm, Contrast, VillageDesign};
use crate::error::{Error, Result};
use crate::estimators::{dm_from_arrays, hajek_from_arrays, ht_from_arrays, VillageObservation};
use crate::rngstream::{substream, PURPOSE_BOOTSTRAP, PURPOSE_FISHER};

/// Test statistic for the randomization test. The Studentized Hajek
/// statistic is the default: its permutation distribution is also
/// asymptotically valid beyond the sharp null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatistic {
    HajekStudentized,
    Hajek,
    HorvitzThompson,
    DiffMeans,
}

impl TestStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            TestStatistic::HajekStudentized => "hajek_studentized",
            TestStatistic::Hajek => "hajek",
            TestStatistic::HorvitzThompson => "horvitz_thompson",
            TestStatistic::DiffMeans => "diff_in_means",
        }
    }
}

/// Divide-by-sd guard shared by Studentized statistics: 0/0 counts as no
/// evidence, x/0 as infinite evidence in the direction of x.
fn studentize(tau: f64, variance: f64) -> f64 {
    if variance > 0.0 {
        tau / variance.sqrt()
    } else if tau == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(tau)
    }
}

fn statistic_value(
    kind: TestStatistic,
    w_a: &[f64],
    w_b: &[f64],
    y: &[f64],
    arms: &[Option<Arm>],
) -> Result<f64> {
    match kind {
        TestStatistic::HajekStudentized => {
            let (tau, v) = hajek_from_arrays(w_a, w_b, y)?;
            Ok(studentize(tau, v))
        }
        TestStatistic::Hajek => Ok(hajek_from_arrays(w_a, w_b, y)?.0),
        TestStatistic::HorvitzThompson => Ok(ht_from_arrays(w_a, w_b, y).0),
        TestStatistic::DiffMeans => {
            let (tau, v) = dm_from_arrays(y, arms)?;
            Ok(studentize(tau, v))
        }
    }
}

/// Outcome of a randomization test.
#[derive(Debug, Clone, Serialize)]
pub struct RandomizationResult {
    pub statistic: String,
    pub observed: f64,
    pub p_value: f64,
    pub replicates: usize,
    /// Replicates where the statistic was undefined (for example a weight
    /// column summing to zero); they are counted in the rejection tail, which
    /// is conservative.
    pub degenerate_replicates: usize,
    #[serde(skip)]
    pub null_stats: Vec<f64>,
}

/// Exact test of the sharp null by redrawing seed sets from the design.
/// Two-sided p-value on |statistic| with the add-one convention, so p is
/// never zero.
pub fn fisher_test(
    observations: &[VillageObservation],
    designs: &[VillageDesign],
    contrast: Contrast,
    replicates: usize,
    master_seed: u64,
    statistic: TestStatistic,
) -> Result<RandomizationResult> {
    if replicates < 99 {
        return Err(Error::invalid("fisher_test needs at least 99 replicates"));
    }
    if observations.len() != designs.len() || observations.is_empty() {
        return Err(Error::invalid(format!(
            "{} observations vs {} designs",
            observations.len(),
            designs.len()
        )));
    }
    for (obs, design) in observations.iter().zip(designs) {
        if obs.village_id != design.village().id {
            return Err(Error::invalid(format!(
                "observation for {} does not match design for {}",
                obs.village_id,
                design.village().id
            )));
        }
    }

    let y: Vec<f64> = observations.iter().map(|o| o.outcome).collect();

    // observed statistic from the stored probabilities
    let raw = crate::estimators::raw_weights(observations)?;
    let w_a: Vec<f64> = raw.iter().map(|(a, _)| *a).collect();
    let w_b: Vec<f64> = raw.iter().map(|(_, b)| *b).collect();
    let arms: Vec<Option<Arm>> = observations.iter().map(|o| o.arm).collect();
    let observed = statistic_value(statistic, &w_a, &w_b, &y, &arms)?;

    let null_stats: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut rng = substream(master_seed, PURPOSE_FISHER, rep as u64);
            let mut w_a = Vec::with_capacity(designs.len());
            let mut w_b = Vec::with_capacity(designs.len());
            let mut arms = Vec::with_capacity(designs.len());
            for design in designs {
                let (arm, set) = design.sample(&mut rng)?;
                let (la, lb, ld) = design.log_abd(contrast, &set)?;
                let ld = ld.log();
                w_a.push(if la.is_zero() { 0.0 } else { (la.log() - ld).exp() });
                w_b.push(if lb.is_zero() { 0.0 } else { (lb.log() - ld).exp() });
                arms.push(arm);
            }
            // NaN marks a failed replicate; it lands in the tail (conservative)
            Ok(statistic_value(statistic, &w_a, &w_b, &y, &arms).unwrap_or(f64::NAN))
        })
        .collect::<Result<Vec<_>>>()?;

    let degenerate = null_stats.iter().filter(|s| s.is_nan()).count();
    let tail = null_stats
        .iter()
        .filter(|s| s.is_nan() || s.abs() >= observed.abs())
        .count();
    let p_value = (1 + tail) as f64 / (1 + replicates) as f64;

    Ok(RandomizationResult {
        statistic: statistic.name().to_string(),
        observed,
        p_value,
        replicates,
        degenerate_replicates: degenerate,
        null_stats,
    })
}

/// Estimator bootstrapped over villages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapEstimator {
    Hajek,
    HorvitzThompson,
    DiffMeans,
}

impl BootstrapEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            BootstrapEstimator::Hajek => "hajek",
            BootstrapEstimator::HorvitzThompson => "horvitz_thompson",
            BootstrapEstimator::DiffMeans => "diff_in_means",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub estimator: String,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub replicates: usize,
    /// Replicates dropped because the estimator was undefined on the
    /// resampled villages.
    pub dropped: usize,
}

/// Nonparametric bootstrap: resample villages (their weight/outcome triples)
/// with replacement, recompute the estimator per replicate, and report the
/// standard deviation and percentile interval of the replicate estimates.
pub fn bootstrap(
    observations: &[VillageObservation],
    replicates: usize,
    level: f64,
    master_seed: u64,
    estimator: BootstrapEstimator,
) -> Result<BootstrapResult> {
    if replicates < 200 {
        return Err(Error::invalid("bootstrap needs at least 200 replicates"));
    }
    if observations.is_empty() {
        return Err(Error::invalid("no observations"));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid(format!("level must be in (0,1), got {level}")));
    }
    let raw = crate::estimators::raw_weights(observations)?;
    let y: Vec<f64> = observations.iter().map(|o| o.outcome).collect();
    let arms: Vec<Option<Arm>> = observations.iter().map(|o| o.arm).collect();
    let n = y.len();

    let estimates: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(master_seed, PURPOSE_BOOTSTRAP, rep as u64);
            use rand::Rng;
            let mut rw_a = Vec::with_capacity(n);
            let mut rw_b = Vec::with_capacity(n);
            let mut ry = Vec::with_capacity(n);
            let mut rarms = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                rw_a.push(raw[i].0);
                rw_b.push(raw[i].1);
                ry.push(y[i]);
                rarms.push(arms[i]);
            }
            let value = match estimator {
                BootstrapEstimator::Hajek => hajek_from_arrays(&rw_a, &rw_b, &ry).map(|t| t.0),
                BootstrapEstimator::HorvitzThompson => Ok(ht_from_arrays(&rw_a, &rw_b, &ry).0),
                BootstrapEstimator::DiffMeans => dm_from_arrays(&ry, &rarms).map(|t| t.0),
            };
            value.ok().filter(|v| v.is_finite())
        })
        .collect();

    let kept: Vec<f64> = estimates.iter().filter_map(|e| *e).collect();
    let dropped = replicates - kept.len();
    if dropped * 5 > replicates {
        return Err(Error::degenerate(format!(
            "{dropped} of {replicates} bootstrap replicates were undefined (more than 20%)"
        )));
    }

    let mut sorted = kept.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapResult {
        estimator: estimator.name().to_string(),
        se: crate::numeric::sample_sd(&kept),
        ci_low: crate::numeric::quantile(&sorted, alpha),
        ci_high: crate::numeric::quantile(&sorted, 1.0 - alpha),
        level,
        replicates,
        dropped,
    })
}
