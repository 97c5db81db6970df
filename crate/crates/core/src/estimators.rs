//! Contrast estimators between two stochastic seeding strategies:
//! difference-in-means, Horvitz-Thompson, and Hajek, with their variance
//! estimators and normal-theory intervals.
//!
//! Every village contributes the observed probabilities (a, b, d) of its
//! seed set under the contrasted strategies and the design, yielding weights
//! `w_A = a/d` and `w_B = b/d`. The Horvitz-Thompson estimator averages
//! `(w_A - w_B) y`; the Hajek estimator first normalizes each weight column
//! to mean one, trading unbiasedness for stability when the weights are
//! heavy-tailed.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::{log_probs_differ, Arm, Contrast, VillageDesign};
use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::strategies::SeedSet;

/// Relative tolerance below which an accumulated contrast is treated as an
/// exact cancellation (weights identical up to round-off).
pub(crate) const CANCELLATION_TOL: f64 = 1e-12;

/// One analyzed village: its seed set, outcome, optional arm label, and the
/// log-probabilities of the observed set under the contrast and the design.
#[derive(Debug, Clone)]
pub struct VillageObservation {
    pub village_id: String,
    pub seed_set: SeedSet,
    pub outcome: f64,
    pub arm: Option<Arm>,
    pub log_a: LogProb,
    pub log_b: LogProb,
    pub log_d: LogProb,
}

impl VillageObservation {
    /// Build an observation by evaluating a design and contrast on an
    /// observed (seed set, outcome) pair.
    pub fn from_design(
        design: &VillageDesign,
        contrast: Contrast,
        seed_set: SeedSet,
        outcome: f64,
        arm: Option<Arm>,
    ) -> Result<VillageObservation> {
        let (log_a, log_b, log_d) = design.log_abd(contrast, &seed_set)?;
        Ok(VillageObservation {
            village_id: design.village().id.clone(),
            seed_set,
            outcome,
            arm,
            log_a,
            log_b,
            log_d,
        })
    }
}

/// Observed and normalized weights for one village.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightTriple {
    pub w_a: f64,
    pub w_b: f64,
    pub w_a_norm: f64,
    pub w_b_norm: f64,
}

#[derive(Debug, Clone)]
pub struct WeightedObservation {
    pub observation: VillageObservation,
    pub weights: WeightTriple,
}

impl WeightedObservation {
    pub fn outcome(&self) -> f64 {
        self.observation.outcome
    }
}

/// Raw importance weights w = exp(log_p - log_d), with positivity checks.
/// A village whose seed set has probability zero under both contrasted
/// strategies gets zero weights but still counts toward N.
pub fn raw_weights(observations: &[VillageObservation]) -> Result<Vec<(f64, f64)>> {
    observations
        .iter()
        .map(|obs| {
            if !obs.outcome.is_finite() {
                return Err(Error::invalid(format!(
                    "village {}: outcome {} is not finite",
                    obs.village_id, obs.outcome
                )));
            }
            if obs.log_d.is_zero() {
                if log_probs_differ(obs.log_a, obs.log_b) {
                    return Err(Error::degenerate(format!(
                        "village {}: positivity violated — the contrasted strategies \
                         disagree on the observed seed set but its design probability is zero",
                        obs.village_id
                    )));
                }
                if !obs.log_a.is_zero() {
                    return Err(Error::degenerate(format!(
                        "village {}: observed seed set has zero design probability",
                        obs.village_id
                    )));
                }
                return Ok((0.0, 0.0));
            }
            let w = |lp: LogProb| {
                if lp.is_zero() {
                    0.0
                } else {
                    (lp.log() - obs.log_d.log()).exp()
                }
            };
            Ok((w(obs.log_a), w(obs.log_b)))
        })
        .collect()
}

/// Attach raw and normalized weights to every observation. Errors when a
/// weight column sums to zero, since the Hajek normalization is then
/// undefined.
pub fn compute_weights(observations: &[VillageObservation]) -> Result<Vec<WeightedObservation>> {
    if observations.is_empty() {
        return Err(Error::invalid("no observations"));
    }
    let raw = raw_weights(observations)?;
    let n = raw.len() as f64;
    let sum_a: f64 = raw.iter().map(|(a, _)| a).sum();
    let sum_b: f64 = raw.iter().map(|(_, b)| b).sum();
    if sum_a <= 0.0 || sum_b <= 0.0 {
        return Err(Error::degenerate(
            "Hajek normalization undefined: a weight column sums to zero \
             (no observed seed set is possible under one contrasted strategy)",
        ));
    }
    Ok(observations
        .iter()
        .zip(raw)
        .map(|(obs, (w_a, w_b))| WeightedObservation {
            observation: obs.clone(),
            weights: WeightTriple {
                w_a,
                w_b,
                w_a_norm: w_a * n / sum_a,
                w_b_norm: w_b * n / sum_b,
            },
        })
        .collect())
}

/// A point estimate with its variance, interval, and provenance notes.
///
/// `variance` follows each estimator's own convention: for the weighted
/// estimators it is the per-village asymptotic variance V with
/// `se = sqrt(V/N)`; for difference-in-means it is the Neyman variance,
/// already the squared standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub tau_hat: f64,
    pub variance: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub p_value: Option<f64>,
    pub n: usize,
    pub n_eff: Option<f64>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    fn bare(estimator: &str, tau_hat: f64, variance: f64, se: f64, n: usize) -> EstimateReport {
        EstimateReport {
            estimator: estimator.to_string(),
            tau_hat,
            variance,
            se,
            ci_low: tau_hat,
            ci_high: tau_hat,
            level: 0.0,
            p_value: None,
            n,
            n_eff: None,
            notes: Vec::new(),
        }
    }
}

/// Horvitz-Thompson contrast from raw weight/outcome arrays:
/// tau = mean((w_a - w_b) y), V = sample variance of the summands.
pub fn ht_from_arrays(w_a: &[f64], w_b: &[f64], y: &[f64]) -> (f64, f64) {
    let terms: Vec<f64> = w_a
        .iter()
        .zip(w_b)
        .zip(y)
        .map(|((a, b), y)| (a - b) * y)
        .collect();
    (crate::numeric::mean(&terms), crate::numeric::sample_variance(&terms))
}

/// Hajek contrast from raw weight/outcome arrays. Weights are normalized to
/// mean one per column; the variance estimator uses the plug-in means and is
/// assembled from weights (the 1/d^2 form with d factored out), which keeps
/// it finite even when the raw probabilities underflow.
pub fn hajek_from_arrays(w_a: &[f64], w_b: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = y.len() as f64;
    let sum_a: f64 = w_a.iter().sum();
    let sum_b: f64 = w_b.iter().sum();
    if sum_a <= 0.0 || sum_b <= 0.0 {
        return Err(Error::degenerate(
            "Hajek normalization undefined: a weight column sums to zero",
        ));
    }
    let mut tau = 0.0;
    let mut mu_a = 0.0;
    let mut mu_b = 0.0;
    let mut tau_scale = 0.0;
    for i in 0..y.len() {
        let wa = w_a[i] * n / sum_a;
        let wb = w_b[i] * n / sum_b;
        tau += (wa - wb) * y[i];
        tau_scale += (wa + wb) * y[i].abs();
        mu_a += wa * y[i];
        mu_b += wb * y[i];
    }
    tau /= n;
    tau_scale /= n;
    mu_a /= n;
    mu_b /= n;
    let mut v = 0.0;
    let mut v_scale = 0.0;
    for i in 0..y.len() {
        let term = mu_a * w_a[i] - mu_b * w_b[i] - y[i] * (w_a[i] - w_b[i]);
        let term_scale =
            mu_a.abs() * w_a[i] + mu_b.abs() * w_b[i] + y[i].abs() * (w_a[i] + w_b[i]);
        v += term * term;
        v_scale += term_scale * term_scale;
    }
    v /= n;
    v_scale /= n;
    // a contrast smaller than accumulated round-off is an exact cancellation
    if tau.abs() <= CANCELLATION_TOL * tau_scale {
        tau = 0.0;
    }
    if v <= CANCELLATION_TOL * CANCELLATION_TOL * v_scale {
        v = 0.0;
    }
    Ok((tau, v))
}

/// Difference in arm means with the Neyman conservative variance
/// S_A^2/N_A + S_B^2/N_B.
pub fn dm_from_arrays(y: &[f64], arms: &[Option<Arm>]) -> Result<(f64, f64)> {
    let mut ys_a = Vec::new();
    let mut ys_b = Vec::new();
    for (y, arm) in y.iter().zip(arms) {
        match arm {
            Some(Arm::A) => ys_a.push(*y),
            Some(Arm::B) => ys_b.push(*y),
            None => {
                return Err(Error::invalid(
                    "difference-in-means is not defined without treatment labels \
                     (off-policy design)",
                ))
            }
        }
    }
    if ys_a.len() < 2 || ys_b.len() < 2 {
        return Err(Error::degenerate(format!(
            "difference-in-means needs at least two villages per arm, got {} and {}",
            ys_a.len(),
            ys_b.len()
        )));
    }
    let tau = crate::numeric::mean(&ys_a) - crate::numeric::mean(&ys_b);
    let v = crate::numeric::sample_variance(&ys_a) / ys_a.len() as f64
        + crate::numeric::sample_variance(&ys_b) / ys_b.len() as f64;
    Ok((tau, v))
}

pub fn horvitz_thompson(observations: &[WeightedObservation]) -> EstimateReport {
    let w_a: Vec<f64> = observations.iter().map(|o| o.weights.w_a).collect();
    let w_b: Vec<f64> = observations.iter().map(|o| o.weights.w_b).collect();
    let y: Vec<f64> = observations.iter().map(|o| o.outcome()).collect();
    let (tau, v) = ht_from_arrays(&w_a, &w_b, &y);
    let n = y.len();
    let mut report =
        EstimateReport::bare("horvitz_thompson", tau, v, (v / n as f64).sqrt(), n);
    if n < 2 {
        report
            .notes
            .push("variance not estimable from a single village; reported as zero".into());
    }
    report
}

pub fn hajek(observations: &[WeightedObservation]) -> Result<EstimateReport> {
    let w_a: Vec<f64> = observations.iter().map(|o| o.weights.w_a).collect();
    let w_b: Vec<f64> = observations.iter().map(|o| o.weights.w_b).collect();
    let y: Vec<f64> = observations.iter().map(|o| o.outcome()).collect();
    let (tau, v) = hajek_from_arrays(&w_a, &w_b, &y)?;
    let n = y.len();
    Ok(EstimateReport::bare(
        "hajek",
        tau,
        v,
        (v / n as f64).sqrt(),
        n,
    ))
}

pub fn diff_in_means(observations: &[WeightedObservation]) -> Result<EstimateReport> {
    let y: Vec<f64> = observations.iter().map(|o| o.outcome()).collect();
    let arms: Vec<Option<Arm>> = observations
        .iter()
        .map(|o| o.observation.arm)
        .collect();
    let (tau, v) = dm_from_arrays(&y, &arms)?;
    let mut report = EstimateReport::bare("diff_in_means", tau, v, v.sqrt(), y.len());
    report
        .notes
        .push("variance is the Neyman conservative variance (squared SE)".into());
    Ok(report)
}

/// Attach a two-sided normal confidence interval and p-value at `level`.
pub fn normal_ci(report: &EstimateReport, level: f64) -> Result<EstimateReport> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let normal = Normal::standard();
    let z = normal.inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let mut out = report.clone();
    out.level = level;
    if report.se > 0.0 {
        out.ci_low = report.tau_hat - z * report.se;
        out.ci_high = report.tau_hat + z * report.se;
        let t = report.tau_hat.abs() / report.se;
        out.p_value = Some(2.0 * (1.0 - normal.cdf(t)));
    } else {
        out.ci_low = report.tau_hat;
        out.ci_high = report.tau_hat;
        out.p_value = Some(if report.tau_hat == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(out)
}
