//! Effective-sample-size diagnostics: how many unweighted i.i.d. villages
//! would give the same precision as the weighted estimator at hand. Sample
//! versions work from observed weights; population versions integrate over
//! the design by Monte Carlo and can be computed before running an
//! experiment. The ratio `n_eff / N` is the relative efficiency (the inverse
//! design effect).

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{Contrast, VillageDesign};
use crate::error::{Error, Result};
use crate::numeric::mean;
use crate::rngstream::{substream2, PURPOSE_ESS};

/// Which effective-sample-size quantity a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EssKind {
    OffpolicyMean,
    AteSample,
    AtePopulation,
    OffpolicyAte,
    OffpolicyAtePopulation,
}

/// An effective sample size with its comparison parameters. `n_eff` may be
/// infinite, which signals an identical-contrast degenerate case rather than
/// an error; `infinite` makes that explicit for JSON consumers.
#[derive(Debug, Clone, Serialize)]
pub struct EssReport {
    pub kind: EssKind,
    pub n_eff: f64,
    pub infinite: bool,
    pub rho: f64,
    pub n: usize,
    pub relative_efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl EssReport {
    pub fn new(kind: EssKind, n_eff: f64, rho: f64, n: usize) -> EssReport {
        let infinite = n_eff.is_infinite();
        EssReport {
            kind,
            n_eff,
            infinite,
            rho,
            n,
            relative_efficiency: n_eff / n as f64,
            note: infinite.then(|| {
                "infinite effective sample size: the contrasted strategies are \
                 indistinguishable on this data"
                    .to_string()
            }),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0 < rho && rho < 1.0) {
        return Err(Error::invalid(format!(
            "rho must lie strictly in (0,1), got {rho}"
        )));
    }
    Ok(())
}

/// Effective sample size of a self-normalized off-policy mean:
/// `(sum w)^2 / sum w^2`.
pub fn ess_offpolicy_mean(w_a: &[f64]) -> Result<f64> {
    let sum: f64 = w_a.iter().sum();
    let sum_sq: f64 = w_a.iter().map(|w| w * w).sum();
    if sum <= 0.0 || sum_sq == 0.0 {
        return Err(Error::degenerate(
            "all weights are zero; the off-policy mean is undefined",
        ));
    }
    Ok(sum * sum / sum_sq)
}

/// Sample effective sample size of the Hajek treatment-effect estimator,
/// relative to a difference-in-means estimator in a Bernoulli(rho)
/// experiment (which has n_eff = N by construction).
pub fn ess_ate_sample(w_a: &[f64], w_b: &[f64], rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let n = w_a.len();
    if n == 0 || w_b.len() != n {
        return Err(Error::invalid("weight columns must be nonempty and equal-length"));
    }
    let bar_a = mean(w_a);
    let bar_b = mean(w_b);
    let mut denom = 0.0;
    let mut scale = 0.0;
    for (a, b) in w_a.iter().zip(w_b) {
        let t = bar_b * a - bar_a * b;
        let t_scale = bar_b * a + bar_a * b;
        denom += t * t;
        scale += t_scale * t_scale;
    }
    denom /= n as f64;
    scale /= n as f64;
    // weights proportional across arms: the contrast carries no information
    if denom <= 1e-24 * scale {
        return Ok(f64::INFINITY);
    }
    Ok((n as f64) * bar_a * bar_a * bar_b * bar_b / denom / (rho * (1.0 - rho)))
}

/// Off-policy specialization of [`ess_ate_sample`] where every village was
/// assigned to strategy B (all `w_B = 1`).
pub fn ess_offpolicy_ate(w_a: &[f64], rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let n = w_a.len();
    if n == 0 {
        return Err(Error::invalid("no weights"));
    }
    let bar = mean(w_a);
    let var = w_a.iter().map(|w| (w - bar) * (w - bar)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((n as f64) * bar * bar / var / (rho * (1.0 - rho)))
}

/// Population effective sample size of the Hajek treatment-effect estimator:
/// `N / (rho(1-rho) E[((P_A - P_B)/P_Delta)^2])`, the expectation estimated
/// by drawing `draws_per_village` seed sets per village from the design.
pub fn ess_population(
    designs: &[VillageDesign],
    contrast: Contrast,
    rho: f64,
    draws_per_village: usize,
    master_seed: u64,
) -> Result<f64> {
    check_rho(rho)?;
    if draws_per_village < 100 {
        return Err(Error::invalid("population ESS needs at least 100 draws per village"));
    }
    if designs.is_empty() {
        return Err(Error::invalid("no villages"));
    }
    let sums: Vec<f64> = designs
        .par_iter()
        .enumerate()
        .map(|(i, design)| -> Result<f64> {
            let mut rng = substream2(master_seed, PURPOSE_ESS, 0, i as u64);
            let mut acc = 0.0;
            for _ in 0..draws_per_village {
                let (_, set) = design.sample(&mut rng)?;
                let (la, lb, ld) = design.log_abd(contrast, &set)?;
                if !crate::design::log_probs_differ(la, lb) {
                    continue; // exact agreement: (w_a - w_b)^2 = 0
                }
                let w_a = if la.is_zero() { 0.0 } else { (la.log() - ld.log()).exp() };
                let w_b = if lb.is_zero() { 0.0 } else { (lb.log() - ld.log()).exp() };
                let diff = w_a - w_b;
                acc += diff * diff;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let expectation =
        sums.iter().sum::<f64>() / (designs.len() * draws_per_village) as f64;
    if expectation == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(designs.len() as f64 / expectation / (rho * (1.0 - rho)))
}

/// Population effective sample size for off-policy treatment-effect
/// estimation from data gathered entirely under strategy B:
/// `N / (rho(1-rho) Var_B(W_A))`, with the weight variance estimated by
/// drawing sets from B and averaging `W_A^2` (its mean is one).
pub fn ess_offpolicy_ate_population(
    designs: &[VillageDesign],
    contrast: Contrast,
    rho: f64,
    draws_per_village: usize,
    master_seed: u64,
) -> Result<f64> {
    check_rho(rho)?;
    if draws_per_village < 100 {
        return Err(Error::invalid("population ESS needs at least 100 draws per village"));
    }
    if designs.is_empty() {
        return Err(Error::invalid("no villages"));
    }
    let sums: Vec<f64> = designs
        .par_iter()
        .enumerate()
        .map(|(i, design)| -> Result<f64> {
            let mut rng = substream2(master_seed, PURPOSE_ESS, 1, i as u64);
            let mut acc = 0.0;
            for _ in 0..draws_per_village {
                let set = design.prepared().sample(contrast.b, &mut rng)?;
                let la = design.prepared().strategy_log_prob(contrast.a, &set)?;
                let lb = design.prepared().strategy_log_prob(contrast.b, &set)?;
                let w = if !crate::design::log_probs_differ(la, lb) {
                    1.0
                } else if la.is_zero() {
                    0.0
                } else {
                    (la.log() - lb.log()).exp()
                };
                acc += w * w;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let second_moment =
        sums.iter().sum::<f64>() / (designs.len() * draws_per_village) as f64;
    let weight_variance = second_moment - 1.0;
    if weight_variance <= 0.0 {
        // at or below the Monte-Carlo floor: strategies indistinguishable
        return Ok(f64::INFINITY);
    }
    Ok(designs.len() as f64 / weight_variance / (rho * (1.0 - rho)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{prepare_designs, DesignSpec, KSpec, StrategyKind};
    use crate::graph::{Village, VillageCollection};
    use crate::synth::cycle_graph;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn offpolicy_mean_examples() {
        let equal = vec![2.5; 40];
        assert_abs_diff_eq!(ess_offpolicy_mean(&equal).unwrap(), 40.0, epsilon = 1e-12);

        let mut point_mass = vec![0.0; 25];
        point_mass[0] = 1.0;
        assert_abs_diff_eq!(ess_offpolicy_mean(&point_mass).unwrap(), 1.0, epsilon = 1e-12);

        assert!(ess_offpolicy_mean(&vec![0.0; 5]).is_err());
    }

    #[test]
    fn dm_pattern_weights_give_exactly_n() {
        for rho in [0.3, 0.5] {
            for n in [10usize, 100] {
                let n_a = (rho * n as f64).round() as usize;
                let w_a: Vec<f64> = (0..n).map(|i| if i < n_a { 1.0 } else { 0.0 }).collect();
                let w_b: Vec<f64> = w_a.iter().map(|w| 1.0 - w).collect();
                let ess = ess_ate_sample(&w_a, &w_b, rho).unwrap();
                assert_abs_diff_eq!(ess, n as f64, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn identical_weights_are_infinitely_efficient() {
        let w = vec![0.5, 2.0, 1.5, 0.1];
        assert!(ess_ate_sample(&w, &w, 0.5).unwrap().is_infinite());
        // also scale-free in each arm
        let scaled: Vec<f64> = w.iter().map(|x| 3.0 * x).collect();
        assert!(ess_ate_sample(&w, &scaled, 0.5).unwrap().is_infinite());
    }

    #[test]
    fn ate_sample_matches_direct_formula() {
        let w_a = [2.0, 0.5, 1.0, 0.0];
        let w_b = [1.0, 1.0, 1.0, 1.0];
        let rho = 0.4;
        // direct evaluation of the defining expression
        let bar_a: f64 = w_a.iter().sum::<f64>() / 4.0;
        let bar_b: f64 = 1.0;
        let denom: f64 = w_a
            .iter()
            .zip(&w_b)
            .map(|(a, b)| (bar_b * a - bar_a * b).powi(2))
            .sum::<f64>()
            / 4.0;
        let expected = 4.0 * bar_a.powi(2) * bar_b.powi(2) / denom / (rho * (1.0 - rho));
        assert_relative_eq!(
            ess_ate_sample(&w_a, &w_b, rho).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ate_sample_is_scale_free_per_arm() {
        let w_a = [2.0, 0.5, 1.0, 0.25];
        let w_b = [1.0, 0.5, 2.0, 1.25];
        let base = ess_ate_sample(&w_a, &w_b, 0.5).unwrap();
        let sa: Vec<f64> = w_a.iter().map(|x| 5.0 * x).collect();
        let sb: Vec<f64> = w_b.iter().map(|x| 0.125 * x).collect();
        assert_relative_eq!(
            ess_ate_sample(&sa, &sb, 0.5).unwrap(),
            base,
            epsilon = 1e-10
        );
    }

    #[test]
    fn offpolicy_ate_examples() {
        assert!(ess_offpolicy_ate(&vec![3.0; 8], 0.5).unwrap().is_infinite());

        // w in {0,2} half each: mean 1, variance 1, so n_eff = 4N
        let n = 30usize;
        let w: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect();
        assert_abs_diff_eq!(
            ess_offpolicy_ate(&w, 0.5).unwrap(),
            4.0 * n as f64,
            epsilon = 1e-9
        );

        assert!(ess_offpolicy_ate(&w, 0.0).is_err());
    }

    fn cycle_collection(count: usize, n: usize) -> VillageCollection {
        let villages = (0..count)
            .map(|i| Village {
                id: format!("v{i}"),
                labels: (0..n).map(|j| j.to_string()).collect(),
                graph: cycle_graph(n),
            })
            .collect();
        VillageCollection::new(villages).unwrap()
    }

    #[test]
    fn population_ess_infinite_on_regular_graphs() {
        // one-hop is exactly uniform on cycles, so A and B coincide
        let collection = cycle_collection(5, 6);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let ess = ess_population(&designs, Contrast::onehop_vs_random(), 0.5, 200, 0).unwrap();
        assert!(ess.is_infinite());

        let single = prepare_designs(
            &collection,
            &DesignSpec::single(StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let ess =
            ess_offpolicy_ate_population(&single, Contrast::onehop_vs_random(), 0.5, 200, 0)
                .unwrap();
        assert!(ess.is_infinite());
    }

    #[test]
    fn population_ess_symmetric_in_contrast_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        use rand::SeedableRng;
        let villages: Vec<Village> = (0..6)
            .map(|i| Village {
                id: format!("v{i}"),
                labels: (0..12).map(|j| j.to_string()).collect(),
                graph: crate::synth::random_preferential(12, 3, &mut rng),
            })
            .collect();
        let collection = VillageCollection::new(villages).unwrap();
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let ab = ess_population(&designs, Contrast::onehop_vs_random(), 0.5, 20_000, 1).unwrap();
        let ba = ess_population(
            &designs,
            Contrast::new(StrategyKind::Random, StrategyKind::Onehop),
            0.5,
            20_000,
            2,
        )
        .unwrap();
        assert!(
            (ab - ba).abs() / ab < 0.05,
            "A/B = {ab}, B/A = {ba} should agree up to Monte-Carlo error"
        );
    }

    #[test]
    fn relative_efficiency_drops_with_seed_set_size() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let villages: Vec<Village> = (0..8)
            .map(|i| Village {
                id: format!("v{i}"),
                labels: (0..20).map(|j| j.to_string()).collect(),
                graph: crate::synth::random_preferential(20, 3, &mut rng),
            })
            .collect();
        let collection = VillageCollection::new(villages).unwrap();
        let eff_at = |k: usize| {
            let designs = prepare_designs(
                &collection,
                &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
                &KSpec::Fixed(k),
                0,
            )
            .unwrap();
            ess_population(&designs, Contrast::onehop_vs_random(), 0.5, 10_000, 3).unwrap()
                / collection.len() as f64
        };
        let small_k = eff_at(1);
        let large_k = eff_at(6);
        assert!(
            small_k > large_k,
            "relative efficiency should drop as k grows: k=1 gives {small_k}, k=6 gives {large_k}"
        );
    }
}
