//! Contagion simulation engine: generate synthetic experiments on a
//! collection of networks and measure estimator bias, RMSE, coverage, and
//! power against a simulated ground-truth effect.
//!
//! Two adoption models are provided. The probit model runs a fixed number of
//! synchronous steps in which each non-adopter receives latent utility
//! `alpha + beta * (adopted fraction of in-neighbors) + gamma * X + noise`,
//! where `X` is the summed in-degree of the seed set; adoption is absorbing.
//! The independent cascade gives every fresh adopter one chance to convert
//! each out-neighbor with probability `p`, running until no adoptions occur.
//! Noise is pre-drawn in a fixed order for every node (or edge), so two runs
//! from the same substream are coupled: enlarging the seed set can only grow
//! the adopter set.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Contrast, VillageDesign};
use crate::error::{Error, Result};
use crate::estimators::{
    dm_from_arrays, hajek_from_arrays, ht_from_arrays, normal_ci, EstimateReport,
};
use crate::graph::DirectedGraph;
use crate::numeric::{mean, sample_variance};
use crate::rngstream::{substream2, PURPOSE_ORACLE, PURPOSE_STUDY};
use crate::strategies::SeedSet;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbitParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
}

fn default_t_steps() -> usize {
    3
}

impl ProbitParams {
    pub fn new(alpha: f64, beta: f64) -> ProbitParams {
        ProbitParams {
            alpha,
            beta,
            gamma: 0.0,
            t_steps: default_t_steps(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CascadeParams {
    pub p: f64,
}

/// How village outcomes are generated.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum OutcomeModel {
    Probit(ProbitParams),
    Cascade(CascadeParams),
    /// Outcomes ignore the seed set entirely: y ~ Normal(mean, sd). Useful
    /// for calibration runs where the sharp null holds by construction.
    SharpNull { mean: f64, sd: f64 },
}

/// Fraction of adopters after `t_steps` of the probit contagion.
pub fn simulate_probit<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    seed_set: &SeedSet,
    params: &ProbitParams,
    rng: &mut R,
) -> f64 {
    let n = graph.node_count();
    let mut adopted = vec![false; n];
    for &v in seed_set.nodes() {
        adopted[v] = true;
    }
    let x_term = params.gamma
        * seed_set
            .nodes()
            .iter()
            .map(|&v| graph.in_degree(v) as f64)
            .sum::<f64>();

    let mut prev = adopted.clone();
    for _ in 0..params.t_steps {
        // noise for every node in a fixed order, independent of the adoption
        // path, so same-stream runs stay coupled
        let noise: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        prev.copy_from_slice(&adopted);
        for v in 0..n {
            if prev[v] {
                continue;
            }
            let in_deg = graph.in_degree(v);
            let peer_mean = if in_deg > 0 {
                graph
                    .in_neighbors(v)
                    .iter()
                    .filter(|&&u| prev[u])
                    .count() as f64
                    / in_deg as f64
            } else {
                0.0
            };
            if params.alpha + params.beta * peer_mean + x_term + noise[v] > 0.0 {
                adopted[v] = true;
            }
        }
    }
    adopted.iter().filter(|&&a| a).count() as f64 / n as f64
}

/// Final adopter fraction of a discrete-time independent cascade over the
/// out-edges of fresh adopters.
pub fn simulate_cascade<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    seed_set: &SeedSet,
    params: &CascadeParams,
    rng: &mut R,
) -> f64 {
    let n = graph.node_count();
    // one uniform per edge, in edge-list order: an edge fires at most once,
    // when its source first adopts
    let fires: Vec<bool> = graph
        .edges()
        .iter()
        .map(|_| rng.random::<f64>() < params.p)
        .collect();
    let mut out_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (idx, &(src, dst)) in graph.edges().iter().enumerate() {
        out_edges[src].push((dst, idx));
    }

    let mut adopted = vec![false; n];
    let mut frontier: Vec<usize> = seed_set.nodes().to_vec();
    for &v in &frontier {
        adopted[v] = true;
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for &(v, edge_idx) in &out_edges[u] {
                if !adopted[v] && fires[edge_idx] {
                    adopted[v] = true;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    adopted.iter().filter(|&&a| a).count() as f64 / n as f64
}

/// Simulate one village outcome under the given model.
pub fn simulate_outcome<R: Rng + ?Sized>(
    model: &OutcomeModel,
    graph: &DirectedGraph,
    seed_set: &SeedSet,
    rng: &mut R,
) -> f64 {
    match model {
        OutcomeModel::Probit(p) => simulate_probit(graph, seed_set, p, rng),
        OutcomeModel::Cascade(p) => simulate_cascade(graph, seed_set, p, rng),
        OutcomeModel::SharpNull { mean, sd } => {
            mean + sd * rng.sample::<f64, _>(StandardNormal)
        }
    }
}

/// Simulated ground truth: mean outcome with every village assigned to the
/// contrast's strategy A minus the same under B, with fresh seed draws and
/// noise each replicate. Returns (tau, Monte-Carlo standard error).
pub fn true_effect_oracle(
    designs: &[VillageDesign],
    contrast: Contrast,
    model: &OutcomeModel,
    replicates: usize,
    master_seed: u64,
) -> Result<(f64, f64)> {
    if replicates < 100 {
        return Err(Error::invalid("the effect oracle needs at least 100 replicates"));
    }
    if designs.is_empty() {
        return Err(Error::invalid("no villages"));
    }
    let taus: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut rng = substream2(master_seed, PURPOSE_ORACLE, rep as u64, 0);
            let mut sum_a = 0.0;
            let mut sum_b = 0.0;
            for design in designs {
                let prepared = design.prepared();
                let graph = &design.village().graph;
                let set_a = prepared.sample(contrast.a, &mut rng)?;
                sum_a += simulate_outcome(model, graph, &set_a, &mut rng);
                let set_b = prepared.sample(contrast.b, &mut rng)?;
                sum_b += simulate_outcome(model, graph, &set_b, &mut rng);
            }
            Ok((sum_a - sum_b) / designs.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let tau = mean(&taus);
    let se = (sample_variance(&taus) / replicates as f64).sqrt();
    Ok((tau, se))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    DiffMeans,
    HorvitzThompson,
    Hajek,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::DiffMeans => "diff_in_means",
            EstimatorKind::HorvitzThompson => "horvitz_thompson",
            EstimatorKind::Hajek => "hajek",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Villages drawn (without replacement) from the collection each
    /// replicate.
    pub n_villages: usize,
    pub replicates: usize,
    pub estimators: Vec<EstimatorKind>,
    /// Confidence level for coverage; tests for power use 1 - level.
    pub ci_level: f64,
    /// Replicates for the ground-truth oracle.
    pub oracle_reps: usize,
    pub master_seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n_villages: 0, // 0 means all
            replicates: 500,
            estimators: vec![
                EstimatorKind::DiffMeans,
                EstimatorKind::HorvitzThompson,
                EstimatorKind::Hajek,
            ],
            ci_level: 0.9,
            oracle_reps: 2_000,
            master_seed: 0,
        }
    }
}

/// Aggregated performance of one estimator across study replicates.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub power: f64,
    pub mean_se: f64,
    pub failures: usize,
    #[serde(skip)]
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub true_tau: f64,
    pub true_tau_se: f64,
    pub replicates: usize,
    pub summaries: Vec<EstimatorSummary>,
}

impl StudyResult {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == kind.name())
    }
}

struct ReplicateOutcome {
    // per estimator: (estimate, covered, rejected, se) or None on failure
    cells: Vec<Option<(f64, bool, bool, f64)>>,
}

/// Run a full simulation study: per replicate, draw villages, assign and
/// sample seed sets from the design, simulate outcomes, and compute every
/// requested estimator with its confidence interval. An estimator failing in
/// a replicate is recorded; the replicate is kept for the others.
pub fn run_study(
    designs: &[VillageDesign],
    contrast: Contrast,
    model: &OutcomeModel,
    config: &StudyConfig,
) -> Result<StudyResult> {
    let total = designs.len();
    let n_villages = if config.n_villages == 0 {
        total
    } else {
        config.n_villages
    };
    if n_villages == 0 || n_villages > total {
        return Err(Error::invalid(format!(
            "cannot draw {n_villages} villages from a collection of {total}"
        )));
    }
    if config.estimators.is_empty() {
        return Err(Error::invalid("no estimators requested"));
    }
    if config.replicates == 0 {
        return Err(Error::invalid("study needs at least one replicate"));
    }

    let (true_tau, true_tau_se) =
        true_effect_oracle(designs, contrast, model, config.oracle_reps, config.master_seed)?;
    let alpha = 1.0 - config.ci_level;

    let outcomes: Vec<ReplicateOutcome> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| -> Result<ReplicateOutcome> {
            let mut rng = substream2(config.master_seed, PURPOSE_STUDY, rep as u64, 0);

            // without-replacement village draw
            let mut indices: Vec<usize> = (0..total).collect();
            for i in 0..n_villages {
                let j = rng.random_range(i..total);
                indices.swap(i, j);
            }
            indices.truncate(n_villages);

            let mut w_a = Vec::with_capacity(n_villages);
            let mut w_b = Vec::with_capacity(n_villages);
            let mut y = Vec::with_capacity(n_villages);
            let mut arms = Vec::with_capacity(n_villages);
            for &vi in &indices {
                let design = &designs[vi];
                let (arm, set) = design.sample(&mut rng)?;
                let mut noise_rng =
                    substream2(config.master_seed, PURPOSE_STUDY, rep as u64, 1 + vi as u64);
                let outcome =
                    simulate_outcome(model, &design.village().graph, &set, &mut noise_rng);
                let (la, lb, ld) = design.log_abd(contrast, &set)?;
                let ld = ld.log();
                w_a.push(if la.is_zero() { 0.0 } else { (la.log() - ld).exp() });
                w_b.push(if lb.is_zero() { 0.0 } else { (lb.log() - ld).exp() });
                y.push(outcome);
                arms.push(arm);
            }

            let cells = config
                .estimators
                .iter()
                .map(|kind| {
                    let pair = match kind {
                        EstimatorKind::DiffMeans => dm_from_arrays(&y, &arms),
                        EstimatorKind::HorvitzThompson => Ok(ht_from_arrays(&w_a, &w_b, &y)),
                        EstimatorKind::Hajek => hajek_from_arrays(&w_a, &w_b, &y),
                    };
                    pair.ok().map(|(tau, v)| {
                        let se = match kind {
                            EstimatorKind::DiffMeans => v.sqrt(),
                            _ => (v / y.len() as f64).sqrt(),
                        };
                        let report = EstimateReport {
                            estimator: kind.name().to_string(),
                            tau_hat: tau,
                            variance: v,
                            se,
                            ci_low: tau,
                            ci_high: tau,
                            level: 0.0,
                            p_value: None,
                            n: y.len(),
                            n_eff: None,
                            notes: Vec::new(),
                        };
                        let with_ci =
                            normal_ci(&report, config.ci_level).expect("level validated");
                        let covered =
                            with_ci.ci_low <= true_tau && true_tau <= with_ci.ci_high;
                        let rejected = with_ci.p_value.map(|p| p < alpha).unwrap_or(false);
                        (tau, covered, rejected, se)
                    })
                })
                .collect();
            Ok(ReplicateOutcome { cells })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = config
        .estimators
        .iter()
        .enumerate()
        .map(|(ei, kind)| {
            let mut estimates = Vec::new();
            let mut ses = Vec::new();
            let mut covered = 0usize;
            let mut rejected = 0usize;
            let mut failures = 0usize;
            for outcome in &outcomes {
                match outcome.cells[ei] {
                    Some((tau, cov, rej, se)) => {
                        estimates.push(tau);
                        ses.push(se);
                        if cov {
                            covered += 1;
                        }
                        if rej {
                            rejected += 1;
                        }
                    }
                    None => failures += 1,
                }
            }
            let n_ok = estimates.len().max(1) as f64;
            let bias = mean(&estimates) - true_tau;
            let rmse = (estimates
                .iter()
                .map(|e| (e - true_tau) * (e - true_tau))
                .sum::<f64>()
                / n_ok)
                .sqrt();
            EstimatorSummary {
                estimator: kind.name().to_string(),
                bias,
                rmse,
                coverage: covered as f64 / n_ok,
                power: rejected as f64 / n_ok,
                mean_se: mean(&ses),
                failures,
                estimates,
            }
        })
        .collect();

    Ok(StudyResult {
        true_tau,
        true_tau_se,
        replicates: config.replicates,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{prepare_designs, DesignSpec, KSpec, StrategyKind};
    use crate::graph::{DirectedGraph, Village, VillageCollection};
    use crate::rngstream::substream;
    use crate::synth::{random_gnp, random_preferential};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(n: usize, nodes: &[usize]) -> SeedSet {
        SeedSet::new(n, nodes.to_vec()).unwrap()
    }

    #[test]
    fn probit_with_unreachable_threshold_keeps_only_seeds() {
        let g = random_gnp(12, 0.3, &mut ChaCha8Rng::seed_from_u64(0));
        let params = ProbitParams::new(-1e6, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = simulate_probit(&g, &set(12, &[0, 5]), &params, &mut rng);
        assert_abs_diff_eq!(y, 2.0 / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn probit_matches_closed_form_at_zero_parameters() {
        // alpha = beta = gamma = 0: each non-seed adopts per step with
        // probability 1/2, so after T = 3 steps E[y] = (k + (n-k)(7/8))/n
        let g = random_gnp(10, 0.3, &mut ChaCha8Rng::seed_from_u64(2));
        let params = ProbitParams::new(0.0, 0.0);
        let runs = 100_000;
        let mut total = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seeds = set(10, &[0, 1]);
        for _ in 0..runs {
            total += simulate_probit(&g, &seeds, &params, &mut rng);
        }
        let expected = (2.0 + 8.0 * (1.0 - 0.125)) / 10.0;
        let se = (0.5 * 0.5 / (runs as f64 * 8.0)).sqrt(); // loose per-node bound
        assert!(
            (total / runs as f64 - expected).abs() < 5.0 * se + 1e-3,
            "mean {} vs {expected}",
            total / runs as f64
        );
    }

    #[test]
    fn probit_outcome_bounded_below_by_seed_fraction() {
        let mut graph_rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let g = random_gnp(15, 0.2, &mut graph_rng);
            let params = ProbitParams {
                alpha: -2.0,
                beta: 4.0,
                gamma: 0.0,
                t_steps: 3,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let y = simulate_probit(&g, &set(15, &[1, 2, 3]), &params, &mut rng);
            assert!(y >= 3.0 / 15.0);
        }
    }

    #[test]
    fn simulations_are_deterministic_given_stream() {
        let g = random_preferential(20, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let seeds = set(20, &[0, 7]);
        let probit = ProbitParams::new(-1.0, 4.0);
        let cascade = CascadeParams { p: 0.3 };
        let y1 = simulate_probit(&g, &seeds, &probit, &mut substream(9, 0, 1));
        let y2 = simulate_probit(&g, &seeds, &probit, &mut substream(9, 0, 1));
        assert_eq!(y1, y2);
        let c1 = simulate_cascade(&g, &seeds, &cascade, &mut substream(9, 0, 2));
        let c2 = simulate_cascade(&g, &seeds, &cascade, &mut substream(9, 0, 2));
        assert_eq!(c1, c2);
    }

    #[test]
    fn coupled_runs_are_monotone_in_the_seed_set() {
        let mut graph_rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..30u64 {
            let g = random_gnp(14, 0.25, &mut graph_rng);
            let small = set(14, &[2, 5]);
            let large = set(14, &[2, 5, 9]);
            let probit = ProbitParams {
                alpha: -1.5,
                beta: 5.0,
                gamma: 0.1,
                t_steps: 3,
            };
            let y_small = simulate_probit(&g, &small, &probit, &mut substream(trial, 0, 3));
            let y_large = simulate_probit(&g, &large, &probit, &mut substream(trial, 0, 3));
            assert!(
                y_large >= y_small,
                "trial {trial}: probit {y_large} < {y_small}"
            );

            let cascade = CascadeParams { p: 0.4 };
            let c_small = simulate_cascade(&g, &small, &cascade, &mut substream(trial, 0, 4));
            let c_large = simulate_cascade(&g, &large, &cascade, &mut substream(trial, 0, 4));
            assert!(
                c_large >= c_small,
                "trial {trial}: cascade {c_large} < {c_small}"
            );
        }
    }

    #[test]
    fn cascade_edge_cases() {
        let g = random_gnp(12, 0.3, &mut ChaCha8Rng::seed_from_u64(7));
        let seeds = set(12, &[0, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert_abs_diff_eq!(
            simulate_cascade(&g, &seeds, &CascadeParams { p: 0.0 }, &mut rng),
            2.0 / 12.0,
            epsilon = 1e-12
        );

        // p = 1 reaches exactly the forward-reachable closure
        let closure = {
            let mut reach = vec![false; 12];
            let mut stack = vec![0usize, 3];
            reach[0] = true;
            reach[3] = true;
            while let Some(u) = stack.pop() {
                for &v in g.out_neighbors(u) {
                    if !reach[v] {
                        reach[v] = true;
                        stack.push(v);
                    }
                }
            }
            reach.iter().filter(|&&r| r).count() as f64 / 12.0
        };
        assert_abs_diff_eq!(
            simulate_cascade(&g, &seeds, &CascadeParams { p: 1.0 }, &mut rng),
            closure,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cascade_two_node_closed_form() {
        // graph 0 -> 1 seeded at 0: E[y] = (1 + p)/2
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        let seeds = set(2, &[0]);
        let p = 0.37;
        let runs = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut total = 0.0;
        for _ in 0..runs {
            total += simulate_cascade(&g, &seeds, &CascadeParams { p }, &mut rng);
        }
        let mean_y = total / runs as f64;
        let expected = (1.0 + p) / 2.0;
        let se = (p * (1.0 - p) / runs as f64).sqrt() / 2.0;
        assert!(
            (mean_y - expected).abs() < 3.0 * se,
            "mean {mean_y} vs {expected} (se {se})"
        );
    }

    fn skewed_collection(count: usize, n: usize, seed: u64) -> VillageCollection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let villages = (0..count)
            .map(|i| Village {
                id: format!("v{i}"),
                labels: (0..n).map(|j| j.to_string()).collect(),
                graph: random_preferential(n, 3, &mut rng),
            })
            .collect();
        VillageCollection::new(villages).unwrap()
    }

    #[test]
    fn oracle_is_zero_for_identical_strategies() {
        let collection = skewed_collection(10, 15, 10);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let same = Contrast::new(StrategyKind::Random, StrategyKind::Random);
        let model = OutcomeModel::Probit(ProbitParams::new(-1.0, 4.0));
        let (tau, se) = true_effect_oracle(&designs, same, &model, 300, 11).unwrap();
        assert!(tau.abs() <= 4.0 * se, "tau {tau} (se {se})");
    }

    #[test]
    fn oracle_is_zero_without_peer_effects() {
        // beta = gamma = 0: adoption ignores the network, so any two
        // strategies have the same mean outcome
        let collection = skewed_collection(10, 15, 12);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let model = OutcomeModel::Probit(ProbitParams::new(-1.0, 0.0));
        let (tau, se) =
            true_effect_oracle(&designs, Contrast::onehop_vs_random(), &model, 400, 13).unwrap();
        assert!(tau.abs() <= 4.0 * se, "tau {tau} (se {se})");
    }

    #[test]
    fn oracle_positive_with_degree_effect() {
        // gamma > 0 rewards high in-degree seed sets, which one-hop finds
        // more often on skewed graphs
        let collection = skewed_collection(12, 20, 14);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let model = OutcomeModel::Probit(ProbitParams {
            alpha: -2.0,
            beta: 0.0,
            gamma: 0.1,
            t_steps: 3,
        });
        let (tau, se) =
            true_effect_oracle(&designs, Contrast::onehop_vs_random(), &model, 400, 15).unwrap();
        assert!(tau > 3.0 * se, "expected positive effect, got {tau} (se {se})");
    }

    #[test]
    fn sharp_null_study_is_unbiased_with_nominal_coverage() {
        let collection = skewed_collection(25, 12, 16);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let model = OutcomeModel::SharpNull { mean: 0.5, sd: 0.1 };
        let config = StudyConfig {
            n_villages: 20,
            replicates: 400,
            oracle_reps: 400,
            master_seed: 17,
            ..StudyConfig::default()
        };
        let result = run_study(&designs, Contrast::onehop_vs_random(), &model, &config).unwrap();
        assert!(result.true_tau.abs() < 4.0 * result.true_tau_se + 1e-9);
        for summary in &result.summaries {
            let mc_se = summary.rmse / (result.replicates as f64).sqrt();
            assert!(
                summary.bias.abs() < 4.0 * mc_se + 5e-3,
                "{}: bias {}",
                summary.estimator,
                summary.bias
            );
            // 90% nominal with Monte-Carlo slack
            assert!(
                summary.coverage > 0.85,
                "{}: coverage {}",
                summary.estimator,
                summary.coverage
            );
        }
    }

    #[test]
    fn study_is_reproducible_for_a_fixed_seed() {
        let collection = skewed_collection(8, 10, 18);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::mixture(0.5, StrategyKind::Onehop, StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let model = OutcomeModel::Probit(ProbitParams::new(-1.0, 4.0));
        let config = StudyConfig {
            replicates: 50,
            oracle_reps: 200,
            master_seed: 19,
            ..StudyConfig::default()
        };
        let r1 = run_study(&designs, Contrast::onehop_vs_random(), &model, &config).unwrap();
        let r2 = run_study(&designs, Contrast::onehop_vs_random(), &model, &config).unwrap();
        assert_eq!(r1.true_tau, r2.true_tau);
        for (a, b) in r1.summaries.iter().zip(&r2.summaries) {
            assert_eq!(a.estimates, b.estimates);
        }
    }

    #[test]
    fn estimator_failures_are_recorded_not_fatal() {
        // off-policy design: diff-in-means has no arms and must fail in
        // every replicate while the weighted estimators proceed
        let collection = skewed_collection(10, 12, 20);
        let designs = prepare_designs(
            &collection,
            &DesignSpec::single(StrategyKind::Random),
            &KSpec::Fixed(2),
            0,
        )
        .unwrap();
        let model = OutcomeModel::SharpNull { mean: 0.3, sd: 0.05 };
        let config = StudyConfig {
            replicates: 30,
            oracle_reps: 200,
            master_seed: 21,
            ..StudyConfig::default()
        };
        let result = run_study(&designs, Contrast::onehop_vs_random(), &model, &config).unwrap();
        let dm = result.summary(EstimatorKind::DiffMeans).unwrap();
        assert_eq!(dm.failures, 30);
        let hajek = result.summary(EstimatorKind::Hajek).unwrap();
        assert!(hajek.failures < 30);
        assert!(!hajek.estimates.is_empty());
    }
}
