//! Seed-set probabilities under stochastic seeding strategies, and samplers
//! for them.
//!
//! Random targeting puts uniform mass on all k-subsets of the nodes. One-hop
//! targeting picks k uniform nominators (with replacement), each of which
//! nominates a uniform out-neighbor; the whole set is conditioned on the k
//! seeds being distinct. The with-replacement set probability factorizes over
//! per-node weights `f_v = sum_{u in N_in(v)} 1/out_degree(u)`, and the
//! distinct-set normalizer `pi` is the elementary symmetric polynomial of the
//! `f_v` (times `k!/n^k`), computed by an O(nk) dynamic program. Everything
//! runs in the log domain: real inputs have set counts with hundreds of
//! digits, so linear-domain products underflow.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::logprob::LogProb;
use crate::numeric::{
    for_each_combination, ln_choose, ln_factorial, log_add_exp, sample_variance,
};

/// A set of k distinct nodes, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeedSet {
    nodes: Vec<NodeId>,
}

impl SeedSet {
    /// Validates that the nodes are distinct and within `0..n`. The input
    /// order does not matter.
    pub fn new(n: usize, mut nodes: Vec<NodeId>) -> Result<SeedSet> {
        if nodes.is_empty() {
            return Err(Error::invalid("seed set must contain at least one node"));
        }
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("seed set contains a duplicate node"));
        }
        if *nodes.last().unwrap() >= n {
            return Err(Error::invalid(format!(
                "seed node {} out of range for n={n}",
                nodes.last().unwrap()
            )));
        }
        Ok(SeedSet { nodes })
    }

    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }
}

/// Log-probability of a seed set under uniform random targeting:
/// `-log C(n, k)` for every set.
pub fn random_log_prob(graph: &DirectedGraph, seed_set: &SeedSet) -> Result<LogProb> {
    let n = graph.node_count();
    let k = seed_set.k();
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds n={n}")));
    }
    LogProb::new(-ln_choose(n, k))
}

/// Per-node one-hop weights `f_v = sum over in-neighbors u of 1/out_degree(u)`.
#[derive(Debug, Clone)]
pub struct NodeWeightTable {
    f: Vec<f64>,
    log_f: Vec<f64>,
}

impl NodeWeightTable {
    pub fn f(&self, v: NodeId) -> f64 {
        self.f[v]
    }

    pub fn log_f(&self, v: NodeId) -> f64 {
        self.log_f[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_f
    }

    /// Number of nodes with positive weight, i.e. reachable by one-hop.
    pub fn positive_count(&self) -> usize {
        self.f.iter().filter(|&&x| x > 0.0).count()
    }
}

/// Compute the one-hop node weight table in O(|edges|).
pub fn node_weights(graph: &DirectedGraph) -> NodeWeightTable {
    let mut f = vec![0.0f64; graph.node_count()];
    for &(src, dst) in graph.edges() {
        f[dst] += 1.0 / graph.out_degree(src) as f64;
    }
    let log_f = f.iter().map(|&x| x.ln()).collect();
    NodeWeightTable { f, log_f }
}

fn with_replacement_log_prob(weights: &NodeWeightTable, n: usize, seed_set: &SeedSet) -> f64 {
    let k = seed_set.k();
    let mut log_p = ln_factorial(k) - k as f64 * (n as f64).ln();
    for &v in seed_set.nodes() {
        log_p += weights.log_f(v);
    }
    log_p
}

/// Log-probability of drawing `seed_set` as an unordered multiset under
/// one-hop targeting with seed replacement: `log(k! prod_v f_v / n^k)`.
/// `-inf` whenever any member has zero weight.
pub fn onehop_logprob_with_replacement(graph: &DirectedGraph, seed_set: &SeedSet) -> LogProb {
    let weights = node_weights(graph);
    LogProb::new(with_replacement_log_prob(
        &weights,
        graph.node_count(),
        seed_set,
    ))
    .expect("with-replacement probability is a valid probability")
}

/// log of the k-th elementary symmetric polynomial of exp(log_f), by the
/// recursion S(j, l) = S(j-1, l-1) f_j + S(j-1, l) carried in log space.
fn log_esp_dp(log_f: &[f64], k: usize) -> f64 {
    let mut row = vec![f64::NEG_INFINITY; k + 1];
    row[0] = 0.0;
    for (j, &lf) in log_f.iter().enumerate() {
        let top = k.min(j + 1);
        for l in (1..=top).rev() {
            row[l] = log_add_exp(row[l - 1] + lf, row[l]);
        }
    }
    row[k]
}

fn log_pi_from_esp(log_esp: f64, n: usize, k: usize) -> LogProb {
    LogProb::new(log_esp + ln_factorial(k) - k as f64 * (n as f64).ln())
        .expect("pi is a valid probability")
}

/// Exact total with-replacement probability mass on distinct k-sets, i.e. the
/// one-hop normalizer `pi = (k!/n^k) e_k(f_1..f_n)`, via the O(nk) dynamic
/// program. Returns `-inf` when fewer than k nodes have positive weight.
pub fn pi_exact_dp(graph: &DirectedGraph, k: usize) -> Result<LogProb> {
    let n = graph.node_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} out of range 1..={n}")));
    }
    let weights = node_weights(graph);
    Ok(log_pi_from_esp(log_esp_dp(weights.log_values(), k), n, k))
}

/// Exhaustive computation of pi over all C(n, k) sets. Serves as the
/// independent oracle for [`pi_exact_dp`] on small instances.
pub fn pi_enumerate(graph: &DirectedGraph, k: usize, cap: u64) -> Result<LogProb> {
    let n = graph.node_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} out of range 1..={n}")));
    }
    let total = crate::numeric::choose_f64(n, k);
    if total > cap as f64 {
        return Err(Error::invalid(format!(
            "C({n},{k}) = {total:.3e} exceeds enumeration cap {cap}"
        )));
    }
    let weights = node_weights(graph);
    let base = ln_factorial(k) - k as f64 * (n as f64).ln();
    let mut acc = f64::NEG_INFINITY;
    for_each_combination(n, k, |combo| {
        let log_prod: f64 = combo.iter().map(|&v| weights.log_f(v)).sum();
        acc = log_add_exp(acc, base + log_prod);
    });
    LogProb::new(acc)
}

/// Monte-Carlo estimate of pi with its variance estimate and variance bound.
#[derive(Debug, Clone)]
pub struct PiEstimate {
    /// Log of the (unbiased) estimate. For small sample counts the linear
    /// estimate can overshoot 1 slightly; it is reported as-is, unclamped.
    pub log_pi: f64,
    pub variance_estimate: f64,
    pub variance_bound: f64,
    pub samples: usize,
    pub exact: bool,
    /// True when the stratified shuffle sampler was used; the variance
    /// estimate then ignores the (helpful) dependence between draws and is
    /// only approximate.
    pub stratified: bool,
}

impl PiEstimate {
    /// Wrap an exact pi value (variance fields zero).
    pub fn exact(log_pi: LogProb) -> PiEstimate {
        PiEstimate {
            log_pi: log_pi.log(),
            variance_estimate: 0.0,
            variance_bound: 0.0,
            samples: 0,
            exact: true,
            stratified: false,
        }
    }
}

/// Estimate pi from `samples` uniform draws of distinct k-sets: the mean of
/// `C(n,k) * p_repl(S)` over draws. With `stratified` set, sets are carved
/// from uniform shuffles of the node order (ceil(n/k) sets per shuffle, the
/// last one taken from the tail window), which stratifies the draws at the
/// cost of independence.
pub fn pi_monte_carlo<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    k: usize,
    samples: usize,
    rng: &mut R,
    stratified: bool,
) -> Result<PiEstimate> {
    let n = graph.node_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} out of range 1..={n}")));
    }
    if samples < 2 {
        return Err(Error::invalid(
            "pi_monte_carlo needs at least 2 samples for a variance estimate",
        ));
    }
    let weights = node_weights(graph);
    let log_n_sets = ln_choose(n, k);
    let base = ln_factorial(k) - k as f64 * (n as f64).ln();

    // scaled draw: t = C(n,k) * p_repl(set), an unbiased estimate of pi
    let t_of = |set_nodes: &[NodeId]| -> f64 {
        let log_prod: f64 = set_nodes.iter().map(|&v| weights.log_f(v)).sum();
        (log_n_sets + base + log_prod).exp()
    };

    let mut ts = Vec::with_capacity(samples);
    if stratified {
        let mut perm: Vec<NodeId> = (0..n).collect();
        while ts.len() < samples {
            shuffle(&mut perm, rng);
            let mut start = 0;
            while start + k <= n && ts.len() < samples {
                ts.push(t_of(&perm[start..start + k]));
                start += k;
            }
            if start < n && ts.len() < samples {
                // tail window: any contiguous window of a uniform shuffle is
                // itself a uniform k-set
                ts.push(t_of(&perm[n - k..]));
            }
        }
    } else {
        let mut scratch: Vec<NodeId> = (0..n).collect();
        for _ in 0..samples {
            partial_shuffle(&mut scratch, k, rng);
            ts.push(t_of(&scratch[..k]));
        }
    }

    // range of t over all possible sets, from the k largest / smallest weights
    let mut sorted_log_f = weights.log_values().to_vec();
    sorted_log_f.sort_by(|a, b| a.partial_cmp(b).expect("log weights are not NaN"));
    let log_t_min = log_n_sets + base + sorted_log_f[..k].iter().sum::<f64>();
    let log_t_max = log_n_sets + base + sorted_log_f[n - k..].iter().sum::<f64>();
    let range = log_t_max.exp() - log_t_min.exp();

    let pi_hat = crate::numeric::mean(&ts);
    Ok(PiEstimate {
        log_pi: pi_hat.ln(),
        variance_estimate: sample_variance(&ts) / samples as f64,
        variance_bound: range * range / (4.0 * samples as f64),
        samples,
        exact: false,
        stratified,
    })
}

/// One-hop log-probability of a distinct seed set: the with-replacement
/// probability normalized by pi.
pub fn onehop_log_prob(
    graph: &DirectedGraph,
    seed_set: &SeedSet,
    log_pi: LogProb,
) -> Result<LogProb> {
    let with_repl = onehop_logprob_with_replacement(graph, seed_set);
    if log_pi.is_zero() {
        if with_repl.is_zero() {
            return Ok(LogProb::ZERO);
        }
        return Err(Error::degenerate(
            "pi = 0 but the seed set has positive with-replacement probability",
        ));
    }
    LogProb::new(with_repl.log() - log_pi.log())
}

/// Convenience: one-hop log-probability with pi computed by the exact DP.
pub fn onehop_log_prob_exact(graph: &DirectedGraph, seed_set: &SeedSet) -> Result<LogProb> {
    let log_pi = pi_exact_dp(graph, seed_set.k())?;
    onehop_log_prob(graph, seed_set, log_pi)
}

/// One-hop conditioned on fixed per-block seed counts: the set probability
/// factorizes into per-block terms `prod_{v in s_b} f_v / e_{k_b}(f over
/// block b)`. `block_of[v]` assigns every node to a block; `per_block_counts`
/// gives the required number of seeds in each block. Sets violating the
/// counts are outside the support (`-inf`).
pub fn blocked_onehop_log_prob(
    graph: &DirectedGraph,
    block_of: &[usize],
    per_block_counts: &[usize],
    seed_set: &SeedSet,
) -> Result<LogProb> {
    let n = graph.node_count();
    if block_of.len() != n {
        return Err(Error::invalid(format!(
            "block assignment covers {} nodes, graph has {n}",
            block_of.len()
        )));
    }
    let n_blocks = per_block_counts.len();
    if let Some(&bad) = block_of.iter().find(|&&b| b >= n_blocks) {
        return Err(Error::invalid(format!(
            "block index {bad} out of range for {n_blocks} blocks"
        )));
    }
    if per_block_counts.iter().sum::<usize>() != seed_set.k() {
        return Err(Error::invalid(
            "per-block counts do not sum to the seed set size",
        ));
    }

    let mut observed = vec![0usize; n_blocks];
    for &v in seed_set.nodes() {
        observed[block_of[v]] += 1;
    }
    if observed != per_block_counts {
        return Ok(LogProb::ZERO);
    }

    let weights = node_weights(graph);
    let mut total = 0.0;
    for b in 0..n_blocks {
        let k_b = per_block_counts[b];
        if k_b == 0 {
            continue;
        }
        let block_log_f: Vec<f64> = (0..n)
            .filter(|&v| block_of[v] == b)
            .map(|v| weights.log_f(v))
            .collect();
        if block_log_f.len() < k_b {
            return Err(Error::invalid(format!(
                "block {b} has {} nodes but requires {k_b} seeds",
                block_log_f.len()
            )));
        }
        let log_esp = log_esp_dp(&block_log_f, k_b);
        let numer: f64 = seed_set
            .nodes()
            .iter()
            .filter(|&&v| block_of[v] == b)
            .map(|&v| weights.log_f(v))
            .sum();
        if log_esp == f64::NEG_INFINITY {
            return Ok(LogProb::ZERO);
        }
        total += numer - log_esp;
    }
    LogProb::new(total)
}

fn shuffle<R: Rng + ?Sized>(items: &mut [NodeId], rng: &mut R) {
    for i in (1..items.len()).rev() {
        items.swap(i, rng.random_range(0..=i));
    }
}

fn partial_shuffle<R: Rng + ?Sized>(items: &mut [NodeId], k: usize, rng: &mut R) {
    let n = items.len();
    for i in 0..k {
        items.swap(i, rng.random_range(i..n));
    }
}

/// Draw a uniformly random k-subset of the nodes.
pub fn sample_random<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    k: usize,
    rng: &mut R,
) -> Result<SeedSet> {
    let n = graph.node_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} out of range 1..={n}")));
    }
    let mut scratch: Vec<NodeId> = (0..n).collect();
    partial_shuffle(&mut scratch, k, rng);
    scratch.truncate(k);
    SeedSet::new(n, scratch)
}

/// How hard [`sample_onehop`] will try before giving up on the
/// distinctness rejection step.
pub const ONEHOP_MAX_ATTEMPTS: usize = 100_000;

/// Draw a seed set from one-hop targeting: k independent (nominator,
/// out-neighbor) draws, accepted only when all k seeds are distinct,
/// otherwise the whole set is redrawn. Nominators without out-neighbors are
/// redrawn individually; the rejection normalization absorbs that choice, so
/// accepted sets follow exactly the normalized one-hop law.
pub fn sample_onehop<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    k: usize,
    rng: &mut R,
) -> Result<SeedSet> {
    let n = graph.node_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k={k} out of range 1..={n}")));
    }
    let weights = node_weights(graph);
    if weights.positive_count() < k {
        return Err(Error::degenerate(format!(
            "one-hop targeting infeasible: only {} of {n} nodes are reachable, k={k}",
            weights.positive_count()
        )));
    }

    let mut draw = vec![0 as NodeId; k];
    for attempt in 0..ONEHOP_MAX_ATTEMPTS {
        for slot in draw.iter_mut() {
            let nominator = loop {
                let u = rng.random_range(0..n);
                if graph.out_degree(u) > 0 {
                    break u;
                }
            };
            let neighbors = graph.out_neighbors(nominator);
            *slot = neighbors[rng.random_range(0..neighbors.len())];
        }
        let mut sorted = draw.clone();
        sorted.sort_unstable();
        if sorted.windows(2).all(|w| w[0] != w[1]) {
            return Ok(SeedSet { nodes: sorted });
        }
        // occasional sanity report before giving up entirely
        if attempt + 1 == ONEHOP_MAX_ATTEMPTS {
            let log_pi = pi_exact_dp(graph, k)?;
            return Err(Error::degenerate(format!(
                "one-hop sampler exceeded {ONEHOP_MAX_ATTEMPTS} attempts without \
                 a distinct set (n={n}, k={k}, pi={:.3e})",
                log_pi.prob()
            )));
        }
    }
    unreachable!("loop returns or errors")
}
