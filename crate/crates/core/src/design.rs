//! Design distributions: how seed sets were (or will be) drawn in an
//! experiment. A design is either a Bernoulli mixture of two strategies, a
//! single strategy (the off-policy case), or an optimized distribution that
//! concentrates on seed sets where the contrasted strategies disagree.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::graph::{Village, VillageCollection};
use crate::logprob::LogProb;
use crate::numeric::{for_each_combination, log_abs_diff_exp, log_add_exp, log_sum_exp};
use crate::rngstream::{substream, PURPOSE_DESIGN};
use crate::strategies::{
    node_weights, pi_exact_dp, sample_onehop, sample_random, NodeWeightTable, SeedSet,
};

/// Log-prob comparisons treat strategies as agreeing on a set when their
/// log-probabilities differ by less than this (pure round-off).
const LOG_PROB_EQ_TOL: f64 = 1e-9;

/// A named stochastic seeding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Random,
    Onehop,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Random => write!(f, "random"),
            StrategyKind::Onehop => write!(f, "onehop"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(StrategyKind::Random),
            "onehop" | "one-hop" => Ok(StrategyKind::Onehop),
            other => Err(Error::invalid(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Treatment arm label for mixture designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

/// The pair of strategies being contrasted by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contrast {
    pub a: StrategyKind,
    pub b: StrategyKind,
}

impl Contrast {
    pub fn new(a: StrategyKind, b: StrategyKind) -> Contrast {
        Contrast { a, b }
    }

    /// one-hop vs random, the canonical comparison.
    pub fn onehop_vs_random() -> Contrast {
        Contrast::new(StrategyKind::Onehop, StrategyKind::Random)
    }
}

fn default_enumeration_cap() -> u64 {
    1_000_000
}

fn default_pool_size() -> usize {
    4096
}

/// User-facing design description (JSON `{"variant": ...}` or the compact
/// `mixture:0.5:onehop:random` form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum DesignSpec {
    Mixture {
        rho: f64,
        #[serde(rename = "A")]
        a: StrategyKind,
        #[serde(rename = "B")]
        b: StrategyKind,
    },
    Single {
        #[serde(rename = "B")]
        b: StrategyKind,
    },
    Optimized {
        #[serde(rename = "A")]
        a: StrategyKind,
        #[serde(rename = "B")]
        b: StrategyKind,
        #[serde(default = "default_enumeration_cap")]
        enumeration_cap: u64,
        #[serde(default = "default_pool_size")]
        pool_size: usize,
    },
}

impl DesignSpec {
    pub fn mixture(rho: f64, a: StrategyKind, b: StrategyKind) -> DesignSpec {
        DesignSpec::Mixture { rho, a, b }
    }

    pub fn single(b: StrategyKind) -> DesignSpec {
        DesignSpec::Single { b }
    }

    pub fn optimized(a: StrategyKind, b: StrategyKind) -> DesignSpec {
        DesignSpec::Optimized {
            a,
            b,
            enumeration_cap: default_enumeration_cap(),
            pool_size: default_pool_size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DesignSpec::Mixture { rho, .. } => {
                if !(0.0..=1.0).contains(rho) {
                    return Err(Error::invalid(format!(
                        "mixture rho must lie in [0, 1], got {rho}"
                    )));
                }
                Ok(())
            }
            DesignSpec::Single { .. } => Ok(()),
            DesignSpec::Optimized { pool_size, .. } => {
                if *pool_size == 0 {
                    return Err(Error::invalid("optimized pool_size must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Parse the compact CLI form: `single:random`, `mixture:0.5`,
    /// `mixture:0.5:onehop:random`, `optimized:onehop:random`.
    pub fn parse_compact(s: &str) -> Result<DesignSpec> {
        let parts: Vec<&str> = s.split(':').collect();
        let spec = match parts.as_slice() {
            ["single", b] => DesignSpec::single(b.parse()?),
            ["mixture", rho] => DesignSpec::mixture(
                rho.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad rho '{rho}'")))?,
                StrategyKind::Onehop,
                StrategyKind::Random,
            ),
            ["mixture", rho, a, b] => DesignSpec::mixture(
                rho.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad rho '{rho}'")))?,
                a.parse()?,
                b.parse()?,
            ),
            ["optimized", a, b] => DesignSpec::optimized(a.parse()?, b.parse()?),
            _ => {
                return Err(Error::invalid(format!(
                    "cannot parse design '{s}'; expected single:<B>, mixture:<rho>[:<A>:<B>], \
                     or optimized:<A>:<B>"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Per-village strategy cache: the one-hop weight table and the normalizer
/// for the village's seed set size. Immutable once built.
#[derive(Debug)]
pub struct PreparedVillage<'v> {
    village: &'v Village,
    k: usize,
    weights: NodeWeightTable,
    log_pi: LogProb,
}

impl<'v> PreparedVillage<'v> {
    pub fn new(village: &'v Village, k: usize) -> Result<PreparedVillage<'v>> {
        let n = village.graph.node_count();
        if k == 0 || k > n {
            return Err(Error::invalid(format!(
                "village {}: k={k} out of range 1..={n}",
                village.id
            )));
        }
        let weights = node_weights(&village.graph);
        let log_pi = pi_exact_dp(&village.graph, k)?;
        Ok(PreparedVillage {
            village,
            k,
            weights,
            log_pi,
        })
    }

    pub fn village(&self) -> &'v Village {
        self.village
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &NodeWeightTable {
        &self.weights
    }

    pub fn log_pi(&self) -> LogProb {
        self.log_pi
    }

    /// Log-probability of `set` under a strategy, using the cached tables.
    pub fn strategy_log_prob(&self, kind: StrategyKind, set: &SeedSet) -> Result<LogProb> {
        if set.k() != self.k {
            return Err(Error::invalid(format!(
                "village {}: seed set has {} nodes, expected {}",
                self.village.id,
                set.k(),
                self.k
            )));
        }
        match kind {
            StrategyKind::Random => crate::strategies::random_log_prob(&self.village.graph, set),
            StrategyKind::Onehop => {
                let n = self.village.graph.node_count();
                let mut log_p = crate::numeric::ln_factorial(self.k)
                    - self.k as f64 * (n as f64).ln();
                for &v in set.nodes() {
                    log_p += self.weights.log_f(v);
                }
                if self.log_pi.is_zero() {
                    if log_p == f64::NEG_INFINITY {
                        return Ok(LogProb::ZERO);
                    }
                    return Err(Error::degenerate(format!(
                        "village {}: pi = 0 but set has positive with-replacement probability",
                        self.village.id
                    )));
                }
                LogProb::new(log_p - self.log_pi.log())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, kind: StrategyKind, rng: &mut R) -> Result<SeedSet> {
        match kind {
            StrategyKind::Random => sample_random(&self.village.graph, self.k, rng),
            StrategyKind::Onehop => sample_onehop(&self.village.graph, self.k, rng),
        }
    }
}

/// Exact-or-pooled support table for an optimized design.
#[derive(Debug)]
pub struct OptimizedTable {
    sets: Vec<SeedSet>,
    log_probs: Vec<f64>,
    index: HashMap<SeedSet, usize>,
    alias: AliasTable,
    /// True when the support is a sampled pool rather than a full
    /// enumeration; probabilities are then exact only with respect to the
    /// pool-defined distribution.
    pub approximate: bool,
}

impl OptimizedTable {
    pub fn support(&self) -> impl Iterator<Item = (&SeedSet, f64)> {
        self.sets.iter().zip(self.log_probs.iter().copied())
    }

    pub fn support_size(&self) -> usize {
        self.sets.len()
    }

    fn log_prob(&self, set: &SeedSet) -> LogProb {
        match self.index.get(set) {
            Some(&i) => LogProb::new(self.log_probs[i]).expect("stored probs are normalized"),
            None => LogProb::ZERO,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SeedSet {
        self.sets[self.alias.sample(rng)].clone()
    }
}

/// Build the informative design `p(s) proportional to |p_A(s) - p_B(s)|` for
/// one village. With an enumerable support the distribution is exact;
/// otherwise it is defined over a deduplicated pool of `pool_size` sets drawn
/// half from each strategy.
pub fn build_optimized_design<R: Rng + ?Sized>(
    prepared: &PreparedVillage,
    a: StrategyKind,
    b: StrategyKind,
    enumeration_cap: u64,
    pool_size: usize,
    rng: &mut R,
) -> Result<OptimizedTable> {
    let n = prepared.village().graph.node_count();
    let k = prepared.k();
    let n_sets = crate::numeric::choose_f64(n, k);

    let mut sets: Vec<SeedSet> = Vec::new();
    let mut log_weights: Vec<f64> = Vec::new();
    let approximate = n_sets > enumeration_cap as f64;

    let consider = |set: SeedSet,
                    prepared: &PreparedVillage,
                    sets: &mut Vec<SeedSet>,
                    log_weights: &mut Vec<f64>|
     -> Result<()> {
        let la = prepared.strategy_log_prob(a, &set)?;
        let lb = prepared.strategy_log_prob(b, &set)?;
        if log_probs_differ(la, lb) {
            sets.push(set);
            log_weights.push(log_abs_diff_exp(la.log(), lb.log()));
        }
        Ok(())
    };

    if approximate {
        let mut seen = HashMap::new();
        for i in 0..pool_size {
            let kind = if i % 2 == 0 { a } else { b };
            let set = prepared.sample(kind, rng)?;
            if seen.insert(set.clone(), ()).is_none() {
                consider(set, prepared, &mut sets, &mut log_weights)?;
            }
        }
    } else {
        let mut failed = None;
        for_each_combination(n, k, |combo| {
            if failed.is_some() {
                return;
            }
            let set = SeedSet::new(n, combo.to_vec()).expect("combination is a valid set");
            if let Err(e) = consider(set, prepared, &mut sets, &mut log_weights) {
                failed = Some(e);
            }
        });
        if let Some(e) = failed {
            return Err(e);
        }
    }

    if sets.is_empty() {
        return Err(Error::degenerate(format!(
            "village {}: strategies {a} and {b} are identical on every \
             considered seed set; the optimized design has no support",
            prepared.village().id
        )));
    }

    let log_z = log_sum_exp(&log_weights);
    let log_probs: Vec<f64> = log_weights.iter().map(|lw| lw - log_z).collect();
    let linear: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
    let alias = AliasTable::new(&linear)?;
    let index = sets
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    Ok(OptimizedTable {
        sets,
        log_probs,
        index,
        alias,
        approximate,
    })
}

#[derive(Debug)]
enum DesignForm {
    Mixture {
        rho: f64,
        a: StrategyKind,
        b: StrategyKind,
    },
    Single {
        b: StrategyKind,
    },
    Optimized(OptimizedTable),
}

/// A design distribution bound to one prepared village: evaluates the design
/// log-probability of any seed set and samples (assignment, seed set) pairs.
#[derive(Debug)]
pub struct VillageDesign<'v> {
    prepared: PreparedVillage<'v>,
    form: DesignForm,
}

impl<'v> VillageDesign<'v> {
    pub fn new<R: Rng + ?Sized>(
        village: &'v Village,
        k: usize,
        spec: &DesignSpec,
        rng: &mut R,
    ) -> Result<VillageDesign<'v>> {
        spec.validate()?;
        let prepared = PreparedVillage::new(village, k)?;
        let form = match spec {
            DesignSpec::Mixture { rho, a, b } => DesignForm::Mixture {
                rho: *rho,
                a: *a,
                b: *b,
            },
            DesignSpec::Single { b } => DesignForm::Single { b: *b },
            DesignSpec::Optimized {
                a,
                b,
                enumeration_cap,
                pool_size,
            } => DesignForm::Optimized(build_optimized_design(
                &prepared,
                *a,
                *b,
                *enumeration_cap,
                *pool_size,
                rng,
            )?),
        };
        Ok(VillageDesign { prepared, form })
    }

    pub fn prepared(&self) -> &PreparedVillage<'v> {
        self.prepared_ref()
    }

    fn prepared_ref(&self) -> &PreparedVillage<'v> {
        &self.prepared
    }

    pub fn village(&self) -> &'v Village {
        self.prepared.village()
    }

    pub fn k(&self) -> usize {
        self.prepared.k()
    }

    /// True when the design's support is a sampled pool approximation.
    pub fn approximate(&self) -> bool {
        matches!(&self.form, DesignForm::Optimized(t) if t.approximate)
    }

    /// Design log-probability of a seed set.
    pub fn log_prob(&self, set: &SeedSet) -> Result<LogProb> {
        match &self.form {
            DesignForm::Mixture { rho, a, b } => {
                let la = self.prepared.strategy_log_prob(*a, set)?.log();
                let lb = self.prepared.strategy_log_prob(*b, set)?.log();
                if *rho == 0.0 {
                    return LogProb::new(lb);
                }
                if *rho == 1.0 {
                    return LogProb::new(la);
                }
                LogProb::new(log_add_exp(rho.ln() + la, (1.0 - rho).ln() + lb))
            }
            DesignForm::Single { b } => self.prepared.strategy_log_prob(*b, set),
            DesignForm::Optimized(table) => Ok(table.log_prob(set)),
        }
    }

    /// Draw one (assignment, seed set) pair. The arm label is present only
    /// for mixture designs.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Option<Arm>, SeedSet)> {
        match &self.form {
            DesignForm::Mixture { rho, a, b } => {
                if rng.random::<f64>() < *rho {
                    Ok((Some(Arm::A), self.prepared.sample(*a, rng)?))
                } else {
                    Ok((Some(Arm::B), self.prepared.sample(*b, rng)?))
                }
            }
            DesignForm::Single { b } => Ok((None, self.prepared.sample(*b, rng)?)),
            DesignForm::Optimized(table) => Ok((None, table.sample(rng))),
        }
    }

    /// (log a, log b, log d) for a seed set under a contrast and this design.
    pub fn log_abd(
        &self,
        contrast: Contrast,
        set: &SeedSet,
    ) -> Result<(LogProb, LogProb, LogProb)> {
        let la = self.prepared.strategy_log_prob(contrast.a, set)?;
        let lb = self.prepared.strategy_log_prob(contrast.b, set)?;
        let ld = self.log_prob(set)?;
        Ok((la, lb, ld))
    }

    /// Whether the design is structurally positive on every discordant set
    /// (true for proper mixtures and for optimized designs by construction).
    fn structurally_positive(&self) -> bool {
        match &self.form {
            DesignForm::Mixture { rho, .. } => *rho > 0.0 && *rho < 1.0,
            DesignForm::Single { .. } => false,
            // exact optimized designs put mass exactly on discordant sets
            DesignForm::Optimized(table) => !table.approximate,
        }
    }
}

/// Per-village seed set size.
#[derive(Debug, Clone)]
pub enum KSpec {
    Fixed(usize),
    PerVillage(HashMap<String, usize>),
}

impl KSpec {
    fn for_village(&self, id: &str) -> Result<usize> {
        match self {
            KSpec::Fixed(k) => Ok(*k),
            KSpec::PerVillage(map) => map
                .get(id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("no seed set size known for village {id}"))),
        }
    }
}

/// Bind a design spec to every village of a collection. Optimized pools use
/// per-village substreams of `master_seed`.
pub fn prepare_designs<'v>(
    collection: &'v VillageCollection,
    spec: &DesignSpec,
    ks: &KSpec,
    master_seed: u64,
) -> Result<Vec<VillageDesign<'v>>> {
    collection
        .iter()
        .enumerate()
        .map(|(i, village)| {
            let k = ks.for_village(&village.id)?;
            let mut rng = substream(master_seed, PURPOSE_DESIGN, i as u64);
            VillageDesign::new(village, k, spec, &mut rng)
        })
        .collect()
}

/// Draw an (assignment, seed set) pair for every village.
pub fn assign_and_sample<R: Rng + ?Sized>(
    designs: &[VillageDesign],
    rng: &mut R,
) -> Result<Vec<(Option<Arm>, SeedSet)>> {
    designs
        .iter()
        .map(|d| {
            d.sample(rng).map_err(|e| {
                Error::degenerate(format!("village {}: {e}", d.village().id))
            })
        })
        .collect()
}

/// One village's positivity verdict.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityCheck {
    pub village_id: String,
    /// Whether the contrasted strategies disagree on the observed set.
    pub discordant: bool,
    pub design_positive: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub checks: Vec<PositivityCheck>,
    pub all_pass: bool,
}

/// Check the contrastive positivity condition on observed seed sets: any set
/// on which the strategies disagree must have positive design probability.
pub fn check_positivity(
    designs: &[VillageDesign],
    contrast: Contrast,
    observed: &[SeedSet],
) -> Result<PositivityReport> {
    if designs.len() != observed.len() {
        return Err(Error::invalid(format!(
            "{} designs but {} observed seed sets",
            designs.len(),
            observed.len()
        )));
    }
    let mut checks = Vec::with_capacity(designs.len());
    for (design, set) in designs.iter().zip(observed) {
        let (la, lb, ld) = design.log_abd(contrast, set)?;
        let discordant = log_probs_differ(la, lb);
        let design_positive = !ld.is_zero();
        let pass = if design.structurally_positive() {
            true
        } else {
            !discordant || design_positive
        };
        checks.push(PositivityCheck {
            village_id: design.village().id.clone(),
            discordant,
            design_positive,
            pass,
        });
    }
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(PositivityReport { checks, all_pass })
}

/// Whether two log-probabilities differ beyond round-off.
pub fn log_probs_differ(la: LogProb, lb: LogProb) -> bool {
    match (la.is_zero(), lb.is_zero()) {
        (true, true) => false,
        (true, false) | (false, true) => true,
        (false, false) => (la.log() - lb.log()).abs() > LOG_PROB_EQ_TOL,
    }
}

/// Enumerate the support of a design: every seed set with positive design
/// probability, with its log-probability. Errors if C(n, k) exceeds `cap`
/// (optimized designs return their stored support regardless).
pub fn enumerate_design(design: &VillageDesign, cap: u64) -> Result<Vec<(SeedSet, f64)>> {
    if let DesignForm::Optimized(table) = &design.form {
        return Ok(table.support().map(|(s, lp)| (s.clone(), lp)).collect());
    }
    let n = design.village().graph.node_count();
    let k = design.k();
    let n_sets = crate::numeric::choose_f64(n, k);
    if n_sets > cap as f64 {
        return Err(Error::invalid(format!(
            "C({n},{k}) = {n_sets:.3e} exceeds enumeration cap {cap}"
        )));
    }
    let mut out = Vec::new();
    let mut failed = None;
    for_each_combination(n, k, |combo| {
        if failed.is_some() {
            return;
        }
        let set = SeedSet::new(n, combo.to_vec()).expect("combination is valid");
        match design.log_prob(&set) {
            Ok(lp) if !lp.is_zero() => out.push((set, lp.log())),
            Ok(_) => {}
            Err(e) => failed = Some(e),
        }
    });
    match failed {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
