//! Clustering of curves around piecewise prototypes.
//!
//! Each iteration fits one prototype per cluster, then moves every curve to
//! its nearest prototype. Prototypes use either the same number of segments
//! per cluster ([`Mode::Uniform`]) or a split of the global budget chosen by
//! [`allocate`](crate::allocation::allocate) ([`Mode::Optimal`]).
//! [`Mode::KMeans`] uses unconstrained cluster means and is the usual Lloyd
//! iteration.
//!
//! The loop keeps the global error `E` non-increasing: it stops when the
//! partition is stable, when a refit would not lower `E`, or after
//! `max_iter` fits.

mod step;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summary::Summary;
use crate::types::{CurveSet, ModelKind, ModelSpec};

pub use step::{assign_step, summarize_partition, PartitionSummary};

/// How the segment budget is shared between clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `P / K` segments per cluster.
    Uniform,
    /// Budget split by the allocation program.
    Optimal,
    /// Unconstrained means; the budget is ignored.
    #[serde(rename = "kmeans")]
    KMeans,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Uniform => "uniform",
            Mode::Optimal => "optimal",
            Mode::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "optimal" => Ok(Mode::Optimal),
            "kmeans" => Ok(Mode::KMeans),
            other => Err(Error::config(format!("unknown clustering mode `{other}`"))),
        }
    }
}

/// Starting partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Seeded shuffle dealt round-robin into the clusters.
    Random,
    /// Cluster label in `0..K` for every curve.
    Given(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    pub budget: usize,
    pub kind: ModelKind,
    pub mode: Mode,
    /// Largest segment count any one cluster may receive.
    pub cap: Option<usize>,
    pub max_iter: usize,
    pub seed: u64,
    pub init: Init,
}

impl ClusteringConfig {
    pub fn new(k: usize, budget: usize, kind: ModelKind, mode: Mode) -> Self {
        Self {
            k,
            budget,
            kind,
            mode,
            cap: None,
            max_iter: 100,
            seed: 0,
            init: Init::Random,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_cap(mut self, cap: Option<usize>) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub(crate) fn model(&self) -> ModelSpec {
        match self.mode {
            Mode::KMeans => ModelSpec::sum(ModelKind::ConstantL2),
            _ => ModelSpec::sum(self.kind),
        }
    }

    /// Checks the configuration against a data set.
    pub fn validate(&self, set: &CurveSet) -> Result<()> {
        let (n, m) = (set.len(), set.width());
        if self.k == 0 || self.k > n {
            return Err(Error::config(format!("K = {} must lie in 1..={n}", self.k)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be at least 1"));
        }
        if let Init::Given(labels) = &self.init {
            check_labels(labels, n, self.k)?;
        }
        if self.mode == Mode::KMeans {
            return Ok(());
        }
        if self.kind == ModelKind::ConstantL1 {
            return Err(Error::config(
                "clustering needs a squared-loss model (const-l2, line-l2 or interp-l2)",
            ));
        }
        let capacity = crate::segmentation::SummaryTables::capacity(self.kind, m);
        if self.budget < self.k {
            return Err(Error::config(format!(
                "P = {} is smaller than K = {}",
                self.budget, self.k
            )));
        }
        if self.cap == Some(0) {
            return Err(Error::config("the per-cluster cap must be at least 1"));
        }
        match self.mode {
            Mode::Uniform => {
                if !self.budget.is_multiple_of(self.k) {
                    return Err(Error::config(format!(
                        "uniform mode needs K = {} to divide P = {}",
                        self.k, self.budget
                    )));
                }
                let share = self.budget / self.k;
                if share > capacity {
                    return Err(Error::config(format!(
                        "{share} segments per cluster exceed the {capacity} a {m}-point grid allows"
                    )));
                }
            }
            Mode::Optimal => {
                let per = capacity.min(self.cap.unwrap_or(usize::MAX));
                if per.saturating_mul(self.k) < self.budget {
                    return Err(Error::config(format!(
                        "P = {} cannot be spread over {} clusters of at most {per} segments",
                        self.budget, self.k
                    )));
                }
            }
            Mode::KMeans => unreachable!(),
        }
        Ok(())
    }
}

fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::config(format!(
            "initial partition labels {} curves, the data has {n}",
            labels.len()
        )));
    }
    let mut sizes = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        if c >= k {
            return Err(Error::config(format!("curve {i} has label {c}, K = {k}")));
        }
        sizes[c] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::config(format!("initial cluster {c} is empty")));
    }
    Ok(())
}

/// Seeded shuffle of `0..n` dealt round-robin into `k` clusters.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        labels[i] = r % k;
    }
    labels
}

/// Members of each cluster, in increasing curve index.
pub fn groups(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        out[c].push(i);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Reassignment left the partition unchanged.
    Stable,
    /// The next partition would not have lowered the error.
    NoImprovement,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub assignment: Vec<usize>,
    pub allocation: Vec<usize>,
    pub summaries: Vec<Summary>,
    pub error: f64,
    /// Number of prototype fits whose error entered the trace.
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.summaries.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        for &c in &self.assignment {
            s[c] += 1;
        }
        s
    }
}

/// One accepted iteration, reported to an observer.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Partition the prototypes were fitted to.
    pub assignment: Vec<usize>,
    pub allocation: Vec<usize>,
    pub error: f64,
}

/// Squared grid distance between two curves, summed in index order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Total squared error of the state's prototypes over their members,
/// recomputed from the data.
pub fn global_error(set: &CurveSet, state: &ClusterState) -> Result<f64> {
    if state.assignment.len() != set.len() {
        return Err(Error::domain("state does not match the curve set"));
    }
    let protos: Vec<Vec<f64>> = state.summaries.iter().map(Summary::grid_values).collect();
    if protos.iter().any(|p| p.len() != set.width()) {
        return Err(Error::domain("prototype grid does not match the curve set"));
    }
    Ok(step::error_of(set, &state.assignment, &protos))
}

/// `E` divided by the total within-curve variability of the data.
pub fn relative_error(set: &CurveSet, state: &ClusterState) -> Result<f64> {
    let denom = set.total_variability();
    if denom == 0.0 {
        return Err(Error::domain(
            "relative error undefined: every curve is constant",
        ));
    }
    Ok(global_error(set, state)? / denom)
}

/// Runs the clustering loop described by `config`.
pub fn cluster(set: &CurveSet, config: &ClusteringConfig) -> Result<ClusterState> {
    cluster_observed(set, config, &mut |_| {})
}

/// As [`cluster`], calling `observer` after every accepted iteration.
pub fn cluster_observed(
    set: &CurveSet,
    config: &ClusteringConfig,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<ClusterState> {
    config.validate(set)?;
    let start = match &config.init {
        Init::Random => random_partition(set.len(), config.k, config.seed),
        Init::Given(labels) => labels.clone(),
    };
    step::run(set, config, start, observer)
}

/// Uniform allocation, `P / K` segments per cluster.
pub fn cluster_uniform(set: &CurveSet, config: &ClusteringConfig) -> Result<ClusterState> {
    cluster(set, &ClusteringConfig { mode: Mode::Uniform, ..config.clone() })
}

/// Budget split between clusters by the allocation program.
pub fn cluster_optimal(set: &CurveSet, config: &ClusteringConfig) -> Result<ClusterState> {
    cluster(set, &ClusteringConfig { mode: Mode::Optimal, ..config.clone() })
}

/// Lloyd iteration on the raw curves from a seeded random partition.
pub fn kmeans(set: &CurveSet, k: usize, seed: u64, max_iter: usize) -> Result<ClusterState> {
    let config = ClusteringConfig::new(k, k, ModelKind::ConstantL2, Mode::KMeans)
        .with_seed(seed)
        .with_max_iter(max_iter);
    cluster(set, &config)
}

/// K-means followed by the constrained loop started from its partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhase {
    pub kmeans: ClusterState,
    /// Error of summarizing the K-means partition once, without moving any
    /// curve.
    pub summarized_error: f64,
    pub state: ClusterState,
}

/// Runs K-means from `config`'s initial partition, then `config.mode`
/// from the K-means result.
pub fn two_phase(set: &CurveSet, config: &ClusteringConfig) -> Result<TwoPhase> {
    if config.mode == Mode::KMeans {
        return Err(Error::config("the second phase needs uniform or optimal mode"));
    }
    config.validate(set)?;
    let first = cluster(set, &ClusteringConfig { mode: Mode::KMeans, ..config.clone() })?;
    let summarized = summarize_partition(set, &first.assignment, config)?;
    let second_config = config.clone().with_init(Init::Given(first.assignment.clone()));
    let state = cluster(set, &second_config)?;
    Ok(TwoPhase {
        kmeans: first,
        summarized_error: summarized.error,
        state,
    })
}

/// Outcome of one seed in a multi-start run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restart {
    pub seed: u64,
    pub state: ClusterState,
}

/// Runs `config` once per seed, in parallel. Returns every run in seed
/// order and the index of the best one (lowest `E`, earliest seed on ties).
pub fn restarts(
    set: &CurveSet,
    config: &ClusteringConfig,
    seeds: &[u64],
) -> Result<(Vec<Restart>, usize)> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let state = cluster(set, &config.clone().with_seed(seed))?;
            Ok(Restart { seed, state })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((runs.clone(), best_index(&runs)))
}

fn best_index(runs: &[Restart]) -> usize {
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        if r.state.error < runs[best].state.error {
            best = i;
        }
    }
    best
}
