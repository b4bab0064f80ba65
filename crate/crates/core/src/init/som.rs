use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::squared_distance;
use crate::error::{Error, Result};
use crate::types::CurveSet;

/// Neighbourhood radius, decreasing linearly from `start` at the first
/// epoch to `end` at the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub start: f64,
    pub end: f64,
}

impl RadiusSchedule {
    pub const DEFAULT_END: f64 = 0.5;

    /// `start = max(rows, cols) / 2`, `end = 0.5`.
    pub fn default_for(rows: usize, cols: usize) -> Self {
        Self {
            start: rows.max(cols) as f64 / 2.0,
            end: Self::DEFAULT_END,
        }
    }

    pub fn constant(radius: f64) -> Self {
        Self {
            start: radius,
            end: radius,
        }
    }

    pub fn at(&self, epoch: usize, epochs: usize) -> f64 {
        if epochs <= 1 {
            return self.end;
        }
        let f = epoch as f64 / (epochs - 1) as f64;
        self.start + (self.end - self.start) * f
    }
}

/// Gaussian neighbourhood weight for squared grid distance `d2`. A zero
/// radius keeps only the unit itself.
#[inline]
fn weight(d2: f64, radius: f64) -> f64 {
    if radius > 0.0 {
        (-d2 / (2.0 * radius * radius)).exp()
    } else if d2 == 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SomStart {
    /// Distinct curves drawn with the configured seed.
    Sample,
    /// Explicit prototypes in unit order (row-major).
    Prototypes(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub radius: RadiusSchedule,
    pub seed: u64,
    pub start: SomStart,
}

impl SomConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            epochs: 30,
            radius: RadiusSchedule::default_for(rows, cols),
            seed: 0,
            start: SomStart::Sample,
        }
    }
}

/// A trained map. Unit `u` sits at row `u / cols`, column `u % cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub prototypes: Vec<Vec<f64>>,
    /// Best-matching unit of every curve under the final prototypes.
    pub assignment: Vec<usize>,
}

impl SomGrid {
    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn position(&self, unit: usize) -> (usize, usize) {
        (unit / self.cols, unit % self.cols)
    }
}

fn grid_d2(cols: usize, a: usize, b: usize) -> f64 {
    let (ra, ca) = ((a / cols) as f64, (a % cols) as f64);
    let (rb, cb) = ((b / cols) as f64, (b % cols) as f64);
    (ra - rb) * (ra - rb) + (ca - cb) * (ca - cb)
}

/// Best-matching unit of every curve, smallest unit index on ties.
fn best_units(set: &CurveSet, prototypes: &[Vec<f64>]) -> Vec<usize> {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let row = set.row(i);
            let mut best = (0, squared_distance(row, &prototypes[0]));
            for (u, p) in prototypes.iter().enumerate().skip(1) {
                let d = squared_distance(row, p);
                if d < best.1 {
                    best = (u, d);
                }
            }
            best.0
        })
        .collect()
}

/// Batch self-organizing map on a `rows x cols` rectangular grid.
///
/// Every epoch assigns each curve to its best-matching unit, then replaces
/// each prototype by the neighbourhood-weighted mean of all curves. A unit
/// whose weights are all zero keeps its prototype.
pub fn batch_som(set: &CurveSet, config: &SomConfig) -> Result<SomGrid> {
    let units = config.rows * config.cols;
    if units == 0 {
        return Err(Error::config("the map needs at least one unit"));
    }
    if units > set.len() {
        return Err(Error::config(format!(
            "{units} map units exceed the {} curves",
            set.len()
        )));
    }
    if !(config.radius.start >= 0.0 && config.radius.end >= 0.0)
        || !config.radius.start.is_finite()
        || !config.radius.end.is_finite()
    {
        return Err(Error::config("radii must be finite and nonnegative"));
    }
    let m = set.width();
    let mut prototypes = match &config.start {
        SomStart::Sample => {
            let mut order: Vec<usize> = (0..set.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
            order[..units].iter().map(|&i| set.row(i).to_vec()).collect::<Vec<_>>()
        }
        SomStart::Prototypes(p) => {
            if p.len() != units || p.iter().any(|r| r.len() != m || r.iter().any(|v| !v.is_finite())) {
                return Err(Error::config(format!(
                    "expected {units} finite prototypes of length {m}"
                )));
            }
            p.clone()
        }
    };
    for epoch in 0..config.epochs {
        let radius = config.radius.at(epoch, config.epochs);
        let bmu = best_units(set, &prototypes);
        prototypes = (0..units)
            .into_par_iter()
            .map(|u| {
                let mut acc = vec![0.0; m];
                let mut total = 0.0;
                for (i, &b) in bmu.iter().enumerate() {
                    let h = weight(grid_d2(config.cols, u, b), radius);
                    if h == 0.0 {
                        continue;
                    }
                    for (a, v) in acc.iter_mut().zip(set.row(i)) {
                        *a += h * v;
                    }
                    total += h;
                }
                if total > 0.0 {
                    for a in &mut acc {
                        *a /= total;
                    }
                    acc
                } else {
                    prototypes[u].clone()
                }
            })
            .collect();
    }
    let assignment = best_units(set, &prototypes);
    Ok(SomGrid {
        rows: config.rows,
        cols: config.cols,
        prototypes,
        assignment,
    })
}

/// Cluster labels from the map's units. Units without curves are dropped
/// and the rest renumbered in unit order; the second value lists the unit
/// behind each label.
pub fn partition_from_som(som: &SomGrid) -> (Vec<usize>, Vec<usize>) {
    let mut used = vec![false; som.units()];
    for &u in &som.assignment {
        used[u] = true;
    }
    let kept: Vec<usize> = (0..som.units()).filter(|&u| used[u]).collect();
    let mut label = vec![usize::MAX; som.units()];
    for (l, &u) in kept.iter().enumerate() {
        label[u] = l;
    }
    (som.assignment.iter().map(|&u| label[u]).collect(), kept)
}

/// Best and second-best units of every curve.
fn unit_pairs(set: &CurveSet, som: &SomGrid) -> Vec<(usize, usize)> {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let row = set.row(i);
            let mut order: Vec<(f64, usize)> = som
                .prototypes
                .iter()
                .enumerate()
                .map(|(u, p)| (squared_distance(row, p), u))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            (order[0].1, order[1].1)
        })
        .collect()
}

fn mean_pair_distance(pairs: &[(usize, usize)], cols: usize, place: &[usize]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|&(a, b)| grid_d2(cols, place[a], place[b]).sqrt())
        .sum();
    total / pairs.len() as f64
}

/// Mean grid distance between each curve's best and second-best units.
/// Small values mean neighbouring units hold similar prototypes.
pub fn topology_statistic(set: &CurveSet, som: &SomGrid) -> Result<f64> {
    if som.units() < 2 {
        return Err(Error::domain("the statistic needs at least two units"));
    }
    let place: Vec<usize> = (0..som.units()).collect();
    Ok(mean_pair_distance(&unit_pairs(set, som), som.cols, &place))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyTest {
    pub observed: f64,
    pub permuted: Vec<f64>,
    /// Share of permutations whose statistic is at most the observed one.
    pub p_value: f64,
}

/// Compares the topology statistic with its values after randomly
/// shuffling the units over the grid positions.
pub fn topology_test(set: &CurveSet, som: &SomGrid, permutations: usize, seed: u64) -> Result<TopologyTest> {
    if som.units() < 2 {
        return Err(Error::domain("the statistic needs at least two units"));
    }
    let pairs = unit_pairs(set, som);
    let mut place: Vec<usize> = (0..som.units()).collect();
    let observed = mean_pair_distance(&pairs, som.cols, &place);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut permuted = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        place.shuffle(&mut rng);
        permuted.push(mean_pair_distance(&pairs, som.cols, &place));
    }
    let hits = permuted.iter().filter(|&&v| v <= observed).count();
    Ok(TopologyTest {
        observed,
        p_value: (hits + 1) as f64 / (permutations + 1) as f64,
        permuted,
    })
}
