use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::CategoricalRecord;
use crate::seed;

/// Number of positions where two code vectors differ.
#[inline]
pub(crate) fn hamming(a: &[u32], b: &[u32]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

pub fn hamming_dissimilarity(a: &CategoricalRecord, b: &CategoricalRecord) -> Result<usize> {
    if a.values.len() != b.values.len() {
        return Err(Error::LengthMismatch {
            left: a.values.len(),
            right: b.values.len(),
        });
    }
    Ok(hamming(&a.values, &b.values) as usize)
}

fn check_records(records: &[CategoricalRecord]) -> Result<usize> {
    let first = records.first().ok_or(Error::EmptyInput("no records to cluster"))?;
    let m = first.values.len();
    if let Some(bad) = records.iter().find(|r| r.values.len() != m) {
        return Err(Error::LengthMismatch {
            left: m,
            right: bad.values.len(),
        });
    }
    Ok(m)
}

/// Number of distinct value vectors.
pub fn distinct_count(records: &[CategoricalRecord]) -> usize {
    let mut seen = std::collections::HashSet::with_capacity(records.len());
    records.iter().filter(|r| seen.insert(&r.values)).count()
}

/// Weighted per-feature value counts.
fn feature_counts(records: &[CategoricalRecord], m: usize) -> Vec<Vec<u64>> {
    let mut counts: Vec<Vec<u64>> = vec![Vec::new(); m];
    for r in records {
        for (f, &c) in r.values.iter().enumerate() {
            let col = &mut counts[f];
            if col.len() <= c as usize {
                col.resize(c as usize + 1, 0);
            }
            col[c as usize] += r.weight;
        }
    }
    counts
}

/// Density of every record: the weighted mean fraction of features it shares
/// with the data, `(1/n) Σ_j w_j · matches(r, j) / m`.
pub fn densities(records: &[CategoricalRecord]) -> Result<Vec<f64>> {
    let m = check_records(records)?;
    let counts = feature_counts(records, m);
    let n: u64 = records.iter().map(|r| r.weight).sum();
    let scale = 1.0 / (n as f64 * m.max(1) as f64);
    Ok(records
        .iter()
        .map(|r| {
            let s: u64 = r
                .values
                .iter()
                .enumerate()
                .map(|(f, &c)| counts[f][c as usize])
                .sum();
            s as f64 * scale
        })
        .collect())
}

fn cao_centers(records: &[CategoricalRecord], k: usize, first: Option<usize>) -> Result<Vec<usize>> {
    let dens = densities(records)?;
    let distinct = distinct_count(records);
    if k == 0 {
        return Err(Error::Spec("k must be at least 1".into()));
    }
    if k > distinct {
        return Err(Error::TooManyClusters { k, distinct });
    }
    let argmax = |scores: &mut dyn Iterator<Item = f64>| {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, s) in scores.enumerate() {
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    };
    let c0 = first.unwrap_or_else(|| argmax(&mut dens.iter().copied()));
    let mut centers = vec![c0];
    let mut min_dist: Vec<u64> = records
        .iter()
        .map(|r| hamming(&r.values, &records[c0].values))
        .collect();
    while centers.len() < k {
        let next = argmax(&mut min_dist.iter().zip(&dens).map(|(&d, &p)| d as f64 * p));
        debug_assert!(min_dist[next] > 0);
        centers.push(next);
        for (d, r) in min_dist.iter_mut().zip(records) {
            *d = (*d).min(hamming(&r.values, &records[next].values));
        }
    }
    Ok(centers)
}

/// Density-and-distance initial modes: the densest record first, then
/// repeatedly the record maximising `density · distance to nearest chosen
/// mode`. Ties go to the earliest record.
pub fn cao_init(records: &[CategoricalRecord], k: usize) -> Result<Vec<Vec<u32>>> {
    Ok(cao_centers(records, k, None)?
        .into_iter()
        .map(|i| records[i].values.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KModesConfig {
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for KModesConfig {
    fn default() -> Self {
        KModesConfig {
            max_iter: 100,
            n_restarts: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub modes: Vec<Vec<u32>>,
    pub assignments: Vec<usize>,
    /// Weighted sum of Hamming distances of records to their modes.
    pub cost: u64,
    pub iterations: usize,
    pub seed: u64,
    /// Cost after every assignment pass of the winning run.
    pub cost_history: Vec<u64>,
    /// Final cost of every restart, in restart order.
    pub restart_costs: Vec<u64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self, records: &[CategoricalRecord]) -> Vec<u64> {
        let mut sizes = vec![0; self.k];
        for (r, &c) in records.iter().zip(&self.assignments) {
            sizes[c] += r.weight;
        }
        sizes
    }

    /// Record indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Cost recomputed from modes and assignments.
    pub fn recompute_cost(&self, records: &[CategoricalRecord]) -> u64 {
        records
            .iter()
            .zip(&self.assignments)
            .map(|(r, &c)| r.weight * hamming(&r.values, &self.modes[c]))
            .sum()
    }
}

/// Assigns every record to its nearest mode (lowest index on ties); returns
/// whether any assignment changed.
fn assign(records: &[CategoricalRecord], modes: &[Vec<u32>], assignments: &mut [usize]) -> bool {
    let mut changed = false;
    for (r, slot) in records.iter().zip(assignments.iter_mut()) {
        let mut best = (usize::MAX, u64::MAX);
        for (c, mode) in modes.iter().enumerate() {
            let d = hamming(&r.values, mode);
            if d < best.1 {
                best = (c, d);
            }
        }
        if *slot != best.0 {
            *slot = best.0;
            changed = true;
        }
    }
    changed
}

fn cost_of(records: &[CategoricalRecord], modes: &[Vec<u32>], assignments: &[usize]) -> u64 {
    records
        .iter()
        .zip(assignments)
        .map(|(r, &c)| r.weight * hamming(&r.values, &modes[c]))
        .sum()
}

/// Per-feature weighted majority within each cluster (lowest code on ties).
/// Returns the member count of every cluster.
fn update_modes(
    records: &[CategoricalRecord],
    assignments: &[usize],
    modes: &mut [Vec<u32>],
    cardinality: &[usize],
) -> Vec<usize> {
    let k = modes.len();
    let mut members = vec![0usize; k];
    for &c in assignments {
        members[c] += 1;
    }
    for (f, &card) in cardinality.iter().enumerate() {
        let mut counts = vec![0u64; k * card];
        for (r, &c) in records.iter().zip(assignments) {
            counts[c * card + r.values[f] as usize] += r.weight;
        }
        for (c, mode) in modes.iter_mut().enumerate() {
            if members[c] == 0 {
                continue;
            }
            let row = &counts[c * card..(c + 1) * card];
            let mut best = 0usize;
            for (code, &n) in row.iter().enumerate() {
                if n > row[best] {
                    best = code;
                }
            }
            mode[f] = best as u32;
        }
    }
    members
}

/// Gives every empty cluster the record farthest from its current mode,
/// taken from a cluster that keeps at least one other member.
fn repair_empty(
    records: &[CategoricalRecord],
    assignments: &mut [usize],
    modes: &mut [Vec<u32>],
    members: &mut [usize],
) {
    while let Some(empty) = members.iter().position(|&n| n == 0) {
        let mut best: Option<(usize, u64)> = None;
        for (i, r) in records.iter().enumerate() {
            let c = assignments[i];
            if members[c] < 2 {
                continue;
            }
            let d = hamming(&r.values, &modes[c]);
            if d > 0 && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else {
            return;
        };
        members[assignments[i]] -= 1;
        assignments[i] = empty;
        members[empty] = 1;
        modes[empty] = records[i].values.clone();
    }
}

/// One k-modes run from the given initial modes.
pub fn kmodes_from_modes(
    records: &[CategoricalRecord],
    initial: Vec<Vec<u32>>,
    max_iter: usize,
) -> Result<ClusterModel> {
    let m = check_records(records)?;
    if initial.is_empty() {
        return Err(Error::Spec("k must be at least 1".into()));
    }
    if let Some(bad) = initial.iter().find(|mode| mode.len() != m) {
        return Err(Error::LengthMismatch {
            left: m,
            right: bad.len(),
        });
    }
    let cardinality: Vec<usize> = (0..m)
        .map(|f| {
            let rec_max = records.iter().map(|r| r.values[f]).max().unwrap_or(0);
            let mode_max = initial.iter().map(|v| v[f]).max().unwrap_or(0);
            rec_max.max(mode_max) as usize + 1
        })
        .collect();
    let k = initial.len();
    let mut modes = initial;
    let mut assignments = vec![usize::MAX; records.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let changed = assign(records, &modes, &mut assignments);
        iterations += 1;
        history.push(cost_of(records, &modes, &assignments));
        if !changed || iterations >= max_iter.max(1) {
            break;
        }
        let mut members = update_modes(records, &assignments, &mut modes, &cardinality);
        if members.contains(&0) {
            repair_empty(records, &mut assignments, &mut modes, &mut members);
        }
    }
    Ok(ClusterModel {
        k,
        cost: *history.last().expect("at least one pass"),
        modes,
        assignments,
        iterations,
        seed: 0,
        cost_history: history,
        restart_costs: Vec::new(),
    })
}

/// K-modes with density-based initialisation and restarts.
///
/// Restart 0 starts from [`cao_init`]; every further restart draws its first
/// mode at random (seeded) and picks the rest by the same density-distance
/// rule. The lowest-cost run wins, earlier restarts on ties.
pub fn kmodes_fit(
    records: &[CategoricalRecord],
    k: usize,
    config: &KModesConfig,
) -> Result<ClusterModel> {
    check_records(records)?;
    let restarts = config.n_restarts.max(1);
    let runs: Vec<Result<ClusterModel>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let first = if r == 0 {
                None
            } else {
                let mut rng = seed::rng(seed::child(config.seed, r as u64));
                Some(rng.gen_range(0..records.len()))
            };
            let centers = cao_centers(records, k, first)?;
            let init = centers.iter().map(|&i| records[i].values.clone()).collect();
            kmodes_from_modes(records, init, config.max_iter)
        })
        .collect();
    let mut best: Option<ClusterModel> = None;
    let mut costs = Vec::with_capacity(restarts);
    for run in runs {
        let model = run?;
        costs.push(model.cost);
        if best.as_ref().is_none_or(|b| model.cost < b.cost) {
            best = Some(model);
        }
    }
    let mut model = best.expect("at least one restart");
    model.seed = config.seed;
    model.restart_costs = costs;
    Ok(model)
}
