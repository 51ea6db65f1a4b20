use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::kmodes::{distinct_count, hamming, kmodes_fit, ClusterModel, KModesConfig};
use crate::error::{Error, Result};
use crate::preprocess::CategoricalRecord;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSearchConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub n_restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Silhouettes are computed on at most this many distinct records.
    pub silhouette_sample: usize,
}

impl Default for KSearchConfig {
    fn default() -> Self {
        KSearchConfig {
            k_min: 10,
            k_max: 20,
            n_restarts: 4,
            max_iter: 100,
            seed: 0,
            silhouette_sample: 1500,
        }
    }
}

impl KSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::Spec(format!(
                "invalid k range [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.n_restarts < 1 {
            return Err(Error::Spec("n_restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn kmodes(&self) -> KModesConfig {
        KModesConfig {
            max_iter: self.max_iter,
            n_restarts: self.n_restarts,
            seed: self.seed,
        }
    }
}

/// Mean silhouette (weighted by multiplicity, Hamming dissimilarity) of the
/// records listed in `subset`, all distances taken within that subset.
/// `None` when fewer than two clusters are populated.
pub fn silhouette_subset(
    records: &[CategoricalRecord],
    assignments: &[usize],
    k: usize,
    subset: &[usize],
) -> Option<f64> {
    let mut cluster_weight = vec![0u64; k];
    for &i in subset {
        cluster_weight[assignments[i]] += records[i].weight;
    }
    if cluster_weight.iter().filter(|&&w| w > 0).count() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    let mut dist_sum = vec![0u64; k];
    for &i in subset {
        dist_sum.iter_mut().for_each(|d| *d = 0);
        let ri = &records[i];
        for &j in subset {
            let rj = &records[j];
            dist_sum[assignments[j]] += rj.weight * hamming(&ri.values, &rj.values);
        }
        let own = assignments[i];
        let w = ri.weight as f64;
        weight_sum += w;
        if cluster_weight[own] <= 1 {
            continue;
        }
        let a = dist_sum[own] as f64 / (cluster_weight[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && cluster_weight[c] > 0)
            .map(|c| dist_sum[c] as f64 / cluster_weight[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += w * (b - a) / denom;
        }
    }
    Some(total / weight_sum)
}

/// Mean silhouette over all records.
pub fn silhouette(records: &[CategoricalRecord], assignments: &[usize], k: usize) -> Option<f64> {
    let all: Vec<usize> = (0..records.len()).collect();
    silhouette_subset(records, assignments, k, &all)
}

fn sample_subset(n: usize, limit: usize, seed: u64) -> Vec<usize> {
    if n <= limit {
        return (0..n).collect();
    }
    let mut rng = seed::rng(seed);
    let mut idx = sample(&mut rng, n, limit).into_vec();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    /// Total within-cluster dissimilarity (the elbow statistic).
    pub cost: u64,
    pub silhouette: Option<f64>,
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub model: ClusterModel,
    pub scores: Vec<KScore>,
}

/// Scoring hook for the policy-quality criterion: receives `k` and the model
/// fitted on all records.
pub type QualityFn<'a> = dyn Fn(usize, &ClusterModel) -> Result<f64> + Sync + 'a;

/// Fits every `k` in the configured range and picks the best one: highest
/// mean silhouette by default, or highest `quality_fn` score when given.
/// Ties go to the smaller `k`. Values of `k` above the number of distinct
/// records are skipped; `k = 1` never wins on silhouette.
pub fn select_k(
    records: &[CategoricalRecord],
    config: &KSearchConfig,
    quality_fn: Option<&QualityFn<'_>>,
) -> Result<KSelection> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to cluster"));
    }
    let distinct = distinct_count(records);
    let subset = sample_subset(
        records.len(),
        config.silhouette_sample.max(2),
        seed::substream(config.seed, "silhouette"),
    );
    let mut scores = Vec::new();
    let mut best: Option<(f64, ClusterModel)> = None;
    for k in config.k_min..=config.k_max.min(distinct) {
        let model = kmodes_fit(records, k, &config.kmodes())?;
        let sil = if k >= 2 {
            silhouette_subset(records, &model.assignments, k, &subset)
        } else {
            None
        };
        let quality = match quality_fn {
            Some(f) => Some(f(k, &model)?),
            None => None,
        };
        let criterion = if quality_fn.is_some() { quality } else { sil };
        scores.push(KScore {
            k,
            cost: model.cost,
            silhouette: sil,
            quality,
        });
        if let Some(c) = criterion {
            if best.as_ref().is_none_or(|(b, _)| c > *b) {
                best = Some((c, model));
            }
        }
    }
    let (_, model) = best.ok_or(Error::NoValidK {
        k_min: config.k_min,
        k_max: config.k_max,
    })?;
    Ok(KSelection {
        k: model.k,
        model,
        scores,
    })
}

/// Elbow point of a cost curve: the `k` with the largest second difference.
pub fn elbow_k(scores: &[KScore]) -> Option<usize> {
    if scores.len() < 3 {
        return None;
    }
    let mut best: Option<(usize, i128)> = None;
    for w in scores.windows(3) {
        let curvature = w[0].cost as i128 - 2 * w[1].cost as i128 + w[2].cost as i128;
        if best.is_none_or(|(_, c)| curvature > c) {
            best = Some((w[1].k, curvature));
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(values: &[u32]) -> CategoricalRecord {
        CategoricalRecord::new(values.to_vec(), 1)
    }

    #[test]
    fn identical_records_have_no_valid_k() {
        let recs = vec![rec(&[1, 1]); 1];
        let cfg = KSearchConfig {
            k_min: 2,
            k_max: 3,
            ..KSearchConfig::default()
        };
        assert!(matches!(
            select_k(&recs, &cfg, None),
            Err(Error::NoValidK { .. })
        ));
    }

    #[test]
    fn silhouette_of_perfect_split_is_one() {
        let recs = vec![rec(&[0, 0]), rec(&[0, 0]), rec(&[1, 1]), rec(&[1, 1])];
        let s = silhouette(&recs, &[0, 0, 1, 1], 2).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(silhouette(&recs, &[0, 0, 0, 0], 2), None);
    }

    #[test]
    fn weights_behave_like_copies() {
        let expanded = vec![rec(&[0, 0]), rec(&[0, 0]), rec(&[0, 1]), rec(&[1, 1]), rec(&[1, 0])];
        let weighted = vec![
            CategoricalRecord::new(vec![0, 0], 2),
            rec(&[0, 1]),
            rec(&[1, 1]),
            rec(&[1, 0]),
        ];
        let a = silhouette(&expanded, &[0, 0, 0, 1, 1], 2).unwrap();
        let b = silhouette(&weighted, &[0, 0, 1, 1], 2).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn elbow_finds_the_bend() {
        let s = |k, cost| KScore {
            k,
            cost,
            silhouette: None,
            quality: None,
        };
        let scores = vec![s(1, 100), s(2, 40), s(3, 30), s(4, 25)];
        assert_eq!(elbow_k(&scores), Some(2));
    }
}
