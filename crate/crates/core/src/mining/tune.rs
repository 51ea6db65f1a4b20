use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{baseline_table, fit_for, rule_from_tables, FrequencyTable, MiningConfig, Thresholds};
use crate::compiled::CompiledPolicy;
use crate::error::{Error, Result};
use crate::metrics::{self, RelativeRates};
use crate::preprocess::{CategoricalRecord, EncodedLog};
use crate::{seed, split};

/// Candidate values per threshold; the search covers their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdGrid {
    pub t_pos: Vec<f64>,
    pub t_neg: Vec<f64>,
    pub theta_pos: Vec<f64>,
    pub theta_neg: Vec<f64>,
}

impl ThresholdGrid {
    pub fn uniform(values: &[f64]) -> Self {
        ThresholdGrid {
            t_pos: values.to_vec(),
            t_neg: values.to_vec(),
            theta_pos: values.to_vec(),
            theta_neg: values.to_vec(),
        }
    }

    pub fn points(&self) -> Vec<Thresholds> {
        let mut out = Vec::new();
        for &t_pos in &self.t_pos {
            for &t_neg in &self.t_neg {
                for &theta_pos in &self.theta_pos {
                    for &theta_neg in &self.theta_neg {
                        out.push(Thresholds {
                            t_pos,
                            t_neg,
                            theta_pos,
                            theta_neg,
                        });
                    }
                }
            }
        }
        out
    }
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid::uniform(&[0.15, 0.2, 0.25, 0.3, 0.35])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub thresholds: Thresholds,
    pub mean_f_score: f64,
    /// Mean F-score of every grid point, in grid order.
    pub scores: Vec<(Thresholds, f64)>,
    /// Folds that took part (folds with an empty training `L+` are skipped).
    pub folds_used: usize,
}

struct PreparedFold {
    clusters: Vec<FrequencyTable>,
    baseline: FrequencyTable,
    test: EncodedLog,
}

fn prepare(train: &EncodedLog, test: EncodedLog, config: &MiningConfig) -> Result<PreparedFold> {
    let (model, _) = fit_for(&train.positive, config, None)?;
    let clusters = model
        .members()
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let subset: Vec<CategoricalRecord> = m.iter().map(|&i| train.positive[i].clone()).collect();
            FrequencyTable::build(&subset, &train.codebook)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedFold {
        clusters,
        baseline: baseline_table(train, config.baseline)?,
        test,
    })
}

fn fold_f_score(fold: &PreparedFold, thresholds: &Thresholds) -> Result<f64> {
    let codebook = &fold.test.codebook;
    let mut rules = Vec::with_capacity(fold.clusters.len());
    for c in &fold.clusters {
        let rule = rule_from_tables(c, &fold.baseline, thresholds, codebook);
        if !rules.contains(&rule) {
            rules.push(rule);
        }
    }
    let compiled = CompiledPolicy::compile(&rules, codebook)?;
    let rates = RelativeRates::from_counts(metrics::confusion_counts(&compiled, &fold.test));
    Ok(metrics::f_score(&rates))
}

/// Grid search for the thresholds maximising mean cross-validated F-score.
///
/// Each fold is clustered once; every grid point reuses those clusters.
/// Ties go to the smaller threshold sum, then to the earlier grid point.
pub fn tune_thresholds(
    log: &EncodedLog,
    config: &MiningConfig,
    grid: &ThresholdGrid,
    folds: usize,
) -> Result<TuneResult> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Spec("empty threshold grid".into()));
    }
    for p in &points {
        p.validate()?;
    }
    let mut prepared = Vec::new();
    for (i, (train, test)) in split::stratified_folds(log, folds, seed::substream(config.seed, "tune"))?
        .into_iter()
        .enumerate()
    {
        if train.positive.is_empty() || test.positive.is_empty() {
            warn!("skipping fold {i}: empty positive partition");
            continue;
        }
        prepared.push(prepare(&train, test, config)?);
    }
    if prepared.is_empty() {
        return Err(Error::EmptyInput("every fold has an empty positive partition"));
    }
    let scores: Vec<(Thresholds, f64)> = points
        .par_iter()
        .map(|t| {
            let mut sum = 0.0;
            for fold in &prepared {
                sum += fold_f_score(fold, t)?;
            }
            Ok((*t, sum / prepared.len() as f64))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (t, f)) in scores.iter().enumerate().skip(1) {
        let (bt, bf) = &scores[best];
        if *f > *bf || (*f == *bf && t.sum() < bt.sum()) {
            best = i;
        }
    }
    Ok(TuneResult {
        thresholds: scores[best].0,
        mean_f_score: scores[best].1,
        scores,
        folds_used: prepared.len(),
    })
}
