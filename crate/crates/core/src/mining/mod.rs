//! Rule extraction from clusters of permitted requests.
//!
//! A value (or an attribute-pair equality) is *effective* for a cluster when
//! its frequency inside the cluster exceeds its frequency in the baseline
//! record set by more than a positive threshold (giving a positive tuple), or
//! falls below it by more than a negative threshold (giving a negated tuple).

mod freq;
mod tune;

pub use freq::{freq, FrequencyTable};
pub use tune::{tune_thresholds, ThresholdGrid, TuneResult};

use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterModel, KScore, KSearchConfig, KModesConfig};
use crate::compiled::CompiledPolicy;
use crate::error::{Error, Result};
use crate::metrics::{self, WscWeights};
use crate::model::{
    AccessLog, AttributeFilter, AttributeSchema, FilterTuple, Policy, Polarity,
    RelationCondition, RelationTuple, Rule,
};
use crate::preprocess::{CategoricalRecord, Codebook, EncodedLog};
use crate::{seed, split};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub t_pos: f64,
    pub t_neg: f64,
    pub theta_pos: f64,
    pub theta_neg: f64,
}

impl Thresholds {
    pub fn uniform(t: f64) -> Self {
        Thresholds {
            t_pos: t,
            t_neg: t,
            theta_pos: t,
            theta_neg: t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_pos", self.t_pos),
            ("t_neg", self.t_neg),
            ("theta_pos", self.theta_pos),
            ("theta_neg", self.theta_neg),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Spec(format!("threshold {name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.t_pos + self.t_neg + self.theta_pos + self.theta_neg
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::uniform(0.25)
    }
}

/// Reference distribution the cluster frequencies are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Permitted tuples only.
    Positive,
    /// The whole log.
    #[default]
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    Auto { k_min: usize, k_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KCriterion {
    /// Highest mean silhouette.
    #[default]
    Silhouette,
    /// Highest cross-validated policy quality (in-sample when `folds < 2`).
    Quality { folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub k: KChoice,
    #[serde(default)]
    pub criterion: KCriterion,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub baseline: Baseline,
    pub n_restarts: usize,
    pub max_iter: usize,
    pub silhouette_sample: usize,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            k: KChoice::Auto { k_min: 10, k_max: 20 },
            criterion: KCriterion::Silhouette,
            thresholds: Thresholds::default(),
            baseline: Baseline::All,
            n_restarts: 4,
            max_iter: 100,
            silhouette_sample: 1500,
            seed: 0,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        match self.k {
            KChoice::Fixed(0) => return Err(Error::Spec("k must be at least 1".into())),
            KChoice::Auto { k_min, k_max } if k_min < 1 || k_min > k_max => {
                return Err(Error::Spec(format!("invalid k range [{k_min}, {k_max}]")))
            }
            _ => {}
        }
        if self.n_restarts == 0 {
            return Err(Error::Spec("n_restarts must be at least 1".into()));
        }
        Ok(())
    }

    fn kmodes(&self) -> KModesConfig {
        KModesConfig {
            max_iter: self.max_iter,
            n_restarts: self.n_restarts,
            seed: seed::substream(self.seed, "cluster"),
        }
    }

    fn search(&self, k_min: usize, k_max: usize) -> KSearchConfig {
        KSearchConfig {
            k_min,
            k_max,
            n_restarts: self.n_restarts,
            max_iter: self.max_iter,
            seed: seed::substream(self.seed, "cluster"),
            silhouette_sample: self.silhouette_sample,
        }
    }
}

fn tuple_deltas<'a>(
    cluster: &'a FrequencyTable,
    baseline: &'a FrequencyTable,
    feature: usize,
) -> impl Iterator<Item = (u32, f64)> + 'a {
    (0..baseline.cardinality(feature)).map(move |code| {
        let code = code as u32;
        (code, cluster.value(feature, code) - baseline.value(feature, code))
    })
}

/// Effective attribute filters of a cluster, over attribute features only.
pub fn effective_filters(
    cluster: &FrequencyTable,
    baseline: &FrequencyTable,
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> AttributeFilter {
    let mut filter = AttributeFilter::empty();
    for f in 0..codebook.attr_count() {
        let feature = codebook.feature(f);
        for (code, delta) in tuple_deltas(cluster, baseline, f) {
            let tuple = if delta > thresholds.t_pos {
                FilterTuple::positive(&feature.name, feature.value(code))
            } else if -delta > thresholds.t_neg {
                FilterTuple::negative(&feature.name, feature.value(code))
            } else {
                continue;
            };
            filter
                .insert(tuple)
                .expect("a value is either over- or under-represented, never both");
        }
    }
    filter
}

/// Effective relation conditions of a cluster over same-range attribute pairs.
pub fn effective_relations(
    cluster: &FrequencyTable,
    baseline: &FrequencyTable,
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> RelationCondition {
    let mut relation = RelationCondition::empty();
    for (p, &(i, j)) in baseline.pairs().iter().enumerate() {
        let delta = cluster.equality(p) - baseline.equality(p);
        let polarity = if delta > thresholds.theta_pos {
            Polarity::Positive
        } else if -delta > thresholds.theta_neg {
            Polarity::Negative
        } else {
            continue;
        };
        let tuple = RelationTuple::new(
            &codebook.feature(i).name,
            &codebook.feature(j).name,
            polarity,
        )
        .expect("pairs are distinct features");
        relation.insert(tuple);
    }
    relation
}

/// Operation of a cluster's rule: the strongest effective positive value of
/// the operation feature; otherwise the strongest effective negative value as
/// `!op`; otherwise the weighted-majority operation.
fn cluster_operation(
    cluster: &FrequencyTable,
    baseline: &FrequencyTable,
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> (String, Polarity) {
    let f = codebook.op_feature();
    let feature = codebook.feature(f);
    let deltas: Vec<(u32, f64)> = tuple_deltas(cluster, baseline, f).collect();
    let strongest = |pred: &dyn Fn(f64) -> Option<f64>| {
        let mut best: Option<(u32, f64)> = None;
        for &(code, d) in &deltas {
            if let Some(score) = pred(d) {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((code, score));
                }
            }
        }
        best.map(|(c, _)| c)
    };
    if let Some(code) = strongest(&|d| (d > thresholds.t_pos).then_some(d)) {
        return (feature.value(code).to_string(), Polarity::Positive);
    }
    if let Some(code) = strongest(&|d| (-d > thresholds.t_neg).then_some(-d)) {
        return (feature.value(code).to_string(), Polarity::Negative);
    }
    let majority = (0..feature.cardinality() as u32)
        .fold(0u32, |best, c| if cluster.value(f, c) > cluster.value(f, best) { c } else { best });
    (feature.value(majority).to_string(), Polarity::Positive)
}

pub fn rule_from_tables(
    cluster: &FrequencyTable,
    baseline: &FrequencyTable,
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> Rule {
    let filter = effective_filters(cluster, baseline, thresholds, codebook);
    let relation = effective_relations(cluster, baseline, thresholds, codebook);
    let (op, polarity) = cluster_operation(cluster, baseline, thresholds, codebook);
    Rule::new(filter, relation, &op).with_op_polarity(polarity)
}

/// Effective attribute filters of `cluster_records` against `log_records`.
pub fn extract_attribute_filters(
    cluster_records: &[CategoricalRecord],
    log_records: &[CategoricalRecord],
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> Result<AttributeFilter> {
    let c = FrequencyTable::build(cluster_records, codebook)?;
    let l = FrequencyTable::build(log_records, codebook)?;
    Ok(effective_filters(&c, &l, thresholds, codebook))
}

/// Effective relation conditions of `cluster_records` against `log_records`.
pub fn extract_relations(
    cluster_records: &[CategoricalRecord],
    log_records: &[CategoricalRecord],
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> Result<RelationCondition> {
    let c = FrequencyTable::build(cluster_records, codebook)?;
    let l = FrequencyTable::build(log_records, codebook)?;
    Ok(effective_relations(&c, &l, thresholds, codebook))
}

pub fn rule_from_cluster(
    cluster_records: &[CategoricalRecord],
    log_records: &[CategoricalRecord],
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> Result<Rule> {
    let c = FrequencyTable::build(cluster_records, codebook)?;
    let l = FrequencyTable::build(log_records, codebook)?;
    Ok(rule_from_tables(&c, &l, thresholds, codebook))
}

/// Per-cluster extraction summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub cluster: usize,
    /// Total weight of the cluster's records.
    pub size: u64,
    pub rule: Rule,
    /// Frequency difference behind every extracted tuple, as `(tuple, delta)`.
    pub deltas: Vec<(String, f64)>,
}

fn diagnostics_for(
    index: usize,
    size: u64,
    rule: &Rule,
    cluster: &FrequencyTable,
    baseline: &FrequencyTable,
    codebook: &Codebook,
) -> ClusterDiagnostics {
    let mut deltas = Vec::new();
    for t in rule.filter.iter() {
        let f = codebook.attr_feature(&t.attr).expect("extracted from codebook");
        let code = codebook.feature(f).code(&t.value).expect("extracted from codebook");
        deltas.push((t.to_string(), cluster.value(f, code) - baseline.value(f, code)));
    }
    for r in rule.relation.iter() {
        let i = codebook.attr_feature(r.left()).expect("extracted from codebook");
        let j = codebook.attr_feature(r.right()).expect("extracted from codebook");
        if let Some(p) = baseline.pair_index(i, j) {
            deltas.push((r.to_string(), cluster.equality(p) - baseline.equality(p)));
        }
    }
    ClusterDiagnostics {
        cluster: index,
        size,
        rule: rule.clone(),
        deltas,
    }
}

/// Result of clustering and extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mined {
    pub rules: Vec<Rule>,
    pub model: ClusterModel,
    pub scores: Vec<KScore>,
    pub diagnostics: Vec<ClusterDiagnostics>,
}

/// One rule per non-empty cluster, duplicates dropped (first kept).
pub fn rules_from_model(
    records: &[CategoricalRecord],
    model: &ClusterModel,
    baseline: &FrequencyTable,
    thresholds: &Thresholds,
    codebook: &Codebook,
) -> Result<(Vec<Rule>, Vec<ClusterDiagnostics>)> {
    let mut rules: Vec<Rule> = Vec::new();
    let mut diags = Vec::new();
    for (c, members) in model.members().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let subset: Vec<CategoricalRecord> = members.iter().map(|&i| records[i].clone()).collect();
        let table = FrequencyTable::build(&subset, codebook)?;
        let rule = rule_from_tables(&table, baseline, thresholds, codebook);
        diags.push(diagnostics_for(
            c,
            table.total(),
            &rule,
            &table,
            baseline,
            codebook,
        ));
        if !rules.contains(&rule) {
            rules.push(rule);
        }
    }
    Ok((rules, diags))
}

fn fit_for(
    records: &[CategoricalRecord],
    config: &MiningConfig,
    quality_fn: Option<&cluster::QualityFn<'_>>,
) -> Result<(ClusterModel, Vec<KScore>)> {
    let distinct = cluster::distinct_count(records);
    match config.k {
        KChoice::Fixed(k) => Ok((
            cluster::kmodes_fit(records, k.min(distinct), &config.kmodes())?,
            Vec::new(),
        )),
        KChoice::Auto { k_min, k_max } => {
            let search = config.search(k_min.min(distinct), k_max.min(distinct).max(1));
            match cluster::select_k(records, &search, quality_fn) {
                Ok(sel) => Ok((sel.model, sel.scores)),
                // Too few distinct records for a silhouette: one cluster.
                Err(Error::NoValidK { .. }) => {
                    Ok((cluster::kmodes_fit(records, 1, &config.kmodes())?, Vec::new()))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Baseline frequency table of an encoded log.
pub fn baseline_table(log: &EncodedLog, baseline: Baseline) -> Result<FrequencyTable> {
    match baseline {
        Baseline::Positive => FrequencyTable::build(&log.positive, &log.codebook),
        Baseline::All => FrequencyTable::build_many(
            [log.positive.as_slice(), log.negative.as_slice()],
            &log.codebook,
        ),
    }
}

/// Clusters `records` and extracts rules against a fixed baseline.
pub fn mine_records(
    records: &[CategoricalRecord],
    baseline: &FrequencyTable,
    codebook: &Codebook,
    config: &MiningConfig,
) -> Result<Mined> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to mine"));
    }
    let (model, scores) = fit_for(records, config, None)?;
    let (rules, diagnostics) =
        rules_from_model(records, &model, baseline, &config.thresholds, codebook)?;
    Ok(Mined {
        rules,
        model,
        scores,
        diagnostics,
    })
}

/// Quality of the rules a `k`-clustering yields, cross-validated over
/// `folds` (in-sample when `folds < 2`).
fn quality_for_k(
    log: &EncodedLog,
    schema: &AttributeSchema,
    config: &MiningConfig,
    k: usize,
    folds: usize,
) -> Result<f64> {
    let weights = WscWeights::default();
    let score = |train: &EncodedLog, test: &EncodedLog| -> Result<Option<f64>> {
        if train.positive.is_empty() || test.positive.is_empty() {
            return Ok(None);
        }
        let k = k.min(cluster::distinct_count(&train.positive));
        let model = cluster::kmodes_fit(&train.positive, k, &config.kmodes())?;
        let baseline = baseline_table(train, config.baseline)?;
        let (rules, _) =
            rules_from_model(&train.positive, &model, &baseline, &config.thresholds, &log.codebook)?;
        let wsc_max = metrics::wsc_max_encoded(test, schema, &weights);
        let report = metrics::evaluate_encoded(&rules, schema, test, &weights, wsc_max)?;
        Ok(Some(report.quality))
    };
    if folds < 2 {
        return Ok(score(log, log)?.unwrap_or(0.0));
    }
    let mut sum = 0.0;
    let mut n = 0;
    for (train, test) in split::stratified_folds(log, folds, seed::substream(config.seed, "k-quality"))? {
        if let Some(q) = score(&train, &test)? {
            sum += q;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Clusters `L+` of an encoded log and extracts one rule per cluster.
pub fn mine_encoded(log: &EncodedLog, schema: &AttributeSchema, config: &MiningConfig) -> Result<Mined> {
    config.validate()?;
    if log.positive.is_empty() {
        return Err(Error::EmptyInput("the positive log is empty"));
    }
    let baseline = baseline_table(log, config.baseline)?;
    let (model, scores) = match config.criterion {
        KCriterion::Silhouette => fit_for(&log.positive, config, None)?,
        KCriterion::Quality { folds } => {
            let f = |k: usize, _: &ClusterModel| quality_for_k(log, schema, config, k, folds);
            fit_for(&log.positive, config, Some(&f))?
        }
    };
    let (rules, diagnostics) =
        rules_from_model(&log.positive, &model, &baseline, &config.thresholds, &log.codebook)?;
    Ok(Mined {
        rules,
        model,
        scores,
        diagnostics,
    })
}

/// Mines a policy from `log`: encode `L+`, cluster it, extract a rule per
/// cluster and drop duplicates.
pub fn extract_policy(log: &AccessLog, config: &MiningConfig) -> Result<Policy> {
    let encoded = EncodedLog::from_log(log)?;
    let mined = mine_encoded(&encoded, log.schema(), config)?;
    Ok(Policy::new(log.schema().clone(), mined.rules)?.with_entities(log.entities().clone()))
}

/// Records of `records` permitted by `rules`.
pub(crate) fn permitted(
    rules: &[Rule],
    records: &[CategoricalRecord],
    codebook: &Codebook,
) -> Result<Vec<bool>> {
    let compiled = CompiledPolicy::compile(rules, codebook)?;
    Ok(records.iter().map(|r| compiled.permits(&r.values)).collect())
}
