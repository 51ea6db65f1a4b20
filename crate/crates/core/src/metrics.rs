//! Correctness and conciseness scores of a policy against a log.
//!
//! Rates are relative: true/false positives are fractions of `L+`, true/false
//! negatives fractions of `L−`, and precision, recall, accuracy and F-score
//! are computed from those fractions rather than from raw counts.
//! Count-based figures are reported alongside for diagnostics only.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::compiled::CompiledPolicy;
use crate::error::{Error, Result};
use crate::model::{
    AccessLog, AttributeFilter, EntityKind, FilterTuple, Policy, RelationCondition, Rule,
};
use crate::preprocess::EncodedLog;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    #[serde(rename = "tp_count")]
    pub tp: u64,
    #[serde(rename = "fp_count")]
    pub fp: u64,
    #[serde(rename = "tn_count")]
    pub tn: u64,
    #[serde(rename = "fn_count")]
    pub fn_: u64,
}

impl QuadrantCounts {
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }
}

/// Relative confusion rates. A rate pair is `0` and flagged undefined when
/// its partition of the log is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeRates {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    #[serde(flatten)]
    pub counts: QuadrantCounts,
    pub positive_defined: bool,
    pub negative_defined: bool,
}

impl RelativeRates {
    pub fn from_counts(counts: QuadrantCounts) -> Self {
        let pos = counts.positives();
        let neg = counts.negatives();
        let ratio = |x: u64, n: u64| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        RelativeRates {
            tp: ratio(counts.tp, pos),
            fn_: ratio(counts.fn_, pos),
            fp: ratio(counts.fp, neg),
            tn: ratio(counts.tn, neg),
            counts,
            positive_defined: pos > 0,
            negative_defined: neg > 0,
        }
    }
}

/// Confusion counts of compiled rules over an encoded log.
pub fn confusion_counts(policy: &CompiledPolicy, log: &EncodedLog) -> QuadrantCounts {
    let mut c = QuadrantCounts::default();
    for r in &log.positive {
        if policy.permits(&r.values) {
            c.tp += r.weight;
        } else {
            c.fn_ += r.weight;
        }
    }
    for r in &log.negative {
        if policy.permits(&r.values) {
            c.fp += r.weight;
        } else {
            c.tn += r.weight;
        }
    }
    c
}

pub fn confusion_encoded(rules: &[Rule], log: &EncodedLog) -> Result<RelativeRates> {
    let compiled = CompiledPolicy::compile(rules, &log.codebook)?;
    Ok(RelativeRates::from_counts(confusion_counts(&compiled, log)))
}

pub fn confusion(policy: &Policy, log: &AccessLog) -> Result<RelativeRates> {
    confusion_encoded(policy.rules(), &EncodedLog::from_log(log)?)
}

/// `(TP + TN) / (TP + TN + FP + FN)` over relative rates.
pub fn accuracy(rates: &RelativeRates) -> f64 {
    let denom = rates.tp + rates.tn + rates.fp + rates.fn_;
    if denom == 0.0 {
        0.0
    } else {
        (rates.tp + rates.tn) / denom
    }
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn precision(rates: &RelativeRates) -> f64 {
    safe_div(rates.tp, rates.tp + rates.fp)
}

pub fn recall(rates: &RelativeRates) -> f64 {
    safe_div(rates.tp, rates.tp + rates.fn_)
}

fn harmonic(a: f64, b: f64) -> f64 {
    safe_div(2.0 * a * b, a + b)
}

/// Harmonic mean of relative precision and recall; 0 in degenerate cases.
pub fn f_score(rates: &RelativeRates) -> f64 {
    harmonic(precision(rates), recall(rates))
}

/// Per-component weights `w1..w4` for `F_U`, `F_O`, `F_S` and `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WscWeights {
    pub user: f64,
    pub object: f64,
    pub session: f64,
    pub relation: f64,
}

impl Default for WscWeights {
    fn default() -> Self {
        WscWeights {
            user: 1.0,
            object: 1.0,
            session: 1.0,
            relation: 1.0,
        }
    }
}

impl WscWeights {
    pub fn new(user: f64, object: f64, session: f64, relation: f64) -> Result<Self> {
        let w = WscWeights {
            user,
            object,
            session,
            relation,
        };
        if [user, object, session, relation]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::Spec("WSC weights must be finite and non-negative".into()));
        }
        Ok(w)
    }

    fn for_kind(&self, kind: EntityKind) -> f64 {
        match kind {
            EntityKind::User => self.user,
            EntityKind::Object => self.object,
            EntityKind::Session => self.session,
        }
    }
}

pub fn rule_wsc(rule: &Rule, schema: &crate::model::AttributeSchema, weights: &WscWeights) -> f64 {
    let filters: f64 = EntityKind::ALL
        .into_iter()
        .map(|k| weights.for_kind(k) * rule.filter.component(schema, k).count() as f64)
        .sum();
    filters + weights.relation * rule.relation.len() as f64
}

/// Weighted structural complexity: Σ over rules of `w1|F_U| + w2|F_O| + w3|F_S| + w4|R|`.
pub fn wsc(policy: &Policy, weights: &WscWeights) -> f64 {
    wsc_of_rules(policy.rules(), policy.schema(), weights)
}

pub fn wsc_of_rules(
    rules: &[Rule],
    schema: &crate::model::AttributeSchema,
    weights: &WscWeights,
) -> f64 {
    rules.iter().map(|r| rule_wsc(r, schema, weights)).sum()
}

/// One fully pinned rule per distinct positive tuple (attribute values + op).
pub fn most_complex_policy(log: &AccessLog) -> Result<Policy> {
    if log.positive().next().is_none() {
        return Err(Error::EmptyInput("most complex policy needs a non-empty L+"));
    }
    let entities = log.entities();
    let schema = log.schema();
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    for t in log.positive() {
        let q = &t.request;
        let mut filter = AttributeFilter::empty();
        for (kind, id) in [
            (EntityKind::User, &q.user),
            (EntityKind::Object, &q.object),
            (EntityKind::Session, &q.session),
        ] {
            let e = entities.resolve(kind, id)?;
            for attr in schema.attrs_of(kind) {
                let value = e.get(attr).ok_or_else(|| {
                    Error::SchemaMismatch(format!("{kind} `{id}` lacks attribute `{attr}`"))
                })?;
                filter.insert(FilterTuple::positive(attr, value))?;
            }
        }
        let rule = Rule::new(filter, RelationCondition::empty(), &q.op);
        if seen.insert(rule.clone()) {
            rules.push(rule);
        }
    }
    Policy::new(schema.clone(), rules)
}

/// WSC of the most complex policy, computed from the distinct positive records.
pub fn wsc_max_encoded(
    log: &EncodedLog,
    schema: &crate::model::AttributeSchema,
    weights: &WscWeights,
) -> f64 {
    let per_rule: f64 = EntityKind::ALL
        .into_iter()
        .map(|k| weights.for_kind(k) * schema.attrs_of(k).len() as f64)
        .sum();
    per_rule * log.positive.len() as f64
}

/// `(wsc_max − wsc + 1) / wsc_max`, unclamped.
pub fn delta_wsc(wsc: f64, wsc_max: f64) -> Result<f64> {
    if wsc_max <= 0.0 {
        return Err(Error::Spec("WSC_max must be positive".into()));
    }
    Ok((wsc_max - wsc + 1.0) / wsc_max)
}

/// Equal-importance policy quality: harmonic mean of F-score and ΔWSC.
///
/// A policy more complex than the most complex one has ΔWSC ≤ 0, where the
/// harmonic mean stops meaning anything; its quality is 0, the limit as ΔWSC
/// falls to 0.
pub fn policy_quality(f_score: f64, delta_wsc: f64) -> f64 {
    if f_score <= 0.0 || delta_wsc <= 0.0 {
        return 0.0;
    }
    harmonic(f_score, delta_wsc)
}

/// `(α/F + (1 − α)/ΔWSC)^−1` with `α = 1/(1 + β²)`; 0 when either input is 0.
pub fn general_quality(f_score: f64, delta_wsc: f64, beta: f64) -> Result<f64> {
    if beta.is_nan() || beta <= 0.0 || beta.is_infinite() {
        return Err(Error::Spec(format!("beta must be positive, got {beta}")));
    }
    if f_score <= 0.0 || delta_wsc <= 0.0 {
        return Ok(0.0);
    }
    let alpha = 1.0 / (1.0 + beta * beta);
    Ok(1.0 / (alpha / f_score + (1.0 - alpha) / delta_wsc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(flatten)]
    pub rates: RelativeRates,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub wsc: f64,
    pub wsc_max: f64,
    pub delta_wsc: f64,
    pub quality: f64,
    pub rule_count: usize,
    /// Count-based accuracy `(TP + TN) / |L|`; a diagnostic, not a relative rate.
    pub count_accuracy: f64,
    /// Count-based F-score; a diagnostic, not a relative rate.
    pub count_f_score: f64,
}

impl EvaluationReport {
    pub const CSV_HEADER: [&'static str; 4] = ["ACC", "F-score", "WSC", "Q"];

    pub fn from_parts(rates: RelativeRates, wsc: f64, wsc_max: f64, rule_count: usize) -> Result<Self> {
        let f = f_score(&rates);
        let dw = delta_wsc(wsc, wsc_max)?;
        let c = rates.counts;
        let total = c.positives() + c.negatives();
        let cp = safe_div(c.tp as f64, (c.tp + c.fp) as f64);
        let cr = safe_div(c.tp as f64, c.positives() as f64);
        Ok(EvaluationReport {
            accuracy: accuracy(&rates),
            precision: precision(&rates),
            recall: recall(&rates),
            f_score: f,
            wsc,
            wsc_max,
            delta_wsc: dw,
            quality: policy_quality(f, dw),
            rule_count,
            count_accuracy: safe_div((c.tp + c.tn) as f64, total as f64),
            count_f_score: harmonic(cp, cr),
            rates,
        })
    }

    pub fn csv_row(&self) -> [String; 4] {
        [
            format!("{:.6}", self.accuracy),
            format!("{:.6}", self.f_score),
            format!("{}", self.wsc),
            format!("{:.6}", self.quality),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Evaluates `rules` against an encoded log whose `WSC_max` is already known.
pub fn evaluate_encoded(
    rules: &[Rule],
    schema: &crate::model::AttributeSchema,
    log: &EncodedLog,
    weights: &WscWeights,
    wsc_max: f64,
) -> Result<EvaluationReport> {
    let rates = confusion_encoded(rules, log)?;
    EvaluationReport::from_parts(rates, wsc_of_rules(rules, schema, weights), wsc_max, rules.len())
}

/// Full report of `policy` against `log`, with `WSC_max` taken from the
/// log's most complex policy.
pub fn evaluate(policy: &Policy, log: &AccessLog, weights: &WscWeights) -> Result<EvaluationReport> {
    let encoded = EncodedLog::from_log(log)?;
    if encoded.positive.is_empty() {
        return Err(Error::EmptyInput("evaluation needs a non-empty L+"));
    }
    let wsc_max = wsc_max_encoded(&encoded, log.schema(), weights);
    evaluate_encoded(policy.rules(), policy.schema(), &encoded, weights, wsc_max)
}
