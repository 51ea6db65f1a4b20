//! Policy improvement: pruning of similar rules and refinement of rules from
//! the patterns in false-negative and false-positive records.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::cluster;
use crate::compiled::CompiledRule;
use crate::error::{Error, Result};
use crate::metrics::{self, QuadrantCounts, RelativeRates, WscWeights};
use crate::mining::{self, Baseline, FrequencyTable, KChoice, KCriterion, MiningConfig};
use crate::model::{
    AccessLog, AttributeSchema, AuthorizationTuple, FilterTuple, Policy, RelationTuple,
    Rule,
};
use crate::preprocess::{CategoricalRecord, EncodedLog};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    pub max_iterations: usize,
    /// Rules are similar when their Jaccard similarity exceeds this.
    pub similarity_threshold: f64,
    /// Smallest quality gain that counts as an improvement.
    pub quality_epsilon: f64,
    /// Upper end of the cluster-count range for error-record extraction.
    pub sub_k_max: usize,
    #[serde(default)]
    pub weights: WscWeights,
    /// Extraction settings for error records. Every `k` in `[1, sub_k_max]`
    /// is tried and the one whose patterns refine the policy best is kept.
    #[serde(default)]
    pub extraction: MiningConfig,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            max_iterations: 10,
            similarity_threshold: 0.5,
            quality_epsilon: 1e-9,
            sub_k_max: 5,
            weights: WscWeights::default(),
            extraction: MiningConfig::default(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(Error::Spec(format!(
                "similarity threshold {} outside (0, 1]",
                self.similarity_threshold
            )));
        }
        if self.quality_epsilon.is_nan() || self.quality_epsilon < 0.0 {
            return Err(Error::Spec("quality epsilon must be non-negative".into()));
        }
        if self.sub_k_max == 0 {
            return Err(Error::Spec("sub_k_max must be at least 1".into()));
        }
        Ok(())
    }

    fn sub_mining(&self, stream: &str, k: usize) -> MiningConfig {
        MiningConfig {
            k: KChoice::Fixed(k),
            criterion: KCriterion::Silhouette,
            baseline: Baseline::All,
            seed: seed::substream(self.extraction.seed, stream),
            ..self.extraction
        }
    }
}

/// Jaccard similarity of two rules over their filter tuples, relation tuples
/// and (operation, polarity).
pub fn rule_jaccard(a: &Rule, b: &Rule) -> f64 {
    let fa: BTreeSet<&FilterTuple> = a.filter.iter().collect();
    let fb: BTreeSet<&FilterTuple> = b.filter.iter().collect();
    let ra: BTreeSet<&RelationTuple> = a.relation.iter().collect();
    let rb: BTreeSet<&RelationTuple> = b.relation.iter().collect();
    let same_op = a.op == b.op && a.op_polarity == b.op_polarity;
    let inter = fa.intersection(&fb).count() + ra.intersection(&rb).count() + same_op as usize;
    let union = fa.union(&fb).count() + ra.union(&rb).count() + if same_op { 1 } else { 2 };
    inter as f64 / union as f64
}

/// Drops tuples implied by the rest of the rule: negative filters on an
/// attribute pinned to a value, and relations between two pinned attributes.
/// Returns `None` when the pinned values contradict a relation, i.e. the rule
/// can never be satisfied.
pub fn simplify_rule(rule: &Rule) -> Option<Rule> {
    let pinned: BTreeMap<&str, &str> = rule
        .filter
        .iter()
        .filter(|t| t.polarity.is_positive())
        .map(|t| (t.attr.as_str(), t.value.as_str()))
        .collect();
    for r in rule.relation.iter() {
        if let (Some(a), Some(b)) = (pinned.get(r.left()), pinned.get(r.right())) {
            if !r.holds_for(a, b) {
                return None;
            }
        }
    }
    let mut out = rule.clone();
    out.filter
        .retain(|t| t.polarity.is_positive() || !pinned.contains_key(t.attr.as_str()));
    out.relation
        .retain(|r| !(pinned.contains_key(r.left()) && pinned.contains_key(r.right())));
    Some(out)
}

/// [`simplify_rule`] over a rule set, dropping unsatisfiable rules and
/// duplicates.
///
/// Rules subsumed by a more general rule with the same operation are dropped
/// too; none of this changes a decision.
pub fn simplify_rules(rules: &[Rule]) -> Vec<Rule> {
    let mut out: Vec<Rule> = Vec::with_capacity(rules.len());
    for r in rules.iter().filter_map(simplify_rule) {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    let keep: Vec<bool> = (0..out.len())
        .map(|i| {
            !out.iter()
                .enumerate()
                .any(|(j, g)| j != i && out[j] != out[i] && is_relaxed_version(g, &out[i]))
        })
        .collect();
    let mut out: Vec<Rule> = out.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect();
    while let Some((i, j, merged)) = complementary_pair(&out) {
        out.remove(j);
        out[i] = merged;
    }
    out
}

/// Two rules identical except for `<a,v>` in one and `<a,!v>` in the other
/// permit exactly what their common part permits.
fn complementary_pair(rules: &[Rule]) -> Option<(usize, usize, Rule)> {
    for (i, a) in rules.iter().enumerate() {
        for (j, b) in rules.iter().enumerate().skip(i + 1) {
            if a.op != b.op
                || a.op_polarity != b.op_polarity
                || a.relation != b.relation
                || a.filter.len() != b.filter.len()
            {
                continue;
            }
            let only_a: Vec<&FilterTuple> = a.filter.iter().filter(|t| !b.filter.contains(t)).collect();
            if let [t] = only_a[..] {
                if b.filter.contains(&t.negated()) {
                    let mut merged = a.clone();
                    merged.filter.remove(t);
                    return Some((i, j, merged));
                }
            }
        }
    }
    None
}

/// Quality of rule subsets against one encoded log, from per-rule coverage
/// bitsets.
struct Evaluator<'a> {
    schema: &'a AttributeSchema,
    log: &'a EncodedLog,
    weights: WscWeights,
    wsc_max: f64,
}

#[derive(Clone)]
struct Coverage {
    pos: Vec<u64>,
    neg: Vec<u64>,
    wsc: f64,
}

fn bits(records: &[CategoricalRecord], rule: &CompiledRule) -> Vec<u64> {
    let mut out = vec![0u64; records.len().div_ceil(64)];
    for (i, r) in records.iter().enumerate() {
        if rule.permits(&r.values) {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

fn covered_weight(records: &[CategoricalRecord], words: &[u64]) -> u64 {
    let mut sum = 0;
    for (w, &word) in words.iter().enumerate() {
        let mut word = word;
        while word != 0 {
            let b = word.trailing_zeros() as usize;
            sum += records[w * 64 + b].weight;
            word &= word - 1;
        }
    }
    sum
}

/// Scores of a rule set: confusion rates, WSC and quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub f_score: f64,
    pub wsc: f64,
    pub quality: f64,
}

impl<'a> Evaluator<'a> {
    fn new(schema: &'a AttributeSchema, log: &'a EncodedLog, weights: WscWeights) -> Result<Self> {
        if log.positive.is_empty() {
            return Err(Error::EmptyInput("policy quality needs a non-empty L+"));
        }
        Ok(Evaluator {
            schema,
            log,
            weights,
            wsc_max: metrics::wsc_max_encoded(log, schema, &weights),
        })
    }

    fn coverage(&self, rule: &Rule) -> Result<Coverage> {
        let compiled = CompiledRule::compile(rule, &self.log.codebook)?;
        Ok(Coverage {
            pos: bits(&self.log.positive, &compiled),
            neg: bits(&self.log.negative, &compiled),
            wsc: metrics::rule_wsc(rule, self.schema, &self.weights),
        })
    }

    fn score<'c>(&self, covers: impl IntoIterator<Item = &'c Coverage>) -> Result<Score> {
        let mut pos = vec![0u64; self.log.positive.len().div_ceil(64)];
        let mut neg = vec![0u64; self.log.negative.len().div_ceil(64)];
        let mut wsc = 0.0;
        for c in covers {
            pos.iter_mut().zip(&c.pos).for_each(|(a, b)| *a |= b);
            neg.iter_mut().zip(&c.neg).for_each(|(a, b)| *a |= b);
            wsc += c.wsc;
        }
        let tp = covered_weight(&self.log.positive, &pos);
        let fp = covered_weight(&self.log.negative, &neg);
        let counts = QuadrantCounts {
            tp,
            fp,
            tn: self.log.negative_weight() - fp,
            fn_: self.log.positive_weight() - tp,
        };
        let f_score = metrics::f_score(&RelativeRates::from_counts(counts));
        let dw = metrics::delta_wsc(wsc, self.wsc_max)?;
        Ok(Score {
            f_score,
            wsc,
            quality: metrics::policy_quality(f_score, dw),
        })
    }

    fn score_rules(&self, rules: &[Rule]) -> Result<Score> {
        let covers = rules.iter().map(|r| self.coverage(r)).collect::<Result<Vec<_>>>()?;
        self.score(&covers)
    }
}

fn prune_encoded(rules: &[Rule], ev: &Evaluator<'_>, threshold: f64) -> Result<Vec<Rule>> {
    let covers = rules.iter().map(|r| ev.coverage(r)).collect::<Result<Vec<_>>>()?;
    let n = rules.len();
    let mut alive = vec![true; n];
    let without = |alive: &[bool], skip: usize| {
        ev.score((0..n).filter(|&k| k != skip && alive[k]).map(|k| &covers[k]))
    };
    let mut q = ev.score(&covers)?.quality;
    for i in 0..n {
        for j in 0..n {
            if !alive[i] {
                break;
            }
            if j == i || !alive[j] || rule_jaccard(&rules[i], &rules[j]) <= threshold {
                continue;
            }
            let qi = without(&alive, i)?.quality;
            let qj = without(&alive, j)?.quality;
            if qi >= q && qi >= qj {
                alive[i] = false;
                q = qi;
            } else if qj >= q && qj >= qi {
                alive[j] = false;
                q = qj;
            }
        }
    }
    Ok(rules
        .iter()
        .zip(alive)
        .filter(|&(_r, keep)| keep).map(|(r, _keep)| r.clone())
        .collect())
}

/// Greedily removes the rule whose removal yields the highest quality, as
/// long as quality does not drop.
fn drop_redundant(rules: &[Rule], ev: &Evaluator<'_>) -> Result<Vec<Rule>> {
    let covers = rules.iter().map(|r| ev.coverage(r)).collect::<Result<Vec<_>>>()?;
    let mut alive = vec![true; rules.len()];
    let mut q = ev.score(&covers)?.quality;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..rules.len()).filter(|&i| alive[i]) {
            let qi = ev
                .score((0..rules.len()).filter(|&k| k != i && alive[k]).map(|k| &covers[k]))?
                .quality;
            if qi >= q && best.is_none_or(|(_, b)| qi > b) {
                best = Some((i, qi));
            }
        }
        match best {
            Some((i, qi)) => {
                alive[i] = false;
                q = qi;
            }
            None => break,
        }
    }
    Ok(rules
        .iter()
        .zip(alive)
        .filter(|&(_r, keep)| keep).map(|(r, _keep)| r.clone())
        .collect())
}

/// Drops tuples from rules one at a time while quality does not drop.
fn generalize(rules: &[Rule], ev: &Evaluator<'_>) -> Result<Vec<Rule>> {
    let mut rules = rules.to_vec();
    let mut covers = rules.iter().map(|r| ev.coverage(r)).collect::<Result<Vec<_>>>()?;
    let mut q = ev.score(&covers)?.quality;
    for i in 0..rules.len() {
        let mut changed = true;
        while changed {
            changed = false;
            let mut candidates: Vec<Rule> = Vec::new();
            for t in rules[i].filter.iter() {
                let mut c = rules[i].clone();
                c.filter.remove(t);
                candidates.push(c);
            }
            for t in rules[i].relation.iter() {
                let mut c = rules[i].clone();
                c.relation.retain(|x| x != t);
                candidates.push(c);
            }
            for c in candidates {
                let cover = ev.coverage(&c)?;
                let qc = ev
                    .score(covers.iter().enumerate().map(|(k, cv)| if k == i { &cover } else { cv }))?
                    .quality;
                if qc >= q {
                    rules[i] = c;
                    covers[i] = cover;
                    q = qc;
                    changed = true;
                    break;
                }
            }
        }
    }
    Ok(rules)
}

/// Removes one of every pair of similar rules when that does not lower the
/// policy quality, preferring the removal with the higher resulting quality.
pub fn prune_rules(policy: &Policy, log: &AccessLog, config: &RefinementConfig) -> Result<Policy> {
    config.validate()?;
    let encoded = EncodedLog::from_log(log)?;
    let ev = Evaluator::new(log.schema(), &encoded, config.weights)?;
    let rules = prune_encoded(policy.rules(), &ev, config.similarity_threshold)?;
    policy.with_rules(rules)
}

/// False negatives (permitted in the log, denied by `policy`) and false
/// positives (denied in the log, permitted by `policy`).
pub fn classify_errors(
    policy: &Policy,
    log: &AccessLog,
) -> Result<(Vec<AuthorizationTuple>, Vec<AuthorizationTuple>)> {
    let judged = policy.clone().with_entities(log.entities().clone());
    let mut fns = Vec::new();
    let mut fps = Vec::new();
    for t in log.tuples() {
        let mined = judged.decide(&t.request)?;
        if t.decision.is_permit() && !mined.is_permit() {
            fns.push(t.clone());
        } else if !t.decision.is_permit() && mined.is_permit() {
            fps.push(t.clone());
        }
    }
    Ok((fns, fps))
}

/// Encoded false negatives and false positives of `rules`.
pub fn classify_encoded(
    rules: &[Rule],
    log: &EncodedLog,
) -> Result<(Vec<CategoricalRecord>, Vec<CategoricalRecord>)> {
    let pos = mining::permitted(rules, &log.positive, &log.codebook)?;
    let neg = mining::permitted(rules, &log.negative, &log.codebook)?;
    let fns = log
        .positive
        .iter()
        .zip(pos)
        .filter(|&(_r, p)| !p).map(|(r, _p)| r.clone())
        .collect();
    let fps = log
        .negative
        .iter()
        .zip(neg)
        .filter(|&(_r, p)| p).map(|(r, _p)| r.clone())
        .collect();
    Ok((fns, fps))
}

fn similar(rule: &Rule, rules: &[Rule], threshold: f64) -> Vec<usize> {
    (0..rules.len())
        .filter(|&j| rule_jaccard(rule, &rules[j]) > threshold)
        .collect()
}

/// Extracts patterns from `errors` for every `k` in `[1, sub_k_max]`, applies
/// `step` with each pattern set and keeps the highest-quality outcome (ties go
/// to the smaller `k`). `None` when there are no error records.
fn best_over_k(
    errors: &[CategoricalRecord],
    log: &EncodedLog,
    baseline: &FrequencyTable,
    config: &RefinementConfig,
    ev: &Evaluator<'_>,
    stream: &str,
    mut step: impl FnMut(&[Rule]) -> Result<Vec<Rule>>,
) -> Result<Option<Vec<Rule>>> {
    if errors.is_empty() {
        return Ok(None);
    }
    let mut best: Option<(Vec<Rule>, f64)> = None;
    for k in 1..=config.sub_k_max.min(cluster::distinct_count(errors)) {
        let sub = config.sub_mining(stream, k);
        let patterns = simplify_rules(&mining::mine_records(errors, baseline, &log.codebook, &sub)?.rules);
        let refined = step(&patterns)?;
        let q = ev.score_rules(&refined)?.quality;
        if best.as_ref().is_none_or(|(_, b)| q > *b) {
            best = Some((refined, q));
        }
    }
    Ok(best.map(|(rules, _)| rules))
}

/// Adds missing rules and strips extra tuples from restricted rules, guided by
/// the rules extracted from the false negatives.
fn refine_fn(
    rules: &[Rule],
    log: &EncodedLog,
    baseline: &FrequencyTable,
    config: &RefinementConfig,
    ev: &Evaluator<'_>,
    pass: usize,
) -> Result<Vec<Rule>> {
    let (fns, _) = classify_encoded(rules, log)?;
    let refined = best_over_k(&fns, log, baseline, config, ev, &format!("refine-fn-{pass}"), |pi_fn| {
        let mut out = rules.to_vec();
        apply_fn_patterns(&mut out, pi_fn, config);
        Ok(out)
    })?;
    Ok(refined.unwrap_or_else(|| rules.to_vec()))
}

fn apply_fn_patterns(rules: &mut Vec<Rule>, pi_fn: &[Rule], config: &RefinementConfig) {
    for rho_i in pi_fn.iter().filter(|r| !r.filter.is_empty() || !r.relation.is_empty()) {
        let matches = similar(rho_i, rules, config.similarity_threshold);
        if matches.is_empty() {
            rules.push(rho_i.clone());
            continue;
        }
        for j in matches {
            let rho_j = &mut rules[j];
            rho_j.filter.retain(|t| rho_i.filter.contains(t));
            rho_j.relation.retain(|t| rho_i.relation.contains(t));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Candidate {
    Filter(FilterTuple),
    Relation(RelationTuple),
}

/// Tuples separating the records `rule` permits correctly from all the
/// records it permits, each with the size of its frequency difference and
/// whether that difference clears the extraction thresholds. Strongest first.
fn contrast_candidates(
    rule: &Rule,
    log: &EncodedLog,
    config: &RefinementConfig,
) -> Result<Vec<(Candidate, f64, bool)>> {
    let compiled = CompiledRule::compile(rule, &log.codebook)?;
    let correct: Vec<CategoricalRecord> = log
        .positive
        .iter()
        .filter(|r| compiled.permits(&r.values))
        .cloned()
        .collect();
    let wrong: Vec<CategoricalRecord> = log
        .negative
        .iter()
        .filter(|r| compiled.permits(&r.values))
        .cloned()
        .collect();
    if correct.is_empty() || wrong.is_empty() {
        return Ok(Vec::new());
    }
    let cb = &log.codebook;
    let c = FrequencyTable::build(&correct, cb)?;
    let all = FrequencyTable::build_many([correct.as_slice(), wrong.as_slice()], cb)?;
    let th = &config.extraction.thresholds;
    let mut out = Vec::new();
    for f in 0..cb.attr_count() {
        let feature = cb.feature(f);
        for code in 0..feature.cardinality() as u32 {
            let d = c.value(f, code) - all.value(f, code);
            let v = feature.value(code);
            if d > 0.0 {
                out.push((Candidate::Filter(FilterTuple::positive(&feature.name, v)), d, d > th.t_pos));
            } else if d < 0.0 && all.value(f, code) > 0.0 {
                out.push((Candidate::Filter(FilterTuple::negative(&feature.name, v)), -d, -d > th.t_neg));
            }
        }
    }
    for (p, &(i, j)) in all.pairs().iter().enumerate() {
        let d = c.equality(p) - all.equality(p);
        let (a, b) = (&cb.feature(i).name, &cb.feature(j).name);
        if d > 0.0 {
            let t = RelationTuple::equal(a, b).expect("distinct features");
            out.push((Candidate::Relation(t), d, d > th.theta_pos));
        } else if d < 0.0 {
            let t = RelationTuple::different(a, b).expect("distinct features");
            out.push((Candidate::Relation(t), -d, -d > th.theta_neg));
        }
    }
    out.sort_by(|x, y| y.1.total_cmp(&x.1));
    Ok(out)
}

/// Whether `candidate` would actually constrain `rule` further.
fn applicable(rule: &Rule, candidate: &Candidate) -> bool {
    match candidate {
        Candidate::Filter(t) => {
            !rule.filter.contains(t)
                && !rule.filter.contains(&t.negated())
                && !(t.polarity.is_positive() && rule.filter.pins(&t.attr))
        }
        Candidate::Relation(t) => !rule.relation.contains(t) && !rule.relation.contains(&t.negated()),
    }
}

fn attributes(candidate: &Candidate) -> Vec<&str> {
    match candidate {
        Candidate::Filter(t) => vec![t.attr.as_str()],
        Candidate::Relation(t) => vec![t.left(), t.right()],
    }
}

/// `relaxed` lacks some tuples of `pattern` and has nothing `pattern` lacks.
fn is_relaxed_version(relaxed: &Rule, pattern: &Rule) -> bool {
    relaxed.op == pattern.op
        && relaxed.op_polarity == pattern.op_polarity
        && relaxed.filter.iter().all(|t| pattern.filter.contains(t))
        && relaxed.relation.iter().all(|t| pattern.relation.contains(t))
}

/// Appends missing tuples to relaxed rules, guided by the rules extracted
/// from the false positives.
///
/// A mined rule is refined when it is similar to a false-positive pattern or
/// is a relaxed version of one. The tuples appended are those distinguishing
/// its correctly permitted records from everything it permits, restricted to
/// the attributes the pattern adds when possible; when no tuple clears the
/// thresholds the single strongest one is appended.
fn refine_fp(
    rules: &[Rule],
    log: &EncodedLog,
    baseline: &FrequencyTable,
    config: &RefinementConfig,
    ev: &Evaluator<'_>,
    pass: usize,
) -> Result<Vec<Rule>> {
    let (_, fps) = classify_encoded(rules, log)?;
    let refined = best_over_k(&fps, log, baseline, config, ev, &format!("refine-fp-{pass}"), |pi_fp| {
        let mut out = rules.to_vec();
        apply_fp_patterns(&mut out, pi_fp, log, config)?;
        Ok(out)
    })?;
    Ok(refined.unwrap_or_else(|| rules.to_vec()))
}

fn apply_fp_patterns(rules: &mut [Rule], pi_fp: &[Rule], log: &EncodedLog, config: &RefinementConfig) -> Result<()> {
    let mut hinted: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for rho_i in pi_fp {
        for (j, rho_j) in rules.iter().enumerate() {
            if rule_jaccard(rho_i, rho_j) <= config.similarity_threshold && !is_relaxed_version(rho_j, rho_i) {
                continue;
            }
            let hints = hinted.entry(j).or_default();
            for t in rho_i.filter.iter().filter(|t| !rho_j.filter.contains(t)) {
                hints.insert(t.attr.clone());
            }
            for t in rho_i.relation.iter().filter(|t| !rho_j.relation.contains(t)) {
                hints.insert(t.left().to_string());
                hints.insert(t.right().to_string());
            }
        }
    }
    for (j, hints) in hinted {
        let candidates: Vec<(Candidate, f64, bool)> = contrast_candidates(&rules[j], log, config)?
            .into_iter()
            .filter(|(c, _, _)| applicable(&rules[j], c))
            .collect();
        let focused = |c: &Candidate| attributes(c).iter().any(|a| hints.contains(*a));
        let mut chosen: Vec<&Candidate> = candidates
            .iter()
            .filter(|(c, _, strong)| *strong && focused(c))
            .map(|(c, _, _)| c)
            .collect();
        if chosen.is_empty() {
            chosen = candidates.iter().filter(|(_, _, strong)| *strong).map(|(c, _, _)| c).collect();
        }
        if chosen.is_empty() {
            chosen = candidates.first().map(|(c, _, _)| c).into_iter().collect();
        }
        let rho_j = &mut rules[j];
        for c in chosen {
            if !applicable(rho_j, c) {
                continue;
            }
            match c.clone() {
                Candidate::Filter(t) => {
                    rho_j.filter.insert(t).expect("applicable tuples do not contradict");
                }
                Candidate::Relation(t) => {
                    rho_j.relation.insert(t);
                }
            }
        }
    }
    Ok(())
}

/// One refinement pass: false-negative step, then false-positive step.
fn refine_pass(
    rules: &[Rule],
    log: &EncodedLog,
    baseline: &FrequencyTable,
    config: &RefinementConfig,
    ev: &Evaluator<'_>,
    pass: usize,
) -> Result<Vec<Rule>> {
    let out = refine_fn(rules, log, baseline, config, ev, pass)?;
    refine_fp(&out, log, baseline, config, ev, pass)
}

/// Repeated refinement passes while quality improves; returns the best rule
/// set seen.
pub fn refine_policy(policy: &Policy, log: &AccessLog, config: &RefinementConfig) -> Result<Policy> {
    config.validate()?;
    let encoded = EncodedLog::from_log(log)?;
    let ev = Evaluator::new(log.schema(), &encoded, config.weights)?;
    let baseline = mining::baseline_table(&encoded, Baseline::All)?;
    let mut best = policy.rules().to_vec();
    let mut best_q = ev.score_rules(&best)?.quality;
    for pass in 0..config.max_iterations.max(1) {
        let next = refine_pass(&best, &encoded, &baseline, config, &ev, pass)?;
        let q = ev.score_rules(&next)?.quality;
        if q > best_q + config.quality_epsilon {
            best = next;
            best_q = q;
        } else {
            break;
        }
    }
    policy.with_rules(best)
}

/// One line of the enhancement trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub pass: String,
    pub rules_before: usize,
    pub rules_after: usize,
    pub f_score: f64,
    pub wsc: f64,
    pub quality: f64,
}

impl TraceRow {
    pub const CSV_HEADER: [&'static str; 6] =
        ["pass", "rules_before", "rules_after", "f_score", "wsc", "quality"];

    pub fn csv_row(&self) -> [String; 6] {
        [
            self.pass.clone(),
            self.rules_before.to_string(),
            self.rules_after.to_string(),
            format!("{:.6}", self.f_score),
            self.wsc.to_string(),
            format!("{:.6}", self.quality),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enhanced {
    pub rules: Vec<Rule>,
    pub initial: Score,
    pub score: Score,
    pub trace: Vec<TraceRow>,
}

/// Alternates pruning and refinement on an encoded log and keeps the
/// highest-quality rule set seen.
pub fn enhance_encoded(
    rules: &[Rule],
    schema: &AttributeSchema,
    log: &EncodedLog,
    config: &RefinementConfig,
) -> Result<Enhanced> {
    config.validate()?;
    let ev = Evaluator::new(schema, log, config.weights)?;
    let baseline = mining::baseline_table(log, Baseline::All)?;
    let initial = ev.score_rules(rules)?;
    let mut best = (rules.to_vec(), initial);
    let mut current = simplify_rules(rules);
    let mut trace = Vec::new();
    let mut record = |pass: &str, before: usize, after: &[Rule], s: Score| {
        debug!("{pass}: {before} -> {} rules, Q = {:.4}", after.len(), s.quality);
        trace.push(TraceRow {
            pass: pass.to_string(),
            rules_before: before,
            rules_after: after.len(),
            f_score: s.f_score,
            wsc: s.wsc,
            quality: s.quality,
        });
    };
    let direct = simplify_rules(&refine_pass(&current, log, &baseline, config, &ev, usize::MAX)?);
    let s = ev.score_rules(&direct)?;
    record("refine", current.len(), &direct, s);
    if s.quality > best.1.quality {
        best = (direct, s);
        current = best.0.clone();
    }
    for iteration in 0..config.max_iterations {
        let start_q = best.1.quality;
        let before = current.len();
        current = prune_encoded(&current, &ev, config.similarity_threshold)?;
        current = drop_redundant(&current, &ev)?;
        current = simplify_rules(&generalize(&current, &ev)?);
        let s = ev.score_rules(&current)?;
        record("prune", before, &current, s);
        if s.quality > best.1.quality {
            best = (current.clone(), s);
        }
        let before = current.len();
        current = simplify_rules(&refine_pass(&current, log, &baseline, config, &ev, iteration)?);
        let s = ev.score_rules(&current)?;
        record("refine", before, &current, s);
        if s.quality > best.1.quality {
            best = (current.clone(), s);
        }
        if best.1.quality <= start_q + config.quality_epsilon {
            break;
        }
        // Continue from the best rule set rather than an overshooting one.
        current = best.0.clone();
    }
    Ok(Enhanced {
        rules: best.0,
        initial,
        score: best.1,
        trace,
    })
}

/// Pruning and refinement of `policy` against `log`, keeping the best policy.
pub fn enhance(policy: &Policy, log: &AccessLog, config: &RefinementConfig) -> Result<(Policy, Vec<TraceRow>)> {
    let encoded = EncodedLog::from_log(log)?;
    let out = enhance_encoded(policy.rules(), log.schema(), &encoded, config)?;
    Ok((policy.with_rules(out.rules)?, out.trace))
}

/// `(F-score, WSC, Q)` of `policy` on `log`.
pub fn score_policy(policy: &Policy, log: &AccessLog, weights: WscWeights) -> Result<Score> {
    let encoded = EncodedLog::from_log(log)?;
    Evaluator::new(log.schema(), &encoded, weights)?.score_rules(policy.rules())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeFilter, Polarity, RelationCondition};

    fn rule(filters: &[(&str, &str)], op: &str) -> Rule {
        let f = AttributeFilter::new(filters.iter().map(|(a, v)| FilterTuple::positive(a, v))).unwrap();
        Rule::new(f, RelationCondition::empty(), op)
    }

    #[test]
    fn jaccard_examples() {
        let a = rule(&[("x", "1"), ("y", "2")], "read");
        let b = rule(&[("x", "1")], "read");
        assert_eq!(rule_jaccard(&a, &a), 1.0);
        assert!((rule_jaccard(&a, &b) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rule_jaccard(&b, &rule(&[("z", "3")], "write")), 0.0);
        assert_eq!(rule_jaccard(&a, &b), rule_jaccard(&b, &a));
    }

    #[test]
    fn negated_operation_differs_from_positive() {
        let a = rule(&[], "read");
        let b = a.clone().with_op_polarity(Polarity::Negative);
        assert_eq!(rule_jaccard(&a, &b), 0.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = RefinementConfig {
            similarity_threshold: 0.0,
            ..RefinementConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
