//! Turning access logs into weighted categorical records.
//!
//! Every attribute becomes one feature whose codes index the attribute's
//! sorted range; the operation is the final feature. Attributes with
//! identical ranges therefore share a code assignment, so equality of codes
//! is equality of values.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AccessLog, AttributeSchema, EntityKind, UNK};

/// One deduplicated row: a code per feature plus its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CategoricalRecord {
    pub values: Vec<u32>,
    pub weight: u64,
}

impl CategoricalRecord {
    pub fn new(values: Vec<u32>, weight: u64) -> Self {
        CategoricalRecord { values, weight }
    }
}

/// Total weight of a record slice.
pub fn total_weight(records: &[CategoricalRecord]) -> u64 {
    records.iter().map(|r| r.weight).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    /// `None` for the operation feature.
    pub kind: Option<EntityKind>,
    values: Vec<String>,
    index: HashMap<String, u32>,
}

impl Feature {
    fn new(name: &str, kind: Option<EntityKind>, values: &BTreeSet<String>) -> Self {
        let values: Vec<String> = values.iter().cloned().collect();
        let index = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        Feature {
            name: name.to_string(),
            kind,
            values,
            index,
        }
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn code(&self, value: &str) -> Option<u32> {
        self.index.get(value).copied()
    }

    pub fn value(&self, code: u32) -> &str {
        &self.values[code as usize]
    }
}

/// Per-feature dictionaries derived from a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    features: Vec<Feature>,
    attr_index: HashMap<String, usize>,
}

impl Codebook {
    pub fn from_schema(schema: &AttributeSchema) -> Self {
        let mut features = Vec::with_capacity(schema.attr_count() + 1);
        for (kind, attr) in schema.attrs_with_kind() {
            features.push(Feature::new(attr, Some(kind), &schema.ranges()[attr]));
        }
        features.push(Feature::new("op", None, schema.operations()));
        let attr_index = features[..features.len() - 1]
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
        Codebook {
            features,
            attr_index,
        }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    /// Attributes plus the operation.
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn attr_count(&self) -> usize {
        self.features.len() - 1
    }

    pub fn op_feature(&self) -> usize {
        self.features.len() - 1
    }

    pub fn attr_feature(&self, attr: &str) -> Option<usize> {
        self.attr_index.get(attr).copied()
    }

    /// Feature pairs `(i, j)`, `i < j`, over attributes with identical ranges.
    pub fn same_range_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.attr_count();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.features[i].values == self.features[j].values {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Feature name/value pairs of a record.
    pub fn decode<'a>(&'a self, record: &CategoricalRecord) -> Vec<(&'a str, &'a str)> {
        record
            .values
            .iter()
            .zip(&self.features)
            .map(|(&c, f)| (f.name.as_str(), f.value(c)))
            .collect()
    }
}

/// Which partition of the log to encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Positive,
    Negative,
    All,
}

/// A log as two weighted record sets, `L+` and `L−`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedLog {
    pub codebook: Codebook,
    pub positive: Vec<CategoricalRecord>,
    pub negative: Vec<CategoricalRecord>,
}

impl EncodedLog {
    pub fn from_log(log: &AccessLog) -> Result<Self> {
        let codebook = Codebook::from_schema(log.schema());
        let (positive, negative) = encode_partitions(log, &codebook)?;
        Ok(EncodedLog {
            codebook,
            positive,
            negative,
        })
    }

    pub fn positive_weight(&self) -> u64 {
        total_weight(&self.positive)
    }

    pub fn negative_weight(&self) -> u64 {
        total_weight(&self.negative)
    }

    /// `L+ ∪ L−` merged as one record set (decision dropped).
    pub fn all_records(&self) -> Vec<CategoricalRecord> {
        merge_records(self.positive.iter().chain(&self.negative).cloned())
    }
}

/// Sums weights of identical rows and sorts canonically.
pub fn merge_records(records: impl IntoIterator<Item = CategoricalRecord>) -> Vec<CategoricalRecord> {
    let mut merged: HashMap<Vec<u32>, u64> = HashMap::new();
    for r in records {
        *merged.entry(r.values).or_insert(0) += r.weight;
    }
    let mut out: Vec<CategoricalRecord> = merged
        .into_iter()
        .map(|(values, weight)| CategoricalRecord { values, weight })
        .collect();
    out.sort_unstable();
    out
}

fn entity_codes(
    log: &AccessLog,
    codebook: &Codebook,
    kind: EntityKind,
) -> Result<HashMap<crate::model::EntityId, Vec<u32>>> {
    let attrs = log.schema().attrs_of(kind);
    let mut out = HashMap::with_capacity(log.entities().count(kind));
    for e in log.entities().of_kind(kind) {
        let mut codes = Vec::with_capacity(attrs.len());
        for attr in attrs {
            let value = e.get(attr).filter(|v| !v.is_empty()).ok_or_else(|| {
                Error::SchemaMismatch(format!(
                    "{kind} `{}` has no value for `{attr}` (impute missing values first)",
                    e.id
                ))
            })?;
            let feature = codebook.attr_feature(attr).ok_or_else(|| {
                Error::SchemaMismatch(format!("attribute `{attr}` missing from the encoding schema"))
            })?;
            let code = codebook.feature(feature).code(value).ok_or_else(|| {
                Error::ValueOutOfRange {
                    attr: attr.clone(),
                    value: value.to_string(),
                }
            })?;
            codes.push(code);
        }
        out.insert(e.id.clone(), codes);
    }
    Ok(out)
}

fn encode_partitions(
    log: &AccessLog,
    codebook: &Codebook,
) -> Result<(Vec<CategoricalRecord>, Vec<CategoricalRecord>)> {
    if codebook.attr_count() != log.schema().attr_count() {
        return Err(Error::SchemaMismatch(
            "log and encoding schema declare different attributes".into(),
        ));
    }
    let users = entity_codes(log, codebook, EntityKind::User)?;
    let objects = entity_codes(log, codebook, EntityKind::Object)?;
    let sessions = entity_codes(log, codebook, EntityKind::Session)?;
    let op_feature = codebook.feature(codebook.op_feature());

    let mut pos: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut neg: HashMap<Vec<u32>, u64> = HashMap::new();
    let width = codebook.feature_count();
    for t in log.tuples() {
        let q = &t.request;
        let op = op_feature.code(&q.op).ok_or_else(|| Error::ValueOutOfRange {
            attr: "op".into(),
            value: q.op.clone(),
        })?;
        let mut values = Vec::with_capacity(width);
        values.extend_from_slice(&users[&q.user]);
        values.extend_from_slice(&objects[&q.object]);
        values.extend_from_slice(&sessions[&q.session]);
        values.push(op);
        let bucket = if t.decision.is_permit() { &mut pos } else { &mut neg };
        *bucket.entry(values).or_insert(0) += 1;
    }
    let finish = |m: HashMap<Vec<u32>, u64>| {
        let mut v: Vec<CategoricalRecord> = m
            .into_iter()
            .map(|(values, weight)| CategoricalRecord { values, weight })
            .collect();
        v.sort_unstable();
        v
    };
    Ok((finish(pos), finish(neg)))
}

/// Encodes the selected tuples of `log` against `schema`, merging identical
/// rows into one weighted record. Records come out in canonical (code) order.
pub fn encode_log(
    log: &AccessLog,
    schema: &AttributeSchema,
    which: Which,
) -> Result<Vec<CategoricalRecord>> {
    let codebook = Codebook::from_schema(schema);
    let (pos, neg) = encode_partitions(log, &codebook)?;
    Ok(match which {
        Which::Positive => pos,
        Which::Negative => neg,
        Which::All => merge_records(pos.into_iter().chain(neg)),
    })
}

/// Replaces absent or empty attribute values with `UNK`, adding `UNK` to the
/// range of every attribute where it was needed.
pub fn impute_missing(log: &AccessLog) -> AccessLog {
    let (mut schema, mut entities, tuples) = log.clone().into_parts();
    let mut touched = BTreeSet::new();
    for e in entities.iter_mut() {
        for attr in schema.attrs_of(e.kind) {
            let slot = e.attrs.entry(attr.clone()).or_default();
            if slot.is_empty() {
                *slot = UNK.to_string();
                touched.insert(attr.clone());
            }
        }
    }
    for attr in &touched {
        schema.add_value(attr, UNK);
    }
    AccessLog::from_parts_unchecked(schema, entities, tuples)
}

/// Half-open bin `[lo, hi)`; a missing bound is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl Bin {
    pub fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|lo| x >= lo) && self.hi.is_none_or(|hi| x < hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub bins: Vec<Bin>,
    /// Label for values that fall in no bin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otherwise: Option<String>,
}

impl BinSpec {
    pub fn label_for(&self, x: f64) -> Option<&str> {
        self.bins
            .iter()
            .find(|b| b.contains(x))
            .map(|b| b.label.as_str())
            .or(self.otherwise.as_deref())
    }

    fn labels(&self) -> BTreeSet<String> {
        self.bins
            .iter()
            .map(|b| b.label.clone())
            .chain(self.otherwise.clone())
            .collect()
    }

    fn validate(&self, attr: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for b in &self.bins {
            if !seen.insert(&b.label) {
                return Err(Error::Spec(format!("duplicate bin label `{}` for `{attr}`", b.label)));
            }
            if let (Some(lo), Some(hi)) = (b.lo, b.hi) {
                if lo >= hi {
                    return Err(Error::Spec(format!("empty bin `{}` for `{attr}`", b.label)));
                }
            }
        }
        if self.bins.is_empty() && self.otherwise.is_none() {
            return Err(Error::Spec(format!("no bins declared for `{attr}`")));
        }
        Ok(())
    }
}

/// Numeric-to-categorical conversion, keyed by attribute name. Attributes
/// not listed pass through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Discretizer {
    pub attrs: BTreeMap<String, BinSpec>,
}

impl Discretizer {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: Discretizer = serde_json::from_str(text)?;
        for (attr, spec) in &d.attrs {
            spec.validate(attr)?;
        }
        Ok(d)
    }
}

/// Replaces every numeric value of a binned attribute by its bin label.
/// `UNK` is left in place.
pub fn discretize(log: &AccessLog, spec: &Discretizer) -> Result<AccessLog> {
    let (mut schema, mut entities, tuples) = log.clone().into_parts();
    for (attr, bins) in &spec.attrs {
        bins.validate(attr)?;
        if !schema.contains_attr(attr) {
            return Err(Error::SchemaMismatch(format!("unknown attribute `{attr}` in bin spec")));
        }
    }
    let mut unk_seen: BTreeSet<&str> = BTreeSet::new();
    for e in entities.iter_mut() {
        for (attr, bins) in &spec.attrs {
            let Some(value) = e.attrs.get_mut(attr) else {
                continue;
            };
            if value == UNK || value.is_empty() {
                unk_seen.insert(attr);
                continue;
            }
            let binning_error = || Error::Binning {
                attr: attr.clone(),
                value: value.clone(),
            };
            let x: f64 = value.trim().parse().map_err(|_| binning_error())?;
            let label = bins.label_for(x).ok_or_else(binning_error)?;
            *value = label.to_string();
        }
    }
    for (attr, bins) in &spec.attrs {
        let mut labels = bins.labels();
        if unk_seen.contains(attr.as_str()) {
            labels.insert(UNK.to_string());
        }
        schema.replace_range(attr, labels);
    }
    Ok(AccessLog::from_parts_unchecked(schema, entities, tuples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccessRequest, AuthorizationTuple, Decision, Entity, EntityStore};

    fn schema() -> AttributeSchema {
        AttributeSchema::builder()
            .user("dept", ["CS", "EE"])
            .object("hour", ["0", "10", "18", "23"])
            .operations(["read", "write"])
            .build()
            .unwrap()
    }

    fn log(user_dept: Option<&str>, hour: &str, tuples: &[(&str, Decision)]) -> AccessLog {
        let s = schema();
        let mut u = Entity::new("u", EntityKind::User, Vec::<(String, String)>::new());
        if let Some(d) = user_dept {
            u.attrs.insert("dept".into(), d.into());
        }
        let entities: EntityStore = [
            u,
            Entity::new("o", EntityKind::Object, [("hour", hour)]),
            Entity::null_session(&s),
        ]
        .into_iter()
        .collect();
        let tuples = tuples
            .iter()
            .map(|(op, d)| AuthorizationTuple::new(AccessRequest::new("u", "o", "-", op), *d))
            .collect();
        AccessLog::new(s, entities, tuples).unwrap()
    }

    #[test]
    fn identical_permits_merge_into_one_weighted_record() {
        let l = log(Some("CS"), "10", &[("read", Decision::Permit), ("read", Decision::Permit)]);
        let recs = encode_log(&l, l.schema(), Which::Positive).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].weight, 2);
        assert_eq!(recs[0].values.len(), 3);
    }

    #[test]
    fn positive_weight_equals_log_size_without_denies() {
        let l = log(Some("EE"), "0", &[("read", Decision::Permit), ("write", Decision::Permit)]);
        let recs = encode_log(&l, l.schema(), Which::Positive).unwrap();
        assert_eq!(total_weight(&recs), 2);
        let all = encode_log(&l, l.schema(), Which::All).unwrap();
        assert_eq!(total_weight(&all), l.len() as u64);
    }

    #[test]
    fn decode_restores_values() {
        let l = log(Some("EE"), "18", &[("write", Decision::Deny)]);
        let enc = EncodedLog::from_log(&l).unwrap();
        let decoded = enc.codebook.decode(&enc.negative[0]);
        assert_eq!(decoded, vec![("dept", "EE"), ("hour", "18"), ("op", "write")]);
    }

    #[test]
    fn out_of_range_value_is_encoding_error() {
        let l = log(Some("ME"), "10", &[("read", Decision::Permit)]);
        assert!(matches!(
            encode_log(&l, l.schema(), Which::All),
            Err(Error::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn missing_value_becomes_unk() {
        let l = log(None, "10", &[("read", Decision::Permit)]);
        assert!(encode_log(&l, l.schema(), Which::All).is_err());
        let fixed = impute_missing(&l);
        let u = fixed.entities().iter().find(|e| e.kind == EntityKind::User).unwrap();
        assert_eq!(u.get("dept"), Some(UNK));
        assert!(fixed.schema().range("dept").unwrap().contains(UNK));
        assert!(!fixed.schema().range("hour").unwrap().contains(UNK));
        fixed.validate().unwrap();
        assert_eq!(impute_missing(&fixed), fixed);
    }

    #[test]
    fn complete_log_unchanged_by_imputation() {
        let l = log(Some("CS"), "10", &[("read", Decision::Permit)]);
        assert_eq!(impute_missing(&l), l);
    }

    fn working_hours() -> Discretizer {
        Discretizer::from_json(
            r#"{"hour": {"bins": [{"label": "working", "lo": 8, "hi": 18}], "otherwise": "nonworking"}}"#,
        )
        .unwrap()
    }

    #[test]
    fn hours_bin_into_working_time() {
        let d = working_hours();
        let out = discretize(&log(Some("CS"), "10", &[]), &d).unwrap();
        let o = out.entities().iter().find(|e| e.kind == EntityKind::Object).unwrap();
        assert_eq!(o.get("hour"), Some("working"));
        out.validate().unwrap();
        // Pass-through attribute keeps its value.
        let u = out.entities().iter().find(|e| e.kind == EntityKind::User).unwrap();
        assert_eq!(u.get("dept"), Some("CS"));
    }

    #[test]
    fn upper_bound_is_exclusive() {
        let out = discretize(&log(Some("CS"), "18", &[]), &working_hours()).unwrap();
        let o = out.entities().iter().find(|e| e.kind == EntityKind::Object).unwrap();
        assert_eq!(o.get("hour"), Some("nonworking"));
    }

    #[test]
    fn uncovered_value_is_binning_error() {
        let d = Discretizer::from_json(r#"{"hour": {"bins": [{"label": "day", "lo": 8, "hi": 18}]}}"#)
            .unwrap();
        assert!(matches!(
            discretize(&log(Some("CS"), "23", &[]), &d),
            Err(Error::Binning { .. })
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = Discretizer::from_json(
            r#"{"hour": {"bins": [{"label": "a", "lo": 0, "hi": 1}, {"label": "a", "lo": 1, "hi": 2}]}}"#,
        );
        assert!(err.is_err());
    }
}
