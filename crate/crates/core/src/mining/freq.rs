use crate::error::{Error, Result};
use crate::preprocess::{CategoricalRecord, Codebook};

/// Weighted relative frequencies of every feature value and of equality on
/// every same-range attribute pair, for one record set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    total: u64,
    values: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
    equal: Vec<f64>,
}

impl FrequencyTable {
    /// Fails on an empty (or zero-weight) record set, where frequencies are
    /// undefined.
    pub fn build(records: &[CategoricalRecord], codebook: &Codebook) -> Result<Self> {
        Self::build_many([records], codebook)
    }

    /// Frequencies of the union of several record sets.
    pub fn build_many<'a>(
        sets: impl IntoIterator<Item = &'a [CategoricalRecord]>,
        codebook: &Codebook,
    ) -> Result<Self> {
        let pairs = codebook.same_range_pairs();
        let mut counts: Vec<Vec<u64>> = codebook
            .features()
            .iter()
            .map(|f| vec![0; f.cardinality()])
            .collect();
        let mut equal = vec![0u64; pairs.len()];
        let mut total = 0u64;
        for r in sets.into_iter().flatten() {
            total += r.weight;
            for (f, &c) in r.values.iter().enumerate() {
                counts[f][c as usize] += r.weight;
            }
            for (p, &(i, j)) in pairs.iter().enumerate() {
                if r.values[i] == r.values[j] {
                    equal[p] += r.weight;
                }
            }
        }
        if total == 0 {
            return Err(Error::EmptyInput("frequency of an empty record set"));
        }
        let t = total as f64;
        Ok(FrequencyTable {
            total,
            values: counts
                .into_iter()
                .map(|row| row.into_iter().map(|c| c as f64 / t).collect())
                .collect(),
            pairs,
            equal: equal.into_iter().map(|c| c as f64 / t).collect(),
        })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cardinality(&self, feature: usize) -> usize {
        self.values[feature].len()
    }

    pub fn value(&self, feature: usize, code: u32) -> f64 {
        self.values[feature][code as usize]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.pairs.iter().position(|&p| p == key)
    }

    /// Fraction of records whose two attributes of pair `p` are equal.
    pub fn equality(&self, p: usize) -> f64 {
        self.equal[p]
    }
}

/// Weighted fraction of `records` whose `feature` equals `code`.
pub fn freq(records: &[CategoricalRecord], feature: usize, code: u32) -> Result<f64> {
    let total: u64 = records.iter().map(|r| r.weight).sum();
    if total == 0 {
        return Err(Error::EmptyInput("frequency of an empty record set"));
    }
    let hits: u64 = records
        .iter()
        .filter(|r| r.values[feature] == code)
        .map(|r| r.weight)
        .sum();
    Ok(hits as f64 / total as f64)
}
