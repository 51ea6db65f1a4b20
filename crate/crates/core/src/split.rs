//! Stratified partitions of encoded logs (folds and hold-out splits).
//!
//! Splitting works on tuple multiplicities: a record of weight `w` is `w`
//! tuples, which may land in different parts.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::preprocess::{CategoricalRecord, EncodedLog};
use crate::seed;

/// Assigns every unit of weight to a part `0..parts` after a seeded shuffle,
/// round-robin. Returns per-part counts for every record.
fn deal(records: &[CategoricalRecord], parts: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut units: Vec<u32> = Vec::with_capacity(records.iter().map(|r| r.weight as usize).sum());
    for (i, r) in records.iter().enumerate() {
        units.extend(std::iter::repeat_n(i as u32, r.weight as usize));
    }
    units.shuffle(&mut seed::rng(seed));
    let mut counts = vec![vec![0u64; records.len()]; parts];
    for (n, &i) in units.iter().enumerate() {
        counts[n % parts][i as usize] += 1;
    }
    counts
}

fn take(records: &[CategoricalRecord], counts: impl Fn(usize) -> u64) -> Vec<CategoricalRecord> {
    records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let w = counts(i);
            (w > 0).then(|| CategoricalRecord::new(r.values.clone(), w))
        })
        .collect()
}

/// `(train, test)` pairs of a stratified `folds`-fold split: `L+` and `L−`
/// are dealt separately so every fold keeps the class balance.
pub fn stratified_folds(log: &EncodedLog, folds: usize, seed: u64) -> Result<Vec<(EncodedLog, EncodedLog)>> {
    if folds < 2 {
        return Err(Error::Spec(format!("need at least 2 folds, got {folds}")));
    }
    let pos = deal(&log.positive, folds, seed::child(seed, 0));
    let neg = deal(&log.negative, folds, seed::child(seed, 1));
    Ok((0..folds)
        .map(|f| {
            let part = |records: &[CategoricalRecord], counts: &[Vec<u64>], test: bool| {
                take(records, |i| {
                    if test {
                        counts[f][i]
                    } else {
                        records[i].weight - counts[f][i]
                    }
                })
            };
            let train = EncodedLog {
                codebook: log.codebook.clone(),
                positive: part(&log.positive, &pos, false),
                negative: part(&log.negative, &neg, false),
            };
            let test = EncodedLog {
                codebook: log.codebook.clone(),
                positive: part(&log.positive, &pos, true),
                negative: part(&log.negative, &neg, true),
            };
            (train, test)
        })
        .collect())
}

/// Stratified `(train, test)` split with `test_fraction` of each class held out.
pub fn holdout(log: &EncodedLog, test_fraction: f64, seed: u64) -> Result<(EncodedLog, EncodedLog)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidFraction(test_fraction));
    }
    let split = |records: &[CategoricalRecord], s: u64| {
        let total: u64 = records.iter().map(|r| r.weight).sum();
        let n_test = (test_fraction * total as f64).round() as u64;
        let mut units: Vec<u32> = Vec::with_capacity(total as usize);
        for (i, r) in records.iter().enumerate() {
            units.extend(std::iter::repeat_n(i as u32, r.weight as usize));
        }
        units.shuffle(&mut seed::rng(s));
        let mut test = vec![0u64; records.len()];
        for &i in &units[..n_test as usize] {
            test[i as usize] += 1;
        }
        (
            take(records, |i| records[i].weight - test[i]),
            take(records, |i| test[i]),
        )
    };
    let (pos_train, pos_test) = split(&log.positive, seed::child(seed, 0));
    let (neg_train, neg_test) = split(&log.negative, seed::child(seed, 1));
    Ok((
        EncodedLog {
            codebook: log.codebook.clone(),
            positive: pos_train,
            negative: neg_train,
        },
        EncodedLog {
            codebook: log.codebook.clone(),
            positive: pos_test,
            negative: neg_test,
        },
    ))
}
