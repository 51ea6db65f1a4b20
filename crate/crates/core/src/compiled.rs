//! Rules compiled against a [`Codebook`] for evaluation over encoded records.

use crate::error::{Error, Result};
use crate::model::{Policy, Rule};
use crate::preprocess::Codebook;

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct CompiledRelation {
    left: usize,
    right: usize,
    /// Left code translated into the right feature's code space.
    translate: Option<Vec<u32>>,
    equal: bool,
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    never: bool,
    positive: Vec<(usize, u32)>,
    negative: Vec<(usize, u32)>,
    relations: Vec<CompiledRelation>,
    op_feature: usize,
    op_code: u32,
    op_positive: bool,
}

impl CompiledRule {
    pub fn compile(rule: &Rule, codebook: &Codebook) -> Result<Self> {
        let feature_of = |attr: &str| {
            codebook.attr_feature(attr).ok_or_else(|| {
                Error::SchemaMismatch(format!("rule references attribute `{attr}` absent from the log"))
            })
        };
        let mut compiled = CompiledRule {
            never: false,
            positive: Vec::new(),
            negative: Vec::new(),
            relations: Vec::new(),
            op_feature: codebook.op_feature(),
            op_code: codebook
                .feature(codebook.op_feature())
                .code(&rule.op)
                .unwrap_or(ABSENT),
            op_positive: rule.op_polarity.is_positive(),
        };
        for t in rule.filter.iter() {
            let f = feature_of(&t.attr)?;
            match (codebook.feature(f).code(&t.value), t.polarity.is_positive()) {
                (Some(c), true) => compiled.positive.push((f, c)),
                (Some(c), false) => compiled.negative.push((f, c)),
                // A value the log never uses: a positive tuple can never hold,
                // a negative one always does.
                (None, true) => compiled.never = true,
                (None, false) => {}
            }
        }
        for r in rule.relation.iter() {
            let left = feature_of(r.left())?;
            let right = feature_of(r.right())?;
            let (lf, rf) = (codebook.feature(left), codebook.feature(right));
            let translate = if lf.values() == rf.values() {
                None
            } else {
                Some(
                    lf.values()
                        .iter()
                        .map(|v| rf.code(v).unwrap_or(ABSENT))
                        .collect(),
                )
            };
            compiled.relations.push(CompiledRelation {
                left,
                right,
                translate,
                equal: r.polarity.is_positive(),
            });
        }
        if compiled.op_code == ABSENT && compiled.op_positive {
            compiled.never = true;
        }
        Ok(compiled)
    }

    #[inline]
    pub fn permits(&self, values: &[u32]) -> bool {
        if self.never {
            return false;
        }
        if (values[self.op_feature] == self.op_code) != self.op_positive {
            return false;
        }
        if self.positive.iter().any(|&(f, c)| values[f] != c) {
            return false;
        }
        if self.negative.iter().any(|&(f, c)| values[f] == c) {
            return false;
        }
        self.relations.iter().all(|r| {
            let l = match &r.translate {
                None => values[r.left],
                Some(t) => t[values[r.left] as usize],
            };
            (l == values[r.right]) == r.equal
        })
    }
}

/// A compiled rule set; permits a record iff some rule does.
#[derive(Debug, Clone)]
pub struct CompiledPolicy {
    rules: Vec<CompiledRule>,
}

impl CompiledPolicy {
    pub fn compile(rules: &[Rule], codebook: &Codebook) -> Result<Self> {
        Ok(CompiledPolicy {
            rules: rules
                .iter()
                .map(|r| CompiledRule::compile(r, codebook))
                .collect::<Result<_>>()?,
        })
    }

    pub fn from_policy(policy: &Policy, codebook: &Codebook) -> Result<Self> {
        Self::compile(policy.rules(), codebook)
    }

    pub fn permits(&self, values: &[u32]) -> bool {
        self.rules.iter().any(|r| r.permits(values))
    }
}
