use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::entity::EntityStore;
use super::log::{AccessRequest, Decision};
use super::rule::{satisfies_filter, satisfies_relation, Rule};
use super::schema::{AttributeSchema, EntityKind};
use crate::error::{Error, Result};

/// Current version of the policy document format.
pub const POLICY_FORMAT_VERSION: u32 = 1;

/// A rule set over a schema, optionally carrying the entity map used to
/// resolve requests.
///
/// Rules keep their insertion order. Duplicates are allowed here (pruning
/// is what removes them); [`Policy::dedup`] collapses them explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    schema: AttributeSchema,
    rules: Vec<Rule>,
    entities: EntityStore,
}

#[derive(Serialize, Deserialize)]
struct PolicyDoc {
    version: u32,
    schema: AttributeSchema,
    rules: Vec<Rule>,
}

impl Policy {
    pub fn new(schema: AttributeSchema, rules: Vec<Rule>) -> Result<Self> {
        for rule in &rules {
            rule.validate(&schema)?;
        }
        Ok(Policy {
            schema,
            rules,
            entities: EntityStore::new(),
        })
    }

    pub fn empty(schema: AttributeSchema) -> Self {
        Policy {
            schema,
            rules: Vec::new(),
            entities: EntityStore::new(),
        }
    }

    pub fn with_entities(mut self, entities: EntityStore) -> Self {
        self.entities = entities;
        self
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn entities(&self) -> &EntityStore {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: Rule) -> Result<()> {
        rule.validate(&self.schema)?;
        self.rules.push(rule);
        Ok(())
    }

    /// Replaces the rule list, keeping schema and entities.
    pub fn with_rules(&self, rules: Vec<Rule>) -> Result<Self> {
        for rule in &rules {
            rule.validate(&self.schema)?;
        }
        Ok(Policy {
            schema: self.schema.clone(),
            rules,
            entities: self.entities.clone(),
        })
    }

    /// Removes repeated rules, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.rules.retain(|r| seen.insert(r.clone()));
    }

    /// Number of filter + relation tuples across all rules.
    pub fn tuple_count(&self) -> usize {
        self.rules.iter().map(Rule::size).sum()
    }

    pub fn decide(&self, request: &AccessRequest) -> Result<Decision> {
        policy_decision(self, request)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PolicyDoc {
            version: POLICY_FORMAT_VERSION,
            schema: self.schema.clone(),
            rules: self.rules.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PolicyDoc = serde_json::from_str(text)?;
        if doc.version != POLICY_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported policy format version {}",
                doc.version
            )));
        }
        Policy::new(doc.schema, doc.rules)
    }
}

/// `q ⊨ ρ`: the filter and relation hold on the request's entities and the
/// operation matches (`op_q ≠ op_ρ` for a negated operation).
pub fn rule_satisfied(request: &AccessRequest, rule: &Rule, policy: &Policy) -> Result<bool> {
    let entities = policy.entities();
    let user = entities.resolve(EntityKind::User, &request.user)?;
    let object = entities.resolve(EntityKind::Object, &request.object)?;
    let session = entities.resolve(EntityKind::Session, &request.session)?;
    if !rule.op_matches(&request.op) {
        return Ok(false);
    }
    Ok(satisfies_filter(user, object, session, &rule.filter)?
        && satisfies_relation(user, object, session, &rule.relation)?)
}

/// Permit iff some rule is satisfied; deny otherwise.
pub fn policy_decision(policy: &Policy, request: &AccessRequest) -> Result<Decision> {
    let entities = policy.entities();
    entities.resolve(EntityKind::User, &request.user)?;
    entities.resolve(EntityKind::Object, &request.object)?;
    entities.resolve(EntityKind::Session, &request.session)?;
    for rule in policy.rules() {
        if rule_satisfied(request, rule, policy)? {
            return Ok(Decision::Permit);
        }
    }
    Ok(Decision::Deny)
}
