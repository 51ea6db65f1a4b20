#![allow(dead_code)]

use std::collections::BTreeMap;

use abac_miner::model::{
    AccessLog, AccessRequest, AttributeFilter, AttributeSchema, AuthorizationTuple, Decision, Entity, EntityKind,
    EntityStore, FilterTuple, Polarity, Policy, RelationCondition, RelationTuple, Rule,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A schema, entities and every request over them.
pub struct World {
    pub schema: AttributeSchema,
    pub entities: EntityStore,
    pub requests: Vec<AccessRequest>,
}

/// Random schema with at most `max_attrs` attributes (at least one user and
/// one object attribute) drawn from two value pools, so that some pairs share
/// a range and others do not.
pub fn random_schema(rng: &mut ChaCha8Rng, max_attrs: usize) -> AttributeSchema {
    let n = rng.gen_range(2..=max_attrs.max(2));
    let pools: [Vec<&str>; 2] = [vec!["a", "b", "c"], vec!["x", "y"]];
    let mut b = AttributeSchema::builder();
    for i in 0..n {
        let kind = match i {
            0 => EntityKind::User,
            1 => EntityKind::Object,
            _ => *[EntityKind::User, EntityKind::Object, EntityKind::Session]
                .choose(rng)
                .unwrap(),
        };
        let pool = pools[rng.gen_range(0..2)].clone();
        let name = format!("{}{i}", kind.prefix());
        b = match kind {
            EntityKind::User => b.user(&name, pool),
            EntityKind::Object => b.object(&name, pool),
            EntityKind::Session => b.session(&name, pool),
        };
    }
    b.operations(["read", "write", "exec"]).build().unwrap()
}

fn random_entity(rng: &mut ChaCha8Rng, schema: &AttributeSchema, kind: EntityKind, id: String) -> Entity {
    let attrs: Vec<(String, String)> = schema
        .attrs_of(kind)
        .iter()
        .map(|a| {
            let range: Vec<&String> = schema.range(a).unwrap().iter().collect();
            (a.clone(), range.choose(rng).unwrap().to_string())
        })
        .collect();
    Entity::new(id.as_str(), kind, attrs)
}

pub fn random_world(rng: &mut ChaCha8Rng, max_attrs: usize, users: usize, objects: usize) -> World {
    let schema = random_schema(rng, max_attrs);
    let mut entities = EntityStore::new();
    for i in 0..users {
        entities.insert(random_entity(rng, &schema, EntityKind::User, format!("u{i}")));
    }
    for i in 0..objects {
        entities.insert(random_entity(rng, &schema, EntityKind::Object, format!("o{i}")));
    }
    let sessions = if schema.attrs_of(EntityKind::Session).is_empty() {
        entities.insert(Entity::new("-", EntityKind::Session, Vec::<(String, String)>::new()));
        vec!["-".to_string()]
    } else {
        (0..2)
            .map(|i| {
                let id = format!("s{i}");
                entities.insert(random_entity(rng, &schema, EntityKind::Session, id.clone()));
                id
            })
            .collect()
    };
    let mut requests = Vec::new();
    for u in 0..users {
        for o in 0..objects {
            for s in &sessions {
                for op in schema.operations() {
                    requests.push(AccessRequest::new(format!("u{u}"), format!("o{o}"), s.clone(), op));
                }
            }
        }
    }
    World {
        schema,
        entities,
        requests,
    }
}

/// Random satisfiable rule: distinct filter attributes, relations between
/// same-range attributes, occasional negation everywhere.
pub fn random_rule(rng: &mut ChaCha8Rng, schema: &AttributeSchema) -> Rule {
    let attrs: Vec<String> = schema.attrs().map(str::to_string).collect();
    let n_filters = rng.gen_range(0..=attrs.len().min(3));
    let chosen: Vec<&String> = attrs.choose_multiple(rng, n_filters).collect();
    let mut filters = Vec::new();
    for a in chosen {
        let range: Vec<&String> = schema.range(a).unwrap().iter().collect();
        let v = range.choose(rng).unwrap();
        filters.push(if rng.gen_bool(0.25) {
            FilterTuple::negative(a, v)
        } else {
            FilterTuple::positive(a, v)
        });
    }
    let mut pairs = Vec::new();
    for (i, a) in attrs.iter().enumerate() {
        for b in &attrs[i + 1..] {
            if schema.same_range(a, b) {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    let mut relations = Vec::new();
    if !pairs.is_empty() && rng.gen_bool(0.5) {
        let (a, b) = pairs.choose(rng).unwrap();
        let pol = if rng.gen_bool(0.3) { Polarity::Negative } else { Polarity::Positive };
        relations.push(RelationTuple::new(a, b, pol).unwrap());
    }
    let ops: Vec<&String> = schema.operations().iter().collect();
    let rule = Rule::new(
        AttributeFilter::new(filters).unwrap(),
        RelationCondition::new(relations),
        ops.choose(rng).unwrap(),
    );
    if rng.gen_bool(0.2) {
        rule.with_op_polarity(Polarity::Negative)
    } else {
        rule
    }
}

pub fn random_policy(rng: &mut ChaCha8Rng, schema: &AttributeSchema, max_rules: usize) -> Policy {
    let n = rng.gen_range(0..=max_rules);
    let rules = (0..n).map(|_| random_rule(rng, schema)).collect();
    Policy::new(schema.clone(), rules).unwrap()
}

/// Value of `attr` for the request, looked up on whichever entity owns it.
fn attr_value<'a>(schema: &AttributeSchema, entities: &'a EntityStore, q: &AccessRequest, attr: &str) -> &'a str {
    let (kind, id) = match schema.kind_of(attr).unwrap() {
        EntityKind::User => (EntityKind::User, &q.user),
        EntityKind::Object => (EntityKind::Object, &q.object),
        EntityKind::Session => (EntityKind::Session, &q.session),
    };
    entities.get(kind, id).unwrap().attrs.get(attr).map(String::as_str).unwrap()
}

/// Literal reading of the satisfaction definitions: every positive filter
/// tuple's attribute equals its value, every negative one differs; every
/// positive relation's attributes are equal, every negative one's differ;
/// the operation equals (or, negated, differs from) the rule's.
pub fn oracle_satisfies(schema: &AttributeSchema, entities: &EntityStore, q: &AccessRequest, rule: &Rule) -> bool {
    for t in rule.filter.iter() {
        let actual = attr_value(schema, entities, q, &t.attr);
        let wanted = t.polarity == Polarity::Positive;
        if (actual == t.value) != wanted {
            return false;
        }
    }
    for r in rule.relation.iter() {
        let a = attr_value(schema, entities, q, r.left());
        let b = attr_value(schema, entities, q, r.right());
        let wanted = r.polarity == Polarity::Positive;
        if (a == b) != wanted {
            return false;
        }
    }
    let op_equal = q.op == rule.op;
    op_equal == (rule.op_polarity == Polarity::Positive)
}

/// Permit iff some rule is satisfied.
pub fn oracle_decision(schema: &AttributeSchema, entities: &EntityStore, q: &AccessRequest, rules: &[Rule]) -> Decision {
    if rules.iter().any(|r| oracle_satisfies(schema, entities, q, r)) {
        Decision::Permit
    } else {
        Decision::Deny
    }
}

/// Log whose decisions come from the oracle under `policy`.
pub fn oracle_log(world: &World, rules: &[Rule]) -> AccessLog {
    let tuples = world
        .requests
        .iter()
        .map(|q| {
            AuthorizationTuple::new(
                q.clone(),
                oracle_decision(&world.schema, &world.entities, q, rules),
            )
        })
        .collect();
    AccessLog::new(world.schema.clone(), world.entities.clone(), tuples).unwrap()
}

/// Straight-line reference for every reported metric.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceMetrics {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub wsc: f64,
    pub wsc_max: f64,
    pub delta_wsc: f64,
    pub quality: f64,
}

pub fn reference_metrics(log: &AccessLog, rules: &[Rule]) -> ReferenceMetrics {
    let schema = log.schema();
    let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for t in log.tuples() {
        let permit = oracle_decision(schema, log.entities(), &t.request, rules) == Decision::Permit;
        match (t.decision == Decision::Permit, permit) {
            (true, true) => tp += 1.0,
            (true, false) => fn_ += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let pos = tp + fn_;
    let neg = fp + tn;
    let (tp, fn_) = if pos > 0.0 { (tp / pos, fn_ / pos) } else { (0.0, 0.0) };
    let (fp, tn) = if neg > 0.0 { (fp / neg, tn / neg) } else { (0.0, 0.0) };
    let accuracy = (tp + tn) / (tp + tn + fp + fn_);
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let wsc: f64 = rules.iter().map(|r| (r.filter.len() + r.relation.len()) as f64).sum();
    // Most complex policy: one fully pinned rule per distinct permitted
    // (attribute values, op) combination.
    let mut distinct: BTreeMap<(Vec<String>, String), ()> = BTreeMap::new();
    let attrs: Vec<String> = schema.attrs().map(str::to_string).collect();
    for t in log.tuples().iter().filter(|t| t.decision == Decision::Permit) {
        let values = attrs
            .iter()
            .map(|a| attr_value(schema, log.entities(), &t.request, a).to_string())
            .collect();
        distinct.insert((values, t.request.op.clone()), ());
    }
    let wsc_max = (distinct.len() * attrs.len()) as f64;
    let delta_wsc = (wsc_max - wsc + 1.0) / wsc_max;
    let quality = if f_score > 0.0 && delta_wsc > 0.0 {
        2.0 * f_score * delta_wsc / (f_score + delta_wsc)
    } else {
        0.0
    };
    ReferenceMetrics {
        tp,
        fp,
        tn,
        fn_,
        accuracy,
        precision,
        recall,
        f_score,
        wsc,
        wsc_max,
        delta_wsc,
        quality,
    }
}

/// Shorthand rule builder: filters as `attr=value` / `attr=!value`,
/// relations as `a==b` / `a!=b`, operation as `op` / `!op`.
pub fn rule(filters: &[&str], relations: &[&str], op: &str) -> Rule {
    let filters = filters.iter().map(|f| {
        let (a, v) = f.split_once('=').unwrap();
        match v.strip_prefix('!') {
            Some(v) => FilterTuple::negative(a, v),
            None => FilterTuple::positive(a, v),
        }
    });
    let relations = relations.iter().map(|r| {
        if let Some((a, b)) = r.split_once("!=") {
            RelationTuple::different(a, b).unwrap()
        } else {
            let (a, b) = r.split_once("==").unwrap();
            RelationTuple::equal(a, b).unwrap()
        }
    });
    let (op, polarity) = match op.strip_prefix('!') {
        Some(op) => (op, Polarity::Negative),
        None => (op, Polarity::Positive),
    };
    Rule::new(
        AttributeFilter::new(filters).unwrap(),
        RelationCondition::new(relations),
        op,
    )
    .with_op_polarity(polarity)
}
