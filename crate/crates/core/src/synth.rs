//! Ground-truth policies and synthetic access logs: entity universes, builtin
//! and random policies, complete logs, partial (sparse) and noisy variants.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AccessLog, AccessRequest, AttributeFilter, AttributeSchema, AuthorizationTuple, Decision,
    Entity, EntityId, EntityKind, EntityStore, FilterTuple, Polarity, Policy, RelationCondition,
    RelationTuple, Rule,
};
use crate::seed;

/// Default limit on the number of tuples a complete log may enumerate.
pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub users: usize,
    pub objects: usize,
    pub sessions: usize,
}

impl EntityCounts {
    pub fn of(&self, kind: EntityKind) -> usize {
        match kind {
            EntityKind::User => self.users,
            EntityKind::Object => self.objects,
            EntityKind::Session => self.sessions,
        }
    }
}

/// Entities to generate: counts per kind, attribute values drawn uniformly
/// from their ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseSpec {
    pub schema: AttributeSchema,
    pub entity_counts: EntityCounts,
    pub seed: u64,
}

impl UniverseSpec {
    pub fn validate(&self) -> Result<()> {
        for kind in EntityKind::ALL {
            if self.entity_counts.of(kind) == 0 {
                return Err(Error::Spec(format!("{kind} count must be at least 1")));
            }
        }
        Ok(())
    }

    /// Number of sessions actually generated: one null session when the
    /// schema has no session attributes.
    fn session_count(&self) -> usize {
        if self.schema.attrs_of(EntityKind::Session).is_empty() {
            1
        } else {
            self.entity_counts.sessions
        }
    }

    /// `|U| · |O| · |S| · |OP|` of the complete log.
    pub fn log_size(&self) -> u128 {
        self.entity_counts.users as u128
            * self.entity_counts.objects as u128
            * self.session_count() as u128
            * self.schema.operations().len() as u128
    }
}

fn padded_id(kind: EntityKind, i: usize, n: usize) -> String {
    let width = (n.max(1) - 1).to_string().len();
    format!("{}{:0width$}", kind.prefix(), i)
}

/// Entities of a universe. Ids are `u00`, `o17`, `s3`, ... zero-padded so
/// that lexical order matches generation order.
pub fn generate_universe(spec: &UniverseSpec) -> Result<EntityStore> {
    spec.validate()?;
    let mut store = EntityStore::new();
    for kind in EntityKind::ALL {
        let attrs = spec.schema.attrs_of(kind);
        if kind == EntityKind::Session && attrs.is_empty() {
            store.insert(Entity::null_session(&spec.schema));
            continue;
        }
        let mut rng = seed::rng(seed::substream(spec.seed, kind.name()));
        let n = spec.entity_counts.of(kind);
        for i in 0..n {
            let values: Vec<(String, String)> = attrs
                .iter()
                .map(|a| {
                    let range: Vec<&String> = spec.schema.range(a).expect("declared").iter().collect();
                    (a.clone(), range[rng.gen_range(0..range.len())].clone())
                })
                .collect();
            store.insert(Entity::new(padded_id(kind, i, n), kind, values));
        }
    }
    Ok(store)
}

/// Every `(u, o, s, op)` request of the universe with its decision under
/// `policy`, in user, object, session, operation order.
pub fn generate_complete_log(universe: &UniverseSpec, policy: &Policy, cap: u64) -> Result<AccessLog> {
    if universe.schema != *policy.schema() {
        return Err(Error::SchemaMismatch(
            "universe and policy use different schemas".into(),
        ));
    }
    let product = universe.log_size();
    if product > cap as u128 {
        return Err(Error::CapExceeded { product, cap });
    }
    let store = generate_universe(universe)?;
    let judged = policy.clone().with_entities(store.clone());
    let ids = |kind| store.of_kind(kind).map(|e| e.id.clone()).collect::<Vec<EntityId>>();
    let (users, objects, sessions) = (
        ids(EntityKind::User),
        ids(EntityKind::Object),
        ids(EntityKind::Session),
    );
    let ops: Vec<&String> = universe.schema.operations().iter().collect();
    let per_user: Vec<Vec<AuthorizationTuple>> = users
        .par_iter()
        .map(|u| {
            let mut out = Vec::with_capacity(objects.len() * sessions.len() * ops.len());
            for o in &objects {
                for s in &sessions {
                    for op in &ops {
                        let req = AccessRequest::new(u.clone(), o.clone(), s.clone(), op);
                        let d = judged.decide(&req)?;
                        out.push(AuthorizationTuple::new(req, d));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    AccessLog::new(
        universe.schema.clone(),
        store,
        per_user.into_iter().flatten().collect(),
    )
}

/// `⌈fraction · n⌉`, robust to floating-point noise in the product.
fn ceil_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let rounded = x.round();
    let c = if (x - rounded).abs() < 1e-9 { rounded } else { x.ceil() };
    (c as usize).min(n)
}

/// Stratified uniform sample keeping `⌈fraction·|L+|⌉` permitted and
/// `⌈fraction·|L−|⌉` denied tuples, in their original order.
pub fn sparsify(log: &AccessLog, fraction: f64, seed: u64) -> Result<AccessLog> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let tuples = log.tuples();
    let mut keep = Vec::new();
    for (stream, permit) in [(0, true), (1, false)] {
        let idx: Vec<usize> = (0..tuples.len())
            .filter(|&i| tuples[i].decision.is_permit() == permit)
            .collect();
        let n = ceil_count(fraction, idx.len());
        let mut rng = seed::rng(seed::child(seed, stream));
        keep.extend(sample(&mut rng, idx.len(), n).into_iter().map(|i| idx[i]));
    }
    keep.sort_unstable();
    Ok(log.with_tuples(keep.into_iter().map(|i| tuples[i].clone()).collect()))
}

/// Flips the decision of `⌈fraction·|L|⌉` uniformly chosen tuples. Returns
/// the noisy log and the flipped indices.
pub fn add_noise(log: &AccessLog, fraction: f64, seed: u64) -> Result<(AccessLog, BTreeSet<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidFraction(fraction));
    }
    let n = ceil_count(fraction, log.len());
    let mut rng = seed::rng(seed);
    let flipped: BTreeSet<usize> = sample(&mut rng, log.len(), n).into_iter().collect();
    let tuples = log
        .tuples()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut t = t.clone();
            if flipped.contains(&i) {
                t.decision = t.decision.flip();
            }
            t
        })
        .collect();
    Ok((log.with_tuples(tuples), flipped))
}

/// Shape of a randomly generated policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomPolicySpec {
    pub n_rules: usize,
    /// Inclusive bounds on filter tuples per rule.
    pub filters_per_rule: (usize, usize),
    /// Inclusive bounds on relation tuples per rule.
    pub relations_per_rule: (usize, usize),
    /// Probability that a generated tuple is negated.
    pub negative_fraction: f64,
    pub seed: u64,
}

impl Default for RandomPolicySpec {
    fn default() -> Self {
        RandomPolicySpec {
            n_rules: 10,
            filters_per_rule: (2, 4),
            relations_per_rule: (0, 1),
            negative_fraction: 0.0,
            seed: 0,
        }
    }
}

/// Shape of a random attribute schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSchemaSpec {
    pub user_attrs: usize,
    pub object_attrs: usize,
    pub session_attrs: usize,
    /// Inclusive bounds on the range size of each attribute.
    pub values_per_attr: (usize, usize),
    pub operations: usize,
    /// User/object attribute pairs given one shared range, enabling relations.
    pub shared_pairs: usize,
    pub seed: u64,
}

impl Default for RandomSchemaSpec {
    fn default() -> Self {
        RandomSchemaSpec {
            user_attrs: 4,
            object_attrs: 3,
            session_attrs: 1,
            values_per_attr: (2, 5),
            operations: 3,
            shared_pairs: 1,
            seed: 0,
        }
    }
}

/// Schema with attributes `ua0.., oa0.., sa0..`, values `v0..` and
/// operations `op0..`. The first `shared_pairs` user attributes share their
/// range with the object attribute of the same index.
pub fn random_schema(spec: &RandomSchemaSpec) -> Result<AttributeSchema> {
    let (lo, hi) = spec.values_per_attr;
    if lo < 1 || lo > hi {
        return Err(Error::Spec(format!("invalid value-count bounds ({lo}, {hi})")));
    }
    if spec.shared_pairs > spec.user_attrs.min(spec.object_attrs) {
        return Err(Error::Spec(format!(
            "{} shared pairs need as many user and object attributes",
            spec.shared_pairs
        )));
    }
    let mut rng = seed::rng(spec.seed);
    let values = |n: usize| (0..n).map(|i| format!("v{i}")).collect::<Vec<_>>();
    let mut b = AttributeSchema::builder();
    let mut shared = Vec::new();
    for i in 0..spec.user_attrs {
        let n = rng.gen_range(lo..=hi);
        if i < spec.shared_pairs {
            shared.push(n);
        }
        b = b.user(&format!("ua{i}"), values(n));
    }
    for i in 0..spec.object_attrs {
        let n = shared.get(i).copied().unwrap_or_else(|| rng.gen_range(lo..=hi));
        b = b.object(&format!("oa{i}"), values(n));
    }
    for i in 0..spec.session_attrs {
        let n = rng.gen_range(lo..=hi);
        b = b.session(&format!("sa{i}"), values(n));
    }
    b.operations((0..spec.operations).map(|i| format!("op{i}"))).build()
}

fn draw_rule(
    schema: &AttributeSchema,
    spec: &RandomPolicySpec,
    pairs: &[(String, String)],
    rng: &mut seed::Rng,
) -> Rule {
    let polarity = |rng: &mut seed::Rng| {
        if rng.gen_bool(spec.negative_fraction) {
            Polarity::Negative
        } else {
            Polarity::Positive
        }
    };
    // Relations first, on attributes no filter will touch, so every rule is
    // satisfiable.
    let nr = rng.gen_range(spec.relations_per_rule.0..=spec.relations_per_rule.1);
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut relation = RelationCondition::empty();
    let mut order: Vec<&(String, String)> = pairs.iter().collect();
    order.shuffle(rng);
    for (a, b) in order {
        if relation.len() == nr {
            break;
        }
        if used.contains(a.as_str()) || used.contains(b.as_str()) {
            continue;
        }
        used.insert(a);
        used.insert(b);
        let pol = polarity(rng);
        relation.insert(RelationTuple::new(a, b, pol).expect("distinct attributes"));
    }
    let nf = rng.gen_range(spec.filters_per_rule.0..=spec.filters_per_rule.1);
    let mut attrs: Vec<&str> = schema.attrs().filter(|a| !used.contains(a)).collect();
    attrs.shuffle(rng);
    let mut filter = AttributeFilter::empty();
    for a in attrs.into_iter().take(nf) {
        let range: Vec<&String> = schema.range(a).expect("declared").iter().collect();
        let v = range[rng.gen_range(0..range.len())];
        let pol = if range.len() > 1 { polarity(rng) } else { Polarity::Positive };
        let t = match pol {
            Polarity::Positive => FilterTuple::positive(a, v),
            Polarity::Negative => FilterTuple::negative(a, v),
        };
        filter.insert(t).expect("one tuple per attribute");
    }
    let ops: Vec<&String> = schema.operations().iter().collect();
    Rule::new(filter, relation, ops[rng.gen_range(0..ops.len())])
}

/// Random policy over `schema`: `n_rules` pairwise-distinct, satisfiable rules.
pub fn generate_random_policy(schema: &AttributeSchema, spec: &RandomPolicySpec) -> Result<Policy> {
    let (fmin, fmax) = spec.filters_per_rule;
    let (rmin, rmax) = spec.relations_per_rule;
    if fmin > fmax || rmin > rmax {
        return Err(Error::Spec("per-rule bounds must satisfy min <= max".into()));
    }
    if !(0.0..=1.0).contains(&spec.negative_fraction) {
        return Err(Error::InvalidFraction(spec.negative_fraction));
    }
    // Relations are placed on disjoint attribute pairs that filters avoid.
    let pairs = schema.same_range_pairs();
    let mut disjoint = 0;
    let mut taken = BTreeSet::new();
    for (a, b) in &pairs {
        if !taken.contains(a) && !taken.contains(b) {
            taken.insert(a.clone());
            taken.insert(b.clone());
            disjoint += 1;
        }
    }
    if rmin > disjoint {
        return Err(Error::Spec(format!(
            "{rmin} relations per rule requested but only {disjoint} disjoint same-range pairs exist"
        )));
    }
    if fmin + 2 * rmin > schema.attr_count() {
        return Err(Error::Spec(format!(
            "{fmin} filters and {rmin} relations per rule need more than {} attributes",
            schema.attr_count()
        )));
    }
    let mut rng = seed::rng(spec.seed);
    let mut rules: Vec<Rule> = Vec::with_capacity(spec.n_rules);
    let mut attempts = 0usize;
    while rules.len() < spec.n_rules {
        attempts += 1;
        if attempts > 1000 * spec.n_rules.max(1) {
            return Err(Error::Spec(format!(
                "could not draw {} distinct rules from this schema",
                spec.n_rules
            )));
        }
        let r = draw_rule(schema, spec, &pairs, &mut rng);
        if r.filter.len() >= fmin && r.relation.len() >= rmin && !rules.contains(&r) {
            rules.push(r);
        }
    }
    Policy::new(schema.clone(), rules)
}

/// Parses the compact rule notation used for the builtin policies:
/// filters `attr=value` / `attr=!value`, relations `a==b` / `a!=b`.
fn rule(filters: &[&str], relations: &[&str], op: &str) -> Rule {
    let mut f = AttributeFilter::empty();
    for spec in filters {
        let (a, v) = spec.split_once('=').expect("attr=value");
        let t = match v.strip_prefix('!') {
            Some(v) => FilterTuple::negative(a, v),
            None => FilterTuple::positive(a, v),
        };
        f.insert(t).expect("builtin filters are consistent");
    }
    let mut r = RelationCondition::empty();
    for spec in relations {
        let t = if let Some((a, b)) = spec.split_once("!=") {
            RelationTuple::different(a, b)
        } else {
            let (a, b) = spec.split_once("==").expect("a==b");
            RelationTuple::equal(a, b)
        };
        r.insert(t.expect("distinct attributes"));
    }
    Rule::new(f, r, op)
}

fn university_schema() -> AttributeSchema {
    let depts = ["cs", "ee", "me", "math", "phys"];
    let courses = ["c1", "c2", "c3", "c4", "none"];
    AttributeSchema::builder()
        .user("position", ["applicant", "student", "ta", "faculty", "staff"])
        .user("uDept", depts)
        .user("isChair", ["yes", "no"])
        .user("crsTaught", courses)
        .user("crsTaken", courses)
        .user("level", ["undergrad", "grad", "na"])
        .object("type", ["application", "gradebook", "roster", "transcript", "record"])
        .object("oDept", depts)
        .object("crs", courses)
        .object("status", ["open", "closed"])
        .session("location", ["campus", "remote", "library"])
        .operations([
            "readScore", "addScore", "changeScore", "assignGrade", "checkStatus", "setStatus",
            "readTranscript", "readRecord",
        ])
        .build()
        .expect("valid builtin schema")
}

fn university_rules() -> Vec<Rule> {
    vec![
        rule(&["position=student", "type=gradebook"], &["crsTaken==crs"], "readScore"),
        rule(&["position=ta", "type=gradebook"], &["crsTaught==crs"], "addScore"),
        rule(&["position=ta", "type=gradebook"], &["crsTaught==crs"], "readScore"),
        rule(&["position=faculty", "type=gradebook"], &["crsTaught==crs"], "changeScore"),
        rule(&["position=faculty", "type=roster"], &["crsTaught==crs"], "assignGrade"),
        rule(&["position=faculty", "isChair=yes", "type=application"], &["uDept==oDept"], "checkStatus"),
        rule(&["position=staff", "type=application", "status=open"], &[], "setStatus"),
        rule(&["position=applicant", "type=application"], &[], "checkStatus"),
        rule(&["position=staff", "type=transcript"], &["uDept==oDept"], "readTranscript"),
        rule(&["position=student", "level=grad", "type=record", "location=campus"], &[], "readRecord"),
    ]
}

fn university_negative_rules() -> Vec<Rule> {
    vec![
        rule(&["position=student", "type=gradebook", "crs=!none"], &["crsTaken==crs"], "readScore"),
        rule(&["position=ta", "type=gradebook", "level=!undergrad"], &["crsTaught==crs"], "addScore"),
        rule(&["position=ta", "type=gradebook"], &["crsTaught==crs"], "readScore"),
        rule(&["position=faculty", "type=gradebook", "location=!remote"], &["crsTaught==crs"], "changeScore"),
        rule(&["position=faculty", "type=roster"], &["crsTaught==crs"], "assignGrade"),
        rule(&["position=faculty", "isChair=yes", "type=application"], &["uDept==oDept"], "checkStatus"),
        rule(&["position=staff", "type=application", "status=!closed"], &[], "setStatus"),
        rule(&["position=applicant", "type=application"], &[], "checkStatus"),
        rule(&["position=staff", "type=transcript"], &["uDept!=oDept"], "readTranscript"),
        rule(&["position=!applicant", "level=grad", "type=record", "location=campus"], &[], "readRecord"),
    ]
}

fn healthcare_schema() -> AttributeSchema {
    let wards = ["w1", "w2", "none"];
    let topics = ["cardio", "onco", "neuro", "none"];
    let teams = ["t1", "t2", "none"];
    let groups = ["g1", "g2", "none"];
    AttributeSchema::builder()
        .user("position", ["nurse", "doctor", "patient", "agent"])
        .user("uWard", wards)
        .user("specialty", topics)
        .user("uTeam", teams)
        .user("uGroup", groups)
        .object("type", ["hr", "item", "note"])
        .object("oWard", wards)
        .object("topic", topics)
        .object("oTeam", teams)
        .object("oGroup", groups)
        .object("sensitivity", ["normal", "high"])
        .session("shift", ["day", "night"])
        .session("device", ["desktop", "mobile"])
        .operations(["read", "addItem", "addNote", "readItem", "prescribe", "refer"])
        .build()
        .expect("valid builtin schema")
}

fn healthcare_rules() -> Vec<Rule> {
    vec![
        rule(&["position=nurse", "type=hr"], &["uWard==oWard"], "addItem"),
        rule(&["position=nurse", "type=item", "sensitivity=normal"], &["uWard==oWard"], "readItem"),
        rule(&["position=doctor", "type=hr"], &["uTeam==oTeam"], "addItem"),
        rule(&["position=doctor", "type=item"], &["specialty==topic"], "readItem"),
        rule(&["position=doctor", "type=note"], &["uTeam==oTeam"], "addNote"),
        rule(&["position=doctor", "type=hr", "shift=day"], &["uWard==oWard"], "prescribe"),
        rule(&["position=patient", "type=hr"], &["uGroup==oGroup"], "read"),
        rule(&["position=agent", "type=hr", "device=desktop"], &["uGroup==oGroup"], "read"),
        rule(&["position=doctor", "type=note", "topic=onco"], &[], "refer"),
    ]
}

fn healthcare_negative_rules() -> Vec<Rule> {
    vec![
        rule(&["position=nurse", "type=hr", "oWard=!none"], &["uWard==oWard"], "addItem"),
        rule(&["position=nurse", "type=item", "sensitivity=!high"], &["uWard==oWard"], "readItem"),
        rule(&["position=doctor", "type=hr"], &["uTeam==oTeam"], "addItem"),
        rule(&["position=doctor", "type=item", "topic=!none"], &["specialty==topic"], "readItem"),
        rule(&["position=doctor", "type=note"], &["uTeam==oTeam"], "addNote"),
        rule(&["position=doctor", "type=hr", "shift=!night"], &["uWard==oWard"], "prescribe"),
        rule(&["position=patient", "type=hr"], &["uGroup==oGroup"], "read"),
        rule(&["position=agent", "type=hr", "sensitivity=!high"], &["uGroup==oGroup"], "read"),
        rule(&["position=doctor", "type=note"], &["specialty!=topic"], "refer"),
    ]
}

fn project_schema() -> AttributeSchema {
    let depts = ["d1", "d2", "d3"];
    let projects = ["p1", "p2", "p3", "none"];
    let areas = ["design", "coding", "testing"];
    AttributeSchema::builder()
        .user("position", ["manager", "leader", "employee", "auditor", "accountant", "contractor"])
        .user("uDept", depts)
        .user("uProject", projects)
        .user("expertise", areas)
        .user("clearance", ["low", "high"])
        .user("isAdmin", ["yes", "no"])
        .object("type", ["budget", "schedule", "task", "report"])
        .object("oDept", depts)
        .object("oProject", projects)
        .object("area", areas)
        .object("confidential", ["yes", "no"])
        .object("phase", ["planning", "active", "closed", "archived"])
        .session("time", ["office", "after"])
        .session("network", ["internal", "vpn"])
        .operations(["read", "approve", "update", "assign", "audit"])
        .build()
        .expect("valid builtin schema")
}

fn project_rules() -> Vec<Rule> {
    vec![
        rule(&["position=manager", "type=budget"], &["uDept==oDept"], "approve"),
        rule(&["position=manager", "type=schedule"], &["uDept==oDept"], "read"),
        rule(&["position=leader", "type=schedule"], &["uProject==oProject"], "update"),
        rule(&["position=leader", "type=task"], &["uProject==oProject"], "assign"),
        rule(&["position=leader", "type=budget"], &["uProject==oProject"], "read"),
        rule(&["position=employee", "type=task"], &["uProject==oProject", "expertise==area"], "update"),
        rule(&["position=employee", "type=schedule"], &["uProject==oProject"], "read"),
        rule(&["position=auditor", "type=report"], &[], "audit"),
        rule(&["position=accountant", "type=budget", "phase=active"], &[], "update"),
        rule(&["position=contractor", "type=task", "confidential=no", "network=internal"], &[], "read"),
        rule(&["isAdmin=yes", "clearance=high", "type=report", "time=office"], &[], "read"),
    ]
}

fn project_negative_rules() -> Vec<Rule> {
    vec![
        rule(&["position=manager", "type=budget", "phase=!archived"], &["uDept==oDept"], "approve"),
        rule(&["position=manager", "type=schedule"], &["uDept==oDept"], "read"),
        rule(&["position=leader", "type=schedule", "phase=!closed"], &["uProject==oProject"], "update"),
        rule(&["position=leader", "type=task"], &["uProject==oProject"], "assign"),
        rule(&["position=leader", "type=budget", "confidential=!yes"], &["uProject==oProject"], "read"),
        rule(&["position=employee", "type=task"], &["uProject==oProject", "expertise==area"], "update"),
        rule(&["position=employee", "type=schedule", "oProject=!none"], &["uProject==oProject"], "read"),
        rule(&["position=auditor", "type=report"], &["uDept!=oDept"], "audit"),
        rule(&["position=accountant", "type=budget", "phase=active"], &[], "update"),
        rule(&["position=contractor", "type=task", "confidential=!yes", "network=!vpn"], &[], "read"),
        rule(&["isAdmin=yes", "clearance=high", "type=report", "time=office"], &[], "read"),
    ]
}

/// Names of the builtin policies, in the order [`builtin_policies`] returns them.
pub const BUILTIN_NAMES: [&str; 6] = [
    "university",
    "healthcare",
    "project-management",
    "university-negative",
    "healthcare-negative",
    "project-management-negative",
];

/// Builtin policy by name.
pub fn builtin(name: &str) -> Option<Policy> {
    let (schema, rules) = match name {
        "university" => (university_schema(), university_rules()),
        "healthcare" => (healthcare_schema(), healthcare_rules()),
        "project-management" => (project_schema(), project_rules()),
        "university-negative" => (university_schema(), university_negative_rules()),
        "healthcare-negative" => (healthcare_schema(), healthcare_negative_rules()),
        "project-management-negative" => (project_schema(), project_negative_rules()),
        _ => return None,
    };
    Some(Policy::new(schema, rules).expect("builtin rules validate"))
}

/// The six builtin policies: three positive-only ones and their variants
/// with negative filters and relations.
pub fn builtin_policies() -> Vec<(String, Policy)> {
    BUILTIN_NAMES
        .iter()
        .map(|n| (n.to_string(), builtin(n).expect("known name")))
        .collect()
}

/// Default universe for a builtin policy, sized to keep the complete log
/// well under a million tuples.
pub fn builtin_universe(name: &str, seed: u64) -> Option<UniverseSpec> {
    let policy = builtin(name)?;
    let entity_counts = if name.starts_with("university") {
        EntityCounts {
            users: 120,
            objects: 120,
            sessions: 3,
        }
    } else {
        EntityCounts {
            users: 100,
            objects: 100,
            sessions: 4,
        }
    };
    Some(UniverseSpec {
        schema: policy.schema().clone(),
        entity_counts,
        seed,
    })
}

/// Counts of a log's permitted and denied tuples, keyed `"L"`, `"L+"`, `"L-"`.
pub fn log_summary(log: &AccessLog) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("L", log.len()),
        ("L+", log.positive_count()),
        ("L-", log.negative_count()),
    ])
}

/// Decision of every tuple under `policy`, for self-consistency checks.
pub fn replay(policy: &Policy, log: &AccessLog) -> Result<Vec<Decision>> {
    let judged = policy.clone().with_entities(log.entities().clone());
    log.tuples().iter().map(|t| judged.decide(&t.request)).collect()
}
