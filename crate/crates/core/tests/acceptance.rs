//! One pass/fail line per acceptance criterion. Lines go straight to stdout
//! so they show up without `--nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use abac_miner::cluster::{kmodes_fit, KModesConfig};
use abac_miner::enhance::{enhance, prune_rules, refine_policy, RefinementConfig};
use abac_miner::metrics::{evaluate, most_complex_policy, WscWeights};
use abac_miner::mining::{extract_policy, KChoice, KCriterion, MiningConfig, Thresholds};
use abac_miner::model::{
    AccessLog, AccessRequest, AttributeSchema, Decision, Entity, EntityKind, EntityStore, Policy, Rule,
};
use abac_miner::pipeline::{self, ExperimentConfig, Timings, TuningConfig};
use abac_miner::preprocess::{CategoricalRecord, EncodedLog};
use abac_miner::synth::{self, builtin, builtin_universe, EntityCounts, UniverseSpec};
use common::{oracle_decision, oracle_log, random_policy, random_rule, random_world, reference_metrics, rng, rule, World};
use rand::Rng;

fn report(n: u32, name: &str, pass: bool, detail: String, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "acceptance criterion {n:>2} [{verdict}] {name}: {detail} ({:.1}s)\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

/// Mining setup shared by the recovery scenarios: tuned thresholds and the
/// in-sample quality criterion over the given k range.
fn experiment(seed: u64, k_max: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(None, seed);
    c.mining.k = KChoice::Auto { k_min: 2, k_max };
    c.mining.criterion = KCriterion::Quality { folds: 0 };
    c.tuning = Some(TuningConfig::default());
    c
}

fn mine(log: &AccessLog, config: &ExperimentConfig) -> Vec<Rule> {
    let encoded = EncodedLog::from_log(log).unwrap();
    pipeline::mine_log(&encoded, log.schema(), config, &mut Timings::default())
        .unwrap()
        .rules
}

/// Four rules over disjoint attribute pairs, 100 users, 100 objects.
fn four_rule_scenario() -> (Policy, AccessLog) {
    let mut b = AttributeSchema::builder();
    for i in 0..4 {
        let u = format!("ua{i}");
        let o = format!("oa{i}");
        b = b
            .user(&u, (0..3).map(|v| format!("{u}v{v}")))
            .object(&o, (0..3).map(|v| format!("{o}v{v}")));
    }
    let schema = b.operations(["op0", "op1"]).build().unwrap();
    let rules = vec![
        rule(&["ua0=ua0v0", "oa0=oa0v1"], &[], "op0"),
        rule(&["ua1=ua1v1", "oa1=oa1v0"], &[], "op1"),
        rule(&["ua2=ua2v2", "oa2=oa2v2"], &[], "op0"),
        rule(&["ua3=ua3v0", "oa3=oa3v1"], &[], "op1"),
    ];
    let policy = Policy::new(schema.clone(), rules).unwrap();
    let universe = UniverseSpec {
        schema,
        entity_counts: EntityCounts {
            users: 100,
            objects: 100,
            sessions: 1,
        },
        seed: 1,
    };
    let log = synth::generate_complete_log(&universe, &policy, 100_000).unwrap();
    (policy, log)
}

const SCENARIO_SEED: u64 = 7;

#[test]
fn criterion_01_decision_oracle() {
    let start = Instant::now();
    let mut r = rng(101);
    let (mut pairs, mut agree) = (0, 0);
    while pairs < 1000 {
        let world = random_world(&mut r, 6, 3, 3);
        let policy = random_policy(&mut r, &world.schema, 4).with_entities(world.entities.clone());
        for _ in 0..10 {
            let q = &world.requests[r.gen_range(0..world.requests.len())];
            let want = oracle_decision(&world.schema, &world.entities, q, policy.rules());
            agree += (abac_miner::model::policy_decision(&policy, q).unwrap() == want) as usize;
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "decision engine vs brute-force oracle",
        agree == pairs && elapsed < Duration::from_secs(10),
        format!("{agree}/{pairs} agree, tolerance exact, limit 10s"),
        elapsed,
    );
}

#[test]
fn criterion_02_metrics_oracle() {
    let start = Instant::now();
    let mut r = rng(202);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 100 {
        let (users, objects) = (r.gen_range(3..8), r.gen_range(3..8));
        let world = random_world(&mut r, 6, users, objects);
        let truth = random_policy(&mut r, &world.schema, 3);
        let mut log = oracle_log(&world, truth.rules());
        if log.len() > 1000 {
            log = log.with_tuples(log.tuples()[..1000].to_vec());
        }
        if log.positive_count() == 0 {
            continue;
        }
        let candidate = random_policy(&mut r, &world.schema, 4);
        let got = evaluate(&candidate, &log, &WscWeights::default()).unwrap();
        let want = reference_metrics(&log, candidate.rules());
        for (g, w) in [
            (got.rates.tp, want.tp),
            (got.rates.fp, want.fp),
            (got.rates.tn, want.tn),
            (got.rates.fn_, want.fn_),
            (got.accuracy, want.accuracy),
            (got.f_score, want.f_score),
            (got.wsc, want.wsc),
            (got.quality, want.quality),
        ] {
            worst = worst.max((g - w).abs());
        }
        cases += 1;
    }
    let elapsed = start.elapsed();
    report(
        2,
        "metrics vs straight-line reference",
        worst <= 1e-12 && elapsed < Duration::from_secs(30),
        format!("max |error| {worst:.1e} over {cases} cases, tolerance 1e-12, limit 30s"),
        elapsed,
    );
}

#[test]
fn criterion_03_exact_recovery() {
    let start = Instant::now();
    let (truth, log) = four_rule_scenario();
    let mined = mine(&log, &experiment(SCENARIO_SEED, 8));
    let m = reference_metrics(&log, &mined);
    let truth_wsc = reference_metrics(&log, truth.rules()).wsc;
    let elapsed = start.elapsed();
    report(
        3,
        "exact recovery of a 4-rule policy",
        m.f_score == 1.0 && m.wsc <= 2.0 * truth_wsc && elapsed < Duration::from_secs(300),
        format!(
            "F = {:.4} (need 1.0), WSC = {} (need <= {}), |L| = {}, limit 300s",
            m.f_score,
            m.wsc,
            2.0 * truth_wsc,
            log.len()
        ),
        elapsed,
    );
}

#[test]
fn criterion_04_university_analogue() {
    let start = Instant::now();
    let policy = builtin("university").unwrap();
    let universe = builtin_universe("university", 1).unwrap();
    let log = synth::generate_complete_log(&universe, &policy, 1_000_000).unwrap();
    let mined = mine(&log, &experiment(SCENARIO_SEED, 12));
    let m = reference_metrics(&log, &mined);
    let elapsed = start.elapsed();
    report(
        4,
        "university analogue",
        m.f_score >= 0.75 && m.quality >= 0.80 && elapsed < Duration::from_secs(1800),
        format!(
            "F = {:.4} (need >= 0.75), Q = {:.4} (need >= 0.80), {} rules, |L| = {}, limit 1800s",
            m.f_score,
            m.quality,
            mined.len(),
            log.len()
        ),
        elapsed,
    );
}

#[test]
fn criterion_05_sparse_log() {
    let start = Instant::now();
    let (_, complete) = four_rule_scenario();
    let sparse = synth::sparsify(&complete, 0.1, 3).unwrap();
    let mined = mine(&sparse, &experiment(SCENARIO_SEED, 8));
    let f = reference_metrics(&complete, &mined).f_score;
    report(
        5,
        "10% stratified partial log",
        f >= 0.9,
        format!("F on the complete log = {f:.4} (need >= 0.9), |partial| = {}", sparse.len()),
        start.elapsed(),
    );
}

#[test]
fn criterion_06_noisy_log() {
    let start = Instant::now();
    let (_, complete) = four_rule_scenario();
    let (noisy, flipped) = synth::add_noise(&complete, 0.1, 5).unwrap();
    let mined = mine(&noisy, &experiment(SCENARIO_SEED, 8));
    let f = reference_metrics(&complete, &mined).f_score;
    report(
        6,
        "10% decision-flip noise",
        f >= 0.8,
        format!("F on the clean log = {f:.4} (need >= 0.8), {} flips", flipped.len()),
        start.elapsed(),
    );
}

/// Staff may read anything that is not top-secret; managers may write
/// confidential documents.
fn clearance_world() -> (World, Vec<Rule>) {
    let labels = ["public", "internal", "confidential", "top-secret"];
    let schema = AttributeSchema::builder()
        .user("role", ["staff", "manager", "guest"])
        .user("site", ["north", "south"])
        .object("label", labels)
        .object("format", ["pdf", "sheet"])
        .operations(["read", "write"])
        .build()
        .unwrap();
    let mut entities = EntityStore::new();
    let mut users = Vec::new();
    let mut objects = Vec::new();
    for (i, role) in ["staff", "manager", "guest"].iter().enumerate() {
        for (j, site) in ["north", "south"].iter().enumerate() {
            for k in 0..4 {
                let id = format!("u{i}{j}{k}");
                entities.insert(Entity::new(id.as_str(), EntityKind::User, [("role", *role), ("site", *site)]));
                users.push(id);
            }
        }
    }
    for (i, label) in labels.iter().enumerate() {
        for (j, format) in ["pdf", "sheet"].iter().enumerate() {
            for k in 0..3 {
                let id = format!("o{i}{j}{k}");
                entities.insert(Entity::new(id.as_str(), EntityKind::Object, [("label", *label), ("format", *format)]));
                objects.push(id);
            }
        }
    }
    entities.insert(Entity::new("-", EntityKind::Session, Vec::<(String, String)>::new()));
    let mut requests = Vec::new();
    for u in &users {
        for o in &objects {
            for op in ["read", "write"] {
                requests.push(AccessRequest::new(u.as_str(), o.as_str(), "-", op));
            }
        }
    }
    let truth = vec![
        rule(&["role=staff", "label=!top-secret"], &[], "read"),
        rule(&["role=manager", "label=confidential"], &[], "write"),
    ];
    (
        World {
            schema,
            entities,
            requests,
        },
        truth,
    )
}

#[test]
fn criterion_07_negative_filter() {
    let start = Instant::now();
    let (world, truth) = clearance_world();
    let log = oracle_log(&world, &truth);
    let mined = mine(&log, &experiment(SCENARIO_SEED, 6));
    let has_negative = mined.iter().any(|r| {
        r.filter
            .iter()
            .any(|t| t.attr == "label" && t.value == "top-secret" && !t.polarity.is_positive())
    });
    let mismatches = world
        .requests
        .iter()
        .filter(|q| {
            oracle_decision(&world.schema, &world.entities, q, &mined)
                != oracle_decision(&world.schema, &world.entities, q, &truth)
        })
        .count();
    let rendered: Vec<String> = mined.iter().map(|r| r.to_string()).collect();
    report(
        7,
        "negative filter extraction",
        has_negative && mismatches == 0,
        format!(
            "<label,!top-secret> present: {has_negative}, {mismatches} decision mismatches (need 0); mined {}",
            rendered.join(" | ")
        ),
        start.elapsed(),
    );
}

fn gradebook_world() -> (World, Vec<Rule>) {
    let schema = AttributeSchema::builder()
        .user("position", ["faculty", "student"])
        .user("uDept", ["EE", "CS"])
        .object("type", ["gradebook", "transcript"])
        .object("oDept", ["EE", "CS"])
        .operations(["setScore", "read"])
        .build()
        .unwrap();
    let mut entities = EntityStore::new();
    let mut users = Vec::new();
    let mut objects = Vec::new();
    for p in ["faculty", "student"] {
        for d in ["EE", "CS"] {
            for i in 0..3 {
                let id = format!("u-{p}-{d}-{i}");
                entities.insert(Entity::new(id.as_str(), EntityKind::User, [("position", p), ("uDept", d)]));
                users.push(id);
            }
        }
    }
    for t in ["gradebook", "transcript"] {
        for d in ["EE", "CS"] {
            for i in 0..2 {
                let id = format!("o-{t}-{d}-{i}");
                entities.insert(Entity::new(id.as_str(), EntityKind::Object, [("type", t), ("oDept", d)]));
                objects.push(id);
            }
        }
    }
    entities.insert(Entity::new("-", EntityKind::Session, Vec::<(String, String)>::new()));
    let mut requests = Vec::new();
    for u in &users {
        for o in &objects {
            for op in ["setScore", "read"] {
                requests.push(AccessRequest::new(u.as_str(), o.as_str(), "-", op));
            }
        }
    }
    let truth = vec![
        rule(&["position=faculty", "type=gradebook"], &[], "setScore"),
        rule(&["position=student"], &["uDept==oDept"], "read"),
    ];
    (
        World {
            schema,
            entities,
            requests,
        },
        truth,
    )
}

#[test]
fn criterion_08_enhancement_properties() {
    let start = Instant::now();
    let mut r = rng(808);
    let config = RefinementConfig::default();
    let mining = MiningConfig {
        k: KChoice::Auto { k_min: 2, k_max: 5 },
        thresholds: Thresholds::uniform(0.1),
        ..MiningConfig::default()
    };
    let (mut fixtures, mut prune_ok, mut enhance_ok) = (0, 0, 0);
    while fixtures < 50 {
        let world = random_world(&mut r, 5, 6, 6);
        let truth = random_policy(&mut r, &world.schema, 3);
        let log = oracle_log(&world, truth.rules());
        if log.positive_count() < 4 || log.negative_count() == 0 {
            continue;
        }
        let mut mined = match extract_policy(&log, &mining) {
            Ok(p) => p,
            Err(_) => continue,
        };
        // Perturb so that pruning and refinement have work to do.
        let extra = random_rule(&mut r, &world.schema);
        mined.push(extra).unwrap();
        let q0 = reference_metrics(&log, mined.rules()).quality;
        let pruned = prune_rules(&mined, &log, &config).unwrap();
        prune_ok += (reference_metrics(&log, pruned.rules()).quality >= q0) as usize;
        let (enhanced, _) = enhance(&mined, &log, &config).unwrap();
        enhance_ok += (reference_metrics(&log, enhanced.rules()).quality >= q0) as usize;
        fixtures += 1;
    }

    let (world, truth) = gradebook_world();
    let log = oracle_log(&world, &truth);
    let repaired = |start: Vec<Rule>| {
        let policy = Policy::new(world.schema.clone(), start).unwrap();
        let out = refine_policy(&policy, &log, &config).unwrap();
        world
            .requests
            .iter()
            .filter(|q| {
                oracle_decision(&world.schema, &world.entities, q, out.rules())
                    != oracle_decision(&world.schema, &world.entities, q, &truth)
            })
            .count()
    };
    let restricted = repaired(vec![
        rule(&["position=faculty", "uDept=EE", "type=gradebook"], &[], "setScore"),
        truth[1].clone(),
    ]);
    let relaxed = repaired(vec![rule(&["position=faculty"], &[], "setScore"), truth[1].clone()]);
    report(
        8,
        "enhancement properties",
        prune_ok == fixtures && enhance_ok == fixtures && restricted == 0 && relaxed == 0,
        format!(
            "prune Q kept {prune_ok}/{fixtures}, enhance Q kept {enhance_ok}/{fixtures}, \
             restricted-rule mismatches {restricted}, relaxed-rule mismatches {relaxed} (exact)"
        ),
        start.elapsed(),
    );
}

#[test]
fn criterion_09_clustering_properties() {
    let start = Instant::now();
    let mut r = rng(909);
    let (mut monotone, mut dominance, mut identical) = (0, 0, 0);
    for _ in 0..100 {
        let m = r.gen_range(2..7);
        let n = r.gen_range(5..60);
        let records: Vec<CategoricalRecord> = (0..n)
            .map(|_| CategoricalRecord::new((0..m).map(|_| r.gen_range(0..4)).collect(), r.gen_range(1..4)))
            .collect();
        let mut distinct: Vec<&Vec<u32>> = records.iter().map(|x| &x.values).collect();
        distinct.sort();
        distinct.dedup();
        let k = r.gen_range(1..=distinct.len().min(6));
        let seed = r.gen();
        let config = KModesConfig {
            max_iter: 100,
            n_restarts: 5,
            seed,
        };
        let a = kmodes_fit(&records, k, &config).unwrap();
        let b = kmodes_fit(&records, k, &config).unwrap();
        let single = kmodes_fit(&records, k, &KModesConfig { n_restarts: 1, ..config }).unwrap();
        monotone += a.cost_history.windows(2).all(|w| w[1] <= w[0]) as usize;
        dominance += (a.cost <= single.cost && Some(&a.cost) == a.restart_costs.iter().min()) as usize;
        identical += (a == b) as usize;
    }
    report(
        9,
        "k-modes properties",
        monotone == 100 && dominance == 100 && identical == 100,
        format!("non-increasing cost {monotone}/100, restart dominance {dominance}/100, identical reruns {identical}/100 (exact)"),
        start.elapsed(),
    );
}

#[test]
fn criterion_10_threshold_tuning() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut all_in = true;
    for name in ["university", "healthcare", "project-management"] {
        let policy = builtin(name).unwrap();
        let universe = builtin_universe(name, 1).unwrap();
        let log = synth::generate_complete_log(&universe, &policy, 1_000_000).unwrap();
        let config = experiment(SCENARIO_SEED, 12);
        let t = pipeline::tune(&log, &config).unwrap().thresholds;
        let values = [t.t_pos, t.t_neg, t.theta_pos, t.theta_neg];
        all_in &= values.iter().all(|v| (0.15..=0.35).contains(v));
        lines.push(format!("{name} {values:?}"));
    }
    report(
        10,
        "tuned thresholds in [0.15, 0.35]",
        all_in,
        format!("(t+, t-, theta+, theta-): {}", lines.join("; ")),
        start.elapsed(),
    );
}

#[test]
fn criterion_11_metric_endpoints() {
    let start = Instant::now();
    let weights = WscWeights::default();
    let mut worst_mcp: f64 = 0.0;
    let mut empty_q = Vec::new();
    let mut logs = Vec::new();
    for name in ["university", "healthcare", "project-management"] {
        let policy = builtin(name).unwrap();
        let universe = UniverseSpec {
            entity_counts: EntityCounts {
                users: 30,
                objects: 30,
                sessions: 2,
            },
            ..builtin_universe(name, 2).unwrap()
        };
        logs.push(synth::generate_complete_log(&universe, &policy, 1_000_000).unwrap());
    }
    logs.push(four_rule_scenario().1);
    for log in &logs {
        let mcp = most_complex_policy(log).unwrap();
        worst_mcp = worst_mcp.max(evaluate(&mcp, log, &weights).unwrap().quality);
        let empty = Policy::empty(log.schema().clone());
        empty_q.push(evaluate(&empty, log, &weights).unwrap().quality);
    }
    let denies = logs.iter().all(|l| l.tuples().iter().any(|t| t.decision == Decision::Deny));
    report(
        11,
        "metric endpoints",
        worst_mcp < 0.05 && empty_q.iter().all(|&q| q == 0.0) && denies,
        format!(
            "max Q(most complex) = {worst_mcp:.5} (need < 0.05), Q(empty) = {empty_q:?} (need exactly 0) over {} logs",
            logs.len()
        ),
        start.elapsed(),
    );
}
