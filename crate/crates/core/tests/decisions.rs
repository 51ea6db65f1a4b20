mod common;

use abac_miner::model::{policy_decision, rule_satisfied, Decision, Policy};
use common::{oracle_decision, oracle_satisfies, random_policy, random_world, rng, rule};

#[test]
fn random_policies_agree_with_the_brute_force_oracle() {
    let mut r = rng(11);
    for _ in 0..60 {
        let world = random_world(&mut r, 6, 4, 4);
        let policy = random_policy(&mut r, &world.schema, 4).with_entities(world.entities.clone());
        for q in &world.requests {
            let expected = oracle_decision(&world.schema, &world.entities, q, policy.rules());
            assert_eq!(policy.decide(q).unwrap(), expected, "request {q:?}");
            assert_eq!(policy_decision(&policy, q).unwrap(), expected);
            for rule in policy.rules() {
                assert_eq!(
                    rule_satisfied(q, rule, &policy).unwrap(),
                    oracle_satisfies(&world.schema, &world.entities, q, rule)
                );
            }
        }
    }
}

#[test]
fn empty_policy_denies_everything() {
    let mut r = rng(3);
    let world = random_world(&mut r, 4, 3, 3);
    let policy = Policy::empty(world.schema.clone()).with_entities(world.entities.clone());
    assert!(world
        .requests
        .iter()
        .all(|q| policy.decide(q).unwrap() == Decision::Deny));
}

#[test]
fn negated_operation_matches_every_other_operation() {
    let mut r = rng(5);
    let world = random_world(&mut r, 3, 2, 2);
    let policy = Policy::new(world.schema.clone(), vec![rule(&[], &[], "!read")])
        .unwrap()
        .with_entities(world.entities.clone());
    for q in &world.requests {
        let expected = if q.op == "read" { Decision::Deny } else { Decision::Permit };
        assert_eq!(policy.decide(q).unwrap(), expected);
    }
}

#[test]
fn policy_json_round_trip_preserves_decisions() {
    let mut r = rng(19);
    for _ in 0..20 {
        let world = random_world(&mut r, 6, 3, 3);
        let policy = random_policy(&mut r, &world.schema, 4);
        let back = Policy::from_json(&policy.to_json().unwrap()).unwrap();
        assert_eq!(back.rules(), policy.rules());
        assert_eq!(back.schema(), policy.schema());
        let a = policy.with_entities(world.entities.clone());
        let b = back.with_entities(world.entities.clone());
        for q in &world.requests {
            assert_eq!(a.decide(q).unwrap(), b.decide(q).unwrap());
        }
    }
}
