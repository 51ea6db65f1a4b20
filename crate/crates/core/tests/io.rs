mod common;

use abac_miner::io::{log_header, read_log, read_log_file, write_log, write_log_file};
use abac_miner::model::AttributeSchema;
use abac_miner::Error;
use common::{oracle_log, random_policy, random_world, rng};

fn read(text: &str, schema: Option<&AttributeSchema>) -> abac_miner::Result<abac_miner::model::AccessLog> {
    read_log(text.as_bytes(), "test.csv".as_ref(), schema)
}

fn csv_line(err: Error) -> (u64, String) {
    match err {
        Error::Csv { line, message, .. } => (line, message),
        other => panic!("expected a CSV error, got {other:?}"),
    }
}

#[test]
fn logs_round_trip_through_csv() {
    let mut r = rng(53);
    for _ in 0..10 {
        let world = random_world(&mut r, 6, 3, 4);
        let truth = random_policy(&mut r, &world.schema, 3);
        let log = oracle_log(&world, truth.rules());
        let mut buf = Vec::new();
        write_log(&log, &mut buf).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap(), Some(&world.schema)).unwrap();
        assert_eq!(back.tuples(), log.tuples());
        assert_eq!(back.schema(), log.schema());
        for e in log.entities().iter() {
            assert_eq!(back.entities().get(e.kind, &e.id), Some(e));
        }
    }
}

#[test]
fn inferred_schema_uses_observed_values() {
    let mut r = rng(59);
    let world = random_world(&mut r, 4, 3, 3);
    let log = oracle_log(&world, &[]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    write_log_file(&log, &path).unwrap();
    let back = read_log_file(&path, None).unwrap();
    let header = log_header(back.schema());
    assert_eq!(header, log_header(log.schema()));
    for a in back.schema().attrs() {
        let observed = back.schema().range(a).unwrap();
        assert!(observed.is_subset(log.schema().range(a).unwrap()));
    }
    assert_eq!(back.schema().operations(), log.schema().operations());
}

#[test]
fn malformed_rows_report_their_line() {
    let header = "uid,oid,sid,op,decision,u_role,o_type\n";
    let short = format!("{header}u1,o1,s1,read,permit,a,x\nu2,o1,s1,read\n");
    assert_eq!(csv_line(read(&short, None).unwrap_err()), (3, "expected 7 fields, found 4".into()));

    let bad_decision = format!("{header}u1,o1,s1,read,permit,a,x\nu2,o1,s1,read,maybe,a,x\n");
    assert_eq!(csv_line(read(&bad_decision, None).unwrap_err()).0, 3);

    let inconsistent = format!("{header}u1,o1,s1,read,permit,a,x\nu2,o1,s1,read,deny,b,x\nu1,o2,s1,read,deny,b,y\n");
    let (line, message) = csv_line(read(&inconsistent, None).unwrap_err());
    assert_eq!(line, 4);
    assert!(message.contains("line 2"), "{message}");

    let bad_header = "uid,oid,sid,decision,op,u_role\n";
    assert_eq!(csv_line(read(bad_header, None).unwrap_err()).0, 1);
    let unprefixed = "uid,oid,sid,op,decision,role\n";
    assert_eq!(csv_line(read(unprefixed, None).unwrap_err()).0, 1);
}

#[test]
fn schema_kinds_must_match_columns() {
    let schema = AttributeSchema::builder()
        .user("role", ["a"])
        .object("type", ["x"])
        .operations(["read"])
        .build()
        .unwrap();
    let swapped = "uid,oid,sid,op,decision,o_role,u_type\nu1,o1,s1,read,permit,a,x\n";
    assert!(matches!(read(swapped, Some(&schema)), Err(Error::SchemaMismatch(_))));
    let unknown_op = "uid,oid,sid,op,decision,u_role,o_type\nu1,o1,s1,write,permit,a,x\n";
    assert_eq!(csv_line(read(unknown_op, Some(&schema)).unwrap_err()).0, 2);
}
