//! Flat CSV interchange for logs and the CSV dumps produced while mining.
//!
//! A log file has the columns `uid,oid,sid,op,decision` followed by one
//! column per attribute, prefixed by the kind of entity it describes
//! (`u_dept`, `o_type`, `s_location`). Entities are denormalised: every row
//! repeats the attributes of its user, object and session, and rows that
//! disagree about an entity are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::mining::ClusterDiagnostics;
use crate::model::{
    AccessLog, AccessRequest, AttributeSchema, AuthorizationTuple, Decision, Entity, EntityId,
    EntityKind, EntityStore, UNK,
};
use crate::preprocess::{CategoricalRecord, Codebook};

const FIXED: [&str; 5] = ["uid", "oid", "sid", "op", "decision"];
const KINDS: [EntityKind; 3] = [EntityKind::User, EntityKind::Object, EntityKind::Session];

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => err.to_string(),
    };
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn line_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Attribute columns of a log file, in schema order.
pub fn log_header(schema: &AttributeSchema) -> Vec<String> {
    let mut out: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    for kind in KINDS {
        for a in schema.attrs_of(kind) {
            out.push(format!("{}_{a}", kind.prefix()));
        }
    }
    out
}

pub fn write_log<W: Write>(log: &AccessLog, out: W) -> Result<()> {
    let schema = log.schema();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(log_header(schema)).map_err(|e| Error::Io(e.into()))?;
    for t in log.tuples() {
        let q = &t.request;
        let mut row = vec![
            q.user.as_str().to_string(),
            q.object.as_str().to_string(),
            q.session.as_str().to_string(),
            q.op.clone(),
            t.decision.as_str().to_string(),
        ];
        for (kind, id) in [
            (EntityKind::User, &q.user),
            (EntityKind::Object, &q.object),
            (EntityKind::Session, &q.session),
        ] {
            let entity = log.entities().resolve(kind, id)?;
            for a in schema.attrs_of(kind) {
                row.push(entity.get(a).unwrap_or("").to_string());
            }
        }
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_log_file(log: &AccessLog, path: &Path) -> Result<()> {
    write_log(log, File::create(path)?)
}

struct Column {
    kind: EntityKind,
    attr: String,
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<Vec<Column>> {
    for (i, name) in FIXED.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(line_error(
                path,
                1,
                format!("column {} must be `{name}`", i + 1),
            ));
        }
    }
    header
        .iter()
        .skip(FIXED.len())
        .map(|name| {
            let kind = KINDS
                .into_iter()
                .find(|k| name.starts_with(&format!("{}_", k.prefix())))
                .ok_or_else(|| {
                    line_error(path, 1, format!("column `{name}` lacks a u_/o_/s_ prefix"))
                })?;
            Ok(Column {
                kind,
                attr: name[2..].to_string(),
            })
        })
        .collect()
}

fn infer_schema(
    path: &Path,
    columns: &[Column],
    rows: &[(u64, csv::StringRecord)],
) -> Result<AttributeSchema> {
    let mut ranges: Vec<BTreeSet<String>> = vec![BTreeSet::new(); columns.len()];
    let mut ops = BTreeSet::new();
    for (_, row) in rows {
        ops.insert(row[3].to_string());
        for (c, range) in ranges.iter_mut().enumerate() {
            let v = &row[FIXED.len() + c];
            if !v.is_empty() {
                range.insert(v.to_string());
            }
        }
    }
    if ops.is_empty() {
        return Err(line_error(path, 1, "no rows to infer a schema from"));
    }
    let mut b = AttributeSchema::builder();
    for (col, mut range) in columns.iter().zip(ranges) {
        if range.is_empty() {
            range.insert(UNK.to_string());
        }
        b = match col.kind {
            EntityKind::User => b.user(&col.attr, range),
            EntityKind::Object => b.object(&col.attr, range),
            EntityKind::Session => b.session(&col.attr, range),
        };
    }
    b.operations(ops).build()
}

/// Reads a log. Without a schema, one is inferred from the file: ranges are
/// the observed values and operations the observed operations. Empty cells
/// are kept as absent values (see [`crate::preprocess::impute_missing`]).
pub fn read_log<R: Read>(input: R, path: &Path, schema: Option<&AttributeSchema>) -> Result<AccessLog> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let columns = parse_header(path, &header)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    let schema = match schema {
        Some(s) => {
            for col in &columns {
                if s.kind_of(&col.attr) != Some(col.kind) {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}_{}` is not a {} attribute of the schema",
                        col.kind.prefix(),
                        col.attr,
                        col.kind.name()
                    )));
                }
            }
            s.clone()
        }
        None => infer_schema(path, &columns, &rows)?,
    };

    let mut entities = EntityStore::new();
    let mut seen: BTreeMap<(EntityKind, String), u64> = BTreeMap::new();
    let mut tuples = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        for (k, kind) in KINDS.into_iter().enumerate() {
            let id = &row[k];
            if id.is_empty() {
                return Err(line_error(path, *line, format!("empty {} id", kind.name())));
            }
            let attrs = columns
                .iter()
                .enumerate()
                .filter(|(i, c)| c.kind == kind && !row[FIXED.len() + i].is_empty())
                .map(|(i, c)| (c.attr.clone(), row[FIXED.len() + i].to_string()));
            let entity = Entity::new(id, kind, attrs);
            match seen.get(&(kind, id.to_string())) {
                Some(first) => {
                    if entities.get(kind, &EntityId::new(id)) != Some(&entity) {
                        return Err(line_error(
                            path,
                            *line,
                            format!("{} `{id}` has attributes differing from line {first}", kind.name()),
                        ));
                    }
                }
                None => {
                    seen.insert((kind, id.to_string()), *line);
                    entities.insert(entity);
                }
            }
        }
        let decision: Decision = row[4]
            .parse()
            .map_err(|e: Error| line_error(path, *line, e.to_string()))?;
        if !schema.has_operation(&row[3]) {
            return Err(line_error(path, *line, format!("unknown operation `{}`", &row[3])));
        }
        tuples.push(AuthorizationTuple::new(
            AccessRequest::new(&row[0], &row[1], &row[2], &row[3]),
            decision,
        ));
    }
    AccessLog::new(schema, entities, tuples)
}

pub fn read_log_file(path: &Path, schema: Option<&AttributeSchema>) -> Result<AccessLog> {
    read_log(File::open(path)?, path, schema)
}

fn write_rows<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| Error::Io(e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// `record,cluster` for every clustered record.
pub fn write_cluster_dump<W: Write>(model: &ClusterModel, out: W) -> Result<()> {
    write_rows(
        out,
        &["record".into(), "cluster".into()],
        model
            .assignments
            .iter()
            .enumerate()
            .map(|(i, c)| vec![i.to_string(), c.to_string()]),
    )
}

/// One row per cluster mode, decoded to attribute values.
pub fn write_modes<W: Write>(model: &ClusterModel, codebook: &Codebook, out: W) -> Result<()> {
    let mut header = vec!["cluster".to_string()];
    header.extend(codebook.features().iter().map(|f| f.name.clone()));
    write_rows(
        out,
        &header,
        model.modes.iter().enumerate().map(|(c, mode)| {
            let record = CategoricalRecord::new(mode.clone(), 1);
            let mut row = vec![c.to_string()];
            row.extend(codebook.decode(&record).into_iter().map(|(_, v)| v.to_string()));
            row
        }),
    )
}

/// `cluster,size,rule,deltas`; deltas are `tuple=delta` pairs joined by `;`.
pub fn write_diagnostics<W: Write>(diagnostics: &[ClusterDiagnostics], out: W) -> Result<()> {
    write_rows(
        out,
        &["cluster".into(), "size".into(), "rule".into(), "deltas".into()],
        diagnostics.iter().map(|d| {
            let deltas: Vec<String> = d.deltas.iter().map(|(t, v)| format!("{t}={v:.6}")).collect();
            vec![
                d.cluster.to_string(),
                d.size.to_string(),
                d.rule.to_string(),
                deltas.join(";"),
            ]
        }),
    )
}

/// Writes any table with a header row.
pub fn write_table<W: Write>(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>, out: W) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(out, &header, rows)
}
