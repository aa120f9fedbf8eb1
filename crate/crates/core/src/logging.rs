//! Session log in the comma-separated snapshot format: one row per
//! operation, holding the real model and the presented suggestions.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Association, AssociationKind, CandidateKind, CandidatePayload, DomainModel, ModelError,
};

pub const HEADER: &str = "timestamp, mode, operation, classes-real, class-reco, attrib-real, attrib-reco, assoc-real,assoc-reco";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.3f";
const COLUMNS: usize = 9;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing or unexpected header: {0:?}")]
    BadHeader(String),
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row} cannot be replayed: {message}")]
    Inconsistent { row: usize, message: String },
}

/// Attribute names (with types when known) of one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassAttributes {
    pub class: String,
    pub attributes: Vec<(String, Option<String>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub kind: AssociationKind,
    pub label: Option<String>,
}

impl Edge {
    fn of(a: &Association) -> Self {
        Edge {
            source: a.source.clone(),
            target: a.target.clone(),
            kind: a.kind,
            label: a.name.clone(),
        }
    }

    fn token(kind: AssociationKind) -> &'static str {
        match kind {
            AssociationKind::Association => "ass",
            AssociationKind::Aggregation => "agg",
            AssociationKind::Composition => "comp",
            AssociationKind::Inheritance => "inh",
        }
    }

    fn from_token(token: &str) -> Option<AssociationKind> {
        match token.to_ascii_lowercase().as_str() {
            "ass" | "association" => Some(AssociationKind::Association),
            "agg" | "aggregation" => Some(AssociationKind::Aggregation),
            "comp" | "composition" => Some(AssociationKind::Composition),
            "inh" | "inheritance" => Some(AssociationKind::Inheritance),
            _ => None,
        }
    }
}

/// A model element as it can be recovered from a log row. Edges are
/// identified by unordered endpoints and kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementId {
    Class(String),
    Attribute(String, String),
    Edge(String, String, AssociationKind),
}

impl ElementId {
    fn edge(a: &str, b: &str, kind: AssociationKind) -> Self {
        if a <= b {
            ElementId::Edge(a.to_string(), b.to_string(), kind)
        } else {
            ElementId::Edge(b.to_string(), a.to_string(), kind)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    pub timestamp: NaiveDateTime,
    pub mode: String,
    pub operation: String,
    pub classes_real: Vec<String>,
    pub class_reco: Vec<String>,
    pub attrib_real: Vec<ClassAttributes>,
    pub attrib_reco: Vec<ClassAttributes>,
    pub assoc_real: Vec<Edge>,
    pub assoc_reco: Vec<Edge>,
}

impl LogRecord {
    /// Row describing `model` after `operation`, with up to `limit`
    /// presented candidates of each kind.
    pub fn capture(
        timestamp: NaiveDateTime,
        mode: &str,
        operation: &str,
        model: &DomainModel,
        limit: usize,
    ) -> Self {
        let attrib_real = model
            .classes()
            .iter()
            .map(|c| ClassAttributes {
                class: c.name.clone(),
                attributes: c
                    .attributes
                    .iter()
                    .map(|a| (a.name.clone(), Some(a.type_name.clone())))
                    .collect(),
            })
            .collect();
        let store = model.candidates();
        let class_reco = store
            .list(CandidateKind::Class, limit)
            .into_iter()
            .filter_map(|c| match c.payload {
                CandidatePayload::Class(s) => Some(s.name),
                _ => None,
            })
            .collect();
        let mut attrib_reco: Vec<ClassAttributes> = Vec::new();
        for c in store.list(CandidateKind::Attribute, limit) {
            if let CandidatePayload::Attribute(a) = c.payload {
                let entry = (a.name, Some(a.type_name));
                match attrib_reco.iter_mut().find(|g| g.class == a.owner) {
                    Some(g) => g.attributes.push(entry),
                    None => attrib_reco.push(ClassAttributes {
                        class: a.owner,
                        attributes: vec![entry],
                    }),
                }
            }
        }
        let assoc_reco = store
            .list(CandidateKind::Association, limit)
            .into_iter()
            .filter_map(|c| match &c.payload {
                CandidatePayload::Association(a) => Some(Edge::of(a)),
                _ => None,
            })
            .collect();
        LogRecord {
            timestamp,
            mode: mode.to_string(),
            operation: operation.to_string(),
            classes_real: model.class_names().map(str::to_string).collect(),
            class_reco,
            attrib_real,
            attrib_reco,
            assoc_real: model.associations().iter().map(Edge::of).collect(),
            assoc_reco,
        }
    }

    fn elements(classes: &[String], attrs: &[ClassAttributes], edges: &[Edge]) -> BTreeSet<ElementId> {
        let mut out: BTreeSet<ElementId> = classes.iter().cloned().map(ElementId::Class).collect();
        for g in attrs {
            for (name, _) in &g.attributes {
                out.insert(ElementId::Attribute(g.class.clone(), name.clone()));
            }
        }
        for e in edges {
            out.insert(ElementId::edge(&e.source, &e.target, e.kind));
        }
        out
    }

    /// Elements of the real model at this row.
    pub fn real_elements(&self) -> BTreeSet<ElementId> {
        Self::elements(&self.classes_real, &self.attrib_real, &self.assoc_real)
    }

    /// Suggested elements shown at this row.
    pub fn reco_elements(&self) -> BTreeSet<ElementId> {
        Self::elements(&self.class_reco, &self.attrib_reco, &self.assoc_reco)
    }
}

fn quote(cell: &str) -> String {
    if cell.contains(',') || cell.contains('"') {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn names_cell(names: &[String]) -> String {
    names.join(", ")
}

fn attrs_cell(groups: &[ClassAttributes]) -> String {
    groups
        .iter()
        .map(|g| {
            let items: Vec<String> = g
                .attributes
                .iter()
                .map(|(n, t)| match t {
                    Some(t) => format!("{n}: {t}"),
                    None => n.clone(),
                })
                .collect();
            format!("{}:[{}]", g.class, items.join(", "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn edges_cell(edges: &[Edge]) -> String {
    edges
        .iter()
        .map(|e| {
            let mut s = format!("[{}-{}]=>{}", e.source, e.target, Edge::token(e.kind));
            if let Some(l) = &e.label {
                let _ = write!(s, ":{l}");
            }
            s
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn format_record(r: &LogRecord) -> String {
    let cells = [
        r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
        r.mode.clone(),
        r.operation.clone(),
        names_cell(&r.classes_real),
        names_cell(&r.class_reco),
        attrs_cell(&r.attrib_real),
        attrs_cell(&r.attrib_reco),
        edges_cell(&r.assoc_real),
        edges_cell(&r.assoc_reco),
    ];
    cells.iter().map(|c| quote(c)).collect::<Vec<_>>().join(", ")
}

/// Whole log text: header plus one line per record.
pub fn render_log(records: &[LogRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

/// Appends rows to a sink; the header is written on creation.
pub struct LogWriter<W: Write> {
    sink: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut sink: W) -> Result<Self, LogError> {
        writeln!(sink, "{HEADER}")?;
        Ok(LogWriter { sink })
    }

    pub fn write_record(&mut self, record: &LogRecord) -> Result<(), LogError> {
        writeln!(self.sink, "{}", format_record(record))?;
        self.sink.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Splits a row on commas outside double quotes, trimming each cell.
fn split_row(line: &str) -> Result<Vec<String>, String> {
    let mut cells = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| *c == ' ' || *c == '\t') {
            chars.next();
        }
        let mut cell = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            loop {
                match chars.next() {
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        cell.push('"');
                    }
                    Some('"') => break,
                    Some(c) => cell.push(c),
                    None => return Err("unterminated quoted cell".into()),
                }
            }
            while let Some(c) = chars.peek() {
                if *c == ',' {
                    break;
                }
                if !c.is_whitespace() {
                    return Err(format!("unexpected {c:?} after quoted cell"));
                }
                chars.next();
            }
        } else {
            while let Some(c) = chars.peek() {
                if *c == ',' {
                    break;
                }
                cell.push(*c);
                chars.next();
            }
        }
        cells.push(cell.trim().to_string());
        if chars.next().is_none() {
            break;
        }
    }
    Ok(cells)
}

fn attr_group_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(\p{Alphabetic}[\p{Alphabetic}\p{N}_ ]*?)\s*:?\s*\[([^\[\]]*)\]")
            .expect("valid regex")
    })
}

fn edge_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"\[\s*([^\[\]\-]+?)\s*-\s*([^\[\]\-]+?)\s*\]\s*=>\s*([A-Za-z]+)(?:\s*:\s*([\p{Alphabetic}]+))?",
        )
        .expect("valid regex")
    })
}

fn is_attr_shaped(cell: &str) -> bool {
    attr_group_regex()
        .find(cell)
        .is_some_and(|m| cell[..m.start()].trim().is_empty())
}

fn is_edge_shaped(cell: &str) -> bool {
    cell.starts_with('[') && cell.contains("=>")
}

/// Folds surplus cells left by unquoted list cells back into their columns.
fn fit_columns(mut cells: Vec<String>, row: usize) -> Result<Vec<String>, LogError> {
    let malformed = |message: String| LogError::MalformedRow { row, message };
    if cells.len() < COLUMNS {
        return Err(malformed(format!(
            "expected {COLUMNS} cells, found {}",
            cells.len()
        )));
    }
    // Runs of three or more attribute cells: merge the first two.
    while cells.len() > COLUMNS {
        let run = (3..cells.len().saturating_sub(2)).find(|&i| {
            is_attr_shaped(&cells[i]) && is_attr_shaped(&cells[i + 1]) && is_attr_shaped(&cells[i + 2])
        });
        let Some(i) = run else { break };
        let next = cells.remove(i + 1);
        cells[i] = format!("{}, {next}", cells[i]);
    }
    // Trailing edge cells belong to the last column.
    while cells.len() > COLUMNS {
        let n = cells.len();
        if !(is_edge_shaped(&cells[n - 1]) && is_edge_shaped(&cells[n - 2])) {
            break;
        }
        let last = cells.pop().expect("non-empty");
        cells[n - 2] = format!("{}, {last}", cells[n - 2]);
    }
    if cells.len() != COLUMNS {
        return Err(malformed(format!(
            "expected {COLUMNS} cells, found {}",
            cells.len()
        )));
    }
    Ok(cells)
}

fn parse_timestamp(cell: &str, row: usize) -> Result<NaiveDateTime, LogError> {
    NaiveDateTime::parse_from_str(cell, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(cell, "%Y-%m-%d %H:%M:%S"))
        .map_err(|e| LogError::MalformedRow {
            row,
            message: format!("bad timestamp {cell:?}: {e}"),
        })
}

fn parse_names(cell: &str) -> Vec<String> {
    cell.trim_matches(|c| c == '{' || c == '}')
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '{' || c == '}').trim())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_attrs(cell: &str) -> Vec<ClassAttributes> {
    let mut groups: Vec<ClassAttributes> = Vec::new();
    for cap in attr_group_regex().captures_iter(cell) {
        let class = cap[1].trim().to_string();
        let attributes: Vec<(String, Option<String>)> = cap[2]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| match item.split_once(':') {
                Some((n, t)) => (n.trim().to_string(), Some(t.trim().to_string())),
                None => (item.to_string(), None),
            })
            .collect();
        match groups.iter_mut().find(|g| g.class == class) {
            Some(g) => g.attributes.extend(attributes),
            None => groups.push(ClassAttributes { class, attributes }),
        }
    }
    groups
}

fn parse_edges(cell: &str, row: usize) -> Result<Vec<Edge>, LogError> {
    edge_regex()
        .captures_iter(cell)
        .map(|cap| {
            let kind = Edge::from_token(&cap[3]).ok_or_else(|| LogError::MalformedRow {
                row,
                message: format!("unknown edge kind {:?}", &cap[3]),
            })?;
            Ok(Edge {
                source: cap[1].to_string(),
                target: cap[2].to_string(),
                kind,
                label: cap.get(4).map(|m| m.as_str().to_string()),
            })
        })
        .collect()
}

/// Parses a log. Row numbers in errors are 1-based file lines.
pub fn read_log(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next().map(|(_, l)| l.trim_end_matches('\r')).unwrap_or("");
    let normalized: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let expected: Vec<String> = HEADER.split(',').map(|h| h.trim().to_string()).collect();
    if normalized != expected {
        return Err(LogError::BadHeader(header.to_string()));
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        let cells = split_row(line.trim_end_matches('\r'))
            .map_err(|message| LogError::MalformedRow { row, message })?;
        let c = fit_columns(cells, row)?;
        records.push(LogRecord {
            timestamp: parse_timestamp(&c[0], row)?,
            mode: c[1].clone(),
            operation: c[2].clone(),
            classes_real: parse_names(&c[3]),
            class_reco: parse_names(&c[4]),
            attrib_real: parse_attrs(&c[5]),
            attrib_reco: parse_attrs(&c[6]),
            assoc_real: parse_edges(&c[7], row)?,
            assoc_reco: parse_edges(&c[8], row)?,
        });
    }
    Ok(records)
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    read_log(&std::fs::read_to_string(path)?)
}

/// Descriptions of rows whose timestamp goes backwards.
pub fn timestamp_warnings(records: &[LogRecord]) -> Vec<String> {
    records
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].timestamp < w[0].timestamp)
        .map(|(i, w)| format!("row {} is earlier than row {}: {}", i + 2, i + 1, w[1].timestamp))
        .collect()
}

/// Builds the real model recorded in one row. Class names in edges and
/// attribute groups are matched case-insensitively when no exact match
/// exists.
pub fn snapshot_model(record: &LogRecord, package: &str, row: usize) -> Result<DomainModel, LogError> {
    let bad = |e: ModelError| LogError::Inconsistent {
        row,
        message: e.to_string(),
    };
    let mut model = DomainModel::new(package);
    for c in &record.classes_real {
        model.add_class(c).map_err(bad)?;
    }
    let resolve = |model: &DomainModel, name: &str| -> Option<String> {
        if model.has_class(name) {
            return Some(name.to_string());
        }
        model
            .class_names()
            .find(|c| c.eq_ignore_ascii_case(name))
            .map(str::to_string)
    };
    for g in &record.attrib_real {
        let class = match resolve(&model, &g.class) {
            Some(c) => c,
            None => {
                model.add_class(&g.class).map_err(bad)?;
                g.class.clone()
            }
        };
        for (name, ty) in &g.attributes {
            let ty = ty.as_deref().unwrap_or("String");
            model.add_attribute(&class, name, ty).map_err(bad)?;
        }
    }
    for e in &record.assoc_real {
        let (Some(s), Some(t)) = (resolve(&model, &e.source), resolve(&model, &e.target)) else {
            return Err(LogError::Inconsistent {
                row,
                message: format!("edge {}-{} names an unknown class", e.source, e.target),
            });
        };
        let mut assoc = Association::new(&s, &t, e.kind);
        assoc.name = e.label.clone();
        model.add_association(assoc).map_err(bad)?;
    }
    Ok(model)
}

/// Model state after every row, in order.
pub fn replay_states(records: &[LogRecord], package: &str) -> Result<Vec<DomainModel>, LogError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| snapshot_model(r, package, i + 2))
        .collect()
}

/// Final model of a log; empty when the log has no rows.
pub fn replay(records: &[LogRecord], package: &str) -> Result<DomainModel, LogError> {
    Ok(replay_states(records, package)?
        .pop()
        .unwrap_or_else(|| DomainModel::new(package)))
}
