//! Textual class-diagram format (`.dm`) and the JSON interchange form.
//!
//! ```text
//! package HospitalSystem
//! class Hospital {
//!   name: String
//!   numRooms: int
//! }
//! class Staff {}
//! Hospital o-- Staff          # aggregation
//! Doctor -|> Staff            # inheritance, Doctor is the subclass
//! Patient --> Appointment : books
//! ```
//!
//! Association arrows: `-->` association, `o--` aggregation, `*--`
//! composition, `-|>` inheritance. `#` starts a comment. Classes must be
//! declared before an association line mentions them.

use std::fmt;

use thiserror::Error;

use crate::model::{is_identifier, Association, AssociationKind, DomainModel, ModelError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub token: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.token.is_empty() {
            write!(f, " (at `{}`)", self.token)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("syntax error at {0}")]
    Parse(ParseError),
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("invalid interchange document: {0}")]
    Interchange(String),
}

impl TextError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TextError::Parse(p) => Some(p.line),
            TextError::Semantic { line, .. } => Some(*line),
            TextError::Interchange(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    Colon,
    Arrow(AssociationKind),
    Other(String),
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Word(w) | Tok::Other(w) => w.clone(),
            Tok::LBrace => "{".into(),
            Tok::RBrace => "}".into(),
            Tok::Colon => ":".into(),
            Tok::Arrow(k) => arrow(*k).into(),
        }
    }
}

fn arrow(kind: AssociationKind) -> &'static str {
    match kind {
        AssociationKind::Association => "-->",
        AssociationKind::Aggregation => "o--",
        AssociationKind::Composition => "*--",
        AssociationKind::Inheritance => "-|>",
    }
}

/// Splits one comment-free line into tokens with 1-based columns.
fn tokenize(line: &str) -> Vec<(usize, Tok)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let starts_with = |i: usize, pat: &str| {
        let p: Vec<char> = pat.chars().collect();
        chars.len() >= i + p.len() && chars[i..i + p.len()] == p[..]
    };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let arrows = [
            ("-->", AssociationKind::Association),
            ("o--", AssociationKind::Aggregation),
            ("*--", AssociationKind::Composition),
            ("-|>", AssociationKind::Inheritance),
        ];
        // Arrows are only recognized at a token boundary, so `o--` never
        // splits a word ending in `o`.
        if let Some((pat, kind)) = arrows.iter().find(|(p, _)| starts_with(i, p)) {
            out.push((col, Tok::Arrow(*kind)));
            i += pat.chars().count();
            continue;
        }
        match c {
            '{' => {
                out.push((col, Tok::LBrace));
                i += 1;
            }
            '}' => {
                out.push((col, Tok::RBrace));
                i += 1;
            }
            ':' => {
                out.push((col, Tok::Colon));
                i += 1;
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((col, Tok::Word(chars[start..i].iter().collect())));
            }
            _ => {
                let start = i;
                while i < chars.len()
                    && !chars[i].is_whitespace()
                    && !chars[i].is_alphanumeric()
                    && !matches!(chars[i], '{' | '}' | ':')
                    && !arrows.iter().any(|(p, _)| starts_with(i, p))
                {
                    i += 1;
                }
                if i == start {
                    i += 1;
                }
                out.push((col, Tok::Other(chars[start..i].iter().collect())));
            }
        }
    }
    out
}

fn is_type_token(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic())
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

struct LineCtx<'a> {
    line_no: usize,
    toks: &'a [(usize, Tok)],
    line_len: usize,
}

impl LineCtx<'_> {
    fn err(&self, idx: usize, message: &str) -> TextError {
        let (column, token) = match self.toks.get(idx) {
            Some((col, tok)) => (*col, tok.text()),
            None => (self.line_len + 1, String::new()),
        };
        TextError::Parse(ParseError {
            line: self.line_no,
            column,
            message: message.to_string(),
            token,
        })
    }

    fn ident(&self, idx: usize, what: &str) -> Result<String, TextError> {
        match self.toks.get(idx) {
            Some((_, Tok::Word(w))) if is_identifier(w) => Ok(w.clone()),
            _ => Err(self.err(idx, &format!("expected {what}"))),
        }
    }

    fn expect_end(&self, idx: usize) -> Result<(), TextError> {
        if idx < self.toks.len() {
            Err(self.err(idx, "unexpected token"))
        } else {
            Ok(())
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses `.dm` text into a model. Reports the first error.
pub fn parse_model(source: &str) -> Result<DomainModel, TextError> {
    let mut model: Option<DomainModel> = None;
    // Class currently open with `{`, and the line it was opened on.
    let mut open: Option<(String, usize)> = None;
    let mut last_line = 0;

    for (idx, raw) in source.split('\n').enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let body = strip_comment(raw);
        let toks = tokenize(body);
        if toks.is_empty() {
            continue;
        }
        let ctx = LineCtx {
            line_no,
            toks: &toks,
            line_len: body.chars().count(),
        };
        let semantic = |source: ModelError| TextError::Semantic {
            line: line_no,
            source,
        };

        let Some(m) = model.as_mut() else {
            match &toks[0].1 {
                Tok::Word(w) if w == "package" => {
                    let name = ctx.ident(1, "package name")?;
                    ctx.expect_end(2)?;
                    model = Some(DomainModel::new(&name));
                    continue;
                }
                _ => return Err(ctx.err(0, "expected `package <Name>`")),
            }
        };

        if let Some((class, _)) = &open {
            match &toks[0].1 {
                Tok::RBrace => {
                    ctx.expect_end(1)?;
                    open = None;
                }
                Tok::Word(_) => {
                    let name = ctx.ident(0, "attribute name")?;
                    if !matches!(toks.get(1), Some((_, Tok::Colon))) {
                        return Err(ctx.err(1, "expected `:`"));
                    }
                    let type_name = match toks.get(2) {
                        Some((_, Tok::Word(t))) if is_type_token(t) => t.clone(),
                        _ => return Err(ctx.err(2, "expected attribute type")),
                    };
                    ctx.expect_end(3)?;
                    m.add_attribute(class, &name, &type_name)
                        .map_err(semantic)?;
                }
                _ => return Err(ctx.err(0, "expected attribute or `}`")),
            }
            continue;
        }

        match &toks[0].1 {
            Tok::Word(w) if w == "package" => {
                return Err(ctx.err(0, "duplicate package declaration"));
            }
            Tok::Word(w) if w == "class" && !matches!(toks.get(1), Some((_, Tok::Arrow(_)))) => {
                let name = ctx.ident(1, "class name")?;
                if !matches!(toks.get(2), Some((_, Tok::LBrace))) {
                    return Err(ctx.err(2, "expected `{`"));
                }
                m.add_class(&name).map_err(semantic)?;
                match toks.get(3) {
                    None => open = Some((name, line_no)),
                    Some((_, Tok::RBrace)) => ctx.expect_end(4)?,
                    Some(_) => return Err(ctx.err(3, "expected end of line or `}`")),
                }
            }
            Tok::Word(_) => {
                let source_name = ctx.ident(0, "class name")?;
                let kind = match toks.get(1) {
                    Some((_, Tok::Arrow(k))) => *k,
                    _ => return Err(ctx.err(1, "expected association arrow")),
                };
                let target = ctx.ident(2, "class name")?;
                let mut assoc = Association::new(&source_name, &target, kind);
                match toks.get(3) {
                    None => {}
                    Some((_, Tok::Colon)) if kind != AssociationKind::Inheritance => {
                        let label = ctx.ident(4, "association label")?;
                        ctx.expect_end(5)?;
                        assoc.name = Some(label);
                    }
                    Some(_) => return Err(ctx.err(3, "unexpected token")),
                }
                m.add_association(assoc).map_err(semantic)?;
            }
            _ => return Err(ctx.err(0, "expected `class` or an association")),
        }
    }

    if let Some((class, line)) = open {
        return Err(TextError::Parse(ParseError {
            line: last_line.max(line),
            column: 1,
            message: format!("class `{class}` is missing its closing `}}`"),
            token: String::new(),
        }));
    }
    model.ok_or_else(|| {
        TextError::Parse(ParseError {
            line: last_line.max(1),
            column: 1,
            message: "missing `package <Name>` declaration".into(),
            token: String::new(),
        })
    })
}

/// Canonical text: package line, classes, then associations, all in
/// insertion order, LF line endings, two-space indent inside classes.
pub fn serialize_model(model: &DomainModel) -> String {
    let mut out = format!("package {}\n", model.package_name());
    for class in model.classes() {
        if class.attributes.is_empty() {
            out.push_str(&format!("class {} {{}}\n", class.name));
            continue;
        }
        out.push_str(&format!("class {} {{\n", class.name));
        for a in &class.attributes {
            out.push_str(&format!("  {}: {}\n", a.name, a.type_name));
        }
        out.push_str("}\n");
    }
    for a in model.associations() {
        out.push_str(&association_line(a));
        out.push('\n');
    }
    out
}

/// One association in the text notation, e.g. `Doctor -|> Staff`.
pub fn association_line(a: &Association) -> String {
    let mut out = format!("{} {} {}", a.source, arrow(a.kind), a.target);
    if let (Some(label), false) = (&a.name, a.kind == AssociationKind::Inheritance) {
        out.push_str(&format!(" : {label}"));
    }
    out
}

/// Serializes the model (including candidates) as interchange JSON.
pub fn to_interchange(model: &DomainModel) -> serde_json::Value {
    serde_json::to_value(model).expect("model serializes")
}

/// Reads interchange JSON, rebuilding the model through the checked
/// mutators so that every invariant holds.
pub fn from_interchange(value: &serde_json::Value) -> Result<DomainModel, TextError> {
    let raw: DomainModel = serde_json::from_value(value.clone())
        .map_err(|e| TextError::Interchange(e.to_string()))?;
    let mut model = DomainModel::new(raw.package_name());
    let bad = |e: ModelError| TextError::Interchange(e.to_string());
    for c in raw.classes() {
        model.add_class(&c.name).map_err(bad)?;
        for a in &c.attributes {
            model.add_attribute(&c.name, &a.name, &a.type_name).map_err(bad)?;
        }
    }
    for a in raw.associations() {
        model.add_association(a.clone()).map_err(bad)?;
    }
    raw.check_invariants().map_err(TextError::Interchange)?;
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
package Hospital
# running example
class Hospital {
  name: String
  numRooms: int
}
class Staff {
  name: String
}
class Doctor {
  speciality: String
  qualification: String
}
Hospital o-- Staff
Doctor -|> Staff
";

    #[test]
    fn parses_running_example() {
        let m = parse_model(FIXTURE).unwrap();
        let names: Vec<_> = m.class_names().collect();
        assert_eq!(names, ["Hospital", "Staff", "Doctor"]);
        let h = m.class("Hospital").unwrap();
        assert_eq!(h.attributes[0].name, "name");
        assert_eq!(h.attributes[0].type_name, "String");
        assert_eq!(h.attributes[1].type_name, "int");
        assert_eq!(m.associations()[0].kind, AssociationKind::Aggregation);
        let inh = &m.associations()[1];
        assert_eq!(inh.kind, AssociationKind::Inheritance);
        assert_eq!((inh.source.as_str(), inh.target.as_str()), ("Doctor", "Staff"));
    }

    #[test]
    fn empty_package() {
        let m = parse_model("package P\n").unwrap();
        assert_eq!(m.package_name(), "P");
        assert!(m.classes().is_empty());
        assert_eq!(serialize_model(&m), "package P\n");
    }

    #[test]
    fn unknown_endpoint_is_semantic_error_with_line() {
        let err = parse_model("package P\nclass A {}\nA --> B\n").unwrap_err();
        assert_eq!(
            err,
            TextError::Semantic {
                line: 3,
                source: ModelError::UnknownClass("B".into())
            }
        );
    }

    #[test]
    fn duplicate_class_is_semantic_error() {
        let err = parse_model("package P\nclass A {}\nclass A {}\n").unwrap_err();
        assert_eq!(err.line(), Some(3));
        assert!(matches!(err, TextError::Semantic { .. }));
    }

    #[test]
    fn syntax_error_points_at_token() {
        let err = parse_model("package P\nclass A {\n  name String\n}\n").unwrap_err();
        match err {
            TextError::Parse(p) => {
                assert_eq!((p.line, p.column), (3, 8));
                assert_eq!(p.token, "String");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_model("class A {}\n"), Err(TextError::Parse(_))));
        assert!(matches!(parse_model(""), Err(TextError::Parse(_))));
        assert!(matches!(
            parse_model("package P\nclass A {\n"),
            Err(TextError::Parse(_))
        ));
    }

    #[test]
    fn free_type_token_round_trips() {
        let src = "package Bank\nclass Account {\n  balance: Money\n}\n";
        let m = parse_model(src).unwrap();
        let text = serialize_model(&m);
        assert!(text.contains("  balance: Money\n"));
        assert_eq!(text, src);
    }

    #[test]
    fn round_trip_and_labels() {
        let src = "package Clinic\nclass Patient {}\nclass Appointment {\n  date: Date\n}\nPatient --> Appointment : books\nAppointment *-- Patient\n";
        let m = parse_model(src).unwrap();
        assert_eq!(m.associations()[0].name.as_deref(), Some("books"));
        assert_eq!(serialize_model(&m), src);
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn accepts_crlf() {
        let m = parse_model("package P\r\nclass A {\r\n  x: int\r\n}\r\n").unwrap();
        assert_eq!(m.class("A").unwrap().attributes.len(), 1);
    }

    #[test]
    fn class_named_like_arrow_letter() {
        let m = parse_model("package P\nclass o {}\nclass B {}\no --> B\nB o-- o\n").unwrap();
        assert_eq!(m.associations().len(), 2);
    }

    #[test]
    fn interchange_round_trip() {
        let m = parse_model(FIXTURE).unwrap();
        let json = to_interchange(&m);
        assert_eq!(json["packageName"], "Hospital");
        assert_eq!(json["classes"][0]["attributes"][1]["typeName"], "int");
        assert_eq!(from_interchange(&json).unwrap(), m);
    }
}
