//! DIMACS CNF reading and writing.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::formula::{CnfFormula, Lit};

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("line {line}: missing or malformed `p cnf <vars> <clauses>` header")]
    MalformedHeader { line: usize },
    #[error("line {line}: literal {lit} out of range for {num_vars} variables")]
    LiteralOutOfRange { line: usize, lit: i64, num_vars: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("end of input inside a clause (missing terminating 0)")]
    UnterminatedClause,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parsed DIMACS file. Literals are kept in the external signed 1-indexed form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DimacsDocument {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
    pub comments: Vec<String>,
    /// Parallel to `clauses`: true when the clause contains both `l` and `-l`.
    pub tautologies: Vec<bool>,
    /// Non-fatal issues, e.g. a header clause count that disagrees with the body.
    pub warnings: Vec<String>,
}

impl DimacsDocument {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Self {
        let tautologies = clauses.iter().map(|c| is_tautology(c)).collect();
        DimacsDocument {
            num_vars,
            clauses,
            comments: Vec::new(),
            tautologies,
            warnings: Vec::new(),
        }
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(|c| c.is_empty())
    }

    /// Converts to the internal 0-indexed representation.
    pub fn to_formula(&self) -> CnfFormula {
        let clauses = self
            .clauses
            .iter()
            .map(|c| c.iter().map(|&l| Lit::from_dimacs(l)).collect())
            .collect();
        CnfFormula::new(self.num_vars, clauses).expect("document literals are range-checked")
    }

    pub fn from_formula(f: &CnfFormula) -> Self {
        let clauses = f
            .clauses()
            .iter()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect();
        DimacsDocument::new(f.num_vars(), clauses)
    }
}

fn is_tautology(clause: &[i32]) -> bool {
    clause.iter().any(|&l| clause.contains(&-l))
}

pub fn parse_dimacs(text: &str) -> Result<DimacsDocument, DimacsError> {
    let mut doc = DimacsDocument::default();
    let mut header: Option<(usize, usize)> = None;
    let mut current: Vec<i32> = Vec::new();
    let mut in_clause = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if header.is_none() {
                doc.comments.push(rest.trim_start().to_string());
            }
            continue;
        }
        // SATLIB end-of-data marker
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError::MalformedHeader { line: line_no });
            }
            header = Some(parse_header(line).ok_or(DimacsError::MalformedHeader { line: line_no })?);
            doc.num_vars = header.unwrap().0;
            continue;
        }
        if header.is_none() {
            return Err(DimacsError::MalformedHeader { line: line_no });
        }
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| DimacsError::InvalidToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                push_clause(&mut doc, std::mem::take(&mut current));
                in_clause = false;
                continue;
            }
            if value.unsigned_abs() as usize > doc.num_vars {
                return Err(DimacsError::LiteralOutOfRange {
                    line: line_no,
                    lit: value,
                    num_vars: doc.num_vars,
                });
            }
            let lit = value as i32;
            if !current.contains(&lit) {
                current.push(lit);
            }
            in_clause = true;
        }
    }

    let (_, declared) = header.ok_or(DimacsError::MalformedHeader { line: 0 })?;
    if in_clause {
        return Err(DimacsError::UnterminatedClause);
    }
    if declared != doc.clauses.len() {
        let msg = format!(
            "header declares {} clauses, body contains {}",
            declared,
            doc.clauses.len()
        );
        log::warn!("{msg}");
        doc.warnings.push(msg);
    }
    if doc.has_empty_clause() {
        let msg = "formula contains an empty clause".to_string();
        log::warn!("{msg}");
        doc.warnings.push(msg);
    }
    Ok(doc)
}

fn push_clause(doc: &mut DimacsDocument, clause: Vec<i32>) {
    doc.tautologies.push(is_tautology(&clause));
    doc.clauses.push(clause);
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    if parts.next()? != "p" || parts.next()? != "cnf" {
        return None;
    }
    let vars = parts.next()?.parse().ok()?;
    let clauses = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((vars, clauses))
}

pub fn write_dimacs(doc: &DimacsDocument) -> String {
    let mut out = String::new();
    for c in &doc.comments {
        if c.is_empty() {
            out.push_str("c\n");
        } else {
            let _ = writeln!(out, "c {c}");
        }
    }
    let _ = writeln!(out, "p cnf {} {}", doc.num_vars, doc.clauses.len());
    for clause in &doc.clauses {
        for lit in clause {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out
}

pub fn read_dimacs_file(path: impl AsRef<Path>) -> Result<DimacsDocument, DimacsError> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    parse_dimacs(&text)
}

pub fn read_formula(path: impl AsRef<Path>) -> Result<CnfFormula, DimacsError> {
    Ok(read_dimacs_file(path)?.to_formula())
}
