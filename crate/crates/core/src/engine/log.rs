//! Emission log serialization.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::rdf::{Bindings, Term};

use super::runtime::Emission;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
}

impl From<&Term> for TermRecord {
    fn from(t: &Term) -> Self {
        let (kind, value, datatype) = match t {
            Term::Iri(i) => ("iri", i.clone(), None),
            Term::Literal { lexical, datatype } => ("literal", lexical.clone(), Some(datatype.clone())),
            Term::BlankNode(b) => ("bnode", b.clone(), None),
            Term::Variable(v) => ("variable", v.clone(), None),
        };
        TermRecord {
            kind: kind.to_owned(),
            value,
            datatype,
        }
    }
}

impl TermRecord {
    pub fn to_term(&self) -> Option<Term> {
        Some(match (self.kind.as_str(), &self.datatype) {
            ("iri", _) => Term::iri(self.value.clone()),
            ("literal", Some(dt)) => Term::literal(self.value.clone(), dt.clone()),
            ("bnode", _) => Term::blank(self.value.clone()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub query: String,
    pub fire_time_ms: u64,
    pub rows: Vec<BTreeMap<String, TermRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&Emission> for EmissionRecord {
    fn from(e: &Emission) -> Self {
        EmissionRecord {
            query: e.query.clone(),
            fire_time_ms: e.fire_time,
            rows: e.rows.iter().map(row_record).collect(),
            error: e.error.clone(),
        }
    }
}

fn row_record(row: &Bindings) -> BTreeMap<String, TermRecord> {
    row.iter().map(|(k, v)| (k.clone(), TermRecord::from(v))).collect()
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(mut w: W, emissions: &[Emission]) -> io::Result<()> {
    for e in emissions {
        serde_json::to_writer(&mut w, &EmissionRecord::from(e))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> serde_json::Result<Vec<EmissionRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// `query,fire_time_ms,variable,value,error`. Only emissions with at most
/// one row fit this shape; multi-row emissions are skipped. A row-less
/// emission gets one line with empty variable and value.
pub fn write_csv<W: Write>(w: W, emissions: &[Emission]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["query", "fire_time_ms", "variable", "value", "error"])?;
    for e in emissions {
        let fire = e.fire_time.to_string();
        let error = e.error.as_deref().unwrap_or("");
        match e.rows.as_slice() {
            [] => out.write_record([e.query.as_str(), &fire, "", "", error])?,
            [row] => {
                for (var, value) in row.iter() {
                    let value = match value {
                        Term::Literal { lexical, .. } => lexical.clone(),
                        other => other.to_string(),
                    };
                    out.write_record([e.query.as_str(), &fire, var, &value, error])?;
                }
            }
            _ => {}
        }
    }
    out.flush()?;
    Ok(())
}
