//! Binding-triple transport: how a `STREAM` query's result rows travel to
//! the queries that read its output stream.
//!
//! Each row becomes one fresh blank node `r` and one triple
//! `(r, bind:<var>, value)` per bound variable, all stamped with the fire
//! time. Decoding groups the window's triples by subject.

use std::collections::BTreeMap;

use crate::rdf::{Bindings, Term, TimestampedTriple, Triple};

/// Reserved namespace for binding predicates.
pub const BIND_NS: &str = "http://cpps.example/binding#";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("subject {0} mixes bind: and other predicates")]
    MixedPredicates(String),
    #[error("triple {0} does not use the bind: namespace")]
    NotABindingTriple(String),
    #[error("variable ?{var} bound twice under {subject}")]
    DuplicateVariable { subject: String, var: String },
}

/// Label of the `index`-th result node emitted at `fire_time`. Unique per
/// output stream because fire times of one query never repeat.
fn row_label(index: usize, fire_time: u64) -> String {
    format!("r{index}_t{fire_time}")
}

pub fn encode_result_stream(rows: &[Bindings], query_name: &str, fire_time: u64) -> Vec<TimestampedTriple> {
    let _ = query_name;
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let node = Term::blank(row_label(i, fire_time));
        for (var, value) in row.iter() {
            let triple = Triple::new(node.clone(), Term::iri(format!("{BIND_NS}{var}")), value.clone())
                .expect("result values are concrete terms");
            out.push(TimestampedTriple::new(triple, fire_time));
        }
    }
    out
}

/// Inverse of [`encode_result_stream`]. Rows come back in order of first
/// appearance of their subject.
pub fn decode_bindings<'a>(
    triples: impl IntoIterator<Item = &'a TimestampedTriple>,
) -> Result<Vec<Bindings>, TransportError> {
    let mut order: Vec<&Term> = Vec::new();
    let mut rows: BTreeMap<&Term, (Bindings, bool)> = BTreeMap::new();
    for tt in triples {
        let t = &tt.triple;
        let pred = t.predicate.as_iri().unwrap_or_default();
        let var = pred.strip_prefix(BIND_NS);
        let entry = rows.entry(&t.subject).or_insert_with(|| {
            order.push(&t.subject);
            (Bindings::new(), var.is_some())
        });
        match (var, entry.1) {
            (Some(var), true) => {
                if entry.0.contains(var) {
                    return Err(TransportError::DuplicateVariable {
                        subject: t.subject.to_string(),
                        var: var.to_owned(),
                    });
                }
                entry.0.bind(var, t.object.clone());
            }
            (None, false) if entry.0.is_empty() => {
                return Err(TransportError::NotABindingTriple(t.to_string()));
            }
            _ => return Err(TransportError::MixedPredicates(t.subject.to_string())),
        }
    }
    Ok(order.into_iter().map(|s| rows.remove(s).expect("recorded").0).collect())
}
