//! RDF terms, triples and solution mappings.

use std::collections::BTreeMap;
use std::fmt;

use super::vocab::{xsd, OWL_RATIONAL};
use super::RdfError;

/// An RDF term, or a query variable when used inside a pattern.
///
/// The derived ordering is the deterministic "lexical" order used for
/// sorting bindings: variant first, then the textual content.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    Literal { lexical: String, datatype: String },
    BlankNode(String),
    Variable(String),
}

impl Term {
    pub fn iri(iri: impl Into<String>) -> Self {
        Term::Iri(iri.into())
    }

    pub fn literal(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Term::Literal {
            lexical: lexical.into(),
            datatype: datatype.into(),
        }
    }

    pub fn integer(value: i64) -> Self {
        Term::literal(value.to_string(), xsd::INTEGER)
    }

    pub fn decimal(lexical: impl Into<String>) -> Self {
        Term::literal(lexical, xsd::DECIMAL)
    }

    pub fn string(value: impl Into<String>) -> Self {
        Term::literal(value, xsd::STRING)
    }

    pub fn blank(label: impl Into<String>) -> Self {
        Term::BlankNode(label.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    /// Checks the per-variant invariants: IRIs are non-empty without
    /// whitespace, variable names are identifiers, numeric literals parse.
    pub fn validate(&self) -> Result<(), RdfError> {
        match self {
            Term::Iri(iri) => check_iri(iri),
            Term::Variable(name) => check_var_name(name),
            Term::BlankNode(label) => {
                if label.is_empty() || label.chars().any(char::is_whitespace) {
                    Err(RdfError::InvalidTerm(format!("bad blank node label {label:?}")))
                } else {
                    Ok(())
                }
            }
            Term::Literal { datatype, .. } => {
                check_iri(datatype)?;
                if is_numeric_datatype(datatype) {
                    super::numeric_value(self)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Literal { lexical, datatype } => {
                write!(f, "\"{}\"^^<{datatype}>", escape_string(lexical))
            }
            Term::BlankNode(label) => write!(f, "_:{label}"),
            Term::Variable(name) => write!(f, "?{name}"),
        }
    }
}

pub(crate) fn check_iri(iri: &str) -> Result<(), RdfError> {
    if iri.is_empty() {
        return Err(RdfError::MalformedIri(iri.to_owned()));
    }
    if iri
        .chars()
        .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\'))
    {
        return Err(RdfError::MalformedIri(iri.to_owned()));
    }
    Ok(())
}

pub(crate) fn check_var_name(name: &str) -> Result<(), RdfError> {
    let mut chars = name.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(RdfError::InvalidTerm(format!("bad variable name {name:?}")))
    }
}

pub(crate) fn is_numeric_datatype(datatype: &str) -> bool {
    matches!(
        datatype,
        xsd::INTEGER | xsd::DECIMAL | xsd::DOUBLE | xsd::FLOAT | xsd::INT | xsd::LONG
    ) || datatype == OWL_RATIONAL
}

pub(crate) fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// A concrete RDF triple. The predicate is always an IRI and no position
/// holds a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, RdfError> {
        if !predicate.is_iri() {
            return Err(RdfError::InvalidTriple(format!("predicate {predicate} is not an IRI")));
        }
        if subject.is_variable() || object.is_variable() {
            return Err(RdfError::InvalidTriple("variables are not allowed in triples".into()));
        }
        if matches!(subject, Term::Literal { .. }) {
            return Err(RdfError::InvalidTriple(format!("literal subject {subject}")));
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// A stream element: a triple stamped with virtual-clock milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimestampedTriple {
    pub triple: Triple,
    pub timestamp: u64,
}

impl TimestampedTriple {
    pub fn new(triple: Triple, timestamp: u64) -> Self {
        TimestampedTriple { triple, timestamp }
    }
}

/// A triple pattern; any position may be a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter_map(|t| match t {
                Term::Variable(v) => Some(v.as_str()),
                _ => None,
            })
    }
}

/// A solution mapping from variable names to terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bindings(BTreeMap<String, Term>);

impl Bindings {
    pub fn new() -> Self {
        Bindings(BTreeMap::new())
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    /// Binds `var` to `term`. Returns false (and leaves the row unchanged)
    /// when `var` is already bound to a different term.
    pub fn bind(&mut self, var: impl Into<String>, term: Term) -> bool {
        use std::collections::btree_map::Entry;
        match self.0.entry(var.into()) {
            Entry::Vacant(e) => {
                e.insert(term);
                true
            }
            Entry::Occupied(e) => *e.get() == term,
        }
    }

    /// Compatible-merge of two rows (SPARQL join semantics).
    pub fn merge(&self, other: &Bindings) -> Option<Bindings> {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            if !out.bind(k.clone(), v.clone()) {
                return None;
            }
        }
        Some(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Restricts the row to the given variables.
    pub fn project<'a>(&self, vars: impl IntoIterator<Item = &'a str>) -> Bindings {
        let mut out = Bindings::new();
        for v in vars {
            if let Some(t) = self.0.get(v) {
                out.0.insert(v.to_owned(), t.clone());
            }
        }
        out
    }

    /// Replaces variables in `term` with their bound values.
    pub fn substitute(&self, term: &Term) -> Term {
        match term {
            Term::Variable(v) => self.0.get(v).cloned().unwrap_or_else(|| term.clone()),
            other => other.clone(),
        }
    }
}

impl FromIterator<(String, Term)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Bindings(iter.into_iter().collect())
    }
}

impl IntoIterator for Bindings {
    type Item = (String, Term);
    type IntoIter = std::collections::btree_map::IntoIter<String, Term>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}
