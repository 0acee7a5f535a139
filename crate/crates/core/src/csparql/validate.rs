//! Static checks run before a query is registered.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;

/// What the validator knows about a stream a query may read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamInfo {
    /// A declared raw input stream of plain triples.
    Raw,
    /// The result stream of a registered `STREAM` query, with the variables
    /// its rows carry.
    Derived { vocabulary: BTreeSet<String> },
}

/// Streams known at validation time, keyed by full IRI.
#[derive(Debug, Clone, Default)]
pub struct KnownStreams {
    streams: BTreeMap<String, StreamInfo>,
}

impl KnownStreams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_raw(&mut self, iri: impl Into<String>) {
        self.streams.insert(iri.into(), StreamInfo::Raw);
    }

    pub fn add_derived<I, S>(&mut self, iri: impl Into<String>, vocabulary: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.streams.insert(
            iri.into(),
            StreamInfo::Derived {
                vocabulary: vocabulary.into_iter().map(Into::into).collect(),
            },
        );
    }

    pub fn get(&self, iri: &str) -> Option<&StreamInfo> {
        self.streams.get(iri)
    }

    pub fn contains(&self, iri: &str) -> bool {
        self.streams.contains_key(iri)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnknownPrefix(String),
    UnknownStream(String),
    StepExceedsRange {
        stream: String,
        step: Duration,
        range: Duration,
    },
    StepDoesNotDivideRange {
        stream: String,
        step: Duration,
        range: Duration,
    },
    UnresolvedVariable {
        var: String,
        context: &'static str,
    },
    AggregateOutputNotFresh(String),
    UnsupportedAggregate(AggregateFunction),
    DuplicateOutput(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnknownPrefix(p) => write!(f, "unknown prefix '{p}:'"),
            Diagnostic::UnknownStream(s) => write!(f, "unknown stream <{s}>"),
            Diagnostic::StepExceedsRange { stream, step, range } => {
                write!(f, "STEP {step} exceeds RANGE {range} on <{stream}>")
            }
            Diagnostic::StepDoesNotDivideRange { stream, step, range } => {
                write!(f, "STEP {step} does not divide RANGE {range} on <{stream}>")
            }
            Diagnostic::UnresolvedVariable { var, context } => {
                write!(f, "unresolved variable ?{var} in {context}")
            }
            Diagnostic::AggregateOutputNotFresh(v) => {
                write!(f, "aggregate output ?{v} is already bound elsewhere")
            }
            Diagnostic::UnsupportedAggregate(func) => {
                write!(
                    f,
                    "aggregate function {} is recognized but not implemented",
                    func.keyword()
                )
            }
            Diagnostic::DuplicateOutput(v) => write!(f, "?{v} is selected more than once"),
        }
    }
}

/// Returns every problem found; an empty list means the query can be
/// registered against `known`.
pub fn validate_query(q: &RegisteredQuery, known: &KnownStreams) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut bad_prefixes = BTreeSet::new();
    for iri in q.mentioned_iris() {
        if let Err(e) = q.resolve_iri(&iri) {
            bad_prefixes.insert(e.0);
        }
    }
    diags.extend(bad_prefixes.into_iter().map(Diagnostic::UnknownPrefix));

    // variables available to filters and aggregates: WHERE + upstream rows
    let mut row_vars: BTreeSet<String> = q.where_vars().into_iter().map(str::to_owned).collect();
    for source in &q.sources {
        let Ok(iri) = q.resolve_iri(&source.stream) else {
            continue;
        };
        match known.get(&iri) {
            None => diags.push(Diagnostic::UnknownStream(iri.clone())),
            Some(StreamInfo::Derived { vocabulary }) => row_vars.extend(vocabulary.iter().cloned()),
            Some(StreamInfo::Raw) => {}
        }
        if source.step > source.range {
            diags.push(Diagnostic::StepExceedsRange {
                stream: iri,
                step: source.step,
                range: source.range,
            });
        } else if source.range.as_millis() % source.step.as_millis() != 0 {
            diags.push(Diagnostic::StepDoesNotDivideRange {
                stream: iri,
                step: source.step,
                range: source.range,
            });
        }
    }

    let mut agg_outs = BTreeSet::new();
    for agg in &q.aggregates {
        if !agg.function.is_implemented() {
            diags.push(Diagnostic::UnsupportedAggregate(agg.function));
        }
        if row_vars.contains(&agg.out_var) || !agg_outs.insert(agg.out_var.clone()) {
            diags.push(Diagnostic::AggregateOutputNotFresh(agg.out_var.clone()));
        }
        for v in &agg.over_vars {
            if !row_vars.contains(v) {
                diags.push(Diagnostic::UnresolvedVariable {
                    var: v.clone(),
                    context: "aggregate",
                });
            }
        }
        if let Some(f) = &agg.filter {
            unresolved(f, &row_vars, "aggregate filter", &mut diags);
        }
    }
    for f in &q.filters {
        unresolved(f, &row_vars, "filter", &mut diags);
    }

    let mut select_vars = row_vars;
    select_vars.extend(agg_outs);
    let mut outputs = BTreeSet::new();
    for item in &q.select {
        unresolved(&item.expr, &select_vars, "select", &mut diags);
        if let Some(name) = item.output_name() {
            if !outputs.insert(name.to_owned()) {
                diags.push(Diagnostic::DuplicateOutput(name.to_owned()));
            }
        }
    }
    diags
}

fn unresolved(e: &Expr, scope: &BTreeSet<String>, context: &'static str, diags: &mut Vec<Diagnostic>) {
    let mut seen = BTreeSet::new();
    for v in e.variables() {
        if !scope.contains(v) && seen.insert(v) {
            diags.push(Diagnostic::UnresolvedVariable {
                var: v.to_owned(),
                context,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csparql::parse_query;

    fn known_s() -> KnownStreams {
        let mut k = KnownStreams::new();
        k.add_raw("http://ex/s");
        k
    }

    #[test]
    fn unbound_select_variable() {
        let q = parse_query(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?ghost FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]",
        )
        .unwrap();
        let d = validate_query(&q, &known_s());
        assert_eq!(
            d,
            vec![Diagnostic::UnresolvedVariable {
                var: "ghost".into(),
                context: "select"
            }]
        );
        assert!(d[0].to_string().contains("unresolved variable"));
    }

    #[test]
    fn step_larger_than_range() {
        let q = parse_query(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?x FROM STREAM <http://ex/s> [RANGE 1m STEP 2m] WHERE { ?x <http://ex/p> ?y }",
        )
        .unwrap();
        let d = validate_query(&q, &known_s());
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::StepExceedsRange { .. }));
    }

    #[test]
    fn step_must_divide_range() {
        let q = parse_query(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?x FROM STREAM <http://ex/s> [RANGE 5m STEP 2m] WHERE { ?x <http://ex/p> ?y }",
        )
        .unwrap();
        assert!(matches!(
            validate_query(&q, &known_s())[..],
            [Diagnostic::StepDoesNotDivideRange { .. }]
        ));
    }

    #[test]
    fn unknown_stream_and_prefix() {
        let q = parse_query(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?x FROM STREAM <http://ex/other> [RANGE 1m STEP 1m] WHERE { ?x ex:p ?y }",
        )
        .unwrap();
        let d = validate_query(&q, &known_s());
        assert!(d.contains(&Diagnostic::UnknownStream("http://ex/other".into())));
        assert!(d.contains(&Diagnostic::UnknownPrefix("ex".into())));
    }

    #[test]
    fn aggregate_checks() {
        let q = parse_query(
            "REGISTER STREAM C COMPUTED EVERY 1m AS SELECT ?y FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]
             WHERE { ?x <http://ex/p> ?y } AGGREGATE {(?y, SUM, {?z})}",
        )
        .unwrap();
        let d = validate_query(&q, &known_s());
        assert!(d.contains(&Diagnostic::UnsupportedAggregate(AggregateFunction::Sum)));
        assert!(d.contains(&Diagnostic::AggregateOutputNotFresh("y".into())));
        assert!(d.contains(&Diagnostic::UnresolvedVariable {
            var: "z".into(),
            context: "aggregate"
        }));
    }

    #[test]
    fn upstream_vocabulary_resolves_variables() {
        let q = parse_query(
            "REGISTER STREAM A COMPUTED EVERY 1m AS SELECT ((10 - ?d) / 10 AS ?a) FROM STREAM <http://ex/D> [RANGE 1m STEP 1m]",
        )
        .unwrap();
        let mut k = KnownStreams::new();
        k.add_derived("http://ex/D", ["d"]);
        assert!(validate_query(&q, &k).is_empty());
        let mut k = KnownStreams::new();
        k.add_derived("http://ex/D", ["other"]);
        assert_eq!(validate_query(&q, &k).len(), 1);
    }
}
