use std::collections::{BTreeMap, BTreeSet};

use crate::csparql::{Expr, QueryKind, RegisteredQuery, UnknownPrefix};
use crate::rdf::{match_bgp, Bindings, StaticGraph, Term, TriplePattern};

use super::buffer::StreamBuffer;
use super::expr::{eval_expr, filter_passes, EvalError};
use super::transport::{decode_bindings, TransportError};

/// What a query may read besides its declared windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccessPolicy {
    /// Windows plus the static asset graph.
    #[default]
    Full,
    /// Only result streams of other queries; no raw windows, no static graph.
    UpstreamOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSource {
    pub iri: String,
    pub range_ms: u64,
    pub derived: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanAggregate {
    pub out_var: String,
    pub over_vars: Vec<String>,
    pub filter: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSelect {
    pub expr: Expr,
    pub name: String,
    /// `true` for a plain `?v` projection; those are dropped when unbound.
    pub bare: bool,
}

/// A registered query with every IRI resolved, ready to evaluate.
#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub name: String,
    pub kind: QueryKind,
    pub period_ms: u64,
    pub sources: Vec<PlanSource>,
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<Expr>,
    pub aggregates: Vec<PlanAggregate>,
    pub select: Vec<PlanSelect>,
    /// Grouping key when aggregating: selected variables that are not
    /// aggregate outputs.
    pub group_key: Vec<String>,
    pub access: AccessPolicy,
    pub query: RegisteredQuery,
}

impl QueryPlan {
    /// `is_derived` tells whether a source IRI names another query's output.
    pub fn compile(
        query: &RegisteredQuery,
        access: AccessPolicy,
        is_derived: impl Fn(&str) -> bool,
    ) -> Result<Self, UnknownPrefix> {
        let sources = query
            .sources
            .iter()
            .map(|s| {
                let iri = query.resolve_iri(&s.stream)?;
                Ok(PlanSource {
                    derived: is_derived(&iri),
                    iri,
                    range_ms: s.range.as_millis(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let patterns = query
            .where_clause
            .iter()
            .map(|p| query.resolve_pattern(p))
            .collect::<Result<Vec<_>, _>>()?;
        let filters = query
            .filters
            .iter()
            .map(|f| query.resolve_expr(f))
            .collect::<Result<Vec<_>, _>>()?;
        let aggregates = query
            .aggregates
            .iter()
            .map(|a| {
                Ok(PlanAggregate {
                    out_var: a.out_var.clone(),
                    over_vars: a.over_vars.clone(),
                    filter: a.filter.as_ref().map(|f| query.resolve_expr(f)).transpose()?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut select = Vec::new();
        for item in &query.select {
            let expr = query.resolve_expr(&item.expr)?;
            let bare = item.alias.is_none() && matches!(expr, Expr::Var(_));
            let name = item.output_name().unwrap_or_default().to_owned();
            select.push(PlanSelect { expr, name, bare });
        }
        let agg_outs: BTreeSet<&str> = aggregates.iter().map(|a| a.out_var.as_str()).collect();
        let mut group_key: Vec<String> = select
            .iter()
            .flat_map(|s| s.expr.variables())
            .filter(|v| !agg_outs.contains(v))
            .map(str::to_owned)
            .collect();
        group_key.sort();
        group_key.dedup();

        Ok(QueryPlan {
            name: query.name.clone(),
            kind: query.kind,
            period_ms: query.compute_every.as_millis(),
            sources,
            patterns,
            filters,
            aggregates,
            select,
            group_key,
            access,
            query: query.clone(),
        })
    }
}

/// Read-only view of the data a query evaluates against.
pub struct Dataset<'a> {
    pub static_graph: &'a StaticGraph,
    pub buffers: &'a BTreeMap<String, StreamBuffer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub rows: Vec<Bindings>,
    /// First per-row error, if any rows were dropped.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvaluateError {
    #[error("stream <{0}> has no buffer")]
    MissingBuffer(String),
    #[error("cannot decode <{stream}>: {source}")]
    Decode { stream: String, source: TransportError },
}

/// Evaluates one query at `fire_time`.
///
/// Upstream rows from derived windows are joined together first (a single
/// empty row when there are none). The WHERE pattern is then matched over
/// the union of the raw windows and, unless restricted, the static graph,
/// extending each upstream row. Groups for aggregation are seeded from the
/// upstream rows so that `COUNT` yields 0 when nothing matches.
pub fn evaluate(plan: &QueryPlan, data: &Dataset<'_>, fire_time: u64) -> Result<Evaluation, EvaluateError> {
    let mut upstream = vec![Bindings::new()];
    let mut graph = match plan.access {
        AccessPolicy::Full => data.static_graph.clone(),
        AccessPolicy::UpstreamOnly => StaticGraph::new(),
    };
    for source in &plan.sources {
        let buffer = data
            .buffers
            .get(&source.iri)
            .ok_or_else(|| EvaluateError::MissingBuffer(source.iri.clone()))?;
        let window = buffer.window(fire_time, source.range_ms);
        if source.derived {
            let rows = decode_bindings(window).map_err(|e| EvaluateError::Decode {
                stream: source.iri.clone(),
                source: e,
            })?;
            upstream = join(&upstream, &rows);
        } else {
            graph.extend(window.map(|e| e.triple.clone()));
        }
    }

    let mut rows = if plan.patterns.is_empty() {
        upstream.clone()
    } else {
        match_bgp(&graph, &plan.patterns, upstream.clone())
    };
    rows.retain(|r| plan.filters.iter().all(|f| filter_passes(f, r)));

    if !plan.aggregates.is_empty() {
        rows = aggregate(plan, &upstream, &rows);
    }

    let mut error = None;
    let mut out = Vec::with_capacity(rows.len());
    'rows: for row in &rows {
        let mut result = Bindings::new();
        for item in &plan.select {
            match eval_expr(&item.expr, row) {
                Ok(v) => {
                    result.bind(item.name.clone(), v.into_term());
                }
                Err(EvalError::Unbound(_)) if item.bare => {}
                Err(e) => {
                    error.get_or_insert_with(|| format!("?{}: {e}", item.name));
                    continue 'rows;
                }
            }
        }
        out.push(result);
    }
    out.sort();
    Ok(Evaluation { rows: out, error })
}

fn join(left: &[Bindings], right: &[Bindings]) -> Vec<Bindings> {
    left.iter()
        .flat_map(|l| right.iter().filter_map(move |r| l.merge(r)))
        .collect()
}

fn aggregate(plan: &QueryPlan, upstream: &[Bindings], rows: &[Bindings]) -> Vec<Bindings> {
    let key_of = |r: &Bindings| r.project(plan.group_key.iter().map(String::as_str));
    let mut groups: BTreeMap<Bindings, Vec<&Bindings>> = BTreeMap::new();
    for u in upstream {
        if plan.group_key.iter().all(|k| u.contains(k)) {
            groups.entry(key_of(u)).or_default();
        }
    }
    for r in rows {
        groups.entry(key_of(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(mut key, members)| {
            for agg in &plan.aggregates {
                let count = members
                    .iter()
                    .filter(|r| agg.over_vars.iter().all(|v| r.contains(v)))
                    .filter(|r| agg.filter.as_ref().is_none_or(|f| filter_passes(f, r)))
                    .count();
                key.bind(agg.out_var.clone(), Term::integer(count as i64));
            }
            key
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csparql::parse_query;
    use crate::engine::buffer::BufferKind;
    use crate::engine::transport::encode_result_stream;
    use crate::rdf::{TimestampedTriple, Triple};

    const P: &str = "http://ex/";

    fn t(s: &str, p: &str, o: Term, ts: u64) -> TimestampedTriple {
        TimestampedTriple::new(
            Triple::new(Term::iri(format!("{P}{s}")), Term::iri(format!("{P}{p}")), o).unwrap(),
            ts,
        )
    }

    fn plan(src: &str, derived: &[&str]) -> QueryPlan {
        let q = parse_query(src).unwrap();
        QueryPlan::compile(&q, AccessPolicy::Full, |i| derived.contains(&i)).unwrap()
    }

    fn buffers(list: Vec<StreamBuffer>) -> BTreeMap<String, StreamBuffer> {
        list.into_iter().map(|b| (b.iri().to_owned(), b)).collect()
    }

    #[test]
    fn count_with_filter_and_empty_window() {
        let p = plan(
            "REGISTER STREAM C COMPUTED EVERY 1m AS SELECT ?n FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]
             WHERE { ?o <http://ex/v> ?v } AGGREGATE {(?n, COUNT, {?v}) FILTER(?v < 5)}",
            &[],
        );
        let mut b = StreamBuffer::new("http://ex/s", BufferKind::Raw);
        b.push(t("a", "v", Term::integer(1), 10)).unwrap();
        b.push(t("b", "v", Term::integer(9), 20)).unwrap();
        b.push(t("c", "v", Term::integer(3), 30)).unwrap();
        let g = StaticGraph::new();
        let bufs = buffers(vec![b]);
        let d = Dataset {
            static_graph: &g,
            buffers: &bufs,
        };
        let e = evaluate(&p, &d, 60_000).unwrap();
        assert_eq!(
            e.rows,
            vec![[("n".to_string(), Term::integer(2))].into_iter().collect()]
        );
        // window (60000, 120000] is empty but the global group still reports 0
        let e = evaluate(&p, &d, 120_000).unwrap();
        assert_eq!(
            e.rows,
            vec![[("n".to_string(), Term::integer(0))].into_iter().collect()]
        );
    }

    #[test]
    fn upstream_rows_feed_expressions() {
        let p = plan(
            "REGISTER STREAM A COMPUTED EVERY 1m AS SELECT ((10 - ?d) / 10 AS ?a) FROM STREAM <http://ex/D> [RANGE 1m STEP 1m]",
            &["http://ex/D"],
        );
        let mut b = StreamBuffer::new("http://ex/D", BufferKind::Derived { producer: "D".into() });
        let row: Bindings = [("d".to_string(), Term::integer(1))].into_iter().collect();
        for e in encode_result_stream(&[row], "D", 60_000) {
            b.push(e).unwrap();
        }
        let g = StaticGraph::new();
        let bufs = buffers(vec![b]);
        let d = Dataset {
            static_graph: &g,
            buffers: &bufs,
        };
        let e = evaluate(&p, &d, 60_000).unwrap();
        assert_eq!(
            e.rows,
            vec![[("a".to_string(), Term::decimal("0.9"))].into_iter().collect()]
        );
        assert!(evaluate(&p, &d, 120_000).unwrap().rows.is_empty());
    }

    #[test]
    fn select_error_drops_row_and_is_reported() {
        let p = plan(
            "REGISTER STREAM A COMPUTED EVERY 1m AS SELECT (1 / ?d AS ?a) FROM STREAM <http://ex/D> [RANGE 1m STEP 1m]",
            &["http://ex/D"],
        );
        let mut b = StreamBuffer::new("http://ex/D", BufferKind::Derived { producer: "D".into() });
        let row: Bindings = [("d".to_string(), Term::integer(0))].into_iter().collect();
        for e in encode_result_stream(&[row], "D", 60_000) {
            b.push(e).unwrap();
        }
        let g = StaticGraph::new();
        let bufs = buffers(vec![b]);
        let e = evaluate(
            &p,
            &Dataset {
                static_graph: &g,
                buffers: &bufs,
            },
            60_000,
        )
        .unwrap();
        assert!(e.rows.is_empty());
        assert!(e.error.unwrap().contains("division by zero"));
    }

    #[test]
    fn static_graph_joins_with_window() {
        let p = plan(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?o ?line FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]
             WHERE { ?o <http://ex/by> ?sensor . ?line <http://ex/hosts> ?sensor }",
            &[],
        );
        let mut g = StaticGraph::new();
        g.insert(t("L", "hosts", Term::iri("http://ex/S1"), 0).triple);
        let mut b = StreamBuffer::new("http://ex/s", BufferKind::Raw);
        b.push(t("o1", "by", Term::iri("http://ex/S1"), 5)).unwrap();
        b.push(t("o2", "by", Term::iri("http://ex/S2"), 6)).unwrap();
        let bufs = buffers(vec![b]);
        let e = evaluate(
            &p,
            &Dataset {
                static_graph: &g,
                buffers: &bufs,
            },
            60_000,
        )
        .unwrap();
        assert_eq!(e.rows.len(), 1);
        assert_eq!(e.rows[0].get("o"), Some(&Term::iri("http://ex/o1")));

        let mut restricted = p.clone();
        restricted.access = AccessPolicy::UpstreamOnly;
        let e = evaluate(
            &restricted,
            &Dataset {
                static_graph: &g,
                buffers: &bufs,
            },
            60_000,
        )
        .unwrap();
        assert!(e.rows.is_empty());
    }

    #[test]
    fn grouped_count_keeps_upstream_keys() {
        let p = plan(
            "REGISTER QUERY Q COMPUTED EVERY 1m AS SELECT ?k ?n FROM STREAM <http://ex/K> [RANGE 1m STEP 1m]
             FROM STREAM <http://ex/s> [RANGE 1m STEP 1m]
             WHERE { ?o <http://ex/key> ?k } AGGREGATE {(?n, COUNT, {?o})}",
            &["http://ex/K"],
        );
        let mut k = StreamBuffer::new("http://ex/K", BufferKind::Derived { producer: "K".into() });
        let rows: Vec<Bindings> = ["x", "y"]
            .iter()
            .map(|v| [("k".to_string(), Term::iri(format!("{P}{v}")))].into_iter().collect())
            .collect();
        for e in encode_result_stream(&rows, "K", 60_000) {
            k.push(e).unwrap();
        }
        let mut s = StreamBuffer::new("http://ex/s", BufferKind::Raw);
        s.push(t("o1", "key", Term::iri("http://ex/x"), 1)).unwrap();
        s.push(t("o2", "key", Term::iri("http://ex/x"), 2)).unwrap();
        let g = StaticGraph::new();
        let bufs = buffers(vec![k, s]);
        let e = evaluate(
            &p,
            &Dataset {
                static_graph: &g,
                buffers: &bufs,
            },
            60_000,
        )
        .unwrap();
        let counts: Vec<_> = e.rows.iter().map(|r| r.get("n").cloned().unwrap()).collect();
        assert_eq!(counts, vec![Term::integer(2), Term::integer(0)]);
    }
}
