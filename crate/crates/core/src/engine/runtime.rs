use std::collections::BTreeMap;
use std::sync::mpsc;

use crate::csparql::{validate_query, Diagnostic, KnownStreams, QueryKind, RegisteredQuery};
use crate::rdf::{Bindings, StaticGraph, TimestampedTriple};

use super::buffer::{BufferKind, OutOfOrder, StreamBuffer};
use super::deps::{CycleError, DependencyGraph};
use super::eval::{evaluate, AccessPolicy, Dataset, EvaluateError, Evaluation, QueryPlan};
use super::transport::encode_result_stream;

pub const DEFAULT_STREAM_BASE: &str = "http://cpps.example/stream/";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Output stream of query `Q` is `stream_base + "Q"`.
    pub stream_base: String,
    /// Drop buffered elements no future window can reach.
    pub evict: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            stream_base: DEFAULT_STREAM_BASE.to_owned(),
            evict: false,
        }
    }
}

/// Result of one query evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub query: String,
    pub kind: QueryKind,
    pub fire_time: u64,
    pub rows: Vec<Bindings>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("a query named {0} is already registered")]
    DuplicateQuery(String),
    #[error("stream <{0}> already exists")]
    DuplicateStream(String),
    #[error("unknown stream <{0}>")]
    UnknownStream(String),
    #[error("unknown query {0}")]
    UnknownQuery(String),
    #[error("<{0}> is a query result stream, not an input")]
    NotAnInput(String),
    #[error("query {query} is invalid: {}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation {
        query: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error("query {query} may only read result streams, but reads <{stream}>")]
    RawAccessDenied { query: String, stream: String },
    #[error("push to <{stream}> rejected: {source}")]
    OutOfOrder { stream: String, source: OutOfOrder },
    #[error("clock cannot move back from {from} to {to}")]
    ClockBackwards { from: u64, to: u64 },
    #[error("evaluating {query} at {fire_time}: {source}")]
    Evaluate {
        query: String,
        fire_time: u64,
        source: EvaluateError,
    },
}

#[derive(Debug, Clone)]
struct Registered {
    plan: QueryPlan,
    next_fire: u64,
}

/// Cloneable sender for producers that cannot hold `&mut Engine`. Elements
/// are applied in arrival order by [`Engine::drain_ingest`].
#[derive(Debug, Clone)]
pub struct IngestHandle {
    tx: mpsc::Sender<(String, TimestampedTriple)>,
}

impl IngestHandle {
    /// Returns `false` once the engine has been dropped.
    pub fn send(&self, stream: impl Into<String>, element: TimestampedTriple) -> bool {
        self.tx.send((stream.into(), element)).is_ok()
    }
}

/// Virtual-clock continuous query engine.
pub struct Engine {
    config: EngineConfig,
    clock: u64,
    static_graph: StaticGraph,
    buffers: BTreeMap<String, StreamBuffer>,
    known: KnownStreams,
    queries: Vec<Registered>,
    /// Indexes into `queries`, producers first.
    order: Vec<usize>,
    log: Vec<Emission>,
    ingest_tx: mpsc::Sender<(String, TimestampedTriple)>,
    ingest_rx: mpsc::Receiver<(String, TimestampedTriple)>,
}

impl Engine {
    pub fn new(static_graph: StaticGraph) -> Self {
        Engine::with_config(static_graph, EngineConfig::default())
    }

    pub fn with_config(static_graph: StaticGraph, config: EngineConfig) -> Self {
        let (ingest_tx, ingest_rx) = mpsc::channel();
        Engine {
            config,
            clock: 0,
            static_graph,
            buffers: BTreeMap::new(),
            known: KnownStreams::new(),
            queries: Vec::new(),
            order: Vec::new(),
            log: Vec::new(),
            ingest_tx,
            ingest_rx,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn static_graph(&self) -> &StaticGraph {
        &self.static_graph
    }

    pub fn output_stream(&self, query_name: &str) -> String {
        format!("{}{query_name}", self.config.stream_base)
    }

    pub fn declare_input(&mut self, iri: impl Into<String>) -> Result<(), EngineError> {
        let iri = iri.into();
        if self.buffers.contains_key(&iri) {
            return Err(EngineError::DuplicateStream(iri));
        }
        self.known.add_raw(iri.clone());
        self.buffers
            .insert(iri.clone(), StreamBuffer::new(iri, BufferKind::Raw));
        Ok(())
    }

    pub fn register(&mut self, query: RegisteredQuery) -> Result<(), EngineError> {
        self.register_with_policy(query, AccessPolicy::Full)
    }

    pub fn register_with_policy(&mut self, query: RegisteredQuery, access: AccessPolicy) -> Result<(), EngineError> {
        let name = query.name.clone();
        if self.queries.iter().any(|r| r.plan.name == name) {
            return Err(EngineError::DuplicateQuery(name));
        }
        let output = self.output_stream(&name);
        if query
            .sources
            .iter()
            .any(|s| query.resolve_iri(&s.stream).as_deref() == Ok(output.as_str()))
        {
            return Err(CycleError {
                path: vec![name.clone(), name],
            }
            .into());
        }
        let diagnostics = validate_query(&query, &self.known);
        if !diagnostics.is_empty() {
            return Err(EngineError::Validation {
                query: name,
                diagnostics,
            });
        }
        if query.kind == QueryKind::Stream && self.buffers.contains_key(&output) {
            return Err(EngineError::DuplicateStream(output));
        }
        let buffers = &self.buffers;
        let plan = QueryPlan::compile(&query, access, |iri| {
            buffers.get(iri).is_some_and(StreamBuffer::is_derived)
        })
        .expect("prefixes checked by validation");
        if access == AccessPolicy::UpstreamOnly {
            if let Some(raw) = plan.sources.iter().find(|s| !s.derived) {
                return Err(EngineError::RawAccessDenied {
                    query: name,
                    stream: raw.iri.clone(),
                });
            }
        }

        let mut all: Vec<RegisteredQuery> = self.queries.iter().map(|r| r.plan.query.clone()).collect();
        all.push(query.clone());
        let names = DependencyGraph::build(&all, &self.config.stream_base).topological_order()?;

        if query.kind == QueryKind::Stream {
            self.known.add_derived(output.clone(), query.output_vars());
            self.buffers.insert(
                output.clone(),
                StreamBuffer::new(output, BufferKind::Derived { producer: name.clone() }),
            );
        }
        let period = plan.period_ms;
        self.queries.push(Registered {
            plan,
            next_fire: (self.clock / period + 1) * period,
        });
        self.order = names
            .iter()
            .map(|n| self.queries.iter().position(|r| &r.plan.name == n).expect("registered"))
            .collect();
        Ok(())
    }

    /// Names of registered queries, producers before consumers.
    pub fn query_order(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.queries[i].plan.name.as_str()).collect()
    }

    pub fn next_fire_time(&self, query: &str) -> Option<u64> {
        self.queries.iter().find(|r| r.plan.name == query).map(|r| r.next_fire)
    }

    pub fn buffer(&self, iri: &str) -> Option<&StreamBuffer> {
        self.buffers.get(iri)
    }

    /// Total elements held across all buffers.
    pub fn buffered(&self) -> usize {
        self.buffers.values().map(StreamBuffer::len).sum()
    }

    pub fn push(&mut self, stream: &str, element: TimestampedTriple) -> Result<(), EngineError> {
        let buffer = self
            .buffers
            .get_mut(stream)
            .ok_or_else(|| EngineError::UnknownStream(stream.to_owned()))?;
        if buffer.is_derived() {
            return Err(EngineError::NotAnInput(stream.to_owned()));
        }
        buffer.push(element).map_err(|source| EngineError::OutOfOrder {
            stream: stream.to_owned(),
            source,
        })
    }

    pub fn push_all(
        &mut self,
        stream: &str,
        elements: impl IntoIterator<Item = TimestampedTriple>,
    ) -> Result<(), EngineError> {
        elements.into_iter().try_for_each(|e| self.push(stream, e))
    }

    pub fn ingest_handle(&self) -> IngestHandle {
        IngestHandle {
            tx: self.ingest_tx.clone(),
        }
    }

    /// Applies queued elements in arrival order. Stops at the first rejected
    /// element, leaving the rest queued.
    pub fn drain_ingest(&mut self) -> Result<usize, EngineError> {
        let mut n = 0;
        while let Ok((stream, element)) = self.ingest_rx.try_recv() {
            self.push(&stream, element)?;
            n += 1;
        }
        Ok(n)
    }

    /// Evaluates `query` at an arbitrary time without touching the clock or
    /// any buffer.
    pub fn evaluate_at(&self, query: &str, fire_time: u64) -> Result<Evaluation, EngineError> {
        let r = self
            .queries
            .iter()
            .find(|r| r.plan.name == query)
            .ok_or_else(|| EngineError::UnknownQuery(query.to_owned()))?;
        evaluate(&r.plan, &self.dataset(), fire_time).map_err(|source| EngineError::Evaluate {
            query: query.to_owned(),
            fire_time,
            source,
        })
    }

    fn dataset(&self) -> Dataset<'_> {
        Dataset {
            static_graph: &self.static_graph,
            buffers: &self.buffers,
        }
    }

    /// Fires every query whose fire times fall in `(clock, to]`, earliest
    /// first and producers before consumers within one instant.
    pub fn advance_clock(&mut self, to: u64) -> Result<Vec<Emission>, EngineError> {
        if to < self.clock {
            return Err(EngineError::ClockBackwards { from: self.clock, to });
        }
        let mut emitted = Vec::new();
        while let Some(fire_time) = self.queries.iter().map(|r| r.next_fire).filter(|&f| f <= to).min() {
            for pos in 0..self.order.len() {
                let idx = self.order[pos];
                if self.queries[idx].next_fire != fire_time {
                    continue;
                }
                let plan = &self.queries[idx].plan;
                let eval = evaluate(plan, &self.dataset(), fire_time).map_err(|source| EngineError::Evaluate {
                    query: plan.name.clone(),
                    fire_time,
                    source,
                })?;
                let emission = Emission {
                    query: plan.name.clone(),
                    kind: plan.kind,
                    fire_time,
                    rows: eval.rows,
                    error: eval.error,
                };
                if emission.kind == QueryKind::Stream {
                    let output = self.output_stream(&emission.query);
                    let buffer = self.buffers.get_mut(&output).expect("stream queries own a buffer");
                    for e in encode_result_stream(&emission.rows, &emission.query, fire_time) {
                        buffer.push(e).expect("fire times increase");
                    }
                }
                self.queries[idx].next_fire += self.queries[idx].plan.period_ms;
                emitted.push(emission);
            }
            self.clock = fire_time;
            self.evict();
        }
        self.clock = to;
        self.evict();
        self.log.extend(emitted.iter().cloned());
        Ok(emitted)
    }

    fn evict(&mut self) {
        if !self.config.evict {
            return;
        }
        let mut reach: BTreeMap<&str, u64> = BTreeMap::new();
        for r in &self.queries {
            for s in &r.plan.sources {
                let e = reach.entry(s.iri.as_str()).or_default();
                *e = (*e).max(s.range_ms);
            }
        }
        for (iri, range) in reach {
            if self.clock >= range {
                if let Some(b) = self.buffers.get_mut(iri) {
                    b.evict_through(self.clock - range);
                }
            }
        }
    }

    /// Every emission produced so far, in firing order.
    pub fn emissions(&self) -> &[Emission] {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csparql::parse_query;
    use crate::rdf::{Term, Triple};

    const S: &str = "http://ex/s";

    fn voltage(n: u64, v: &str, t: u64) -> TimestampedTriple {
        TimestampedTriple::new(
            Triple::new(Term::blank(format!("o{n}")), Term::iri("http://ex/v"), Term::decimal(v)).unwrap(),
            t,
        )
    }

    fn down_time() -> RegisteredQuery {
        parse_query(
            "REGISTER STREAM DownTime COMPUTED EVERY 24h AS SELECT ?downTime FROM STREAM <http://ex/s> [RANGE 24h STEP 1m]
             WHERE { ?o <http://ex/v> ?voltage } AGGREGATE {(?downTime, COUNT, {?voltage}) FILTER(?voltage < 5)}",
        )
        .unwrap()
    }

    fn availability() -> RegisteredQuery {
        parse_query(
            "REGISTER STREAM Availability COMPUTED EVERY 24h AS SELECT ((1440 - ?downTime) / 1440 AS ?availability)
             FROM STREAM <http://cpps.example/stream/DownTime> [RANGE 24h STEP 1m]",
        )
        .unwrap()
    }

    fn engine() -> Engine {
        let mut e = Engine::new(StaticGraph::new());
        e.declare_input(S).unwrap();
        e
    }

    #[test]
    fn registration_creates_buffer_and_schedule() {
        let mut e = engine();
        e.register(down_time()).unwrap();
        assert!(e.buffer("http://cpps.example/stream/DownTime").is_some());
        assert_eq!(e.next_fire_time("DownTime"), Some(86_400_000));
        assert_eq!(
            e.register(down_time()),
            Err(EngineError::DuplicateQuery("DownTime".into()))
        );
    }

    #[test]
    fn unknown_source_is_rejected() {
        let mut e = Engine::new(StaticGraph::new());
        assert!(matches!(e.register(down_time()), Err(EngineError::Validation { .. })));
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let mut e = engine();
        let q = parse_query(
            "REGISTER STREAM Loop COMPUTED EVERY 1m AS SELECT ?x FROM STREAM <http://cpps.example/stream/Loop> [RANGE 1m STEP 1m]",
        )
        .unwrap();
        assert!(matches!(e.register(q), Err(EngineError::Cycle(_))));
    }

    #[test]
    fn no_queries_no_emissions() {
        let mut e = engine();
        assert!(e.advance_clock(86_400_000).unwrap().is_empty());
        assert_eq!(e.clock(), 86_400_000);
        assert!(matches!(e.advance_clock(5), Err(EngineError::ClockBackwards { .. })));
    }

    #[test]
    fn cascade_down_time_into_availability() {
        let mut e = engine();
        e.register(availability()).unwrap_err();
        e.register(down_time()).unwrap();
        e.register(availability()).unwrap();
        for m in 0..1440u64 {
            let v = if (600..744).contains(&m) { "0.0" } else { "12.0" };
            e.push(S, voltage(m, v, (m + 1) * 60_000)).unwrap();
        }
        let out = e.advance_clock(86_400_000).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].query, "DownTime");
        assert_eq!(out[0].rows[0].get("downTime"), Some(&Term::integer(144)));
        assert_eq!(out[1].query, "Availability");
        assert_eq!(out[1].rows[0].get("availability"), Some(&Term::decimal("0.9")));
        assert_eq!(e.emissions().len(), 2);
    }

    #[test]
    fn result_streams_are_not_inputs() {
        let mut e = engine();
        e.register(down_time()).unwrap();
        let err = e
            .push("http://cpps.example/stream/DownTime", voltage(0, "1.0", 1))
            .unwrap_err();
        assert!(matches!(err, EngineError::NotAnInput(_)));
        assert!(matches!(
            e.push("http://ex/nope", voltage(0, "1.0", 1)),
            Err(EngineError::UnknownStream(_))
        ));
    }

    #[test]
    fn out_of_order_push_is_rejected() {
        let mut e = engine();
        e.push(S, voltage(0, "1.0", 5)).unwrap();
        assert!(matches!(
            e.push(S, voltage(1, "1.0", 3)),
            Err(EngineError::OutOfOrder { .. })
        ));
    }

    #[test]
    fn restricted_query_cannot_read_raw_streams() {
        let mut e = engine();
        let r = e.register_with_policy(down_time(), AccessPolicy::UpstreamOnly);
        assert!(matches!(r, Err(EngineError::RawAccessDenied { .. })));
        e.register(down_time()).unwrap();
        e.register_with_policy(availability(), AccessPolicy::UpstreamOnly)
            .unwrap();
    }

    #[test]
    fn ingest_queue_preserves_order_across_threads() {
        let mut e = engine();
        let handle = e.ingest_handle();
        std::thread::spawn(move || {
            for m in 0..10u64 {
                assert!(handle.send(S, voltage(m, "1.0", m)));
            }
        })
        .join()
        .unwrap();
        assert_eq!(e.drain_ingest().unwrap(), 10);
        assert_eq!(e.buffer(S).unwrap().len(), 10);
    }

    #[test]
    fn eviction_keeps_only_reachable_elements() {
        let mut e = Engine::with_config(
            StaticGraph::new(),
            EngineConfig {
                evict: true,
                ..EngineConfig::default()
            },
        );
        e.declare_input(S).unwrap();
        let q = parse_query(
            "REGISTER STREAM C COMPUTED EVERY 1m AS SELECT ?n FROM STREAM <http://ex/s> [RANGE 2m STEP 1m]
             WHERE { ?o <http://ex/v> ?v } AGGREGATE {(?n, COUNT, {?v})}",
        )
        .unwrap();
        e.register(q).unwrap();
        for m in 0..10u64 {
            e.push(S, voltage(m, "1.0", m * 60_000 + 1)).unwrap();
        }
        e.advance_clock(5 * 60_000).unwrap();
        // clock 5m, range 2m: only t > 3m can reach a future window
        assert!(e.buffer(S).unwrap().elements().all(|x| x.timestamp > 3 * 60_000));
    }
}
