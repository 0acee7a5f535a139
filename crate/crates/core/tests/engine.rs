use cpps_core::csparql::parse_query;
use cpps_core::engine::{write_jsonl, Emission, Engine, EngineConfig, EngineError};
use cpps_core::rdf::{StaticGraph, Term, TimestampedTriple, Triple};
use proptest::prelude::*;

const S: &str = "http://ex/s";
const BASE: &str = "http://cpps.example/stream/";

fn reading(n: usize, v: u8, t: u64) -> TimestampedTriple {
    TimestampedTriple::new(
        Triple::new(
            Term::blank(format!("o{n}")),
            Term::iri("http://ex/v"),
            Term::integer(v.into()),
        )
        .unwrap(),
        t,
    )
}

fn low_count(range_ms: u64, every_ms: u64) -> String {
    format!(
        "REGISTER STREAM Low COMPUTED EVERY {every_ms}ms AS SELECT ?low FROM STREAM <{S}> [RANGE {range_ms}ms STEP 1ms]
         WHERE {{ ?o <http://ex/v> ?v }} AGGREGATE {{(?low, COUNT, {{?v}}) FILTER(?v < 5)}}"
    )
}

const DOUBLED: &str = "REGISTER STREAM Doubled COMPUTED EVERY 7ms AS SELECT (?low * 2 AS ?twice)
     FROM STREAM <http://cpps.example/stream/Low> [RANGE 7ms STEP 1ms]";

fn run(elements: &[(u8, u64)], range: u64, every: u64, evict: bool, with_child: bool) -> Vec<Emission> {
    let config = EngineConfig {
        evict,
        ..EngineConfig::default()
    };
    let mut e = Engine::with_config(StaticGraph::new(), config);
    e.declare_input(S).unwrap();
    e.register(parse_query(&low_count(range, every)).unwrap()).unwrap();
    if with_child {
        e.register(parse_query(DOUBLED).unwrap()).unwrap();
    }
    for (n, &(v, t)) in elements.iter().enumerate() {
        // everything stamped t must be in before t fires
        e.advance_clock(t.saturating_sub(1)).unwrap();
        e.push(S, reading(n, v, t)).unwrap();
    }
    let end = elements.last().map_or(0, |x| x.1) + range + every;
    e.advance_clock(end).unwrap();
    e.emissions().to_vec()
}

fn count_of(em: &Emission, var: &str) -> i64 {
    assert_eq!(em.rows.len(), 1, "{em:?}");
    match em.rows[0].get(var) {
        Some(Term::Literal { lexical, .. }) => lexical.parse().unwrap(),
        other => panic!("{other:?}"),
    }
}

fn elements() -> impl Strategy<Value = Vec<(u8, u64)>> {
    prop::collection::vec((0u8..10, 0u64..6), 0..60).prop_map(|steps| {
        let mut t = 0;
        steps
            .into_iter()
            .map(|(v, dt)| {
                t += dt;
                (v, t)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn windowed_count_matches_brute_force(els in elements(), range in 1u64..40, every in 1u64..15) {
        let emissions = run(&els, range, every, false, false);
        let last = els.last().map_or(0, |x| x.1) + range + every;
        prop_assert_eq!(emissions.len() as u64, last / every);
        for em in &emissions {
            let f = em.fire_time;
            prop_assert_eq!(f % every, 0);
            let want = els.iter().filter(|(v, t)| *v < 5 && *t + range > f && *t <= f).count() as i64;
            prop_assert_eq!(count_of(em, "low"), want, "fire {}", f);
        }
    }

    #[test]
    fn eviction_does_not_change_results(els in elements(), range in 1u64..40, every in 1u64..15) {
        prop_assert_eq!(run(&els, range, every, true, true), run(&els, range, every, false, true));
    }

    #[test]
    fn downstream_sees_upstream_values(els in elements(), range in 1u64..40) {
        let emissions = run(&els, range, 7, false, true);
        let low: Vec<_> = emissions.iter().filter(|e| e.query == "Low").collect();
        let doubled: Vec<_> = emissions.iter().filter(|e| e.query == "Doubled").collect();
        prop_assert_eq!(low.len(), doubled.len());
        for (l, d) in low.iter().zip(&doubled) {
            prop_assert_eq!(l.fire_time, d.fire_time);
            prop_assert_eq!(count_of(d, "twice"), 2 * count_of(l, "low"));
        }
        // producers fire before consumers at the same instant
        for pair in emissions.windows(2) {
            if pair[0].fire_time == pair[1].fire_time {
                prop_assert_eq!((pair[0].query.as_str(), pair[1].query.as_str()), ("Low", "Doubled"));
            }
        }
    }

    #[test]
    fn logs_are_byte_identical(els in elements(), range in 1u64..40, every in 1u64..15) {
        let log = |em: &[Emission]| {
            let mut buf = Vec::new();
            write_jsonl(&mut buf, em).unwrap();
            buf
        };
        prop_assert_eq!(log(&run(&els, range, every, true, true)), log(&run(&els, range, every, true, true)));
    }
}

#[test]
fn registration_order_does_not_matter_for_firing_order() {
    let mut e = Engine::new(StaticGraph::new());
    e.declare_input(S).unwrap();
    assert!(matches!(
        e.register(parse_query(DOUBLED).unwrap()),
        Err(EngineError::Validation { .. }) | Err(EngineError::UnknownStream(_))
    ));
    e.register(parse_query(&low_count(7, 7)).unwrap()).unwrap();
    e.register(parse_query(DOUBLED).unwrap()).unwrap();
    assert_eq!(e.query_order(), vec!["Low", "Doubled"]);
    assert_eq!(e.output_stream("Low"), format!("{BASE}Low"));
    assert!(matches!(
        e.push(&format!("{BASE}Low"), reading(0, 1, 1)),
        Err(EngineError::NotAnInput(_))
    ));
}

#[test]
fn empty_window_counts_zero() {
    let em = run(&[], 10, 5, false, false);
    assert_eq!(em.len(), 3);
    assert!(em.iter().all(|e| count_of(e, "low") == 0));
}

#[test]
fn ingest_handle_feeds_the_engine() {
    let mut e = Engine::new(StaticGraph::new());
    e.declare_input(S).unwrap();
    e.register(parse_query(&low_count(10, 10)).unwrap()).unwrap();
    let h = e.ingest_handle();
    let worker = std::thread::spawn(move || {
        for n in 0..5 {
            assert!(h.send(S, reading(n, n as u8, n as u64 + 1)));
        }
    });
    worker.join().unwrap();
    assert_eq!(e.drain_ingest().unwrap(), 5);
    let em = e.advance_clock(10).unwrap();
    assert_eq!(count_of(&em[0], "low"), 5);
}
