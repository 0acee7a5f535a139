use cpps_core::csparql::parse_queries;
use cpps_core::engine::{AccessPolicy, EngineConfig};
use cpps_core::kpi::{
    kpi_report, resolve_literal_iris, run_pipeline, run_queries, run_queries_with_policy, write_kpi_csv, KpiFlag,
    LITERAL_LISTINGS,
};
use cpps_core::rdf::Number;
use cpps_core::simulator::ScenarioConfig;
use cpps_core::sosa::PlantConfig;
use proptest::prelude::*;

fn r(a: i64, b: i64) -> Number {
    Number::new(a.into(), b.into())
}

#[test]
fn reference_kpis_are_exact() {
    let run = run_pipeline(&PlantConfig::default_plant(), &ScenarioConfig::reference()).unwrap();
    assert_eq!(run.engine.availability, Some(r(9, 10)));
    assert_eq!(run.engine.performance, Some(r(25, 27)));
    assert_eq!(run.engine.quality, Some(r(15, 16)));
    assert_eq!(run.engine.oee, Some(r(25, 32)));
    assert_eq!(run.engine, run.oracle);
}

#[test]
fn all_down_leaves_performance_undefined() {
    let run = run_pipeline(&PlantConfig::default_plant(), &ScenarioConfig::all_down()).unwrap();
    assert_eq!(run.engine.availability, Some(r(0, 1)));
    assert!(run.engine.flags.contains(&KpiFlag::PerformanceUndefined));
    assert!(run.engine.flags.contains(&KpiFlag::QualityUndefined));
    assert!(run.engine.oee.is_none());
    assert!(run.agrees(0.0));
}

#[test]
fn literal_listings_register_but_see_no_observations() {
    // Their patterns bind the feature of interest, not the observed value:
    // the static sensor description matches once per window, and the
    // voltage filter compares an IRI, which is never true.
    let queries = parse_queries(&resolve_literal_iris(LITERAL_LISTINGS)).unwrap();
    let run = run_queries(
        &PlantConfig::default_plant(),
        &ScenarioConfig::reference(),
        queries,
        EngineConfig::default(),
    )
    .unwrap();
    assert_eq!(run.engine.availability, Some(r(1, 1)));
    assert_eq!(run.engine.performance, Some(r(25, 1440)));
    assert_eq!(run.engine.quality, Some(r(0, 1)));
    assert_eq!(run.engine.oee, Some(r(0, 1)));
    assert!(!run.agrees(1e-9));
}

#[test]
fn derived_queries_need_only_their_upstreams() {
    let plant = PlantConfig::default_plant();
    let scenario = ScenarioConfig::reference();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/queries/pipeline.rq")).unwrap();
    let queries = parse_queries(&text)
        .unwrap()
        .into_iter()
        .map(|q| {
            let access = match q.name.as_str() {
                "Availability" | "Performance" | "OEE" => AccessPolicy::UpstreamOnly,
                _ => AccessPolicy::Full,
            };
            (q, access)
        })
        .collect();
    let restricted = run_queries_with_policy(&plant, &scenario, queries, EngineConfig::default()).unwrap();
    let full = run_pipeline(&plant, &scenario).unwrap();
    assert_eq!(restricted.engine, full.engine);
}

#[test]
fn report_is_one_row_at_scenario_end() {
    let run = run_pipeline(&PlantConfig::default_plant(), &ScenarioConfig::reference()).unwrap();
    let rows = kpi_report(&run.emissions);
    assert_eq!(rows.len(), 1);
    let mut buf = Vec::new();
    write_kpi_csv(&mut buf, &rows).unwrap();
    assert!(String::from_utf8(buf)
        .unwrap()
        .ends_with("86400000,0.9,0.9259259259259259,0.9375,0.78125,\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_agrees_with_oracle(seed in any::<u64>(), down in 0.0f64..0.3, defect in 0.0f64..0.2, cycle in 5u32..60) {
        let scenario = ScenarioConfig {
            seed,
            downtime_probability: Some(down),
            defect_probability: defect,
            cycle_time_minutes: cycle as f64,
            ..ScenarioConfig::default()
        };
        let run = run_pipeline(&PlantConfig::default_plant(), &scenario).unwrap();
        prop_assert_eq!(&run.engine, &run.oracle);
    }
}
