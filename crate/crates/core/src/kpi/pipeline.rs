use std::collections::BTreeMap;

use crate::csparql::{parse_queries, ParseError, RegisteredQuery};
use crate::engine::{AccessPolicy, Emission, Engine, EngineConfig, EngineError, DEFAULT_STREAM_BASE};
use crate::rdf::{decimal_string, number_from_f64, Number, TimestampedTriple};
use crate::simulator::{oracle_kpis, simulate, GroundTruth, ScenarioConfig, ScenarioError, MINUTE_MS};
use crate::sosa::{build_asset_graph, PlantConfig, PlantError, SensorKind, PLANT_BASE};

use super::report::kpis_at;
use super::KpiValues;

/// The six KPI queries exactly as originally written. They parse and
/// validate, but their WHERE clauses bind `?voltage`, `?product` and
/// `?defect` to features of interest rather than to observation results,
/// so they never see the stream data.
pub const LITERAL_LISTINGS: &str = r#"REGISTER STREAM DownTime COMPUTED EVERY 24h AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ?downTime
  FROM STREAM <http://../production> [RANGE 24h STEP 1m]
  WHERE {?sensor sosa:observes ?voltage.
         ?voltage rdf:type sosa:FeatureOfInterest.
         ?productionLine sosa:hosts ?sensor}
  AGGREGATE {(?downTime, COUNT, {?voltage})
    FILTER (?voltage < 5 && ?productionLine = <http://.../ProductionLine>)}

REGISTER STREAM Availability COMPUTED EVERY 24h AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT (1440-?downTime)/1440 AS ?availability
  FROM STREAM <http://../DownTime> [RANGE 24h STEP 1m]

REGISTER STREAM TotalProduction COMPUTED EVERY 24h AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ?total
  FROM STREAM <http://../production> [RANGE 24h STEP 1m]
  WHERE {
         ?assemblySensor sosa:observes ?product.
         ?product rdf:type sosa:FeatureOfInterest.
         ?platform sosa:hosts ?assemblySensor
         }
  AGGREGATE {(?total, COUNT, {?product})
    FILTER (?platform = <http://.../ASSEMBLY/AP1A>)}

REGISTER STREAM Performance COMPUTED EVERY 24h AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT (25 * ?total)/(1440-?downTime) AS ?performance
  FROM STREAM <http://../TotalProduction> [RANGE 24h STEP 1m]
  FROM STREAM <http://../DownTime> [RANGE 24h STEP 1m]

REGISTER STREAM Quality COMPUTED EVERY 24h AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ((?total - ?defectTotal)/?total) AS ?quality
  FROM STREAM <http://../TotalProduction> [RANGE 24h STEP 1m]
  FROM STREAM <http://../production> [RANGE 24h STEP 1m]
  WHERE {
         ?integritySensor sosa:observes ?defect.
         ?defect rdf:type sosa:FeatureOfInterest.
         ?platform sosa:hosts ?integritySensor
         }
  AGGREGATE {(?defectTotal, COUNT, {?defect})
        FILTER (?platform = <http://.../INTEGRITY/IT1A>)}

REGISTER QUERY OEE COMPUTED EVERY 24h AS
    SELECT (?availability * ?performance * ?quality) AS ?oee
    FROM STREAM <http://../Availability> [RANGE 24h STEP 1m]
    FROM STREAM <http://../Performance> [RANGE 24h STEP 1m]
    FROM STREAM <http://../Quality> [RANGE 24h STEP 1m]
"#;

/// Rewrites the elided `<http://../X>` stream IRIs and `<http://.../X>`
/// plant IRIs of [`LITERAL_LISTINGS`] to the default namespaces, so the
/// listings can be registered.
pub fn resolve_literal_iris(text: &str) -> String {
    text.replace("<http://../", &format!("<{DEFAULT_STREAM_BASE}"))
        .replace("<http://.../", &format!("<{PLANT_BASE}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// [`LITERAL_LISTINGS`], parsed as written.
    Literal,
    /// The same six queries over the observation shape the simulator emits.
    Executable,
}

/// Constants baked into the executable queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineParams {
    /// Window length, firing period and the time base of availability.
    pub total_time_minutes: u64,
    pub cycle_time: Number,
    /// Line is down while its voltage is strictly below this.
    pub voltage_threshold: Number,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            total_time_minutes: 1440,
            cycle_time: Number::from_integer(25.into()),
            voltage_threshold: Number::from_integer(5.into()),
        }
    }
}

impl PipelineParams {
    /// One window spanning the whole scenario.
    pub fn for_scenario(scenario: &ScenarioConfig) -> Self {
        PipelineParams {
            total_time_minutes: scenario.duration_minutes as u64,
            cycle_time: scenario.cycle_time(),
            ..Self::default()
        }
    }
}

// Renders a constant so that it parses back to the same exact value.
fn query_number(n: &Number) -> String {
    if n.is_integer() {
        return n.to_integer().to_string();
    }
    match decimal_string(n) {
        Some(s) => s,
        None => format!("({} / {})", n.numer(), n.denom()),
    }
}

/// The executable pipeline for `plant`, as query text.
pub fn executable_pipeline_text(params: &PipelineParams, plant: &PlantConfig) -> String {
    let m = params.total_time_minutes;
    let w = if m.is_multiple_of(60) {
        format!("{}h", m / 60)
    } else {
        format!("{m}m")
    };
    let t = params.total_time_minutes;
    let c = query_number(&params.cycle_time);
    let v = query_number(&params.voltage_threshold);
    let base = DEFAULT_STREAM_BASE;
    let line = &plant.line_iri;
    let host = |kind| plant.sensor(kind).map(|s| s.host.clone()).unwrap_or_default();
    let assembly = host(SensorKind::ProductCounter);
    let integrity = host(SensorKind::DefectDetector);
    format!(
        r#"REGISTER STREAM DownTime COMPUTED EVERY {w} AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ?downTime
  FROM STREAM <{base}production> [RANGE {w} STEP 1m]
  WHERE {{?obs sosa:madeBySensor ?sensor.
         ?obs sosa:hasSimpleResult ?voltage.
         ?sensor sosa:observes ?feature.
         ?feature rdf:type sosa:FeatureOfInterest.
         ?productionLine sosa:hosts ?sensor}}
  AGGREGATE {{(?downTime, COUNT, {{?voltage}})
    FILTER (?voltage < {v} && ?productionLine = <{line}>)}}

REGISTER STREAM Availability COMPUTED EVERY {w} AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ({t}-?downTime)/{t} AS ?availability
  FROM STREAM <{base}DownTime> [RANGE {w} STEP 1m]

REGISTER STREAM TotalProduction COMPUTED EVERY {w} AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ?total
  FROM STREAM <{base}production> [RANGE {w} STEP 1m]
  WHERE {{
         ?obs sosa:madeBySensor ?assemblySensor.
         ?assemblySensor sosa:observes ?product.
         ?product rdf:type sosa:FeatureOfInterest.
         ?platform sosa:hosts ?assemblySensor
         }}
  AGGREGATE {{(?total, COUNT, {{?product}})
    FILTER (?platform = <{assembly}>)}}

REGISTER STREAM Performance COMPUTED EVERY {w} AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ({c} * ?total)/({t}-?downTime) AS ?performance
  FROM STREAM <{base}TotalProduction> [RANGE {w} STEP 1m]
  FROM STREAM <{base}DownTime> [RANGE {w} STEP 1m]

REGISTER STREAM Quality COMPUTED EVERY {w} AS
  PREFIX sosa: <http://www.w3.org/ns/sosa/>
  SELECT ((?total - ?defectTotal)/?total) AS ?quality
  FROM STREAM <{base}TotalProduction> [RANGE {w} STEP 1m]
  FROM STREAM <{base}production> [RANGE {w} STEP 1m]
  WHERE {{
         ?obs sosa:madeBySensor ?integritySensor.
         ?integritySensor sosa:observes ?defect.
         ?defect rdf:type sosa:FeatureOfInterest.
         ?platform sosa:hosts ?integritySensor
         }}
  AGGREGATE {{(?defectTotal, COUNT, {{?defect}})
        FILTER (?platform = <{integrity}>)}}

REGISTER QUERY OEE COMPUTED EVERY {w} AS
    SELECT (?availability * ?performance * ?quality) AS ?oee
    FROM STREAM <{base}Availability> [RANGE {w} STEP 1m]
    FROM STREAM <{base}Performance> [RANGE {w} STEP 1m]
    FROM STREAM <{base}Quality> [RANGE {w} STEP 1m]
"#
    )
}

/// The six queries with default constants and the default plant.
pub fn load_pipeline(mode: PipelineMode) -> Vec<RegisteredQuery> {
    let text = match mode {
        PipelineMode::Literal => LITERAL_LISTINGS.to_owned(),
        PipelineMode::Executable => executable_pipeline_text(&PipelineParams::default(), &PlantConfig::default_plant()),
    };
    parse_queries(&text).expect("built-in pipeline parses")
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("voltage threshold {threshold} does not separate down ({down} V) from nominal ({nominal} V)")]
    InconsistentVoltages { threshold: String, down: f64, nominal: f64 },
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub engine: KpiValues,
    pub oracle: KpiValues,
    pub ground_truth: GroundTruth,
    pub emissions: Vec<Emission>,
    /// Scenario end; the final fire time.
    pub end_ms: u64,
}

impl PipelineRun {
    pub fn agrees(&self, tol: f64) -> bool {
        self.engine.agrees_with(&self.oracle, tol)
    }
}

/// Simulates `scenario`, runs the executable pipeline over it and computes
/// the oracle KPIs for comparison.
pub fn run_pipeline(plant: &PlantConfig, scenario: &ScenarioConfig) -> Result<PipelineRun, PipelineError> {
    let params = PipelineParams::for_scenario(scenario);
    let threshold = &params.voltage_threshold;
    let down = number_from_f64(scenario.down_voltage).expect("validated");
    let nominal = number_from_f64(scenario.nominal_voltage).expect("validated");
    if !(&down < threshold && threshold <= &nominal) {
        return Err(PipelineError::InconsistentVoltages {
            threshold: query_number(threshold),
            down: scenario.down_voltage,
            nominal: scenario.nominal_voltage,
        });
    }
    let queries = parse_queries(&executable_pipeline_text(&params, plant))?;
    run_queries(
        plant,
        scenario,
        queries,
        EngineConfig {
            evict: true,
            ..EngineConfig::default()
        },
    )
}

/// Replays the simulated streams into an engine running `queries`, one
/// timestamp at a time, then reads the KPIs emitted at the scenario end.
pub fn run_queries(
    plant: &PlantConfig,
    scenario: &ScenarioConfig,
    queries: Vec<RegisteredQuery>,
    config: EngineConfig,
) -> Result<PipelineRun, PipelineError> {
    let queries = queries.into_iter().map(|q| (q, AccessPolicy::Full)).collect();
    run_queries_with_policy(plant, scenario, queries, config)
}

/// [`run_queries`] with an access policy per query.
pub fn run_queries_with_policy(
    plant: &PlantConfig,
    scenario: &ScenarioConfig,
    queries: Vec<(RegisteredQuery, AccessPolicy)>,
    config: EngineConfig,
) -> Result<PipelineRun, PipelineError> {
    let sim = simulate(scenario, plant)?;
    let mut engine = Engine::with_config(build_asset_graph(plant)?, config);
    for stream in sim.streams.keys() {
        engine.declare_input(stream.clone())?;
    }
    for (q, access) in queries {
        engine.register_with_policy(q, access)?;
    }

    let mut by_time: BTreeMap<u64, Vec<(&str, &TimestampedTriple)>> = BTreeMap::new();
    for (stream, elements) in &sim.streams {
        for e in elements {
            by_time.entry(e.timestamp).or_default().push((stream, e));
        }
    }
    for (t, batch) in by_time {
        for (stream, e) in batch {
            engine.push(stream, e.clone())?;
        }
        engine.advance_clock(t)?;
    }
    let end_ms = scenario.duration_minutes as u64 * MINUTE_MS;
    engine.advance_clock(end_ms)?;

    let emissions = engine.emissions().to_vec();
    Ok(PipelineRun {
        engine: kpis_at(&emissions, end_ms),
        oracle: oracle_kpis(&sim.ground_truth, scenario),
        ground_truth: sim.ground_truth,
        emissions,
        end_ms,
    })
}
