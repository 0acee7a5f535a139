//! `cpps`: replay a production scenario through the KPI queries under a
//! virtual clock and write emission logs and KPI reports.
//!
//! Exit codes: 0 ok, 1 engine and oracle disagree, 2 file or I/O error,
//! 3 parse error, 4 invalid configuration or query registration,
//! 5 runtime error, 6 dependency cycle.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpps_core::csparql::{parse_queries, serialize_expr, QueryKind, RegisteredQuery};
use cpps_core::engine::{write_csv, write_jsonl, DependencyGraph, EngineConfig, EngineError, DEFAULT_STREAM_BASE};
use cpps_core::kpi::{
    executable_pipeline_text, kpi_report, run_pipeline, run_queries, write_kpi_csv, write_kpi_json, PipelineError,
    PipelineParams, PipelineRun,
};
use cpps_core::simulator::{ScenarioConfig, ScenarioError};
use cpps_core::sosa::{PlantConfig, PlantError};

/// Engine and oracle KPIs must agree this closely under --compare-oracle.
const ORACLE_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "cpps",
    version,
    about = "Continuous OEE queries over a simulated production line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run the queries over it.
    Run(RunArgs),
    /// Print the stream dependency graph and firing schedule of a query file.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Plant description (TOML). Defaults to the built-in line.
    #[arg(long)]
    asset: Option<PathBuf>,
    /// Built-in scenario (reference, perfect, all-down) or a TOML file.
    #[arg(long, default_value = "reference")]
    scenario: String,
    /// Query file. Defaults to the built-in KPI pipeline for the scenario.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Parse the queries, print a summary and stop. Writes nothing.
    #[arg(long, conflicts_with = "compare_oracle")]
    parse_only: bool,
    /// Exit 1 unless the engine KPIs match the closed-form oracle.
    #[arg(long)]
    compare_oracle: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    /// Query file. Defaults to the built-in KPI pipeline.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Prefix of the result stream of each query.
    #[arg(long, default_value = DEFAULT_STREAM_BASE)]
    stream_base: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<PlantError> for Failure {
    fn from(e: PlantError) -> Self {
        let code = match e {
            PlantError::Parse(_) => 3,
            PlantError::Invalid(_) => 4,
        };
        fail(code, e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Parse(_) => 3,
            ScenarioError::Invalid(_) | ScenarioError::UnknownBuiltin(_) => 4,
        };
        fail(code, e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::Cycle(_) => 6,
            EngineError::DuplicateQuery(_)
            | EngineError::DuplicateStream(_)
            | EngineError::UnknownStream(_)
            | EngineError::Validation { .. }
            | EngineError::RawAccessDenied { .. } => 4,
            _ => 5,
        };
        fail(code, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Scenario(e) => e.into(),
            PipelineError::Plant(e) => e.into(),
            PipelineError::Engine(e) => e.into(),
            PipelineError::Parse(e) => fail(3, e.to_string()),
            e @ PipelineError::InconsistentVoltages { .. } => fail(4, e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn load_queries(path: &Path) -> Result<Vec<RegisteredQuery>, Failure> {
    parse_queries(&read(path)?).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn load_scenario(arg: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    if path.exists() || arg.ends_with(".toml") {
        return Ok(ScenarioConfig::from_toml(&read(path)?)?);
    }
    Ok(ScenarioConfig::builtin(arg)?)
}

fn summarize(q: &RegisteredQuery) -> String {
    let kind = match q.kind {
        QueryKind::Stream => "STREAM",
        QueryKind::Query => "QUERY",
    };
    let mut s = format!("{kind} {} every {}", q.name, q.compute_every);
    let select: Vec<String> = q
        .select
        .iter()
        .map(|item| match &item.alias {
            Some(a) => format!("({} AS ?{a})", serialize_expr(&item.expr)),
            None => serialize_expr(&item.expr),
        })
        .collect();
    let _ = write!(s, "\n  select {}", select.join(" "));
    for src in &q.sources {
        let _ = write!(s, "\n  from {} [RANGE {} STEP {}]", src.stream, src.range, src.step);
    }
    let _ = write!(
        s,
        "\n  {} pattern(s), {} filter(s), {} aggregate(s)",
        q.where_clause.len(),
        q.filters.len(),
        q.aggregates.len()
    );
    s
}

fn write_file(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), String>,
) -> Result<(), Failure> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w)
        .and_then(|()| w.flush().map_err(|e| e.to_string()))
        .map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn write_outputs(run: &PipelineRun, format: Format, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| fail(2, format!("{}: {e}", dir.display())))?;
    let report = kpi_report(&run.emissions);
    match format {
        Format::Json => {
            write_file(dir, "emissions.jsonl", |w| {
                write_jsonl(w, &run.emissions).map_err(|e| e.to_string())
            })?;
            write_file(dir, "kpi.json", |w| {
                write_kpi_json(w, &report).map_err(|e| e.to_string())
            })?;
        }
        Format::Csv => {
            write_file(dir, "emissions.csv", |w| {
                write_csv(w, &run.emissions).map_err(|e| e.to_string())
            })?;
            write_file(dir, "kpi.csv", |w| write_kpi_csv(w, &report).map_err(|e| e.to_string()))?;
        }
    }
    write_file(dir, "ground_truth.json", |w| {
        writeln!(w, "{}", run.ground_truth.to_json()).map_err(|e| e.to_string())
    })
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    if args.parse_only {
        let queries = match &args.queries {
            Some(p) => load_queries(p)?,
            None => parse_queries(&executable_pipeline_text(
                &PipelineParams::default(),
                &PlantConfig::default_plant(),
            ))
            .map_err(|e| fail(3, e.to_string()))?,
        };
        println!("{} queries parsed", queries.len());
        for q in &queries {
            println!("{}", summarize(q));
        }
        return Ok(());
    }

    // Everything is loaded and checked before anything is written.
    let plant = match &args.asset {
        Some(p) => PlantConfig::from_toml(&read(p)?)?,
        None => PlantConfig::default_plant(),
    };
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let queries = args.queries.as_deref().map(load_queries).transpose()?;

    let config = EngineConfig {
        evict: true,
        ..EngineConfig::default()
    };
    let run = match queries {
        Some(qs) => run_queries(&plant, &scenario, qs, config)?,
        None => run_pipeline(&plant, &scenario)?,
    };
    write_outputs(&run, args.format, &args.out)?;

    println!("engine  {}", run.engine);
    if args.compare_oracle {
        println!("oracle  {}", run.oracle);
        if !run.agrees(ORACLE_TOL) {
            return Err(fail(
                1,
                format!("engine and oracle KPIs differ by more than {ORACLE_TOL}"),
            ));
        }
        println!("agree within {ORACLE_TOL}");
    }
    Ok(())
}

fn cmd_explain(args: ExplainArgs) -> Result<(), Failure> {
    let queries = match &args.queries {
        Some(p) => load_queries(p)?,
        None => parse_queries(&executable_pipeline_text(
            &PipelineParams::default(),
            &PlantConfig::default_plant(),
        ))
        .map_err(|e| fail(3, e.to_string()))?,
    };
    let graph = DependencyGraph::build(&queries, &args.stream_base);
    let order = graph.topological_order().map_err(|e| fail(6, e.to_string()))?;
    print!("{}", graph.render());
    println!("schedule");
    for name in order {
        let q = queries
            .iter()
            .find(|q| q.name == name)
            .expect("graph nodes come from the queries");
        let period = q.compute_every.as_millis();
        println!("  {name} every {} at {period}, {}, ... ms", q.compute_every, 2 * period);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Explain(args) => cmd_explain(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
