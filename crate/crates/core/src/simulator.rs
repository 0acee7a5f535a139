//! Minute-stepped production line simulator with exact ground truth.
//!
//! Minute `m` (0-based) is reported at the end of the minute,
//! `t = (m + 1) * 60_000` ms, so a day of `D` minutes fills the window
//! `(0, D * 60_000]` exactly. Each minute produces one voltage observation.
//! Operating minutes advance a production clock; the `k`-th product
//! completes in the minute where cumulative operating time reaches
//! `k * cycle_time`. Down minutes pause that clock.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. A Bernoulli
//! draw with probability `p` takes `next_u64() >> 11`, scales it by
//! `2^-53` and succeeds when the result is `< p`. Draw order: one draw per
//! minute for random downtime (only when `downtime_probability` is set),
//! then one draw per completed product for defects (only when defects are
//! not injected).

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::engine::DEFAULT_STREAM_BASE;
use crate::kpi::{self, KpiValues};
use crate::rdf::{decimal_string, number_from_f64, Number, Term, TimestampedTriple};
use crate::sosa::{ObservationMinter, PlantConfig, SensorKind};

pub const MINUTE_MS: u64 = 60_000;

/// Name of the raw input stream every sensor reports to.
pub fn production_stream() -> String {
    format!("{DEFAULT_STREAM_BASE}production")
}

fn default_duration() -> u32 {
    1440
}
fn default_cycle() -> f64 {
    25.0
}
fn default_nominal() -> f64 {
    12.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_duration")]
    pub duration_minutes: u32,
    /// Half-open `[start, end)` minute ranges.
    #[serde(default)]
    pub downtime_intervals: Vec<[u32; 2]>,
    /// Per-minute chance of being down; exclusive with `downtime_intervals`.
    #[serde(default)]
    pub downtime_probability: Option<f64>,
    #[serde(default = "default_cycle")]
    pub cycle_time_minutes: f64,
    #[serde(default)]
    pub defect_probability: f64,
    #[serde(default = "default_nominal")]
    pub nominal_voltage: f64,
    #[serde(default)]
    pub down_voltage: f64,
    #[serde(default)]
    pub seed: u64,
    /// Minutes in which one product completes each, replacing the cycle
    /// rule. A minute may repeat; every minute must be an operating minute.
    #[serde(default)]
    pub injected_completions: Option<Vec<u32>>,
    /// 0-based completion indices that are defective, replacing the draw.
    #[serde(default)]
    pub injected_defects: Option<Vec<usize>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            duration_minutes: default_duration(),
            downtime_intervals: Vec::new(),
            downtime_probability: None,
            cycle_time_minutes: default_cycle(),
            defect_probability: 0.0,
            nominal_voltage: default_nominal(),
            down_voltage: 0.0,
            seed: 0,
            injected_completions: None,
            injected_defects: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("cannot read scenario: {0}")]
    Parse(String),
    #[error("unknown built-in scenario '{0}' (expected reference, perfect or all-down)")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub down_minutes: u64,
    pub total_production: u64,
    pub defected: u64,
    pub operating_minutes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    /// Input stream IRI to its elements in timestamp order.
    pub streams: BTreeMap<String, Vec<TimestampedTriple>>,
    pub ground_truth: GroundTruth,
}

impl ScenarioConfig {
    /// 144 down minutes, 48 products, 3 defects: availability 0.9,
    /// performance 25/27, quality 0.9375, OEE 0.78125.
    pub fn reference() -> Self {
        let down = 600..744u32;
        // every 27th operating minute closes a product
        let operating: Vec<u32> = (0..1440).filter(|m| !down.contains(m)).collect();
        let completions = (1..=48).map(|k| operating[k * 27 - 1]).collect();
        ScenarioConfig {
            downtime_intervals: vec![[down.start, down.end]],
            injected_completions: Some(completions),
            injected_defects: Some(vec![11, 23, 35]),
            ..Self::default()
        }
    }

    /// No stops, no defects, and a duration that is a whole number of
    /// cycles, so every factor is exactly 1.
    pub fn perfect() -> Self {
        ScenarioConfig {
            duration_minutes: 1500,
            ..Self::default()
        }
    }

    pub fn all_down() -> Self {
        ScenarioConfig {
            downtime_intervals: vec![[0, 1440]],
            ..Self::default()
        }
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "reference" => Ok(Self::reference()),
            "perfect" => Ok(Self::perfect()),
            "all-down" => Ok(Self::all_down()),
            other => Err(ScenarioError::UnknownBuiltin(other.to_owned())),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// The cycle time as an exact number (shortest decimal of the float).
    pub fn cycle_time(&self) -> Number {
        number_from_f64(self.cycle_time_minutes).unwrap_or_else(Number::zero)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut p = Vec::new();
        let d = self.duration_minutes;
        if d == 0 {
            p.push("duration_minutes must be positive".to_owned());
        }
        if !(self.cycle_time_minutes.is_finite() && self.cycle_time_minutes > 0.0) {
            p.push("cycle_time_minutes must be positive".to_owned());
        }
        if !(0.0..=1.0).contains(&self.defect_probability) {
            p.push("defect_probability must lie in [0, 1]".to_owned());
        }
        if let Some(q) = self.downtime_probability {
            if !(0.0..=1.0).contains(&q) {
                p.push("downtime_probability must lie in [0, 1]".to_owned());
            }
            if !self.downtime_intervals.is_empty() {
                p.push("give either downtime_intervals or downtime_probability, not both".to_owned());
            }
        }
        if !self.nominal_voltage.is_finite() || !self.down_voltage.is_finite() {
            p.push("voltages must be finite".to_owned());
        }
        let mut sorted = self.downtime_intervals.clone();
        sorted.sort_unstable();
        for [s, e] in &sorted {
            if s >= e || *e > d {
                p.push(format!(
                    "downtime interval [{s}, {e}) must be non-empty and within [0, {d})"
                ));
            }
        }
        for w in sorted.windows(2) {
            if w[1][0] < w[0][1] {
                p.push(format!(
                    "downtime intervals [{}, {}) and [{}, {}) overlap",
                    w[0][0], w[0][1], w[1][0], w[1][1]
                ));
            }
        }
        if let Some(c) = &self.injected_completions {
            if c.windows(2).any(|w| w[1] < w[0]) {
                p.push("injected_completions must be non-decreasing".to_owned());
            }
            if self.downtime_probability.is_some() {
                p.push("injected_completions need fixed downtime_intervals".to_owned());
            }
            for &m in c {
                if m >= d {
                    p.push(format!("injected completion minute {m} is outside the scenario"));
                } else if self.interval_down(m) {
                    p.push(format!("injected completion minute {m} is a down minute"));
                }
            }
        }
        if let Some(defects) = &self.injected_defects {
            let unique: BTreeSet<_> = defects.iter().collect();
            if unique.len() != defects.len() {
                p.push("injected_defects contains duplicates".to_owned());
            }
            if let Some(c) = &self.injected_completions {
                if let Some(bad) = defects.iter().find(|&&i| i >= c.len()) {
                    p.push(format!(
                        "injected defect index {bad} exceeds the {} completions",
                        c.len()
                    ));
                }
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(p))
        }
    }

    fn interval_down(&self, m: u32) -> bool {
        self.downtime_intervals.iter().any(|[s, e]| (*s..*e).contains(&m))
    }
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 * SCALE) < p
}

fn voltage_term(v: f64) -> Term {
    let n = number_from_f64(v).expect("finite voltage");
    let text = decimal_string(&n).expect("float decimals terminate");
    if text.contains('.') {
        Term::decimal(text)
    } else {
        Term::decimal(format!("{text}.0"))
    }
}

pub fn simulate(config: &ScenarioConfig, plant: &PlantConfig) -> Result<Simulation, ScenarioError> {
    config.validate()?;
    plant
        .validate()
        .map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
    let voltage = plant.sensor(SensorKind::Voltage).expect("validated plant");
    let counter = plant.sensor(SensorKind::ProductCounter).expect("validated plant");
    let detector = plant.sensor(SensorKind::DefectDetector).expect("validated plant");

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration = config.duration_minutes;
    let down: Vec<bool> = (0..duration)
        .map(|m| match config.downtime_probability {
            Some(q) => bernoulli(&mut rng, q),
            None => config.interval_down(m),
        })
        .collect();

    // completion minutes, in order
    let completions: Vec<u32> = match &config.injected_completions {
        Some(c) => c.clone(),
        None => {
            let cycle = config.cycle_time();
            let mut out = Vec::new();
            let mut operating = Number::zero();
            let mut next = Number::one();
            for m in 0..duration {
                if down[m as usize] {
                    continue;
                }
                operating += Number::one();
                while &next * &cycle <= operating {
                    out.push(m);
                    next += Number::one();
                }
            }
            out
        }
    };
    let defective: BTreeSet<usize> = match &config.injected_defects {
        Some(d) => d.iter().copied().collect(),
        None => (0..completions.len())
            .filter(|_| bernoulli(&mut rng, config.defect_probability))
            .collect(),
    };

    let mut minter = ObservationMinter::new();
    let mut triples = Vec::new();
    let mut next_completion = 0;
    let one = Term::integer(1);
    for m in 0..duration {
        let t = (m as u64 + 1) * MINUTE_MS;
        let v = if down[m as usize] {
            config.down_voltage
        } else {
            config.nominal_voltage
        };
        triples.extend(minter.observe(voltage, voltage_term(v), t).expect("literal"));
        while next_completion < completions.len() && completions[next_completion] == m {
            triples.extend(minter.observe(counter, one.clone(), t).expect("literal"));
            if defective.contains(&next_completion) {
                triples.extend(minter.observe(detector, one.clone(), t).expect("literal"));
            }
            next_completion += 1;
        }
    }

    let down_minutes = down.iter().filter(|&&d| d).count() as u64;
    let ground_truth = GroundTruth {
        down_minutes,
        total_production: completions.len() as u64,
        defected: defective.len() as u64,
        operating_minutes: duration as u64 - down_minutes,
    };
    Ok(Simulation {
        streams: BTreeMap::from([(production_stream(), triples)]),
        ground_truth,
    })
}

/// Closed-form KPIs from the ground truth, no engine involved.
pub fn oracle_kpis(gt: &GroundTruth, config: &ScenarioConfig) -> KpiValues {
    let int = |n: u64| Number::from_integer(n.into());
    let total_time = int(config.duration_minutes as u64);
    let a = kpi::availability(&total_time, &int(gt.down_minutes)).ok();
    let p = kpi::performance(
        &config.cycle_time(),
        &int(gt.total_production),
        &int(gt.operating_minutes),
    )
    .ok()
    .flatten();
    let q = kpi::quality(&int(gt.total_production), &int(gt.defected))
        .ok()
        .flatten();
    KpiValues::from_factors(a, p, q)
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}
