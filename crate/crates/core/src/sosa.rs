//! SOSA terms, the plant asset graph and the observation triple shape.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rdf::vocab::{RDFS_LABEL, RDF_TYPE};
use crate::rdf::{StaticGraph, Term, TimestampedTriple, Triple};

pub const PLATFORM: &str = "http://www.w3.org/ns/sosa/Platform";
pub const SENSOR: &str = "http://www.w3.org/ns/sosa/Sensor";
pub const OBSERVATION: &str = "http://www.w3.org/ns/sosa/Observation";
pub const FEATURE_OF_INTEREST: &str = "http://www.w3.org/ns/sosa/FeatureOfInterest";
pub const HOSTS: &str = "http://www.w3.org/ns/sosa/hosts";
pub const OBSERVES: &str = "http://www.w3.org/ns/sosa/observes";
pub const MADE_BY_SENSOR: &str = "http://www.w3.org/ns/sosa/madeBySensor";
pub const HAS_FEATURE_OF_INTEREST: &str = "http://www.w3.org/ns/sosa/hasFeatureOfInterest";
pub const HAS_SIMPLE_RESULT: &str = "http://www.w3.org/ns/sosa/hasSimpleResult";

pub const PLANT_BASE: &str = "http://cpps.example/plant/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    Voltage,
    ProductCounter,
    DefectDetector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Station {
    pub iri: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub iri: String,
    pub host: String,
    pub feature: String,
    pub kind: SensorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub line_iri: String,
    #[serde(default = "default_line_label")]
    pub line_label: String,
    pub stations: Vec<Station>,
    pub sensors: Vec<SensorSpec>,
}

fn default_line_label() -> String {
    "ProductionLine".to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlantError {
    #[error("invalid plant configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("cannot read plant configuration: {0}")]
    Parse(String),
}

impl PlantConfig {
    /// One line, five stations and the three sensors the KPI queries need.
    pub fn default_plant() -> Self {
        let p = |s: &str| format!("{PLANT_BASE}{s}");
        let stations = [
            ("WELDING/W1A", "WELDING"),
            ("PAINT/P1A", "PAINT"),
            ("ASSEMBLY/AP1A", "ASSEMBLY"),
            ("INTEGRITY/IT1A", "INTEGRITY"),
            ("PACKAGING/PK1A", "PACKAGING"),
        ]
        .into_iter()
        .map(|(iri, label)| Station {
            iri: p(iri),
            label: label.to_owned(),
        })
        .collect();
        let sensor = |iri: &str, host: &str, feature: &str, kind| SensorSpec {
            iri: p(iri),
            host: p(host),
            feature: p(feature),
            kind,
        };
        PlantConfig {
            line_iri: p("ProductionLine"),
            line_label: default_line_label(),
            stations,
            sensors: vec![
                sensor(
                    "sensor/LineVoltage",
                    "ProductionLine",
                    "feature/LineVoltage",
                    SensorKind::Voltage,
                ),
                sensor(
                    "sensor/AssemblyCounter",
                    "ASSEMBLY/AP1A",
                    "feature/Product",
                    SensorKind::ProductCounter,
                ),
                sensor(
                    "sensor/IntegrityCheck",
                    "INTEGRITY/IT1A",
                    "feature/Defect",
                    SensorKind::DefectDetector,
                ),
            ],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PlantError> {
        let config: PlantConfig = toml::from_str(text).map_err(|e| PlantError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plant config serializes")
    }

    fn station_label(&self, iri: &str) -> Option<&str> {
        self.stations.iter().find(|s| s.iri == iri).map(|s| s.label.as_str())
    }

    /// Every invariant violation, not just the first.
    pub fn validate(&self) -> Result<(), PlantError> {
        let mut problems = Vec::new();
        if self.stations.is_empty() {
            problems.push("no stations".to_owned());
        }
        let mut iris = BTreeSet::new();
        for iri in std::iter::once(&self.line_iri)
            .chain(self.stations.iter().map(|s| &s.iri))
            .chain(self.sensors.iter().map(|s| &s.iri))
        {
            if let Err(e) = Term::iri(iri.clone()).validate() {
                problems.push(e.to_string());
            }
            if !iris.insert(iri) {
                problems.push(format!("duplicate IRI <{iri}>"));
            }
        }
        for s in &self.sensors {
            if s.host != self.line_iri && self.station_label(&s.host).is_none() {
                problems.push(format!("sensor <{}> is hosted by unknown platform <{}>", s.iri, s.host));
                continue;
            }
            let required = match s.kind {
                SensorKind::Voltage => None,
                SensorKind::ProductCounter => Some("ASSEMBLY"),
                SensorKind::DefectDetector => Some("INTEGRITY"),
            };
            if let Some(label) = required {
                if self.station_label(&s.host) != Some(label) {
                    problems.push(format!("sensor <{}> must be hosted by the {label} station", s.iri));
                }
            }
        }
        let line_voltage = self
            .sensors
            .iter()
            .filter(|s| s.kind == SensorKind::Voltage && s.host == self.line_iri)
            .count();
        if line_voltage != 1 {
            problems.push(format!(
                "expected exactly one voltage sensor on the line, found {line_voltage}"
            ));
        }
        for kind in [SensorKind::ProductCounter, SensorKind::DefectDetector] {
            if self.sensor(kind).is_none() {
                problems.push(format!("missing {kind} sensor"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PlantError::Invalid(problems))
        }
    }

    /// First sensor of the given kind.
    pub fn sensor(&self, kind: SensorKind) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.kind == kind)
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorKind::Voltage => "voltage",
            SensorKind::ProductCounter => "product-counter",
            SensorKind::DefectDetector => "defect-detector",
        })
    }
}

fn triple(s: &str, p: &str, o: Term) -> Triple {
    Triple::new(Term::iri(s), Term::iri(p), o).expect("validated IRIs")
}

pub fn build_asset_graph(config: &PlantConfig) -> Result<StaticGraph, PlantError> {
    config.validate()?;
    let mut g = StaticGraph::new();
    let platforms = std::iter::once((&config.line_iri, &config.line_label))
        .chain(config.stations.iter().map(|s| (&s.iri, &s.label)));
    for (iri, label) in platforms {
        g.insert(triple(iri, RDF_TYPE, Term::iri(PLATFORM)));
        g.insert(triple(iri, RDFS_LABEL, Term::string(label.clone())));
    }
    for s in &config.sensors {
        g.insert(triple(&s.iri, RDF_TYPE, Term::iri(SENSOR)));
        g.insert(triple(&s.host, HOSTS, Term::iri(s.iri.clone())));
        g.insert(triple(&s.iri, OBSERVES, Term::iri(s.feature.clone())));
        g.insert(triple(&s.feature, RDF_TYPE, Term::iri(FEATURE_OF_INTEREST)));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("observation result must be a literal, got {0}")]
pub struct NotALiteral(pub String);

/// The four triples of one observation, all at `t`, with `node` as subject.
pub fn make_observation(
    node: Term,
    sensor: &str,
    feature: &str,
    value: Term,
    t: u64,
) -> Result<Vec<TimestampedTriple>, NotALiteral> {
    if !matches!(value, Term::Literal { .. }) {
        return Err(NotALiteral(value.to_string()));
    }
    let mk = |p: &str, o: Term| {
        TimestampedTriple::new(
            Triple::new(node.clone(), Term::iri(p), o).expect("valid observation triple"),
            t,
        )
    };
    Ok(vec![
        mk(RDF_TYPE, Term::iri(OBSERVATION)),
        mk(MADE_BY_SENSOR, Term::iri(sensor)),
        mk(HAS_FEATURE_OF_INTEREST, Term::iri(feature)),
        mk(HAS_SIMPLE_RESULT, value),
    ])
}

/// Hands out fresh blank nodes `_:obs0`, `_:obs1`, ...
#[derive(Debug, Clone, Default)]
pub struct ObservationMinter {
    next: u64,
}

impl ObservationMinter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, sensor: &SensorSpec, value: Term, t: u64) -> Result<Vec<TimestampedTriple>, NotALiteral> {
        let node = Term::blank(format!("obs{}", self.next));
        let out = make_observation(node, &sensor.iri, &sensor.feature, value, t)?;
        self.next += 1;
        Ok(out)
    }

    pub fn minted(&self) -> u64 {
        self.next
    }
}
