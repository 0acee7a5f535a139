pub mod csparql;
pub mod engine;
pub mod kpi;
pub mod rdf;
pub mod simulator;
pub mod sosa;
