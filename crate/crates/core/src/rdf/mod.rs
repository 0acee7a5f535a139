//! RDF atoms, an indexed in-memory graph, and a Turtle subset.

mod graph;
pub mod lexer;
mod numeric;
pub(crate) mod term;
mod turtle;
pub mod vocab;

pub use graph::{match_bgp, match_pattern, StaticGraph};
pub use numeric::{
    decimal_string, number_from_f64, number_to_f64, number_to_term, numeric_value, parse_decimal, Number,
};
pub use term::{Bindings, Term, TimestampedTriple, Triple, TriplePattern};
pub use turtle::{parse_turtle, serialize_turtle};

use lexer::Pos;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RdfError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unknown prefix '{prefix}:' at {pos}")]
    UnknownPrefix { pos: Pos, prefix: String },
    #[error("malformed IRI <{0}>")]
    MalformedIri(String),
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("{0} is not a numeric literal")]
    NotNumeric(String),
    #[error("'{lexical}' is not a valid lexical form for <{datatype}>")]
    BadNumericLexical { lexical: String, datatype: String },
}
