//! The continuous query dialect: `REGISTER STREAM|QUERY ... COMPUTED EVERY`
//! blocks with windowed `FROM STREAM` sources and `AGGREGATE` clauses.

mod ast;
mod parser;
mod serialize;
mod validate;

pub use ast::*;
pub use parser::{parse_queries, parse_query, ParseError};
pub use serialize::{expr as serialize_expr, serialize_query};
pub use validate::{validate_query, Diagnostic, KnownStreams, StreamInfo};
