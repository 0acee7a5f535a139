//! Virtual-clock stream engine: window buffers, scheduled evaluation and
//! result-stream cascading.

mod buffer;
mod deps;
mod eval;
mod expr;
mod log;
mod runtime;
mod transport;

pub use buffer::{in_window, BufferKind, OutOfOrder, StreamBuffer};
pub use deps::{CycleError, DependencyGraph, Node};
pub use eval::{
    evaluate, AccessPolicy, Dataset, EvaluateError, Evaluation, PlanAggregate, PlanSelect, PlanSource, QueryPlan,
};
pub use expr::{effective_boolean, eval_expr, filter_passes, EvalError, Value};
pub use log::{read_jsonl, write_csv, write_jsonl, EmissionRecord, TermRecord};
pub use runtime::{Emission, Engine, EngineConfig, EngineError, IngestHandle, DEFAULT_STREAM_BASE};
pub use transport::{decode_bindings, encode_result_stream, TransportError, BIND_NS};
