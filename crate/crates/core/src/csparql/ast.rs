//! Typed syntax tree for `REGISTER STREAM|QUERY` blocks.
//!
//! Prefixed names are kept as written; [`RegisteredQuery::resolve_iri`] and
//! friends expand them against the query's `PREFIX` declarations and the
//! default prefixes.

use std::fmt;

use crate::rdf::vocab::default_prefix;
use crate::rdf::{Number, Term, TriplePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    /// Results are re-published as a stream named after the query.
    Stream,
    /// Results go to the report sink only.
    Query,
}

/// A positive span of virtual time, canonicalized to milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Duration {
    millis: u64,
}

impl Duration {
    pub const UNITS: [(&'static str, u64); 5] = [
        ("d", 86_400_000),
        ("h", 3_600_000),
        ("m", 60_000),
        ("s", 1_000),
        ("ms", 1),
    ];

    pub fn from_millis(millis: u64) -> Option<Self> {
        (millis > 0).then_some(Duration { millis })
    }

    pub fn minutes(m: u64) -> Self {
        Duration { millis: m * 60_000 }
    }

    pub fn hours(h: u64) -> Self {
        Duration { millis: h * 3_600_000 }
    }

    /// `value` in `unit` (one of `ms`, `s`, `m`, `h`, `d`).
    pub fn from_unit(value: u64, unit: &str) -> Option<Self> {
        let factor = Self::UNITS.iter().find(|(u, _)| *u == unit)?.1;
        Self::from_millis(value.checked_mul(factor)?)
    }

    pub fn as_millis(&self) -> u64 {
        self.millis
    }
}

impl fmt::Display for Duration {
    /// Largest unit up to hours that divides the value evenly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (unit, factor) = Self::UNITS[1..]
            .iter()
            .find(|(_, factor)| self.millis.is_multiple_of(*factor))
            .expect("ms always divides");
        write!(f, "{}{unit}", self.millis / factor)
    }
}

/// An IRI as written: either `<full>` or `prefix:local`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IriRef {
    Full(String),
    Prefixed { prefix: String, local: String },
}

impl IriRef {
    pub fn full(iri: impl Into<String>) -> Self {
        IriRef::Full(iri.into())
    }
}

impl fmt::Display for IriRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IriRef::Full(iri) => write!(f, "<{iri}>"),
            IriRef::Prefixed { prefix, local } => write!(f, "{prefix}:{local}"),
        }
    }
}

/// A position in a WHERE triple pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    Var(String),
    Iri(IriRef),
    Literal { lexical: String, datatype: IriRef },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternTriple {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl PatternTriple {
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter_map(|t| match t {
                PatternTerm::Var(v) => Some(v.as_str()),
                _ => None,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(String),
    /// Exact numeric constant.
    Num(Number),
    Iri(IriRef),
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn num(n: i64) -> Self {
        Expr::Num(Number::from_integer(n.into()))
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Self {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Variables referenced anywhere in the expression, in occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(v) => out.push(v),
            Expr::Binary { left, right, .. } => {
                left.collect_vars(out);
                right.collect_vars(out);
            }
            Expr::Num(_) | Expr::Iri(_) => {}
        }
    }

    fn iris(&self, out: &mut Vec<IriRef>) {
        match self {
            Expr::Iri(i) => out.push(i.clone()),
            Expr::Binary { left, right, .. } => {
                left.iris(out);
                right.iris(out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl SelectItem {
    pub fn var(name: impl Into<String>) -> Self {
        SelectItem {
            expr: Expr::Var(name.into()),
            alias: None,
        }
    }

    pub fn aliased(expr: Expr, alias: impl Into<String>) -> Self {
        SelectItem {
            expr,
            alias: Some(alias.into()),
        }
    }

    /// Name under which this item appears in result rows.
    pub fn output_name(&self) -> Option<&str> {
        match (&self.alias, &self.expr) {
            (Some(a), _) => Some(a),
            (None, Expr::Var(v)) => Some(v),
            (None, _) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamSource {
    pub stream: IriRef,
    pub range: Duration,
    pub step: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateFunction {
    Count,
    /// Recognized by the grammar but rejected by validation.
    Sum,
    Avg,
    Min,
    Max,
}

impl AggregateFunction {
    pub fn from_keyword(kw: &str) -> Option<Self> {
        Some(match kw.to_ascii_uppercase().as_str() {
            "COUNT" => AggregateFunction::Count,
            "SUM" => AggregateFunction::Sum,
            "AVG" => AggregateFunction::Avg,
            "MIN" => AggregateFunction::Min,
            "MAX" => AggregateFunction::Max,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            AggregateFunction::Count => "COUNT",
            AggregateFunction::Sum => "SUM",
            AggregateFunction::Avg => "AVG",
            AggregateFunction::Min => "MIN",
            AggregateFunction::Max => "MAX",
        }
    }

    pub fn is_implemented(self) -> bool {
        self == AggregateFunction::Count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregateClause {
    pub out_var: String,
    pub function: AggregateFunction,
    pub over_vars: Vec<String>,
    pub filter: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegisteredQuery {
    pub kind: QueryKind,
    pub name: String,
    pub compute_every: Duration,
    /// Declared prefixes in source order.
    pub prefixes: Vec<(String, String)>,
    pub select: Vec<SelectItem>,
    pub sources: Vec<StreamSource>,
    /// `FROM <iri>` static graph references.
    pub static_graphs: Vec<IriRef>,
    pub where_clause: Vec<PatternTriple>,
    /// Top-level `FILTER`s, applied to rows before aggregation.
    pub filters: Vec<Expr>,
    pub aggregates: Vec<AggregateClause>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown prefix '{0}:'")]
pub struct UnknownPrefix(pub String);

impl RegisteredQuery {
    pub fn namespace(&self, prefix: &str) -> Option<&str> {
        self.prefixes
            .iter()
            .find(|(p, _)| p == prefix)
            .map(|(_, ns)| ns.as_str())
            .or_else(|| default_prefix(prefix))
    }

    pub fn resolve_iri(&self, iri: &IriRef) -> Result<String, UnknownPrefix> {
        match iri {
            IriRef::Full(s) => Ok(s.clone()),
            IriRef::Prefixed { prefix, local } => self
                .namespace(prefix)
                .map(|ns| format!("{ns}{local}"))
                .ok_or_else(|| UnknownPrefix(prefix.clone())),
        }
    }

    pub fn resolve_term(&self, term: &PatternTerm) -> Result<Term, UnknownPrefix> {
        Ok(match term {
            PatternTerm::Var(v) => Term::Variable(v.clone()),
            PatternTerm::Iri(i) => Term::Iri(self.resolve_iri(i)?),
            PatternTerm::Literal { lexical, datatype } => Term::literal(lexical.clone(), self.resolve_iri(datatype)?),
        })
    }

    pub fn resolve_pattern(&self, p: &PatternTriple) -> Result<TriplePattern, UnknownPrefix> {
        Ok(TriplePattern::new(
            self.resolve_term(&p.subject)?,
            self.resolve_term(&p.predicate)?,
            self.resolve_term(&p.object)?,
        ))
    }

    /// Copy of `expr` with every prefixed IRI expanded.
    pub fn resolve_expr(&self, expr: &Expr) -> Result<Expr, UnknownPrefix> {
        Ok(match expr {
            Expr::Iri(i) => Expr::Iri(IriRef::Full(self.resolve_iri(i)?)),
            Expr::Binary { op, left, right } => Expr::binary(*op, self.resolve_expr(left)?, self.resolve_expr(right)?),
            other => other.clone(),
        })
    }

    /// Every IRI mentioned by the query, for prefix checking.
    pub fn mentioned_iris(&self) -> Vec<IriRef> {
        let mut out = Vec::new();
        out.extend(self.sources.iter().map(|s| s.stream.clone()));
        out.extend(self.static_graphs.iter().cloned());
        for p in &self.where_clause {
            for t in [&p.subject, &p.predicate, &p.object] {
                match t {
                    PatternTerm::Iri(i) => out.push(i.clone()),
                    PatternTerm::Literal { datatype, .. } => out.push(datatype.clone()),
                    PatternTerm::Var(_) => {}
                }
            }
        }
        for e in self.select.iter().map(|s| &s.expr).chain(&self.filters) {
            e.iris(&mut out);
        }
        for a in &self.aggregates {
            if let Some(f) = &a.filter {
                f.iris(&mut out);
            }
        }
        out
    }

    /// Variable names this query publishes (its binding vocabulary).
    pub fn output_vars(&self) -> Vec<String> {
        self.select
            .iter()
            .filter_map(|s| s.output_name().map(str::to_owned))
            .collect()
    }

    /// Variables bound by the WHERE clause.
    pub fn where_vars(&self) -> Vec<&str> {
        let mut vars: Vec<&str> = self.where_clause.iter().flat_map(|p| p.variables()).collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }
}
