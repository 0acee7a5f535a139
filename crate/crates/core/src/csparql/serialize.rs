//! Canonical text form of a [`RegisteredQuery`]; reparses to an equal AST.

use std::fmt::Write as _;

use num_traits::Signed;

use crate::rdf::decimal_string;
use crate::rdf::term::escape_string;

use super::ast::*;

pub fn serialize_query(q: &RegisteredQuery) -> String {
    let mut out = String::new();
    let kind = match q.kind {
        QueryKind::Stream => "STREAM",
        QueryKind::Query => "QUERY",
    };
    let _ = writeln!(out, "REGISTER {kind} {} COMPUTED EVERY {} AS", q.name, q.compute_every);
    for (prefix, ns) in &q.prefixes {
        let _ = writeln!(out, "  PREFIX {prefix}: <{ns}>");
    }
    let items: Vec<String> = q.select.iter().map(select_item).collect();
    let _ = writeln!(out, "  SELECT {}", items.join(" "));
    for s in &q.sources {
        let _ = writeln!(out, "  FROM STREAM {} [RANGE {} STEP {}]", s.stream, s.range, s.step);
    }
    for g in &q.static_graphs {
        let _ = writeln!(out, "  FROM {g}");
    }
    if !q.where_clause.is_empty() {
        out.push_str("  WHERE {\n");
        for p in &q.where_clause {
            let _ = writeln!(
                out,
                "    {} {} {} .",
                pattern_term(&p.subject),
                pattern_term(&p.predicate),
                pattern_term(&p.object)
            );
        }
        out.push_str("  }\n");
    }
    for a in &q.aggregates {
        let vars: Vec<String> = a.over_vars.iter().map(|v| format!("?{v}")).collect();
        let _ = write!(
            out,
            "  AGGREGATE {{(?{}, {}, {{{}}})",
            a.out_var,
            a.function.keyword(),
            vars.join(" ")
        );
        if let Some(f) = &a.filter {
            let _ = write!(out, " FILTER ({})", expr(f));
        }
        out.push_str("}\n");
    }
    for f in &q.filters {
        let _ = writeln!(out, "  FILTER ({})", expr(f));
    }
    out
}

fn select_item(item: &SelectItem) -> String {
    match (&item.alias, &item.expr) {
        (None, Expr::Var(v)) => format!("?{v}"),
        (Some(alias), e) => format!("({} AS ?{alias})", expr(e)),
        // unreachable for parsed ASTs: a compound item always has an alias
        (None, e) => expr(e),
    }
}

fn pattern_term(t: &PatternTerm) -> String {
    match t {
        PatternTerm::Var(v) => format!("?{v}"),
        PatternTerm::Iri(i) => i.to_string(),
        PatternTerm::Literal { lexical, datatype } => format!("\"{}\"^^{datatype}", escape_string(lexical)),
    }
}

/// Fully parenthesized, so precedence never matters on reparse.
pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Var(v) => format!("?{v}"),
        Expr::Iri(i) => i.to_string(),
        Expr::Num(n) => match decimal_string(n) {
            Some(s) if n.is_negative() => format!("({s})"),
            Some(s) => s,
            None => format!("({} / {})", n.numer(), n.denom()),
        },
        Expr::Binary { op, left, right } => format!("({} {} {})", expr(left), op.symbol(), expr(right)),
    }
}
