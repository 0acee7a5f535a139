use std::cmp::Ordering;

use num_traits::Zero;

use crate::csparql::{BinOp, Expr, IriRef};
use crate::rdf::vocab::{xsd, XSD_NS};
use crate::rdf::{number_to_term, numeric_value, Bindings, Number, Term};

/// Result of evaluating an expression against one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Num(Number),
    Bool(bool),
    Term(Term),
}

impl Value {
    pub fn into_term(self) -> Term {
        match self {
            Value::Num(n) => number_to_term(&n),
            Value::Bool(b) => Term::literal(b.to_string(), xsd::BOOLEAN),
            Value::Term(t) => t,
        }
    }

    fn as_number(&self) -> Option<Number> {
        match self {
            Value::Num(n) => Some(n.clone()),
            Value::Term(t) => numeric_value(t).ok(),
            Value::Bool(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("variable ?{0} is unbound")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("'{op}' needs numeric operands, got {found}")]
    NotNumeric { op: &'static str, found: String },
    #[error("{0} has no boolean value")]
    NotBoolean(String),
    #[error("prefixed IRI {0} was not resolved")]
    UnresolvedIri(String),
}

fn describe(v: &Value) -> String {
    match v {
        Value::Num(n) => number_to_term(n).to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Term(t) => t.to_string(),
    }
}

pub fn eval_expr(expr: &Expr, row: &Bindings) -> Result<Value, EvalError> {
    match expr {
        Expr::Var(v) => row
            .get(v)
            .cloned()
            .map(Value::Term)
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Expr::Num(n) => Ok(Value::Num(n.clone())),
        Expr::Iri(IriRef::Full(i)) => Ok(Value::Term(Term::iri(i.clone()))),
        Expr::Iri(other) => Err(EvalError::UnresolvedIri(other.to_string())),
        Expr::Binary { op, left, right } => match op {
            BinOp::And => Ok(Value::Bool(
                effective_boolean(&eval_expr(left, row)?)? && effective_boolean(&eval_expr(right, row)?)?,
            )),
            BinOp::Or => Ok(Value::Bool(
                effective_boolean(&eval_expr(left, row)?)? || effective_boolean(&eval_expr(right, row)?)?,
            )),
            _ => binary(*op, eval_expr(left, row)?, eval_expr(right, row)?),
        },
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    let numbers = |l: &Value, r: &Value| -> Result<(Number, Number), EvalError> {
        let ln = l.as_number().ok_or_else(|| EvalError::NotNumeric {
            op: op.symbol(),
            found: describe(l),
        })?;
        let rn = r.as_number().ok_or_else(|| EvalError::NotNumeric {
            op: op.symbol(),
            found: describe(r),
        })?;
        Ok((ln, rn))
    };
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
            let (a, b) = numbers(&l, &r)?;
            Ok(Value::Num(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                _ => {
                    if b.is_zero() {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
            }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (a, b) = numbers(&l, &r)?;
            let ord = a.cmp(&b);
            Ok(Value::Bool(match op {
                BinOp::Lt => ord == Ordering::Less,
                BinOp::Le => ord != Ordering::Greater,
                BinOp::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            }))
        }
        BinOp::Eq => Ok(Value::Bool(equal(&l, &r))),
        BinOp::Ne => Ok(Value::Bool(!equal(&l, &r))),
        BinOp::And | BinOp::Or => unreachable!("handled with short-circuit operands"),
    }
}

// Numbers compare by value across datatypes, everything else by identity.
fn equal(l: &Value, r: &Value) -> bool {
    if let (Some(a), Some(b)) = (l.as_number(), r.as_number()) {
        return a == b;
    }
    match (l, r) {
        (Value::Bool(a), Value::Bool(b)) => a == b,
        (Value::Bool(a), Value::Term(t)) | (Value::Term(t), Value::Bool(a)) => boolean_literal(t) == Some(*a),
        (Value::Term(a), Value::Term(b)) => a == b,
        _ => false,
    }
}

fn boolean_literal(t: &Term) -> Option<bool> {
    match t {
        Term::Literal { lexical, datatype } if datatype == xsd::BOOLEAN => match lexical.as_str() {
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

pub fn effective_boolean(v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Num(n) => Ok(!n.is_zero()),
        Value::Term(t) => {
            if let Some(b) = boolean_literal(t) {
                return Ok(b);
            }
            if let Ok(n) = numeric_value(t) {
                return Ok(!n.is_zero());
            }
            match t {
                Term::Literal { lexical, datatype } if datatype == &format!("{XSD_NS}string") => {
                    Ok(!lexical.is_empty())
                }
                _ => Err(EvalError::NotBoolean(t.to_string())),
            }
        }
    }
}

/// Filter semantics: an evaluation error counts as `false`.
pub fn filter_passes(expr: &Expr, row: &Bindings) -> bool {
    eval_expr(expr, row)
        .and_then(|v| effective_boolean(&v))
        .unwrap_or(false)
}
