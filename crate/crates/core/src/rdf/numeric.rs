//! Literal-to-number coercion and the reverse mapping for computed values.
//!
//! Numbers are exact rationals throughout. `xsd:double` lexical forms are
//! converted through their binary value, everything else is exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::term::is_numeric_datatype;
use super::vocab::{xsd, OWL_RATIONAL};
use super::{RdfError, Term};

pub type Number = BigRational;

/// Returns the numeric value of a numeric literal.
pub fn numeric_value(term: &Term) -> Result<Number, RdfError> {
    let Term::Literal { lexical, datatype } = term else {
        return Err(RdfError::NotNumeric(term.to_string()));
    };
    if !is_numeric_datatype(datatype) {
        return Err(RdfError::NotNumeric(term.to_string()));
    }
    let bad = || RdfError::BadNumericLexical {
        lexical: lexical.clone(),
        datatype: datatype.clone(),
    };
    let text = lexical.trim();
    match datatype.as_str() {
        xsd::DOUBLE | xsd::FLOAT => {
            let v: f64 = text.parse().map_err(|_| bad())?;
            BigRational::from_float(v).ok_or_else(bad)
        }
        xsd::DECIMAL => parse_decimal(text).ok_or_else(bad),
        d if d == OWL_RATIONAL => {
            let (n, den) = match text.split_once('/') {
                Some((n, d)) => (n, d),
                None => (text, "1"),
            };
            let n: BigInt = parse_int(n).ok_or_else(bad)?;
            let den: BigInt = parse_int(den).ok_or_else(bad)?;
            if den.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, den))
        }
        _ => parse_int(text).map(BigRational::from_integer).ok_or_else(bad),
    }
}

fn parse_int(text: &str) -> Option<BigInt> {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.strip_prefix('+').unwrap_or(text).parse().ok()
}

/// Parses an `xsd:decimal` lexical form (`-?[0-9]*(\.[0-9]*)?`, at least one digit).
pub fn parse_decimal(text: &str) -> Option<Number> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if negative { -value } else { value })
}

/// Finite decimal expansion of `value`, if the reduced denominator only has
/// factors 2 and 5.
pub fn decimal_string(value: &Number) -> Option<String> {
    let mut den = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let scale = twos.max(fives);
    let scaled = (value * BigRational::from_integer(num_traits::pow(BigInt::from(10u32), scale))).to_integer();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    if scale == 0 {
        return Some(if negative { format!("-{digits}") } else { digits });
    }
    let padded = format!("{digits:0>width$}", width = scale + 1);
    let (i, f) = padded.split_at(padded.len() - scale);
    Some(format!("{}{i}.{f}", if negative { "-" } else { "" }))
}

/// Maps an exact number to the most specific literal: `xsd:integer`, then
/// `xsd:decimal`, falling back to `owl:rational` (`n/d`).
pub fn number_to_term(value: &Number) -> Term {
    if value.is_integer() {
        return Term::literal(value.to_integer().to_string(), xsd::INTEGER);
    }
    match decimal_string(value) {
        Some(s) => Term::literal(s, xsd::DECIMAL),
        None => Term::literal(format!("{}/{}", value.numer(), value.denom()), OWL_RATIONAL),
    }
}

/// Exact value of a finite `f64`, going through its shortest decimal
/// representation (so `0.1` becomes 1/10, not the binary approximation).
pub fn number_from_f64(value: f64) -> Option<Number> {
    if !value.is_finite() {
        return None;
    }
    let text = format!("{value}");
    parse_decimal(&text).or_else(|| BigRational::from_float(value))
}

pub fn number_to_f64(value: &Number) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
