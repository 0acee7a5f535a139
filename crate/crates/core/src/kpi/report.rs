use std::collections::BTreeSet;
use std::io::{self, Write};

use serde::Serialize;

use crate::engine::Emission;
use crate::rdf::{decimal_string, number_to_f64, numeric_value, Number};

use super::KpiValues;

const VARS: [&str; 4] = ["availability", "performance", "quality", "oee"];

/// Exact decimal when the expansion terminates, otherwise the nearest float.
pub fn render_number(n: &Number) -> String {
    decimal_string(n).unwrap_or_else(|| number_to_f64(n).to_string())
}

fn value_at(emissions: &[Emission], fire_time: u64, var: &str) -> Option<Number> {
    emissions
        .iter()
        .filter(|e| e.fire_time == fire_time && e.error.is_none())
        .find_map(|e| match e.rows.as_slice() {
            [row] => row.get(var).and_then(|t| numeric_value(t).ok()),
            _ => None,
        })
}

/// KPIs read from the single-row emissions at `fire_time`, by output
/// variable name. A value that was not emitted is undefined.
pub fn kpis_at(emissions: &[Emission], fire_time: u64) -> KpiValues {
    let [a, p, q, o] = VARS.map(|v| value_at(emissions, fire_time, v));
    KpiValues::from_parts(a, p, q, o)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KpiReportRow {
    pub fire_time: u64,
    pub kpis: KpiValues,
}

/// One row per fire time at which any KPI query emitted.
pub fn kpi_report(emissions: &[Emission]) -> Vec<KpiReportRow> {
    let times: BTreeSet<u64> = emissions
        .iter()
        .filter(|e| e.rows.iter().any(|r| VARS.iter().any(|v| r.contains(v))) || e.error.is_some())
        .map(|e| e.fire_time)
        .collect();
    times
        .into_iter()
        .map(|t| KpiReportRow {
            fire_time: t,
            kpis: kpis_at(emissions, t),
        })
        .collect()
}

#[derive(Serialize)]
struct JsonRow {
    fire_time: u64,
    availability: Option<f64>,
    performance: Option<f64>,
    quality: Option<f64>,
    oee: Option<f64>,
    flags: Vec<String>,
    /// Lexical exact values: decimals, or `n/d` when not terminating.
    exact: JsonExact,
}

#[derive(Serialize)]
struct JsonExact {
    availability: Option<String>,
    performance: Option<String>,
    quality: Option<String>,
    oee: Option<String>,
}

fn exact(n: &Option<Number>) -> Option<String> {
    n.as_ref()
        .map(|n| decimal_string(n).unwrap_or_else(|| format!("{}/{}", n.numer(), n.denom())))
}

pub fn write_kpi_json<W: Write>(w: W, rows: &[KpiReportRow]) -> io::Result<()> {
    let out: Vec<JsonRow> = rows
        .iter()
        .map(|r| {
            let k = &r.kpis;
            let f = |n: &Option<Number>| n.as_ref().map(number_to_f64);
            JsonRow {
                fire_time: r.fire_time,
                availability: f(&k.availability),
                performance: f(&k.performance),
                quality: f(&k.quality),
                oee: f(&k.oee),
                flags: k.flags.iter().map(ToString::to_string).collect(),
                exact: JsonExact {
                    availability: exact(&k.availability),
                    performance: exact(&k.performance),
                    quality: exact(&k.quality),
                    oee: exact(&k.oee),
                },
            }
        })
        .collect();
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, &out)?;
    w.write_all(b"\n")
}

pub fn write_kpi_csv<W: Write>(w: W, rows: &[KpiReportRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fire_time", "availability", "performance", "quality", "oee", "flags"])?;
    for r in rows {
        let k = &r.kpis;
        let cell = |n: &Option<Number>| n.as_ref().map(render_number).unwrap_or_default();
        let flags: Vec<String> = k.flags.iter().map(ToString::to_string).collect();
        out.write_record([
            r.fire_time.to_string(),
            cell(&k.availability),
            cell(&k.performance),
            cell(&k.quality),
            cell(&k.oee),
            flags.join("|"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csparql::QueryKind;
    use crate::rdf::{number_to_term, Bindings};

    fn emission(query: &str, var: &str, value: Option<Number>, t: u64) -> Emission {
        let rows: Vec<Bindings> = value
            .map(|v| vec![[(var.to_string(), number_to_term(&v))].into_iter().collect()])
            .unwrap_or_default();
        Emission {
            query: query.into(),
            kind: QueryKind::Stream,
            fire_time: t,
            rows,
            error: None,
        }
    }

    fn r(a: i64, b: i64) -> Number {
        Number::new(a.into(), b.into())
    }

    fn reference() -> Vec<Emission> {
        vec![
            emission("Availability", "availability", Some(r(9, 10)), 86_400_000),
            emission("Performance", "performance", Some(r(25, 27)), 86_400_000),
            emission("Quality", "quality", Some(r(15, 16)), 86_400_000),
            emission("OEE", "oee", Some(r(25, 32)), 86_400_000),
        ]
    }

    #[test]
    fn reads_kpis_from_emissions() {
        let k = kpis_at(&reference(), 86_400_000);
        assert_eq!(
            k,
            KpiValues::from_factors(Some(r(9, 10)), Some(r(25, 27)), Some(r(15, 16)))
        );
        assert!(kpis_at(&reference(), 0).flags.len() == 4);
    }

    #[test]
    fn csv_report() {
        let mut buf = Vec::new();
        write_kpi_csv(&mut buf, &kpi_report(&reference())).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "fire_time,availability,performance,quality,oee,flags\n86400000,0.9,0.9259259259259259,0.9375,0.78125,\n"
        );
    }

    #[test]
    fn json_report_has_exact_values() {
        let mut buf = Vec::new();
        write_kpi_json(&mut buf, &kpi_report(&reference())).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["oee"], 0.78125);
        assert_eq!(v[0]["exact"]["performance"], "25/27");
        assert_eq!(v[0]["flags"], serde_json::json!([]));
    }

    #[test]
    fn undefined_values_are_flagged() {
        let mut em = reference();
        em[2] = emission("Quality", "quality", None, 86_400_000);
        em.pop();
        let rows = kpi_report(&em);
        assert!(rows[0].kpis.quality.is_none());
        let mut buf = Vec::new();
        write_kpi_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .contains(",,quality-undefined|oee-undefined"));
    }
}
