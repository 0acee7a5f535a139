//! OEE factors as exact functions, the six-query pipeline and its runner.

mod pipeline;
mod report;

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::rdf::{number_to_f64, Number};

pub use pipeline::{
    executable_pipeline_text, load_pipeline, resolve_literal_iris, run_pipeline, run_queries, run_queries_with_policy,
    PipelineError, PipelineMode, PipelineParams, PipelineRun, LITERAL_LISTINGS,
};
pub use report::{kpi_report, kpis_at, render_number, write_kpi_csv, write_kpi_json, KpiReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum KpiError {
    #[error("total time must be positive")]
    ZeroTotalTime,
    #[error("down time exceeds total time")]
    DownTimeExceedsTotal,
    #[error("defected production exceeds total production")]
    DefectsExceedTotal,
    #[error("negative quantity")]
    Negative,
}

/// `(total_time - down_time) / total_time`.
pub fn availability(total_time: &Number, down_time: &Number) -> Result<Number, KpiError> {
    if total_time <= &Number::zero() {
        return Err(KpiError::ZeroTotalTime);
    }
    if down_time < &Number::zero() {
        return Err(KpiError::Negative);
    }
    if down_time > total_time {
        return Err(KpiError::DownTimeExceedsTotal);
    }
    Ok((total_time - down_time) / total_time)
}

/// `cycle_time * total_production / operating_time`; `None` when the line
/// never ran.
pub fn performance(
    cycle_time: &Number,
    total_production: &Number,
    operating_time: &Number,
) -> Result<Option<Number>, KpiError> {
    if cycle_time < &Number::zero() || total_production < &Number::zero() || operating_time < &Number::zero() {
        return Err(KpiError::Negative);
    }
    if operating_time.is_zero() {
        return Ok(None);
    }
    Ok(Some(cycle_time * total_production / operating_time))
}

/// `(total - defected) / total`; `None` on a day without production.
pub fn quality(total: &Number, defected: &Number) -> Result<Option<Number>, KpiError> {
    if total < &Number::zero() || defected < &Number::zero() {
        return Err(KpiError::Negative);
    }
    if defected > total {
        return Err(KpiError::DefectsExceedTotal);
    }
    if total.is_zero() {
        return Ok(None);
    }
    Ok(Some((total - defected) / total))
}

pub fn oee(a: Option<&Number>, p: Option<&Number>, q: Option<&Number>) -> Option<Number> {
    Some(a? * p? * q?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KpiFlag {
    AvailabilityUndefined,
    PerformanceUndefined,
    QualityUndefined,
    OeeUndefined,
    /// Output faster than the theoretical cycle allows; reported unclamped.
    PerformanceAboveOne,
}

impl fmt::Display for KpiFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KpiFlag::AvailabilityUndefined => "availability-undefined",
            KpiFlag::PerformanceUndefined => "performance-undefined",
            KpiFlag::QualityUndefined => "quality-undefined",
            KpiFlag::OeeUndefined => "oee-undefined",
            KpiFlag::PerformanceAboveOne => "performance-above-one",
        })
    }
}

/// The four KPIs; `None` means undefined and carries a flag.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KpiValues {
    pub availability: Option<Number>,
    pub performance: Option<Number>,
    pub quality: Option<Number>,
    pub oee: Option<Number>,
    pub flags: BTreeSet<KpiFlag>,
}

impl KpiValues {
    /// Computes OEE from the three factors and derives the flags.
    pub fn from_factors(a: Option<Number>, p: Option<Number>, q: Option<Number>) -> Self {
        let oee = oee(a.as_ref(), p.as_ref(), q.as_ref());
        Self::from_parts(a, p, q, oee)
    }

    /// Takes all four values as given (e.g. read back from emissions).
    pub fn from_parts(a: Option<Number>, p: Option<Number>, q: Option<Number>, oee: Option<Number>) -> Self {
        let mut flags = BTreeSet::new();
        for (v, flag) in [
            (&a, KpiFlag::AvailabilityUndefined),
            (&p, KpiFlag::PerformanceUndefined),
            (&q, KpiFlag::QualityUndefined),
            (&oee, KpiFlag::OeeUndefined),
        ] {
            if v.is_none() {
                flags.insert(flag);
            }
        }
        if p.as_ref().is_some_and(|p| p > &Number::one()) {
            flags.insert(KpiFlag::PerformanceAboveOne);
        }
        KpiValues {
            availability: a,
            performance: p,
            quality: q,
            oee,
            flags,
        }
    }

    /// Same definedness and flags, and every defined value within `tol`.
    pub fn agrees_with(&self, other: &KpiValues, tol: f64) -> bool {
        let close = |a: &Option<Number>, b: &Option<Number>| match (a, b) {
            (Some(x), Some(y)) => number_to_f64(&(x - y)).abs() <= tol,
            (None, None) => true,
            _ => false,
        };
        self.flags == other.flags
            && close(&self.availability, &other.availability)
            && close(&self.performance, &other.performance)
            && close(&self.quality, &other.quality)
            && close(&self.oee, &other.oee)
    }
}

impl fmt::Display for KpiValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Option<Number>| {
            v.as_ref()
                .map(report::render_number)
                .unwrap_or_else(|| "undefined".into())
        };
        write!(
            f,
            "availability={} performance={} quality={} oee={}",
            show(&self.availability),
            show(&self.performance),
            show(&self.quality),
            show(&self.oee)
        )?;
        if !self.flags.is_empty() {
            let flags: Vec<String> = self.flags.iter().map(ToString::to_string).collect();
            write!(f, " flags={}", flags.join("|"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(v: i64) -> Number {
        Number::from_integer(v.into())
    }

    fn r(a: i64, b: i64) -> Number {
        Number::new(a.into(), b.into())
    }

    #[test]
    fn availability_examples() {
        assert_eq!(availability(&n(1440), &n(0)), Ok(n(1)));
        assert_eq!(availability(&n(1440), &n(1440)), Ok(n(0)));
        assert_eq!(availability(&n(1440), &n(144)), Ok(r(9, 10)));
        assert_eq!(availability(&n(1440), &n(1441)), Err(KpiError::DownTimeExceedsTotal));
        assert_eq!(availability(&n(0), &n(0)), Err(KpiError::ZeroTotalTime));
    }

    #[test]
    fn performance_examples() {
        assert_eq!(performance(&n(25), &n(0), &n(1440)), Ok(Some(n(0))));
        assert_eq!(performance(&n(25), &n(48), &n(1200)), Ok(Some(n(1))));
        assert_eq!(performance(&n(25), &n(48), &n(1296)), Ok(Some(r(25, 27))));
        assert_eq!(performance(&n(25), &n(3), &n(0)), Ok(None));
    }

    #[test]
    fn quality_examples() {
        assert_eq!(quality(&n(100), &n(0)), Ok(Some(n(1))));
        assert_eq!(quality(&n(48), &n(3)), Ok(Some(r(15, 16))));
        assert_eq!(quality(&n(0), &n(0)), Ok(None));
        assert_eq!(quality(&n(3), &n(4)), Err(KpiError::DefectsExceedTotal));
    }

    #[test]
    fn oee_examples() {
        assert_eq!(oee(Some(&n(1)), Some(&n(1)), Some(&n(1))), Some(n(1)));
        assert_eq!(
            oee(Some(&r(9, 10)), Some(&r(25, 27)), Some(&r(15, 16))),
            Some(r(25, 32))
        );
        assert_eq!(oee(Some(&n(0)), Some(&r(1, 3)), Some(&r(1, 2))), Some(n(0)));
        assert_eq!(oee(Some(&n(1)), None, Some(&n(1))), None);
    }

    #[test]
    fn flags() {
        let k = KpiValues::from_factors(Some(n(0)), None, None);
        assert!(k.flags.contains(&KpiFlag::PerformanceUndefined));
        assert!(k.flags.contains(&KpiFlag::QualityUndefined));
        assert!(k.flags.contains(&KpiFlag::OeeUndefined));
        let fast = KpiValues::from_factors(Some(n(1)), Some(r(25, 24)), Some(n(1)));
        assert_eq!(fast.flags, BTreeSet::from([KpiFlag::PerformanceAboveOne]));
        assert_eq!(fast.oee, Some(r(25, 24)));
    }

    proptest! {
        #[test]
        fn availability_decreases_with_down_time(t in 1i64..5000, d in 0i64..5000) {
            prop_assume!(d < t);
            prop_assert!(availability(&n(t), &n(d + 1)).unwrap() < availability(&n(t), &n(d)).unwrap());
        }

        #[test]
        fn quality_decreases_with_defects(total in 1i64..5000, d in 0i64..5000) {
            prop_assume!(d < total);
            prop_assert!(quality(&n(total), &n(d + 1)).unwrap() < quality(&n(total), &n(d)).unwrap());
        }

        #[test]
        fn availability_is_scale_invariant(t in 1i64..5000, d in 0i64..5000, k in 1i64..100) {
            prop_assume!(d <= t);
            prop_assert_eq!(availability(&n(k * t), &n(k * d)), availability(&n(t), &n(d)));
        }

        #[test]
        fn oee_is_symmetric_and_zero_iff_a_factor_is(
            a in (0i64..20, 1i64..20), p in (0i64..20, 1i64..20), q in (0i64..20, 1i64..20),
        ) {
            let (a, p, q) = (r(a.0, a.1), r(p.0, p.1), r(q.0, q.1));
            let base = oee(Some(&a), Some(&p), Some(&q)).unwrap();
            for perm in [(&a, &q, &p), (&p, &a, &q), (&p, &q, &a), (&q, &a, &p), (&q, &p, &a)] {
                prop_assert_eq!(oee(Some(perm.0), Some(perm.1), Some(perm.2)).unwrap(), base.clone());
            }
            prop_assert_eq!(base.is_zero(), a.is_zero() || p.is_zero() || q.is_zero());
        }
    }
}
