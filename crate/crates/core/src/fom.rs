//! Spec-gated figure of merit.
//!
//! Each metric is first checked against its specification. A passing metric is
//! normalized as `(m - m_min) / (m_max - m_min)`; a failing metric is replaced by
//! its configured failed value before the same normalization, so every miss
//! contributes a constant. Normalized values may be clipped from above by an
//! optional bound, and the signed terms are summed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::MetricVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FomError {
    #[error("metric `{0}` is missing from the metric vector")]
    MissingMetric(String),
    #[error("metric `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("duplicate metric name `{0}`")]
    DuplicateMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    /// Display unit, e.g. "dB" or "MHz".
    pub unit: String,
    pub direction: Direction,
    pub spec: f64,
    pub norm_min: f64,
    pub norm_max: f64,
    pub failed: f64,
    pub sign: Sign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Compare and normalize `|m|` instead of `m` (input offset voltage).
    #[serde(default)]
    pub magnitude: bool,
}

impl MetricSpec {
    pub fn validate(&self) -> Result<(), FomError> {
        let bad = |reason: &str| FomError::InvalidSpec {
            name: self.name.clone(),
            reason: reason.into(),
        };
        if !(self.norm_min < self.norm_max) {
            return Err(bad("norm_min must be below norm_max"));
        }
        match self.direction {
            Direction::AtLeast if !(self.failed <= self.norm_min || self.failed < self.spec) => {
                return Err(bad("failed value must sit below the normalization range or the spec"));
            }
            Direction::AtMost if self.failed < self.spec => {
                return Err(bad("failed value must not satisfy an at-most spec"));
            }
            _ => {}
        }
        if let Some(b) = self.bound {
            if !(b > 0.0) {
                return Err(bad("bound must be positive"));
            }
        }
        Ok(())
    }

    fn gated(&self, value: f64) -> f64 {
        if self.magnitude {
            value.abs()
        } else {
            value
        }
    }

    /// Short human-readable spec, e.g. `>= 60 dB` or `|.| <= 20 mV`.
    pub fn describe(&self) -> String {
        let op = match self.direction {
            Direction::AtLeast => ">=",
            Direction::AtMost => "<=",
        };
        let lhs = if self.magnitude { "|.| " } else { "" };
        format!("{lhs}{op} {} {}", self.spec, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MetricSpec>", into = "Vec<MetricSpec>")]
pub struct FomConfig {
    metrics: Vec<MetricSpec>,
}

impl TryFrom<Vec<MetricSpec>> for FomConfig {
    type Error = FomError;

    fn try_from(metrics: Vec<MetricSpec>) -> Result<Self, FomError> {
        FomConfig::new(metrics)
    }
}

impl From<FomConfig> for Vec<MetricSpec> {
    fn from(c: FomConfig) -> Self {
        c.metrics
    }
}

impl FomConfig {
    pub fn new(metrics: Vec<MetricSpec>) -> Result<Self, FomError> {
        for (i, m) in metrics.iter().enumerate() {
            m.validate()?;
            if metrics[..i].iter().any(|o| o.name == m.name) {
                return Err(FomError::DuplicateMetric(m.name.clone()));
            }
        }
        Ok(FomConfig { metrics })
    }

    pub fn metrics(&self) -> &[MetricSpec] {
        &self.metrics
    }

    pub fn get(&self, name: &str) -> Option<&MetricSpec> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Metric vector with every metric at its failed value.
    pub fn failed_metrics(&self) -> MetricVector {
        self.metrics
            .iter()
            .map(|m| (m.name.clone(), m.failed))
            .collect()
    }

    /// FOM of an evaluation where every metric misses its spec.
    pub fn all_failed_fom(&self) -> f64 {
        compute_fom(&self.failed_metrics(), self).expect("failed metrics cover every spec")
    }
}

/// Inclusive spec check.
pub fn hits_spec(value: f64, spec: &MetricSpec) -> bool {
    let v = spec.gated(value);
    match spec.direction {
        Direction::AtLeast => v >= spec.spec,
        Direction::AtMost => v <= spec.spec,
    }
}

pub fn normalize_metric(value: f64, spec: &MetricSpec) -> f64 {
    let m = if hits_spec(value, spec) {
        spec.gated(value)
    } else {
        spec.failed
    };
    (m - spec.norm_min) / (spec.norm_max - spec.norm_min)
}

/// Upper clamp only; negative failed constants pass through untouched.
pub fn bound_value(value: f64, bound: Option<f64>) -> f64 {
    match bound {
        Some(b) => value.min(b),
        None => value,
    }
}

fn lookup<'a>(metrics: &'a MetricVector, name: &str) -> Result<f64, FomError> {
    metrics
        .get(name)
        .copied()
        .ok_or_else(|| FomError::MissingMetric(name.to_string()))
}

pub fn compute_fom(metrics: &MetricVector, config: &FomConfig) -> Result<f64, FomError> {
    config.metrics.iter().try_fold(0.0, |acc, spec| {
        let v = lookup(metrics, &spec.name)?;
        Ok(acc + spec.sign.factor() * bound_value(normalize_metric(v, spec), spec.bound))
    })
}

pub fn count_missed_specs(metrics: &MetricVector, config: &FomConfig) -> Result<usize, FomError> {
    config.metrics.iter().try_fold(0, |acc, spec| {
        let v = lookup(metrics, &spec.name)?;
        Ok(acc + usize::from(!hits_spec(v, spec)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn mv(pairs: &[(&str, f64)]) -> MetricVector {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn spec_checks() {
        let amp = presets::amp2_fom();
        let comp = presets::comparator_fom();
        assert!(!hits_spec(27.12, amp.get("gain").unwrap()));
        assert!(hits_spec(27.02, amp.get("power").unwrap()));
        assert!(hits_spec(-3.95, comp.get("v_offset").unwrap()));
        assert!(!hits_spec(-25.0, comp.get("v_offset").unwrap()));
    }

    #[test]
    fn normalization_examples() {
        let amp = presets::amp2_fom();
        assert_eq!(normalize_metric(27.12, amp.get("gain").unwrap()), -1.0);
        let p = normalize_metric(65.76, amp.get("power").unwrap());
        assert!((p - 80.0 / 30.0).abs() < 1e-12);
        assert!((p - 2.6667).abs() < 1e-4);
        // passing metric exactly at norm_min: power 0 µW
        assert_eq!(normalize_metric(0.0, amp.get("power").unwrap()), 0.0);
    }

    #[test]
    fn bound_clips_upper_side_only() {
        assert_eq!(bound_value(2.172, Some(2.0)), 2.0);
        assert_eq!(bound_value(0.463, Some(2.0)), 0.463);
        assert_eq!(bound_value(-1.0, Some(2.0)), -1.0);
        assert_eq!(bound_value(7.0, None), 7.0);
    }

    #[test]
    fn amp2_gp_bo_row() {
        let m = mv(&[
            ("gbw", 4.63),
            ("gain", 27.12),
            ("cmrr", 106.08),
            ("pm", 97.76),
            ("power", 27.02),
        ]);
        let fom = compute_fom(&m, &presets::amp2_fom()).unwrap();
        // -1 + 0.463 + 1.326 + 2 - 0.900667
        assert!((fom - 1.888333).abs() < 1e-5, "{fom}");
        assert_eq!(count_missed_specs(&m, &presets::amp2_fom()).unwrap(), 1);
    }

    #[test]
    fn comparator_ado_row() {
        let m = mv(&[
            ("gain", 60.83),
            ("ugf", 12.04),
            ("v_hys_err", 159.83),
            ("v_offset", -1.00),
            ("power", 109.89),
        ]);
        let fom = compute_fom(&m, &presets::comparator_fom()).unwrap();
        assert!((fom - 0.902467).abs() < 1e-5, "{fom}");
    }

    #[test]
    fn all_failed_constant() {
        // GBW -1, gain -1, CMRR -1, PM -4, power -80/30
        let expected = -1.0 - 1.0 - 1.0 - 4.0 - 80.0 / 30.0;
        assert!((presets::amp2_fom().all_failed_fom() - expected).abs() < 1e-12);
        assert!((expected + 9.667).abs() < 1e-3);
    }

    #[test]
    fn missing_metric_is_error() {
        let m = mv(&[("gain", 60.0)]);
        assert_eq!(
            compute_fom(&m, &presets::amp2_fom()).unwrap_err(),
            FomError::MissingMetric("gbw".into())
        );
    }

    #[test]
    fn at_spec_is_zero_missed() {
        let cfg = presets::comparator_fom();
        let m: MetricVector = cfg.metrics().iter().map(|s| (s.name.clone(), s.spec)).collect();
        assert_eq!(count_missed_specs(&m, &cfg).unwrap(), 0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = presets::amp2_fom().get("power").unwrap().clone();
        s.failed = 10.0;
        assert!(s.validate().is_err());
        let mut s = presets::amp2_fom().get("gain").unwrap().clone();
        s.bound = Some(0.0);
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn failing_metric_normalizes_to_constant(v in -1000.0f64..59.99) {
            let spec = presets::amp2_fom().get("gain").unwrap().clone();
            prop_assert_eq!(normalize_metric(v, &spec), -1.0);
        }

        #[test]
        fn fom_monotone_in_passing_metrics(
            base in 60.0f64..110.0, delta in 0.0f64..10.0,
            power in 0.0f64..30.0, dp in 0.0f64..5.0,
        ) {
            let cfg = presets::amp2_fom();
            let mk = |gain: f64, p: f64| mv(&[
                ("gbw", 2.0), ("gain", gain), ("cmrr", 80.0), ("pm", 60.0), ("power", p),
            ]);
            let lo = compute_fom(&mk(base, power), &cfg).unwrap();
            let hi = compute_fom(&mk(base + delta, power), &cfg).unwrap();
            prop_assert!(hi >= lo);
            let p2 = (power + dp).min(30.0);
            let less = compute_fom(&mk(base, p2), &cfg).unwrap();
            prop_assert!(less <= lo);
        }
    }
}
