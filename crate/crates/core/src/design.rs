//! Design spaces, design points, evaluation records and the append-only dataset.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("point has {got} values but the design space has {expected} parameters")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("design space must have at least one parameter")]
    EmptySpace,
    #[error("parameter `{name}` = {value} lies outside [{lower}, {upper}]")]
    OutOfRange {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Logarithmic,
}

/// Physical quantity of a parameter. Values are always stored in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Length,
    Resistance,
    Capacitance,
    Dimensionless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub quantity: Quantity,
    /// Free-form note shown to the LLM (e.g. which devices share this size).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl Parameter {
    pub fn new(
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        scale: Scale,
        quantity: Quantity,
    ) -> Result<Self, DesignError> {
        let p = Parameter {
            name: name.into(),
            lower,
            upper,
            scale,
            quantity,
            description: String::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }

    fn validate(&self) -> Result<(), DesignError> {
        let bad = |reason: &str| DesignError::InvalidParameter {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(bad("empty name"));
        }
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(bad("bounds must be finite"));
        }
        if self.lower >= self.upper {
            return Err(bad("lower bound must be below upper bound"));
        }
        if self.scale == Scale::Logarithmic && self.lower <= 0.0 {
            return Err(bad("logarithmic scale requires a positive lower bound"));
        }
        Ok(())
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Parameter>", into = "Vec<Parameter>")]
pub struct DesignSpace {
    parameters: Vec<Parameter>,
}

impl TryFrom<Vec<Parameter>> for DesignSpace {
    type Error = DesignError;

    fn try_from(parameters: Vec<Parameter>) -> Result<Self, Self::Error> {
        DesignSpace::new(parameters)
    }
}

impl From<DesignSpace> for Vec<Parameter> {
    fn from(space: DesignSpace) -> Self {
        space.parameters
    }
}

impl DesignSpace {
    pub fn new(parameters: Vec<Parameter>) -> Result<Self, DesignError> {
        if parameters.is_empty() {
            return Err(DesignError::EmptySpace);
        }
        for (i, p) in parameters.iter().enumerate() {
            p.validate()?;
            if parameters[..i]
                .iter()
                .any(|q| q.name.eq_ignore_ascii_case(&p.name))
            {
                return Err(DesignError::DuplicateName(p.name.clone()));
            }
        }
        Ok(DesignSpace { parameters })
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameters
            .iter()
            .position(|p| p.name.eq_ignore_ascii_case(name))
    }

    fn check_dim(&self, point: &DesignPoint) -> Result<(), DesignError> {
        if point.len() != self.dim() {
            return Err(DesignError::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// True iff every coordinate lies in its parameter's closed interval.
    pub fn contains(&self, point: &DesignPoint) -> Result<bool, DesignError> {
        self.check_dim(point)?;
        Ok(self
            .parameters
            .iter()
            .zip(point.values())
            .all(|(p, &v)| p.contains(v)))
    }

    /// Like [`contains`](Self::contains) but names the first offending parameter.
    pub fn check(&self, point: &DesignPoint) -> Result<(), DesignError> {
        self.check_dim(point)?;
        for (p, &v) in self.parameters.iter().zip(point.values()) {
            if !p.contains(v) {
                return Err(DesignError::OutOfRange {
                    name: p.name.clone(),
                    value: v,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        Ok(())
    }

    pub fn lower_corner(&self) -> DesignPoint {
        DesignPoint::new(self.parameters.iter().map(|p| p.lower).collect())
    }

    pub fn upper_corner(&self) -> DesignPoint {
        DesignPoint::new(self.parameters.iter().map(|p| p.upper).collect())
    }

    /// Map a point onto `[0, 1]^d`, honoring each parameter's scale.
    pub fn to_unit_cube(&self, point: &DesignPoint) -> Result<Vec<f64>, DesignError> {
        self.check(point)?;
        Ok(self
            .parameters
            .iter()
            .zip(point.values())
            .map(|(p, &v)| match p.scale {
                Scale::Linear => (v - p.lower) / (p.upper - p.lower),
                Scale::Logarithmic => (v.ln() - p.lower.ln()) / (p.upper.ln() - p.lower.ln()),
            })
            .map(|u| u.clamp(0.0, 1.0))
            .collect())
    }

    /// Inverse of [`to_unit_cube`](Self::to_unit_cube). Coordinates are clipped to
    /// `[0, 1]` first and the result is clamped to the parameter bounds.
    pub fn from_unit_cube(&self, unit: &[f64]) -> Result<DesignPoint, DesignError> {
        if unit.len() != self.dim() {
            return Err(DesignError::DimensionMismatch {
                expected: self.dim(),
                got: unit.len(),
            });
        }
        Ok(DesignPoint::new(
            self.parameters
                .iter()
                .zip(unit)
                .map(|(p, &u)| {
                    let u = u.clamp(0.0, 1.0);
                    let v = match p.scale {
                        Scale::Linear => p.lower + u * (p.upper - p.lower),
                        Scale::Logarithmic => {
                            (p.lower.ln() + u * (p.upper.ln() - p.lower.ln())).exp()
                        }
                    };
                    v.clamp(p.lower, p.upper)
                })
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignPoint(Vec<f64>);

impl DesignPoint {
    pub fn new(values: Vec<f64>) -> Self {
        DesignPoint(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for DesignPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Metric name to value, in the display units of the active figure-of-merit config.
pub type MetricVector = IndexMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Cutoff,
    Triode,
    Saturation,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Cutoff => "cutoff",
            Region::Triode => "triode",
            Region::Saturation => "saturation",
        }
    }
}

/// Device name to operating region, in netlist order.
pub type DeviceRegionReport = IndexMap<String, Region>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    LlmInit,
    Llm,
    GpBo,
    Random,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::LlmInit => "llm_init",
            Source::Llm => "llm",
            Source::GpBo => "gp_bo",
            Source::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub point: DesignPoint,
    pub metrics: MetricVector,
    pub regions: DeviceRegionReport,
    pub simulation_ok: bool,
    pub fom: f64,
    pub source: Source,
    /// 0 for initialization records.
    pub iteration: usize,
}

/// Append-only evaluation history. Records are never mutated or removed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<EvalRecord>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn push(&mut self, record: EvalRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EvalRecord> {
        self.records.iter()
    }

    /// Index of the record with maximal FOM; ties go to the earliest insertion.
    pub fn best_index(&self) -> Result<usize, DesignError> {
        let mut best: Option<usize> = None;
        for (i, r) in self.records.iter().enumerate() {
            match best {
                Some(b) if self.records[b].fom >= r.fom => {}
                _ => best = Some(i),
            }
        }
        best.ok_or(DesignError::EmptyDataset)
    }

    pub fn best(&self) -> Result<&EvalRecord, DesignError> {
        self.best_index().map(|i| &self.records[i])
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a EvalRecord;
    type IntoIter = std::slice::Iter<'a, EvalRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}
