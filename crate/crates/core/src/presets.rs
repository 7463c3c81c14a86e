//! Built-in circuit and benchmark presets: design spaces and FOM configurations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::{DesignSpace, Parameter, Quantity, Scale};
use crate::fom::{Direction, FomConfig, MetricSpec, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Amp2,
    Comparator,
    Branin,
    Hartmann6,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Amp2,
        Preset::Comparator,
        Preset::Branin,
        Preset::Hartmann6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Amp2 => "amp2",
            Preset::Comparator => "comparator",
            Preset::Branin => "branin",
            Preset::Hartmann6 => "hartmann6",
        }
    }

    pub fn space(&self) -> DesignSpace {
        match self {
            Preset::Amp2 => amp2_space(),
            Preset::Comparator => comparator_space(),
            Preset::Branin => branin_space(),
            Preset::Hartmann6 => hartmann6_space(),
        }
    }

    pub fn fom(&self) -> FomConfig {
        match self {
            Preset::Amp2 => amp2_fom(),
            Preset::Comparator => comparator_fom(),
            Preset::Branin | Preset::Hartmann6 => synthetic_fom(),
        }
    }

    pub fn is_circuit(&self) -> bool {
        matches!(self, Preset::Amp2 | Preset::Comparator)
    }

    /// SHA-256 over the canonical JSON of the design space and FOM config.
    pub fn checksum(&self) -> String {
        let body = serde_json::json!({ "space": self.space(), "fom": self.fom() });
        let digest = Sha256::digest(body.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected amp2, comparator, branin or hartmann6)"))
    }
}

fn param(name: &str, lower: f64, upper: f64, scale: Scale, q: Quantity, desc: &str) -> Parameter {
    Parameter::new(name, lower, upper, scale, q)
        .expect("preset parameter")
        .with_description(desc)
}

fn sized_pairs(
    groups: &[(&str, &str)],
    width: (f64, f64),
    length: (f64, f64),
) -> Vec<Parameter> {
    let mut out = Vec::with_capacity(groups.len() * 2);
    for (tag, desc) in groups {
        out.push(param(
            &format!("W{tag}"),
            width.0,
            width.1,
            Scale::Logarithmic,
            Quantity::Length,
            &format!("channel width of {desc}"),
        ));
        out.push(param(
            &format!("L{tag}"),
            length.0,
            length.1,
            Scale::Linear,
            Quantity::Length,
            &format!("channel length of {desc}"),
        ));
    }
    out
}

/// Two-stage Miller amplifier: 6 sized device groups plus Rz and Cc (d = 14).
pub fn amp2_space() -> DesignSpace {
    let mut params = sized_pairs(
        &[
            ("1", "M1/M2 (NMOS input pair)"),
            ("3", "M3/M4 (PMOS mirror load)"),
            ("5", "M5 (bias reference diode)"),
            ("6", "M6 (PMOS second-stage driver)"),
            ("7", "M7 (NMOS second-stage current sink)"),
            ("b", "Mb (NMOS tail current source)"),
        ],
        (120e-9, 50e-6),
        (80e-9, 1e-6),
    );
    params.push(param(
        "Rz",
        10.0,
        100e3,
        Scale::Logarithmic,
        Quantity::Resistance,
        "nulling resistor in series with Cc",
    ));
    params.push(param(
        "Cc",
        10e-15,
        100e-12,
        Scale::Logarithmic,
        Quantity::Capacitance,
        "Miller compensation capacitor",
    ));
    DesignSpace::new(params).expect("amp2 space")
}

/// Hysteresis comparator: 6 sized device groups (d = 12).
pub fn comparator_space() -> DesignSpace {
    DesignSpace::new(sized_pairs(
        &[
            ("1", "M1/M2 (NMOS input pair)"),
            ("3", "M3/M4 (PMOS diode loads)"),
            ("5", "M5/M6 (PMOS cross-coupled positive-feedback pair)"),
            ("7", "M7/M8 (PMOS output-stage mirror)"),
            ("9", "M9/M10/M11 (NMOS output stage)"),
            ("b", "Mb (NMOS tail current source)"),
        ],
        (90e-9, 200e-6),
        (90e-9, 1e-6),
    ))
    .expect("comparator space")
}

pub fn branin_space() -> DesignSpace {
    DesignSpace::new(vec![
        param("x1", -5.0, 10.0, Scale::Linear, Quantity::Dimensionless, ""),
        param("x2", 0.0, 15.0, Scale::Linear, Quantity::Dimensionless, ""),
    ])
    .expect("branin space")
}

pub fn hartmann6_space() -> DesignSpace {
    DesignSpace::new(
        (1..=6)
            .map(|i| {
                param(
                    &format!("x{i}"),
                    0.0,
                    1.0,
                    Scale::Linear,
                    Quantity::Dimensionless,
                    "",
                )
            })
            .collect(),
    )
    .expect("hartmann6 space")
}

#[allow(clippy::too_many_arguments)]
fn metric(
    name: &str,
    unit: &str,
    direction: Direction,
    spec: f64,
    norm: (f64, f64),
    failed: f64,
    sign: Sign,
    bound: Option<f64>,
) -> MetricSpec {
    MetricSpec {
        name: name.into(),
        unit: unit.into(),
        direction,
        spec,
        norm_min: norm.0,
        norm_max: norm.1,
        failed,
        sign,
        bound,
        magnitude: false,
    }
}

pub fn amp2_fom() -> FomConfig {
    use Direction::*;
    use Sign::*;
    FomConfig::new(vec![
        metric("gbw", "MHz", AtLeast, 1.0, (0.0, 10.0), -10.0, Plus, Some(2.0)),
        metric("gain", "dB", AtLeast, 60.0, (0.0, 60.0), -60.0, Plus, Some(2.0)),
        metric("cmrr", "dB", AtLeast, 75.0, (0.0, 80.0), -80.0, Plus, Some(2.0)),
        metric("pm", "deg", AtLeast, 60.0, (0.0, 45.0), -180.0, Plus, Some(2.0)),
        metric("power", "uW", AtMost, 30.0, (0.0, 30.0), 80.0, Minus, None),
    ])
    .expect("amp2 fom")
}

pub fn comparator_fom() -> FomConfig {
    use Direction::*;
    use Sign::*;
    let mut offset = metric("v_offset", "mV", AtMost, 20.0, (0.0, 20.0), 40.0, Minus, None);
    offset.magnitude = true;
    FomConfig::new(vec![
        metric("gain", "dB", AtLeast, 60.0, (0.0, 60.0), -60.0, Plus, Some(2.0)),
        metric("ugf", "MHz", AtLeast, 10.0, (0.0, 10.0), -10.0, Plus, Some(2.0)),
        metric("v_hys_err", "mV", AtMost, 300.0, (0.0, 300.0), 600.0, Minus, None),
        offset,
        metric("power", "uW", AtMost, 150.0, (0.0, 150.0), 300.0, Minus, None),
    ])
    .expect("comparator fom")
}

/// Identity objective for benchmark functions: FOM equals the single `value` metric.
pub fn synthetic_fom() -> FomConfig {
    FomConfig::new(vec![metric(
        "value",
        "",
        Direction::AtLeast,
        f64::MIN,
        (0.0, 1.0),
        f64::MIN,
        Sign::Plus,
        None,
    )])
    .expect("synthetic fom")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(amp2_space().dim(), 14);
        assert_eq!(comparator_space().dim(), 12);
        assert_eq!(branin_space().dim(), 2);
        assert_eq!(hartmann6_space().dim(), 6);
    }

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            assert_eq!(p.checksum().len(), 64);
        }
        assert!("opamp".parse::<Preset>().is_err());
    }

    #[test]
    fn signs_match_objective_layout() {
        let signs = |c: FomConfig| c.metrics().iter().map(|m| m.sign).collect::<Vec<_>>();
        use Sign::*;
        assert_eq!(signs(amp2_fom()), vec![Plus, Plus, Plus, Plus, Minus]);
        assert_eq!(signs(comparator_fom()), vec![Plus, Plus, Minus, Minus, Minus]);
    }
}
