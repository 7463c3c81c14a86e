//! Strict reader for `name = value unit` blocks in model replies.

use thiserror::Error;

use crate::design::{DesignPoint, DesignSpace, Quantity};

/// Relative slack (of the range width) within which out-of-range values are clamped.
const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("parameter `{name}` is missing")]
    MissingParameter { name: String },
    #[error("value `{text}` for parameter `{name}` is not a number with a recognized unit")]
    NotNumeric { name: String, text: String },
    #[error("parameter `{name}` = {value:e} is outside its range [{lower:e}, {upper:e}]")]
    OutOfRange {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
}

impl ParseError {
    pub fn name(&self) -> &str {
        match self {
            ParseError::MissingParameter { name }
            | ParseError::NotNumeric { name, .. }
            | ParseError::OutOfRange { name, .. } => name,
        }
    }
}

/// Contents of every fenced block, in order. An unterminated final fence runs to the end.
pub fn extract_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

fn unit_factor(unit: &str) -> Option<(f64, Option<Quantity>)> {
    use Quantity::*;
    let f = match unit {
        "" => return Some((1.0, None)),
        "m" => (1.0, Length),
        "mm" => (1e-3, Length),
        "um" | "µm" | "μm" => (1e-6, Length),
        "nm" => (1e-9, Length),
        "F" => (1.0, Capacitance),
        "uF" | "µF" | "μF" => (1e-6, Capacitance),
        "nF" => (1e-9, Capacitance),
        "pF" => (1e-12, Capacitance),
        "fF" => (1e-15, Capacitance),
        "Ω" | "ohm" | "Ohm" | "ohms" => (1.0, Resistance),
        "kΩ" | "kohm" | "kOhm" | "kohms" | "k" => (1e3, Resistance),
        "MΩ" | "Mohm" | "MOhm" => (1e6, Resistance),
        "Hz" => (1.0, Dimensionless),
        "kHz" => (1e3, Dimensionless),
        "MHz" => (1e6, Dimensionless),
        "GHz" => (1e9, Dimensionless),
        _ => return None,
    };
    Some((f.0, Some(f.1)))
}

/// Parse `12.5 um`-style text into SI, checking the unit suits `quantity`.
/// Frequency units are accepted only for dimensionless parameters.
pub fn parse_value(text: &str, quantity: Quantity) -> Option<f64> {
    let t = text.trim().trim_end_matches([',', ';']).trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let number: f64 = t[..split].parse().ok()?;
    let (factor, kind) = unit_factor(t[split..].trim())?;
    if let Some(kind) = kind {
        if kind != quantity {
            return None;
        }
    }
    let v = number * factor;
    v.is_finite().then_some(v)
}

/// Parse the last fenced block of `text` (or the whole text without one).
pub fn parse_response(text: &str, space: &DesignSpace) -> Result<DesignPoint, ParseError> {
    parse_with_tolerance(text, space, CLAMP_TOLERANCE)
}

/// Like [`parse_response`] with a custom relative clamp tolerance.
pub fn parse_with_tolerance(text: &str, space: &DesignSpace, tolerance: f64) -> Result<DesignPoint, ParseError> {
    let body = extract_blocks(text).pop().unwrap_or_else(|| text.to_string());
    let mut raw: Vec<Option<&str>> = vec![None; space.dim()];
    for line in body.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        let Some((name, value)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            continue;
        };
        let name = name.trim().trim_matches('`');
        if let Some(i) = space.index_of(name) {
            raw[i] = Some(value);
        }
    }
    let mut values = Vec::with_capacity(space.dim());
    for (p, text) in space.parameters().iter().zip(raw) {
        let text = text.ok_or_else(|| ParseError::MissingParameter { name: p.name.clone() })?;
        let v = parse_value(text.trim().trim_matches('`'), p.quantity).ok_or_else(|| ParseError::NotNumeric {
            name: p.name.clone(),
            text: text.trim().to_string(),
        })?;
        let slack = tolerance * (p.upper - p.lower).abs();
        if v < p.lower - slack || v > p.upper + slack {
            return Err(ParseError::OutOfRange {
                name: p.name.clone(),
                value: v,
                lower: p.lower,
                upper: p.upper,
            });
        }
        values.push(v.clamp(p.lower, p.upper));
    }
    Ok(DesignPoint::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    fn amp2_block(skip: Option<&str>, w1: &str) -> String {
        let lines = [
            ("W1", w1),
            ("L1", "0.5 um"),
            ("W3", "2um"),
            ("L3", "500nm"),
            ("W5", "1 µm"),
            ("L5", "0.3 μm"),
            ("W6", "20 um"),
            ("L6", "0.2 um"),
            ("W7", "4 um"),
            ("L7", "0.2 um"),
            ("Wb", "2 um"),
            ("Lb", "1 um"),
            ("Rz", "5 kΩ"),
            ("Cc", "2 pF"),
        ];
        let body: Vec<String> = lines
            .iter()
            .filter(|(n, _)| Some(*n) != skip)
            .map(|(n, v)| format!("{n} = {v}"))
            .collect();
        format!("Reasoning first.\n```\n{}\n```\nDone.", body.join("\n"))
    }

    #[test]
    fn well_formed_block() {
        let space = Preset::Amp2.space();
        let p = parse_response(&amp2_block(None, "10 um"), &space).unwrap();
        assert_eq!(p.len(), 14);
        assert!((p[0] - 10e-6).abs() < 1e-18);
        assert!((p[3] - 500e-9).abs() < 1e-18);
        assert!((p[12] - 5e3).abs() < 1e-9);
        assert!((p[13] - 2e-12).abs() < 1e-24);
    }

    #[test]
    fn width_below_range_is_rejected() {
        let space = Preset::Amp2.space();
        match parse_response(&amp2_block(None, "60nm"), &space) {
            Err(ParseError::OutOfRange { name, lower, upper, .. }) => {
                assert_eq!(name, "W1");
                assert_eq!(lower, 120e-9);
                assert_eq!(upper, 50e-6);
            }
            r => panic!("{r:?}"),
        }
        let e = parse_response(&amp2_block(None, "60nm"), &space).unwrap_err();
        assert!(e.to_string().contains("1.2e-7"), "{e}");
    }

    #[test]
    fn missing_and_garbled() {
        let space = Preset::Amp2.space();
        assert_eq!(
            parse_response(&amp2_block(Some("Cc"), "10 um"), &space),
            Err(ParseError::MissingParameter { name: "Cc".into() })
        );
        let e = parse_response(&amp2_block(None, "ten microns"), &space).unwrap_err();
        assert_eq!(e.name(), "W1");
        assert!(matches!(e, ParseError::NotNumeric { .. }));
        // unit of the wrong kind
        assert!(parse_response(&amp2_block(None, "10 pF"), &space).is_err());
    }

    #[test]
    fn last_block_wins_and_names_are_case_insensitive() {
        let space = Preset::Branin.space();
        let text = "```\nx1 = 1\nx2 = 1\n```\nactually:\n```\nX1: 2.5\n- x2 = 3e0\n```";
        assert_eq!(parse_response(text, &space).unwrap().values(), &[2.5, 3.0]);
        assert_eq!(parse_response("x1 = -5\nx2 = 15", &space).unwrap().values(), &[-5.0, 15.0]);
    }

    #[test]
    fn boundary_round_off_is_clamped() {
        let space = Preset::Branin.space();
        let p = parse_response("x1 = 10.000000000001\nx2 = 0", &space).unwrap();
        assert_eq!(p[0], 10.0);
        assert!(parse_response("x1 = 10.001\nx2 = 0", &space).is_err());
    }

    #[test]
    fn unit_table() {
        let close = |t: &str, q: Quantity, want: f64| {
            let v = parse_value(t, q).unwrap();
            assert!((v - want).abs() <= 1e-12 * want.abs(), "{t}: {v}");
        };
        close("3 kohm", Quantity::Resistance, 3e3);
        close("1.5e3", Quantity::Resistance, 1.5e3);
        close("20 MHz", Quantity::Dimensionless, 20e6);
        close("100fF", Quantity::Capacitance, 100e-15);
        close("1e-3 um", Quantity::Length, 1e-9);
        assert_eq!(parse_value("7 parsecs", Quantity::Length), None);
        assert_eq!(parse_value("", Quantity::Length), None);
    }
}
