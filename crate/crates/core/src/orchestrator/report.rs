//! Result tables and convergence curves from run logs.

use std::fmt::Write as _;

use super::run::best_so_far;
use super::runlog::{Header, LogLine, RecordLine, RunLog};
use super::RunError;
use crate::fom::{compute_fom, count_missed_specs, hits_spec};
use crate::presets::Preset;

fn preset_of(header: &Header) -> Result<Preset, RunError> {
    header.preset.parse().map_err(|_| RunError::Log {
        line: 1,
        message: format!("unknown preset `{}`", header.preset),
    })
}

/// Recompute every logged fom from its logged metrics and demand exact equality.
pub fn verify_replay(log: &RunLog) -> Result<(), RunError> {
    let header = log.header().ok_or(RunError::Log {
        line: 1,
        message: "missing header".into(),
    })?;
    let preset = preset_of(header)?;
    if preset.checksum() != header.preset_checksum {
        return Err(RunError::Log {
            line: 1,
            message: format!("preset `{}` checksum differs from this build", header.preset),
        });
    }
    let fom = preset.fom();
    for (i, line) in log.lines.iter().enumerate() {
        if let LogLine::Record(r) = line {
            let again = compute_fom(&r.metrics, &fom).map_err(|e| RunError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            if again.to_bits() != r.fom.to_bits() {
                return Err(RunError::Log {
                    line: i + 1,
                    message: format!("logged fom {} but metrics give {again}", r.fom),
                });
            }
        }
    }
    Ok(())
}

/// Row label distinguishing ablation arms.
pub fn method_label(h: &Header) -> String {
    let mut label = h.method.clone();
    let default_init = if h.method == "gp_bo" { "uniform_random" } else { "llm_zero_shot" };
    if h.init_strategy != default_init {
        let _ = write!(label, " (init: {})", h.init_strategy);
    }
    if h.method != "gp_bo" && h.sampler != "top_k" {
        let _ = write!(label, " (sampler: {})", h.sampler);
    }
    label
}

fn best_record(log: &RunLog) -> Option<&RecordLine> {
    log.records().fold(None, |best: Option<&RecordLine>, r| match best {
        Some(b) if b.fom >= r.fom => Some(b),
        _ => Some(r),
    })
}

fn fmt_num(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.3e}")
    } else {
        format!("{v:.2}")
    }
}

/// Markdown tables (one per preset) of each log's best record.
pub fn report(logs: &[(String, RunLog)]) -> Result<String, RunError> {
    let mut presets: Vec<Preset> = Vec::new();
    for (_, log) in logs {
        verify_replay(log)?;
        let p = preset_of(log.header().expect("verified"))?;
        if !presets.contains(&p) {
            presets.push(p);
        }
    }
    let mut out = String::new();
    for preset in presets {
        let fom = preset.fom();
        let rows: Vec<(&Header, &RecordLine)> = logs
            .iter()
            .filter_map(|(_, log)| {
                let h = log.header()?;
                (h.preset == preset.name()).then_some(())?;
                Some((h, best_record(log)?))
            })
            .collect();
        let top = rows.iter().map(|(_, r)| r.fom).fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(out, "### {}\n", preset.name());
        let mut head = String::from("| Method | # Simulation Init. + Batch × Iter |");
        let mut rule = String::from("|---|---|");
        for m in fom.metrics() {
            let unit = if m.unit.is_empty() { String::new() } else { format!(" ({})", m.unit) };
            let _ = write!(head, " {}{} |", m.name, unit);
            rule.push_str("---|");
        }
        head.push_str(" FOM | # Missed Spec. |");
        rule.push_str("---|---|");
        let _ = writeln!(out, "{head}\n{rule}");
        for (h, r) in rows {
            let _ = write!(out, "| {} | {} |", method_label(h), h.protocol);
            for m in fom.metrics() {
                let v = r.metrics.get(&m.name).copied().unwrap_or(f64::NAN);
                let mark = if preset.is_circuit() && !hits_spec(v, m) { " ✗" } else { "" };
                let _ = write!(out, " {}{mark} |", fmt_num(v));
            }
            let f = fmt_num(r.fom);
            let f = if r.fom == top { format!("**{f}**") } else { f };
            let missed = if preset.is_circuit() {
                count_missed_specs(&r.metrics, &fom).map_err(|e| RunError::Numerical(e.to_string()))?
            } else {
                0
            };
            let _ = writeln!(out, " {f} | {missed} |");
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV of best-so-far fom against evaluation index, one column per log.
pub fn convergence_csv(logs: &[(String, RunLog)]) -> String {
    let curves: Vec<Vec<f64>> = logs.iter().map(|(_, l)| best_so_far(l)).collect();
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("evaluation");
    for (name, _) in logs {
        let _ = write!(out, ",{}", name.replace(',', "_"));
    }
    out.push('\n');
    for i in 0..len {
        let _ = write!(out, "{}", i + 1);
        for c in &curves {
            match c.get(i) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
