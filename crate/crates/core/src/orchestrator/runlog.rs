//! JSON-lines run log: one header, then records, transcripts and iteration
//! diagnostics in the order they happened, then one summary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::RunError;
use crate::design::{DeviceRegionReport, EvalRecord, MetricVector, Source};
use crate::llm::ChatMessage;
use crate::surrogate::GpHyper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: String,
    pub method: String,
    pub preset: String,
    pub preset_checksum: String,
    pub seed: u64,
    pub init_strategy: String,
    pub sampler: String,
    pub protocol: String,
    pub expected_records: usize,
    /// Resolved configuration.
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub index: usize,
    pub iteration: usize,
    pub source: Source,
    /// True when the LLM failed and a uniform random point took its slot.
    pub substituted: bool,
    pub point: Vec<f64>,
    pub metrics: MetricVector,
    pub regions: DeviceRegionReport,
    pub simulation_ok: bool,
    pub fom: f64,
}

impl RecordLine {
    pub fn new(index: usize, record: &EvalRecord, substituted: bool) -> Self {
        RecordLine {
            index,
            iteration: record.iteration,
            source: record.source,
            substituted,
            point: record.point.values().to_vec(),
            metrics: record.metrics.clone(),
            regions: record.regions.clone(),
            simulation_ok: record.simulation_ok,
            fom: record.fom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    Partial,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub id: usize,
    pub iteration: usize,
    pub purpose: String,
    pub outcome: Outcome,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDiagnostics {
    pub hyper: GpHyper,
    pub lml: f64,
    pub qei: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLine {
    pub iteration: usize,
    pub gp: Option<GpDiagnostics>,
    pub transcripts: Vec<usize>,
    pub substitutions: usize,
    pub best_fom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub records: usize,
    pub best_index: usize,
    pub best_fom: f64,
    pub best_point: Vec<f64>,
    pub best_metrics: MetricVector,
    pub missed_specs: usize,
    pub llm_calls: usize,
    pub substitutions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(Header),
    Record(RecordLine),
    Transcript(TranscriptLine),
    Iteration(IterationLine),
    Summary(SummaryLine),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub lines: Vec<LogLine>,
}

impl RunLog {
    pub fn push(&mut self, line: LogLine) {
        self.lines.push(line);
    }

    pub fn header(&self) -> Option<&Header> {
        self.lines.iter().find_map(|l| match l {
            LogLine::Header(h) => Some(h),
            _ => None,
        })
    }

    pub fn records(&self) -> impl Iterator<Item = &RecordLine> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Record(r) => Some(r),
            _ => None,
        })
    }

    pub fn iterations(&self) -> impl Iterator<Item = &IterationLine> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Iteration(r) => Some(r),
            _ => None,
        })
    }

    pub fn transcripts(&self) -> impl Iterator<Item = &TranscriptLine> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Transcript(r) => Some(r),
            _ => None,
        })
    }

    pub fn summary(&self) -> Option<&SummaryLine> {
        self.lines.iter().find_map(|l| match l {
            LogLine::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&serde_json::to_string(line).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    /// Parse a log, naming the first bad line (1-based) on failure.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut log = RunLog::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(line).map_err(|e| RunError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            if i == 0 && !matches!(parsed, LogLine::Header(_)) {
                return Err(RunError::Log {
                    line: 1,
                    message: "first line must be the header".into(),
                });
            }
            log.push(parsed);
        }
        if log.header().is_none() {
            return Err(RunError::Log {
                line: 1,
                message: "empty log".into(),
            });
        }
        Ok(log)
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(path, self.to_jsonl()).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        RunLog::parse(&text)
    }
}
