//! Prompt templates and rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ChatMessage, LlmConfig, LlmError};
use crate::design::{DesignPoint, DesignSpace, DeviceRegionReport, EvalRecord, MetricVector, Quantity, Scale};
use crate::fom::{hits_spec, FomConfig};
use crate::presets::Preset;

/// Headings of the four reasoning stages, in prompt order.
pub const SECTION_MARKERS: [&str; 4] = ["## (a)", "## (b)", "## (c)", "## (d)"];
/// Line prefix stating how many points the prompt asks for.
pub const COUNT_MARKER: &str = "Number of design points requested:";

const SYSTEM: &str = include_str!("../../templates/system.txt");
const INIT: &str = include_str!("../../templates/init.txt");
const ITERATION: &str = include_str!("../../templates/iteration.txt");
const PRINCIPLES: &str = include_str!("../../templates/principles.txt");
const FORMAT: &str = include_str!("../../templates/format.txt");
const CIRCUITS: [(&str, &str); 4] = [
    ("amp2", include_str!("../../templates/circuits/amp2.txt")),
    ("comparator", include_str!("../../templates/circuits/comparator.txt")),
    ("branin", include_str!("../../templates/circuits/branin.txt")),
    ("hartmann6", include_str!("../../templates/circuits/hartmann6.txt")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    pub system: String,
    pub init: String,
    pub iteration: String,
    pub principles: String,
    pub format: String,
    /// Circuit descriptions keyed by preset name.
    pub circuits: BTreeMap<String, String>,
}

impl Templates {
    pub fn builtin() -> Self {
        Templates {
            system: SYSTEM.to_string(),
            init: INIT.to_string(),
            iteration: ITERATION.to_string(),
            principles: PRINCIPLES.to_string(),
            format: FORMAT.to_string(),
            circuits: CIRCUITS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Built-in templates with any same-named files from `dir` (and
    /// `circuits/<preset>.txt`) taking precedence.
    pub fn load(dir: Option<&Path>, principles: Option<&Path>) -> Result<Self, LlmError> {
        let mut t = Templates::builtin();
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| LlmError::Template(format!("{}: {e}", p.display())));
        if let Some(dir) = dir {
            if !dir.is_dir() {
                return Err(LlmError::Template(format!("{} is not a directory", dir.display())));
            }
            for (name, slot) in [
                ("system.txt", &mut t.system),
                ("init.txt", &mut t.init),
                ("iteration.txt", &mut t.iteration),
                ("principles.txt", &mut t.principles),
                ("format.txt", &mut t.format),
            ] {
                let path = dir.join(name);
                if path.is_file() {
                    *slot = read(&path)?;
                }
            }
            for (name, text) in t.circuits.iter_mut() {
                let path = dir.join("circuits").join(format!("{name}.txt"));
                if path.is_file() {
                    *text = read(&path)?;
                }
            }
        }
        if let Some(p) = principles {
            t.principles = read(p)?;
        }
        Ok(t)
    }

    pub fn from_config(config: &LlmConfig) -> Result<Self, LlmError> {
        Templates::load(config.templates_dir.as_deref(), config.principles_file.as_deref())
    }
}

/// Replace every `{{name}}` in `template`; unknown placeholders are an error.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, LlmError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| LlmError::Template("unterminated `{{` placeholder".into()))?;
        let key = after[..end].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| LlmError::Template(format!("unknown placeholder `{key}`")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Unit suffix and SI-to-display factor used in prompts.
pub(crate) fn display_unit(q: Quantity) -> (&'static str, f64) {
    match q {
        Quantity::Length => ("um", 1e6),
        Quantity::Resistance => ("kohm", 1e-3),
        Quantity::Capacitance => ("pF", 1e12),
        Quantity::Dimensionless => ("", 1.0),
    }
}

fn sig(v: f64) -> String {
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    format!("{rounded}")
}

fn with_unit(value: String, unit: &str) -> String {
    if unit.is_empty() {
        value
    } else {
        format!("{value} {unit}")
    }
}

/// One `name = value unit` line per parameter, lossless (shortest round-trip digits).
pub fn format_point(space: &DesignSpace, point: &DesignPoint) -> String {
    render_point(space, point, |v| format!("{v}"))
}

fn render_point(space: &DesignSpace, point: &DesignPoint, fmt: impl Fn(f64) -> String) -> String {
    space
        .parameters()
        .iter()
        .zip(point.values())
        .map(|(p, &v)| {
            let (unit, k) = display_unit(p.quantity);
            format!("{} = {}", p.name, with_unit(fmt(v * k), unit))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A previously evaluated point shown to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub point: DesignPoint,
    pub metrics: MetricVector,
    pub regions: DeviceRegionReport,
    pub simulation_ok: bool,
    pub fom: f64,
}

impl From<&EvalRecord> for Demonstration {
    fn from(r: &EvalRecord) -> Self {
        Demonstration {
            point: r.point.clone(),
            metrics: r.metrics.clone(),
            regions: r.regions.clone(),
            simulation_ok: r.simulation_ok,
            fom: r.fom,
        }
    }
}

/// Everything the model is told about a sizing task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCard {
    preset: Preset,
    space: DesignSpace,
    fom: FomConfig,
    pub description: String,
    pub principles: String,
    pub format: String,
    system: String,
    init: String,
    iteration: String,
}

impl TaskCard {
    pub fn new(preset: Preset, templates: &Templates) -> Self {
        let space = preset.space();
        let example = space
            .parameters()
            .iter()
            .map(|p| with_unit(format!("{} = <value>", p.name), display_unit(p.quantity).0))
            .collect::<Vec<_>>()
            .join("\n");
        let format = templates.format.replace("{{example}}", &example);
        TaskCard {
            preset,
            fom: preset.fom(),
            space,
            description: templates.circuits.get(preset.name()).cloned().unwrap_or_default(),
            principles: templates.principles.clone(),
            format,
            system: templates.system.clone(),
            init: templates.init.clone(),
            iteration: templates.iteration.clone(),
        }
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn fom(&self) -> &FomConfig {
        &self.fom
    }

    pub fn parameters_text(&self) -> String {
        let mut out = String::new();
        for p in self.space.parameters() {
            let (unit, k) = display_unit(p.quantity);
            let scale = match p.scale {
                Scale::Linear => "linear",
                Scale::Logarithmic => "logarithmic",
            };
            let _ = write!(
                out,
                "- {}: range [{}, {}]{}{}, {scale} scale",
                p.name,
                sig(p.lower * k),
                sig(p.upper * k),
                if unit.is_empty() { "" } else { " " },
                unit
            );
            if !p.description.is_empty() {
                let _ = write!(out, ". {}", p.description);
            }
            out.push('\n');
        }
        out.trim_end().to_string()
    }

    pub fn specs_text(&self) -> String {
        if !self.preset.is_circuit() {
            return self
                .fom
                .metrics()
                .iter()
                .map(|m| format!("- {}: as large as possible", m.name))
                .collect::<Vec<_>>()
                .join("\n");
        }
        self.fom
            .metrics()
            .iter()
            .map(|m| format!("- {}: {}", m.name, m.describe()))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render_demo(&self, idx: usize, d: &Demonstration) -> String {
        let mut out = format!("### Example {} (FOM = {})\nDesign point:\n```\n", idx + 1, sig(d.fom));
        out.push_str(&render_point(&self.space, &d.point, sig));
        out.push_str("\n```\nMetrics:\n");
        for (name, &v) in &d.metrics {
            let spec = self.fom.get(name);
            let unit = spec.map(|s| s.unit.as_str()).unwrap_or("");
            let _ = write!(out, "- {name} = {}", with_unit(sig(v), unit));
            if let (Some(s), true) = (spec, self.preset.is_circuit()) {
                let status = if hits_spec(v, s) { "met" } else { "MISSED" };
                let _ = write!(out, " (spec {}, {status})", s.describe());
            }
            out.push('\n');
        }
        if !d.simulation_ok {
            out.push_str("Simulation failed: no valid operating point, so every metric is reported at its failure value.\n");
        }
        if !d.regions.is_empty() {
            let regions: Vec<String> = d.regions.iter().map(|(k, r)| format!("{k} {}", r.as_str())).collect();
            let _ = writeln!(out, "Operating regions: {}", regions.join(", "));
        }
        out
    }
}

/// Character-based token estimate (4 characters per token, rounded up).
pub fn estimate_tokens(messages: &[ChatMessage]) -> usize {
    let chars: usize = messages.iter().map(|m| m.content.chars().count()).sum();
    chars.div_ceil(4)
}

fn fit(messages: Vec<ChatMessage>, config: &LlmConfig) -> Result<Vec<ChatMessage>, LlmError> {
    let needed = estimate_tokens(&messages);
    let budget = config.prompt_budget();
    if needed > budget {
        return Err(LlmError::PromptTooLong { needed, budget });
    }
    Ok(messages)
}

/// Zero-shot prompt asking for `n` distinct points.
pub fn build_init_prompt(card: &TaskCard, n: usize, config: &LlmConfig) -> Result<Vec<ChatMessage>, LlmError> {
    if n == 0 {
        return Err(LlmError::Config("initial point count must be at least 1".into()));
    }
    let count = n.to_string();
    let user = render(
        &card.init,
        &[
            ("description", card.description.trim()),
            ("parameters", &card.parameters_text()),
            ("specs", &card.specs_text()),
            ("principles", card.principles.trim()),
            ("format", card.format.trim()),
            ("count", &count),
        ],
    )?;
    fit(vec![ChatMessage::system(card.system.trim()), ChatMessage::user(user)], config)
}

/// Four-stage prompt with demonstrations (best first) asking for one point.
/// Trailing demonstrations are dropped until the prompt fits the budget; at
/// least one is always kept.
pub fn build_iteration_prompt(
    card: &TaskCard,
    demos: &[Demonstration],
    config: &LlmConfig,
) -> Result<Vec<ChatMessage>, LlmError> {
    let parameters = card.parameters_text();
    let specs = card.specs_text();
    let rendered: Vec<String> = demos.iter().enumerate().map(|(i, d)| card.render_demo(i, d)).collect();
    let mut keep = rendered.len();
    loop {
        let demos_text = if keep == 0 {
            "No previous design points are available.".to_string()
        } else {
            rendered[..keep].join("\n")
        };
        let user = render(
            &card.iteration,
            &[
                ("description", card.description.trim()),
                ("parameters", &parameters),
                ("specs", &specs),
                ("demos", demos_text.trim()),
                ("principles", card.principles.trim()),
                ("format", card.format.trim()),
            ],
        )?;
        let messages = vec![ChatMessage::system(card.system.trim()), ChatMessage::user(user)];
        if keep <= 1 || estimate_tokens(&messages) <= config.prompt_budget() {
            return fit(messages, config);
        }
        keep -= 1;
    }
}
