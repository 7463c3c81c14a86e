//! Experiment configuration file (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::acquisition::AcquisitionConfig;
use crate::evaluator::ProcessConstants;
use crate::llm::LlmConfig;
use crate::presets::Preset;
use crate::sampler::SamplerConfig;
use crate::surrogate::GpFitConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AdoLlm,
    GpBo,
    LlmOnly,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AdoLlm => "ado_llm",
            Method::GpBo => "gp_bo",
            Method::LlmOnly => "llm_only",
        }
    }

    /// (llm, gp) queries per iteration when the file does not say.
    pub fn default_queries(&self) -> (usize, usize) {
        match self {
            Method::AdoLlm => (1, 4),
            Method::GpBo => (0, 5),
            Method::LlmOnly => (1, 0),
        }
    }

    pub fn default_init(&self) -> InitStrategy {
        match self {
            Method::GpBo => InitStrategy::UniformRandom,
            Method::AdoLlm | Method::LlmOnly => InitStrategy::LlmZeroShot,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        match s {
            "ado_llm" => Ok(Method::AdoLlm),
            "gp_bo" => Ok(Method::GpBo),
            "llm_only" => Ok(Method::LlmOnly),
            other => Err(RunError::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    LlmZeroShot,
    UniformRandom,
}

impl InitStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitStrategy::LlmZeroShot => "llm_zero_shot",
            InitStrategy::UniformRandom => "uniform_random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub method: Method,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    pub llm_queries_per_step: Option<usize>,
    pub gp_queries_per_step: Option<usize>,
    pub init_strategy: Option<InitStrategy>,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
}

fn default_n_init() -> usize {
    5
}

fn default_n_iter() -> usize {
    20
}

/// Acquisition settings; the batch size and seed come from the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    pub mc_samples: usize,
    pub restarts: usize,
    pub raw_candidates: usize,
    pub max_iter: usize,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        let d = AcquisitionConfig::default();
        AcquisitionSection {
            mc_samples: d.mc_samples,
            restarts: d.restarts,
            raw_candidates: d.raw_candidates,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub restarts: usize,
    pub noise_floor: f64,
    pub max_iter: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let d = GpFitConfig::default();
        SurrogateSection {
            restarts: d.restarts,
            noise_floor: d.noise_floor,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorSection {
    pub preset: Preset,
    #[serde(default)]
    pub constants: ProcessConstants,
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub evaluator: EvaluatorSection,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub surrogate: SurrogateSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fill method-dependent defaults and check consistency.
    pub fn resolve(&self) -> Result<RunConfig, RunError> {
        let run = &self.run;
        let (llm_q, gp_q) = run.method.default_queries();
        let cfg = RunConfig {
            method: run.method,
            preset: self.evaluator.preset,
            n_init: run.n_init,
            n_iter: run.n_iter,
            llm_queries: run.llm_queries_per_step.unwrap_or(llm_q),
            gp_queries: run.gp_queries_per_step.unwrap_or(gp_q),
            init_strategy: run.init_strategy.unwrap_or(run.method.default_init()),
            sampler: self.sampler,
            seed: run.seed,
            llm: self.llm.clone(),
            acquisition: self.acquisition.clone(),
            surrogate: self.surrogate.clone(),
            constants: self.evaluator.constants.clone(),
            output: run.output.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub method: Method,
    pub preset: Preset,
    pub n_init: usize,
    pub n_iter: usize,
    pub llm_queries: usize,
    pub gp_queries: usize,
    pub init_strategy: InitStrategy,
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub llm: LlmConfig,
    pub acquisition: AcquisitionSection,
    pub surrogate: SurrogateSection,
    pub constants: ProcessConstants,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `method` on `preset`.
    pub fn new(method: Method, preset: Preset) -> Self {
        let (llm_queries, gp_queries) = method.default_queries();
        RunConfig {
            method,
            preset,
            n_init: default_n_init(),
            n_iter: default_n_iter(),
            llm_queries,
            gp_queries,
            init_strategy: method.default_init(),
            sampler: SamplerConfig::default(),
            seed: 0,
            llm: LlmConfig::default(),
            acquisition: AcquisitionSection::default(),
            surrogate: SurrogateSection::default(),
            constants: ProcessConstants::default(),
            output: None,
        }
    }

    pub fn batch(&self) -> usize {
        self.llm_queries + self.gp_queries
    }

    pub fn expected_records(&self) -> usize {
        self.n_init + self.batch() * self.n_iter
    }

    pub fn uses_llm(&self) -> bool {
        self.llm_queries > 0 || self.init_strategy == InitStrategy::LlmZeroShot
    }

    /// `5+5×20`-style budget string.
    pub fn protocol(&self) -> String {
        format!("{}+{}×{}", self.n_init, self.batch(), self.n_iter)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.n_init == 0 {
            return bad("run.n_init must be at least 1".into());
        }
        match self.method {
            Method::AdoLlm if self.llm_queries == 0 || self.gp_queries == 0 => {
                return bad("ado_llm needs at least one LLM and one GP query per step".into())
            }
            Method::GpBo if self.llm_queries != 0 || self.gp_queries == 0 => {
                return bad("gp_bo takes only GP queries (llm_queries_per_step = 0, gp_queries_per_step >= 1)".into())
            }
            Method::LlmOnly if self.gp_queries != 0 || self.llm_queries == 0 => {
                return bad("llm_only takes only LLM queries (gp_queries_per_step = 0, llm_queries_per_step >= 1)".into())
            }
            _ => {}
        }
        if self.sampler.k == 0 {
            return bad("sampler.k must be at least 1".into());
        }
        let a = &self.acquisition;
        if a.mc_samples == 0 || a.restarts == 0 || a.raw_candidates == 0 || a.max_iter == 0 {
            return bad("acquisition settings must all be at least 1".into());
        }
        let s = &self.surrogate;
        if s.restarts == 0 || s.max_iter == 0 || !(s.noise_floor > 0.0 && s.noise_floor < 10.0) {
            return bad("surrogate.restarts and max_iter must be >= 1 and noise_floor in (0, 10)".into());
        }
        self.constants.validate().map_err(RunError::Config)?;
        if self.uses_llm() {
            self.llm.validate().map_err(|e| RunError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn acquisition_config(&self, seed: u64) -> AcquisitionConfig {
        AcquisitionConfig {
            batch_size: self.gp_queries,
            mc_samples: self.acquisition.mc_samples,
            restarts: self.acquisition.restarts,
            raw_candidates: self.acquisition.raw_candidates,
            max_iter: self.acquisition.max_iter,
            seed,
        }
    }

    pub fn gp_fit_config(&self, seed: u64) -> GpFitConfig {
        GpFitConfig {
            restarts: self.surrogate.restarts,
            noise_floor: self.surrogate.noise_floor,
            max_iter: self.surrogate.max_iter,
            seed,
        }
    }
}
