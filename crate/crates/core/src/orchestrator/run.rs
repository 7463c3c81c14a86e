//! The optimization loop shared by all three methods.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{InitStrategy, RunConfig};
use super::runlog::{GpDiagnostics, Header, IterationLine, LogLine, Outcome, RecordLine, RunLog, SummaryLine, TranscriptLine};
use super::seed::{derive_seed, stream};
use super::RunError;
use crate::acquisition::propose_batch;
use crate::design::{Dataset, DesignPoint, Source};
use crate::evaluator::CircuitModel;
use crate::fom::count_missed_specs;
use crate::llm::{propose, propose_init, ChatClient, ChatMessage, Demonstration, LlmError, TaskCard, Templates};
use crate::surrogate::gp_fit;

fn uniform_point(model: &CircuitModel, rng: &mut ChaCha8Rng) -> DesignPoint {
    let unit: Vec<f64> = (0..model.space().dim()).map(|_| rng.random::<f64>()).collect();
    model.space().from_unit_cube(&unit).expect("unit-cube point")
}

struct Engine<'a, 'c> {
    config: &'a RunConfig,
    model: CircuitModel,
    card: Option<TaskCard>,
    client: Option<&'a mut (dyn ChatClient + 'c)>,
    dataset: Dataset,
    log: RunLog,
    sampler_rng: ChaCha8Rng,
    substitute_rng: ChaCha8Rng,
    transcripts: usize,
    llm_calls: usize,
    substitutions: usize,
}

impl<'a, 'c> Engine<'a, 'c> {
    fn new(config: &'a RunConfig, client: Option<&'a mut (dyn ChatClient + 'c)>) -> Result<Self, RunError> {
        config.validate()?;
        let card = if config.uses_llm() {
            if client.is_none() {
                return Err(RunError::Config(format!("method {} needs an LLM client", config.method)));
            }
            let templates = Templates::from_config(&config.llm).map_err(|e| RunError::Config(e.to_string()))?;
            Some(TaskCard::new(config.preset, &templates))
        } else {
            None
        };
        Ok(Engine {
            config,
            model: CircuitModel::new(config.preset, config.constants.clone()),
            card,
            client,
            dataset: Dataset::new(),
            log: RunLog::default(),
            sampler_rng: stream(config.seed, "sampler", 0),
            substitute_rng: stream(config.seed, "substitute", 0),
            transcripts: 0,
            llm_calls: 0,
            substitutions: 0,
        })
    }

    fn header(&mut self) {
        let c = self.config;
        self.log.push(LogLine::Header(Header {
            version: env!("CARGO_PKG_VERSION").to_string(),
            method: c.method.as_str().to_string(),
            preset: c.preset.name().to_string(),
            preset_checksum: c.preset.checksum(),
            seed: c.seed,
            init_strategy: c.init_strategy.as_str().to_string(),
            sampler: c.sampler.kind.as_str().to_string(),
            protocol: c.protocol(),
            expected_records: c.expected_records(),
            config: serde_json::to_value(c).expect("config serializes"),
        }));
    }

    fn substitute(&mut self) -> DesignPoint {
        self.substitutions += 1;
        uniform_point(&self.model, &mut self.substitute_rng)
    }

    fn record_transcript(&mut self, iteration: usize, purpose: &str, outcome: Outcome, messages: Vec<ChatMessage>) -> usize {
        let id = self.transcripts;
        self.transcripts += 1;
        self.log.push(LogLine::Transcript(TranscriptLine {
            id,
            iteration,
            purpose: purpose.to_string(),
            outcome,
            messages,
        }));
        id
    }

    fn evaluate(&mut self, point: DesignPoint, source: Source, iteration: usize, substituted: bool) -> Result<(), RunError> {
        let rec = self
            .model
            .evaluate_record(point, source, iteration)
            .map_err(|e| RunError::Numerical(format!("evaluation left the design space: {e}")))?;
        self.log.push(LogLine::Record(RecordLine::new(self.dataset.len(), &rec, substituted)));
        self.dataset.push(rec);
        Ok(())
    }

    fn client(&mut self) -> &mut (dyn ChatClient + 'c) {
        self.client.as_deref_mut().expect("checked in Engine::new")
    }

    fn initialize(&mut self) -> Result<(), RunError> {
        let n = self.config.n_init;
        let points: Vec<(DesignPoint, Source, bool)> = match self.config.init_strategy {
            InitStrategy::UniformRandom => {
                let mut rng = stream(self.config.seed, "init", 0);
                (0..n).map(|_| (uniform_point(&self.model, &mut rng), Source::Random, false)).collect()
            }
            InitStrategy::LlmZeroShot => {
                let card = self.card.clone().expect("card exists when the LLM is used");
                let llm = self.config.llm.clone();
                let init = propose_init(self.client(), &card, n, &llm).map_err(RunError::Llm)?;
                self.llm_calls += init.calls;
                let first_reply = n + 1 - init.transcripts.len();
                for (i, t) in init.transcripts.into_iter().enumerate() {
                    let outcome = match i {
                        0 if first_reply == n => Outcome::Accepted,
                        0 => Outcome::Partial,
                        _ if init.points[first_reply + i - 1].is_some() => Outcome::Accepted,
                        _ => Outcome::Exhausted,
                    };
                    self.record_transcript(0, "init", outcome, t);
                }
                init.points
                    .into_iter()
                    .map(|p| match p {
                        Some(p) => (p, Source::LlmInit, false),
                        None => (self.substitute(), Source::LlmInit, true),
                    })
                    .collect()
            }
        };
        for (p, s, sub) in points {
            self.evaluate(p, s, 0, sub)?;
        }
        Ok(())
    }

    fn llm_proposal(&mut self, iteration: usize) -> Result<(DesignPoint, bool, usize), RunError> {
        let card = self.card.clone().expect("card exists when the LLM is used");
        let demos: Vec<Demonstration> = self
            .config
            .sampler
            .select(&self.dataset, &mut self.sampler_rng)
            .map_err(|e| RunError::Numerical(e.to_string()))?
            .iter()
            .map(Demonstration::from)
            .collect();
        let llm = self.config.llm.clone();
        match propose(self.client(), &card, &demos, &llm) {
            Ok(p) => {
                self.llm_calls += p.calls;
                let id = self.record_transcript(iteration, "propose", Outcome::Accepted, p.transcript);
                Ok((p.point, false, id))
            }
            Err(LlmError::ProposerExhausted {
                attempts, transcript, ..
            }) => {
                self.llm_calls += attempts;
                let id = self.record_transcript(iteration, "propose", Outcome::Exhausted, transcript);
                Ok((self.substitute(), true, id))
            }
            Err(e) => Err(RunError::Llm(e)),
        }
    }

    fn gp_batch(&mut self, iteration: usize) -> Result<(Vec<DesignPoint>, GpDiagnostics), RunError> {
        let space = self.model.space();
        let x: Vec<Vec<f64>> = self
            .dataset
            .iter()
            .map(|r| space.to_unit_cube(&r.point))
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let y: Vec<f64> = self.dataset.iter().map(|r| r.fom).collect();
        let seed = self.config.seed;
        let it = iteration as u64;
        let gp = gp_fit(&x, &y, &self.config.gp_fit_config(derive_seed(seed, "gp_fit", it)))
            .map_err(|e| RunError::Numerical(format!("GP fit: {e}")))?;
        let best = self.dataset.best().map_err(|e| RunError::Numerical(e.to_string()))?.fom;
        let acq = self.config.acquisition_config(derive_seed(seed, "qei_draws", it));
        let mut rng = stream(seed, "acquisition", it);
        let batch = propose_batch(&gp, space, best, &acq, &mut rng)
            .map_err(|e| RunError::Numerical(format!("acquisition: {e}")))?;
        Ok((
            batch.points,
            GpDiagnostics {
                hyper: gp.hyper().clone(),
                lml: gp.lml(),
                qei: batch.qei,
            },
        ))
    }

    fn iterate(&mut self, iteration: usize) -> Result<(), RunError> {
        let subs_before = self.substitutions;
        let mut batch: Vec<(DesignPoint, Source, bool)> = Vec::with_capacity(self.config.batch());
        let mut transcripts = Vec::new();
        for _ in 0..self.config.llm_queries {
            let (p, sub, id) = self.llm_proposal(iteration)?;
            transcripts.push(id);
            batch.push((p, Source::Llm, sub));
        }
        let gp = if self.config.gp_queries > 0 {
            let (points, diag) = self.gp_batch(iteration)?;
            batch.extend(points.into_iter().map(|p| (p, Source::GpBo, false)));
            Some(diag)
        } else {
            None
        };
        for (p, s, sub) in batch {
            self.evaluate(p, s, iteration, sub)?;
        }
        let best_fom = self.dataset.best().map(|r| r.fom).unwrap_or(f64::NEG_INFINITY);
        self.log.push(LogLine::Iteration(IterationLine {
            iteration,
            gp,
            transcripts,
            substitutions: self.substitutions - subs_before,
            best_fom,
        }));
        Ok(())
    }

    fn finish(mut self) -> Result<RunLog, RunError> {
        let best_index = self.dataset.best_index().map_err(|e| RunError::Numerical(e.to_string()))?;
        let best = &self.dataset.records()[best_index];
        let missed = count_missed_specs(&best.metrics, self.model.fom()).map_err(|e| RunError::Numerical(e.to_string()))?;
        self.log.push(LogLine::Summary(SummaryLine {
            records: self.dataset.len(),
            best_index,
            best_fom: best.fom,
            best_point: best.point.values().to_vec(),
            best_metrics: best.metrics.clone(),
            missed_specs: if self.config.preset.is_circuit() { missed } else { 0 },
            llm_calls: self.llm_calls,
            substitutions: self.substitutions,
        }));
        Ok(self.log)
    }
}

/// Run one experiment. `client` is required whenever the configuration uses the LLM.
pub fn run(config: &RunConfig, client: Option<&mut (dyn ChatClient + '_)>) -> Result<RunLog, RunError> {
    let mut engine = Engine::new(config, client)?;
    engine.header();
    engine.initialize()?;
    for it in 1..=config.n_iter {
        engine.iterate(it)?;
    }
    engine.finish()
}

/// Best fom seen so far after each evaluation.
pub fn best_so_far(log: &RunLog) -> Vec<f64> {
    log.records()
        .scan(f64::NEG_INFINITY, |best, r| {
            *best = best.max(r.fom);
            Some(*best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockClient, MockScript};
    use crate::orchestrator::config::Method;
    use crate::presets::Preset;

    fn quick(method: Method, preset: Preset) -> RunConfig {
        let mut c = RunConfig::new(method, preset);
        c.n_iter = 3;
        c.acquisition.mc_samples = 256;
        c.acquisition.raw_candidates = 64;
        c.acquisition.restarts = 2;
        c.acquisition.max_iter = 10;
        c.surrogate.restarts = 2;
        c.surrogate.max_iter = 50;
        c
    }

    fn mock(c: &RunConfig, script: &str) -> MockClient {
        MockClient::new(MockScript::parse(script), c.preset.space(), derive_seed(c.seed, "mock_llm", 0))
    }

    #[test]
    fn gp_bo_budget_and_sources() {
        let c = quick(Method::GpBo, Preset::Branin);
        let log = run(&c, None).unwrap();
        let recs: Vec<_> = log.records().collect();
        assert_eq!(recs.len(), 20);
        assert!(recs[..5].iter().all(|r| r.source == Source::Random));
        assert!(recs[5..].iter().all(|r| r.source == Source::GpBo));
        assert_eq!(log.iterations().count(), 3);
        assert!(log.iterations().all(|i| i.gp.is_some()));
        let s = log.summary().unwrap();
        assert_eq!(s.records, 20);
        let curve = best_so_far(&log);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*curve.last().unwrap(), s.best_fom);
    }

    #[test]
    fn ado_llm_composition_and_determinism() {
        let c = quick(Method::AdoLlm, Preset::Amp2);
        let mut m1 = mock(&c, "");
        let a = run(&c, Some(&mut m1)).unwrap();
        let mut m2 = mock(&c, "");
        let b = run(&c, Some(&mut m2)).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let recs: Vec<_> = a.records().collect();
        assert_eq!(recs.len(), c.expected_records());
        assert!(recs[..5].iter().all(|r| r.source == Source::LlmInit));
        for it in 1..=3 {
            let srcs: Vec<Source> = recs.iter().filter(|r| r.iteration == it).map(|r| r.source).collect();
            assert_eq!(srcs, [Source::Llm, Source::GpBo, Source::GpBo, Source::GpBo, Source::GpBo]);
        }
    }

    #[test]
    fn exhausted_proposer_is_substituted() {
        let mut c = quick(Method::LlmOnly, Preset::Branin);
        c.n_iter = 1;
        let mut m = mock(&c, "@generate\n---\nbad\n---\nbad\n---\nbad");
        let log = run(&c, Some(&mut m)).unwrap();
        let last = log.records().last().unwrap();
        assert!(last.substituted);
        assert_eq!(last.source, Source::Llm);
        assert_eq!(log.summary().unwrap().substitutions, 1);
        assert!(log.transcripts().any(|t| t.outcome == Outcome::Exhausted));
    }

    #[test]
    fn llm_methods_need_a_client() {
        let c = quick(Method::LlmOnly, Preset::Branin);
        assert!(matches!(run(&c, None), Err(RunError::Config(_))));
    }
}
