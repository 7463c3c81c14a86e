//! Deterministic scripted stand-in for a chat model.
//!
//! Script files hold canned replies separated by lines containing only `---`.
//! An entry consisting of `@generate` (and any reply once the script runs out)
//! is synthesized: the first parseable demonstration block in the prompt is
//! perturbed in unit-cube coordinates, or a uniform point is drawn when the
//! prompt has none. One block is produced per requested point.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::parse::{extract_blocks, parse_with_tolerance};
use super::prompt::{format_point, COUNT_MARKER};
use super::{ChatClient, ChatMessage, LlmError, Role};
use crate::design::DesignSpace;

const GENERATE: &str = "@generate";
const PERTURBATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockEntry {
    Reply(String),
    Generate,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
}

impl MockScript {
    pub fn parse(text: &str) -> Self {
        let mut entries = Vec::new();
        let mut current: Vec<&str> = Vec::new();
        let mut flush = |lines: &mut Vec<&str>| {
            let body = lines.join("\n");
            let body = body.trim();
            if !body.is_empty() {
                entries.push(if body == GENERATE {
                    MockEntry::Generate
                } else {
                    MockEntry::Reply(body.to_string())
                });
            }
            lines.clear();
        };
        for line in text.lines() {
            if line.trim() == "---" {
                flush(&mut current);
            } else {
                current.push(line);
            }
        }
        flush(&mut current);
        MockScript { entries }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        Ok(MockScript::parse(&text))
    }
}

#[derive(Debug, Clone)]
pub struct MockClient {
    script: VecDeque<MockEntry>,
    space: DesignSpace,
    rng: ChaCha8Rng,
    calls: usize,
}

impl MockClient {
    pub fn new(script: MockScript, space: DesignSpace, seed: u64) -> Self {
        MockClient {
            script: script.entries.into(),
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calls: 0,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    fn requested(messages: &[ChatMessage]) -> usize {
        messages
            .iter()
            .rev()
            .filter(|m| m.role == Role::User)
            .find_map(|m| {
                m.content
                    .lines()
                    .find_map(|l| l.trim().strip_prefix(COUNT_MARKER))
                    .and_then(|n| n.trim().parse().ok())
            })
            .unwrap_or(1)
    }

    fn generate(&mut self, messages: &[ChatMessage]) -> String {
        let anchor = messages
            .iter()
            .filter(|m| m.role == Role::User)
            .flat_map(|m| extract_blocks(&m.content))
            .find_map(|b| parse_with_tolerance(&b, &self.space, 1e-3).ok())
            .and_then(|p| self.space.to_unit_cube(&p).ok());
        let noise = Normal::new(0.0, PERTURBATION).expect("valid normal");
        let dim = self.space.dim();
        let mut out = String::from("Following the design principles, here is my proposal.\n");
        for i in 0..Self::requested(messages) {
            let unit: Vec<f64> = match &anchor {
                Some(a) => a.iter().map(|u| (u + noise.sample(&mut self.rng)).clamp(0.0, 1.0)).collect(),
                None => (0..dim).map(|_| self.rng.random::<f64>()).collect(),
            };
            let point = self.space.from_unit_cube(&unit).expect("unit-cube point");
            out.push_str(&format!("\nDesign point {}:\n```\n{}\n```\n", i + 1, format_point(&self.space, &point)));
        }
        out
    }
}

impl ChatClient for MockClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.calls += 1;
        match self.script.pop_front() {
            Some(MockEntry::Reply(text)) => Ok(text),
            Some(MockEntry::Generate) | None => Ok(self.generate(messages)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{build_init_prompt, build_iteration_prompt, parse_response, propose, propose_init};
    use crate::llm::{Demonstration, LlmConfig, TaskCard, Templates};
    use crate::design::DesignPoint;
    use crate::presets::Preset;

    const GOOD: &str = "```\nx1 = 2\nx2 = 3\n```";

    fn card() -> TaskCard {
        TaskCard::new(Preset::Branin, &Templates::builtin())
    }

    fn demo(x: [f64; 2]) -> Demonstration {
        Demonstration {
            point: DesignPoint::new(x.to_vec()),
            metrics: [("value".to_string(), -3.0)].into_iter().collect(),
            regions: Default::default(),
            simulation_ok: true,
            fom: -3.0,
        }
    }

    #[test]
    fn script_parsing() {
        let s = MockScript::parse("first\nreply\n---\n@generate\n---\n\n---\nlast");
        assert_eq!(
            s.entries,
            vec![
                MockEntry::Reply("first\nreply".into()),
                MockEntry::Generate,
                MockEntry::Reply("last".into())
            ]
        );
    }

    #[test]
    fn bad_then_good() {
        let script = MockScript::parse(&format!("I refuse.\n---\n{GOOD}"));
        let mut m = MockClient::new(script, card().space().clone(), 0);
        let p = propose(&mut m, &card(), &[demo([1.0, 1.0])], &LlmConfig::default()).unwrap();
        assert_eq!(m.calls(), 2);
        assert_eq!(p.point.values(), &[2.0, 3.0]);
    }

    #[test]
    fn good_takes_one_call() {
        let mut m = MockClient::new(MockScript::parse(GOOD), card().space().clone(), 0);
        propose(&mut m, &card(), &[demo([1.0, 1.0])], &LlmConfig::default()).unwrap();
        assert_eq!(m.calls(), 1);
    }

    #[test]
    fn three_bad_exhausts() {
        let script = MockScript::parse("no\n---\nx1 = 99\nx2 = 1\n---\nx1 = 1");
        let mut m = MockClient::new(script, card().space().clone(), 0);
        let r = propose(&mut m, &card(), &[demo([1.0, 1.0])], &LlmConfig::default());
        assert!(matches!(r, Err(LlmError::ProposerExhausted { attempts: 3, .. })));
        assert_eq!(m.calls(), 3);
    }

    #[test]
    fn generated_reply_perturbs_best_demo() {
        let c = card();
        let msgs = build_iteration_prompt(&c, &[demo([9.0, 14.0]), demo([-4.0, 1.0])], &LlmConfig::default()).unwrap();
        let mut m = MockClient::new(MockScript::default(), c.space().clone(), 4);
        let reply = m.complete(&msgs).unwrap();
        let p = parse_response(&reply, c.space()).unwrap();
        assert!((p[0] - 9.0).abs() < 15.0 * 0.6 && (p[1] - 14.0).abs() < 15.0 * 0.6);
        let again = MockClient::new(MockScript::default(), c.space().clone(), 4).complete(&msgs).unwrap();
        assert_eq!(reply, again);
    }

    #[test]
    fn generated_init_has_requested_count() {
        let c = card();
        let msgs = build_init_prompt(&c, 5, &LlmConfig::default()).unwrap();
        let mut m = MockClient::new(MockScript::default(), c.space().clone(), 1);
        let reply = m.complete(&msgs).unwrap();
        assert_eq!(extract_blocks(&reply).len(), 5);
        let mut m = MockClient::new(MockScript::default(), c.space().clone(), 1);
        let init = propose_init(&mut m, &c, 5, &LlmConfig::default()).unwrap();
        assert_eq!(m.calls(), 1);
        assert!(init.points.iter().all(Option::is_some));
    }
}
