//! LLM proposer: prompt construction, response parsing, chat clients.

mod client;
mod mock;
mod parse;
mod prompt;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignPoint;

pub use client::HttpClient;
pub use mock::{MockClient, MockEntry, MockScript};
pub use parse::{extract_blocks, parse_response, parse_value, parse_with_tolerance, ParseError};
pub use prompt::{
    build_init_prompt, build_iteration_prompt, estimate_tokens, format_point, Demonstration, TaskCard, Templates,
    COUNT_MARKER, SECTION_MARKERS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("authentication: {0}")]
    Auth(String),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: usize },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("malformed chat-completion response: {0}")]
    MalformedResponse(String),
    #[error("no valid design point after {attempts} attempts (last error: {last_error})")]
    ProposerExhausted {
        attempts: usize,
        last_error: String,
        transcript: Vec<ChatMessage>,
    },
    #[error("prompt needs {needed} tokens but only {budget} are available")]
    PromptTooLong { needed: usize, budget: usize },
    #[error("template: {0}")]
    Template(String),
    #[error("mock script: {0}")]
    Script(String),
    #[error("invalid LLM configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: usize,
    /// Context window in tokens; prompts are budgeted to `context_tokens - max_tokens`.
    pub context_tokens: usize,
    /// Chat/parse rounds per proposal before giving up.
    pub retry_limit: usize,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub transport_attempts: usize,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Directory whose template files override the built-in ones.
    pub templates_dir: Option<PathBuf>,
    pub principles_file: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-3.5-turbo".to_string(),
            temperature: 0.5,
            max_tokens: 1000,
            context_tokens: 16_000,
            retry_limit: 3,
            api_key_env: "OPENAI_API_KEY".to_string(),
            transport_attempts: 3,
            backoff_ms: 500,
            timeout_secs: 60,
            templates_dir: None,
            principles_file: None,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.retry_limit < 1 {
            return Err(LlmError::Config("retry_limit must be at least 1".into()));
        }
        if self.transport_attempts < 1 {
            return Err(LlmError::Config("transport_attempts must be at least 1".into()));
        }
        if self.max_tokens >= self.context_tokens {
            return Err(LlmError::Config(format!(
                "max_tokens ({}) must be below context_tokens ({})",
                self.max_tokens, self.context_tokens
            )));
        }
        Ok(())
    }

    /// Tokens available to the prompt.
    pub fn prompt_budget(&self) -> usize {
        self.context_tokens.saturating_sub(self.max_tokens)
    }
}

/// Anything that can answer a chat-completion request.
pub trait ChatClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).complete(messages)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: DesignPoint,
    /// Every message exchanged, including the final accepted reply.
    pub transcript: Vec<ChatMessage>,
    pub calls: usize,
}

fn corrective_message(err: &ParseError) -> String {
    format!(
        "Your previous answer could not be used: {err}. Please answer again and give exactly one fenced block with one `name = value unit` line for every parameter, all inside the stated ranges."
    )
}

/// Chat until a reply parses into an in-space point, correcting the model after each failure.
pub fn propose(
    client: &mut dyn ChatClient,
    card: &TaskCard,
    demos: &[Demonstration],
    config: &LlmConfig,
) -> Result<Proposal, LlmError> {
    let prompt = build_iteration_prompt(card, demos, config)?;
    converse(client, card, prompt, config)
}

fn converse(
    client: &mut dyn ChatClient,
    card: &TaskCard,
    mut transcript: Vec<ChatMessage>,
    config: &LlmConfig,
) -> Result<Proposal, LlmError> {
    let mut last_error = String::new();
    for attempt in 1..=config.retry_limit {
        let reply = client.complete(&transcript)?;
        transcript.push(ChatMessage::assistant(reply.clone()));
        match parse_response(&reply, card.space()) {
            Ok(point) => {
                return Ok(Proposal {
                    point,
                    transcript,
                    calls: attempt,
                })
            }
            Err(e) => {
                last_error = e.to_string();
                if attempt < config.retry_limit {
                    transcript.push(ChatMessage::user(corrective_message(&e)));
                }
            }
        }
    }
    Err(LlmError::ProposerExhausted {
        attempts: config.retry_limit,
        last_error,
        transcript,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitProposal {
    /// One slot per requested point; `None` where every attempt failed.
    pub points: Vec<Option<DesignPoint>>,
    pub transcripts: Vec<Vec<ChatMessage>>,
    pub calls: usize,
}

/// Zero-shot initialization: one request for `n` points, then individual
/// re-requests for each slot the first reply did not fill.
pub fn propose_init(
    client: &mut dyn ChatClient,
    card: &TaskCard,
    n: usize,
    config: &LlmConfig,
) -> Result<InitProposal, LlmError> {
    let mut transcript = build_init_prompt(card, n, config)?;
    let reply = client.complete(&transcript)?;
    transcript.push(ChatMessage::assistant(reply.clone()));
    let mut points: Vec<DesignPoint> = Vec::new();
    for block in extract_blocks(&reply) {
        if points.len() == n {
            break;
        }
        if let Ok(p) = parse_response(&format!("```\n{block}\n```"), card.space()) {
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    let mut out = InitProposal {
        points: points.into_iter().map(Some).collect(),
        transcripts: vec![transcript],
        calls: 1,
    };
    while out.points.len() < n {
        let prompt = build_init_prompt(card, 1, config)?;
        match converse(client, card, prompt, config) {
            Ok(p) if !out.points.contains(&Some(p.point.clone())) => {
                out.calls += p.calls;
                out.points.push(Some(p.point));
                out.transcripts.push(p.transcript);
            }
            Ok(p) => {
                out.calls += p.calls;
                out.points.push(None);
                out.transcripts.push(p.transcript);
            }
            Err(LlmError::ProposerExhausted { attempts, transcript, .. }) => {
                out.calls += attempts;
                out.points.push(None);
                out.transcripts.push(transcript);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
