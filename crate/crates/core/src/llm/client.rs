//! OpenAI-compatible chat-completions client over blocking HTTP.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::{StatusCode, Url};
use serde::Serialize;
use serde_json::Value;

use super::{ChatClient, ChatMessage, LlmConfig, LlmError};

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: usize,
}

enum Failure {
    Transient { timeout: bool, message: String },
    Fatal(LlmError),
}

#[derive(Debug)]
pub struct HttpClient {
    config: LlmConfig,
    url: Url,
    api_key: Option<String>,
    http: Client,
    /// One line per transport attempt, newest last.
    attempt_log: Vec<String>,
}

fn is_local(url: &Url) -> bool {
    matches!(url.host_str(), Some("localhost" | "127.0.0.1" | "[::1]" | "::1"))
}

impl HttpClient {
    /// Reads the API key from `config.api_key_env`; a key is mandatory unless
    /// the endpoint is on the loopback interface.
    pub fn new(config: &LlmConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        HttpClient::with_key(config, key)
    }

    pub fn with_key(config: &LlmConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        config.validate()?;
        let url = Url::parse(&config.endpoint)
            .map_err(|e| LlmError::Config(format!("endpoint `{}`: {e}", config.endpoint)))?;
        if api_key.is_none() && !is_local(&url) {
            return Err(LlmError::Auth(format!(
                "no API key in environment variable `{}` for remote endpoint {}",
                config.api_key_env, config.endpoint
            )));
        }
        let http = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpClient {
            config: config.clone(),
            url,
            api_key,
            http,
            attempt_log: Vec::new(),
        })
    }

    pub fn attempt_log(&self) -> &[String] {
        &self.attempt_log
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Result<String, Failure> {
        let body = Request {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut req = self.http.post(self.url.clone()).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Transient {
            timeout: e.is_timeout(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Transient {
            timeout: e.is_timeout(),
            message: e.to_string(),
        })?;
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Failure::Fatal(LlmError::Auth(format!("endpoint returned {status}"))));
        }
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Failure::Transient {
                timeout: false,
                message: format!("HTTP {}", status.as_u16()),
            });
        }
        if !status.is_success() {
            return Err(Failure::Fatal(LlmError::Http {
                status: status.as_u16(),
                body: text,
            }));
        }
        extract_content(&text).map_err(Failure::Fatal)
    }
}

/// `choices[0].message.content` of a chat-completion response body.
pub(crate) fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
}

impl ChatClient for HttpClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let attempts = self.config.transport_attempts;
        let mut last = (false, String::new());
        for n in 1..=attempts {
            match self.attempt(messages) {
                Ok(content) => {
                    self.attempt_log.push(format!("attempt {n}: ok"));
                    return Ok(content);
                }
                Err(Failure::Fatal(e)) => {
                    self.attempt_log.push(format!("attempt {n}: {e}"));
                    return Err(e);
                }
                Err(Failure::Transient { timeout, message }) => {
                    self.attempt_log.push(format!("attempt {n}: {message}"));
                    last = (timeout, message);
                    if n < attempts {
                        let wait = self.config.backoff_ms.saturating_mul(1 << (n - 1).min(16));
                        thread::sleep(Duration::from_millis(wait));
                    }
                }
            }
        }
        if last.0 {
            Err(LlmError::Timeout { attempts })
        } else {
            Err(LlmError::Transport {
                attempts,
                message: last.1,
            })
        }
    }
}
