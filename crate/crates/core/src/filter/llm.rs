//! Chat-completion LLM filter. Documents are chunked on section
//! boundaries to fit a per-request budget, each chunk is sent through a
//! prompt that demands verbatim excerpts, and every exchange is stored
//! in a replay cache keyed by the request digest — a recorded run
//! replays deterministically with no network at all.

use std::path::PathBuf;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::filter::{require_fetched, FilterError, FilterInterface};
use crate::tokenize::{hex_encode, split_sentences, TokenPolicy};
use crate::types::{FilteredContent, Query, RawContent, Section};

/// The prompt shipped with the crate; `{query}` and `{content}` are
/// the substitution slots.
pub const DEFAULT_PROMPT_TEMPLATE: &str = include_str!("prompt_template.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct LlmFilterConfig {
    /// Chat-completion style endpoint, POSTed to directly.
    pub endpoint: String,
    pub model: String,
    /// Template with `{query}` and `{content}` slots.
    pub prompt_template: String,
    /// Whitespace-word budget per request; larger documents are split
    /// on section boundaries.
    pub chunk_size: usize,
    pub max_retries: u32,
    /// 0 by default: as deterministic as the provider allows.
    pub temperature: f64,
}

impl LlmFilterConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
            chunk_size: 4000,
            max_retries: 3,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), InvalidLlmConfig> {
        if self.endpoint.is_empty() {
            return Err(InvalidLlmConfig::Endpoint);
        }
        if self.chunk_size == 0 {
            return Err(InvalidLlmConfig::ChunkSize);
        }
        if !self.prompt_template.contains("{query}") || !self.prompt_template.contains("{content}") {
            return Err(InvalidLlmConfig::Template);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidLlmConfig {
    #[error("llm endpoint must not be empty")]
    Endpoint,
    #[error("chunk_size must be at least 1")]
    ChunkSize,
    #[error("prompt template must contain {{query}} and {{content}} slots")]
    Template,
}

pub struct LlmFilter {
    config: LlmFilterConfig,
    policy: TokenPolicy,
    api_key: Option<String>,
    replay_dir: Option<PathBuf>,
    agent: ureq::Agent,
}

impl LlmFilter {
    /// The environment variable holding the API key. Keys never travel
    /// through flags or config files.
    pub const API_KEY_ENV: &'static str = "WISE_LLM_API_KEY";

    /// Builds the filter; the API key is read from the environment,
    /// and `replay_dir`, when given, records and replays exchanges.
    pub fn new(
        config: LlmFilterConfig,
        policy: TokenPolicy,
        replay_dir: Option<PathBuf>,
    ) -> Result<Self, InvalidLlmConfig> {
        config.validate()?;
        if let Some(dir) = &replay_dir {
            let _ = std::fs::create_dir_all(dir);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            policy,
            api_key: std::env::var(Self::API_KEY_ENV).ok(),
            replay_dir,
            agent,
        })
    }

    /// Digest identifying one request: model, temperature, and the full
    /// prompt. The replay cache is keyed by it.
    fn request_key(&self, prompt: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.config.model.as_bytes());
        hasher.update(b"|");
        hasher.update(format!("{:?}", self.config.temperature).as_bytes());
        hasher.update(b"|");
        hasher.update(prompt.as_bytes());
        hex_encode(&hasher.finalize())
    }

    fn replay_path(&self, key: &str) -> Option<PathBuf> {
        self.replay_dir.as_ref().map(|dir| dir.join(format!("{key}.json")))
    }

    /// One filtered completion: replay cache first, then the network
    /// with bounded retries. Returns the model's text.
    fn complete(&self, prompt: &str, uri: &str) -> Result<String, FilterError> {
        let key = self.request_key(prompt);
        if let Some(path) = self.replay_path(&key) {
            if let Ok(body) = std::fs::read_to_string(&path) {
                return extract_message_text(&body).ok_or_else(|| FilterError::Replay {
                    uri: uri.to_string(),
                    message: format!("unparseable recorded response {}", path.display()),
                });
            }
        }

        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 * attempt as u64));
            }
            match self.send(prompt) {
                Ok(body) => {
                    let Some(text) = extract_message_text(&body) else {
                        last_error = "response carried no message content".to_string();
                        continue;
                    };
                    if let Some(path) = self.replay_path(&key) {
                        let tmp = path.with_extension("tmp");
                        let write = std::fs::write(&tmp, &body).and_then(|()| std::fs::rename(&tmp, &path));
                        if let Err(e) = write {
                            return Err(FilterError::Replay {
                                uri: uri.to_string(),
                                message: format!("cannot record response: {e}"),
                            });
                        }
                    }
                    return Ok(text);
                }
                Err(SendError::Fatal(message)) => {
                    return Err(FilterError::Llm { uri: uri.to_string(), message });
                }
                Err(SendError::Retryable(message)) => last_error = message,
            }
        }
        Err(FilterError::Llm {
            uri: uri.to_string(),
            message: format!("gave up after {} retries: {last_error}", self.config.max_retries),
        })
    }

    fn send(&self, prompt: &str) -> Result<String, SendError> {
        let payload = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&payload)
            .map_err(|e| SendError::Retryable(format!("transport: {e}")))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| SendError::Retryable(format!("body read: {e}")))?;
        match status {
            200..=299 => Ok(body),
            429 | 500..=599 => Err(SendError::Retryable(format!("http {status}"))),
            _ => Err(SendError::Fatal(format!("http {status}: {}", body.chars().take(200).collect::<String>()))),
        }
    }
}

enum SendError {
    Retryable(String),
    Fatal(String),
}

/// Pulls the assistant text out of a chat-completion response body.
fn extract_message_text(body: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

/// Packs sections into chunks of at most `budget` whitespace words,
/// splitting oversized sections on sentence boundaries. Order is
/// preserved; nothing is dropped except empty sections.
pub(crate) fn chunk_sections(sections: &[Section], budget: usize) -> Vec<String> {
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut current_words = 0;

    let flush = |current: &mut String, current_words: &mut usize, chunks: &mut Vec<String>| {
        if *current_words > 0 {
            chunks.push(std::mem::take(current));
            *current_words = 0;
        }
    };

    for section in sections {
        let words = section.text.split_whitespace().count();
        if words == 0 {
            continue;
        }
        if words > budget {
            flush(&mut current, &mut current_words, &mut chunks);
            for sentence in split_sentences(&section.text) {
                let sentence_words = sentence.split_whitespace().count();
                if current_words + sentence_words > budget && current_words > 0 {
                    flush(&mut current, &mut current_words, &mut chunks);
                }
                if !current.is_empty() {
                    current.push(' ');
                }
                current.push_str(sentence);
                current_words += sentence_words;
            }
            flush(&mut current, &mut current_words, &mut chunks);
        } else if current_words + words > budget {
            flush(&mut current, &mut current_words, &mut chunks);
            current.push_str(&section.text);
            current_words = words;
        } else {
            if !current.is_empty() {
                current.push('\n');
            }
            current.push_str(&section.text);
            current_words += words;
        }
    }
    if current_words > 0 {
        chunks.push(current);
    }
    chunks
}

impl FilterInterface for LlmFilter {
    fn filter(&self, query: &Query, raw: &RawContent) -> Result<FilteredContent, FilterError> {
        require_fetched(raw)?;
        let mut segments = Vec::new();
        for chunk in chunk_sections(&raw.sections, self.config.chunk_size) {
            let prompt = self
                .config
                .prompt_template
                .replace("{query}", &query.text)
                .replace("{content}", &chunk);
            let response = self.complete(&prompt, &raw.source.uri)?;
            for line in response.lines() {
                for sentence in split_sentences(line) {
                    segments.push(sentence.to_string());
                }
            }
        }
        Ok(FilteredContent::from_segments(raw.source.clone(), segments, &self.policy))
    }
}
