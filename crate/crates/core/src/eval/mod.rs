//! Run rendered prompts against a chat-completion endpoint or a scripted
//! mock, with a response cache, retries, bounded parallelism and answer
//! parsing. Results are JSONL run files: a manifest line, then one record
//! per item.

mod backend;
mod cache;
mod parse;
mod runner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use backend::{
    extract_message, BackendError, ChatBackend, ChatRequest, HttpBackend, MockBackend, MockRule,
    MockScript,
};
pub use cache::{request_digest, ResponseCache};
pub use parse::{parse_choice, parse_numeric, parse_text, Parsed};
pub use runner::{
    complete, prompt_digest, read_run, run_batch, write_run, Completion, EvalRecord, ParsedAnswer,
    RunFile, RunManifest,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("transport error after {retries} retries: {why}")]
    Transport { retries: u32, why: String },
    #[error("endpoint error (status {status}): {why}")]
    Endpoint { status: u16, why: String },
    #[error("malformed response: {0}")]
    Response(String),
    #[error("run file line {line}: {why}")]
    RunFile { line: usize, why: String },
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
    pub api_key_env: String,
    /// First retry waits this long; each further retry doubles it.
    pub backoff_base_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_ms: 60_000,
            max_retries: 3,
            max_in_flight: 4,
            cache_dir: None,
            api_key_env: "MODEL_API_KEY".into(),
            backoff_base_ms: 500,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.max_in_flight == 0 {
            return Err(EvalError::Config("max in-flight must be at least 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(EvalError::Config("timeout must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(EvalError::Config(format!(
                "temperature {} is invalid",
                self.temperature
            )));
        }
        Ok(())
    }
}
