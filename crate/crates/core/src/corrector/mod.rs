//! Prompted post-correction of OCR text.
//!
//! A zero-shot prompt is the instruction prefix plus the OCR text. A few-shot
//! prompt appends a block of dictionary hints, one `token -> candidate (gloss)`
//! line per [`SimilarPair`]. Rendering is pure so a stored prompt can be
//! replayed against a backend to reproduce a result.

mod backends;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::SimilarPair;

pub use backends::{
    prompt_hash, EchoBackend, HttpBackend, HttpBackendConfig, TableBackend, LLM_API_KEY_ENV,
    LLM_BASE_URL_ENV, LLM_MODEL_ENV,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend refused the request (HTTP {status}): {body}")]
    BackendRefused { status: u16, body: String },
    #[error("backend returned an empty completion")]
    ResponseEmpty,
    #[error("prompt is {len} characters, limit is {max}")]
    PromptTooLong { len: usize, max: usize },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("no canned completion for prompt {0}")]
    Unmapped(String),
    #[error("invalid correction request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub prefix: String,
    pub suffix_header: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            prefix: "Fix the grammar of the following text".into(),
            suffix_header: "The following are potentially similar words from the dictionary".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    FewShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub ocr_text: String,
    pub mode: PromptMode,
    pub language: String,
    pub pairs: Vec<SimilarPair>,
    pub template: PromptTemplate,
}

impl CorrectionRequest {
    pub fn zero_shot(ocr_text: impl Into<String>, language: impl Into<String>) -> Self {
        Self {
            ocr_text: ocr_text.into(),
            mode: PromptMode::ZeroShot,
            language: language.into(),
            pairs: Vec::new(),
            template: PromptTemplate::default(),
        }
    }

    pub fn few_shot(
        ocr_text: impl Into<String>,
        language: impl Into<String>,
        pairs: Vec<SimilarPair>,
    ) -> Self {
        Self { mode: PromptMode::FewShot, pairs, ..Self::zero_shot(ocr_text, language) }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.template.prefix.trim().is_empty() {
            return Err(LlmError::InvalidRequest("prompt prefix is empty".into()));
        }
        if self.mode == PromptMode::ZeroShot && !self.pairs.is_empty() {
            return Err(LlmError::InvalidRequest("zero-shot requests carry no hint pairs".into()));
        }
        Ok(())
    }
}

pub fn render_pair(pair: &SimilarPair) -> String {
    format!("{} -> {} ({})", pair.token, pair.candidate, pair.gloss)
}

pub fn render_prompt(req: &CorrectionRequest) -> String {
    let mut prompt = format!("{}:\n\n{}", req.template.prefix, req.ocr_text);
    if req.mode == PromptMode::FewShot && !req.pairs.is_empty() {
        prompt.push_str("\n\n");
        prompt.push_str(&req.template.suffix_header);
        prompt.push(':');
        for pair in &req.pairs {
            prompt.push('\n');
            prompt.push_str(&render_pair(pair));
        }
    }
    prompt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Prompts longer than this (in characters) are rejected before sending.
    pub max_prompt_chars: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { model: "default".into(), temperature: 0.0, max_tokens: 2048, max_prompt_chars: 32_000 }
    }
}

impl GenerationParams {
    pub fn check_prompt(&self, prompt: &str) -> Result<(), LlmError> {
        let len = prompt.chars().count();
        if prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if len > self.max_prompt_chars {
            return Err(LlmError::PromptTooLong { len, max: self.max_prompt_chars });
        }
        Ok(())
    }
}

/// A text-completion service. Implementations must be shareable across threads.
pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError>;

    /// Reachability check with no side effects.
    fn probe(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub corrected_text: String,
    pub backend_id: String,
    pub prompt_rendered: String,
    pub latency_ms: u64,
}

pub fn correct(
    req: &CorrectionRequest,
    backend: &dyn LlmBackend,
    params: &GenerationParams,
) -> Result<CorrectionResult, LlmError> {
    req.validate()?;
    let prompt = render_prompt(req);
    params.check_prompt(&prompt)?;
    let started = Instant::now();
    let raw = backend.complete(&prompt, params)?;
    let corrected_text = extract_response(&raw);
    if corrected_text.is_empty() {
        return Err(LlmError::ResponseEmpty);
    }
    Ok(CorrectionResult {
        corrected_text,
        backend_id: backend.id().to_string(),
        prompt_rendered: prompt,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}

const PREAMBLES: &[&str] = &["here is", "here's", "here are", "berikut"];

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        // drop the info string on the opening fence line
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        return body.trim_end().strip_suffix("```").unwrap_or(body).trim();
    }
    t
}

/// Pulls the corrected text out of a chat completion: drops a leading
/// "Here is ..." / "Berikut ..." line and any surrounding code fence.
pub fn extract_response(raw: &str) -> String {
    let mut text = strip_fences(raw);
    if let Some((first, rest)) = text.split_once('\n') {
        let lower = first.trim().to_lowercase();
        if PREAMBLES.iter().any(|p| lower.starts_with(p)) && !rest.trim().is_empty() {
            text = strip_fences(rest);
        }
    }
    text.trim().to_string()
}
