use std::collections::HashMap;
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationParams, LlmBackend, LlmError, PromptTemplate};

pub const LLM_BASE_URL_ENV: &str = "DRIVETHRU_LLM_BASE_URL";
pub const LLM_API_KEY_ENV: &str = "DRIVETHRU_LLM_API_KEY";
pub const LLM_MODEL_ENV: &str = "DRIVETHRU_LLM_MODEL";

/// Hex SHA-256 of the prompt bytes; the key used by [`TableBackend`].
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Returns the OCR text embedded in the prompt, i.e. "corrects" nothing.
#[derive(Debug, Clone, Default)]
pub struct EchoBackend {
    template: PromptTemplate,
}

impl EchoBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_template(template: PromptTemplate) -> Self {
        Self { template }
    }
}

impl LlmBackend for EchoBackend {
    fn id(&self) -> &str {
        "echo"
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        params.check_prompt(prompt)?;
        let head = format!("{}:\n\n", self.template.prefix);
        let body = prompt.strip_prefix(&head).unwrap_or(prompt);
        let hints = format!("\n\n{}:\n", self.template.suffix_header);
        let body = body.rfind(&hints).map_or(body, |at| &body[..at]);
        Ok(body.to_string())
    }
}

/// Canned completions keyed by [`prompt_hash`].
#[derive(Debug, Clone, Default)]
pub struct TableBackend {
    id: String,
    table: HashMap<String, String>,
}

impl TableBackend {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), table: HashMap::new() }
    }

    pub fn with_completion(mut self, prompt: &str, completion: impl Into<String>) -> Self {
        self.table.insert(prompt_hash(prompt), completion.into());
        self
    }

    pub fn insert(&mut self, prompt: &str, completion: impl Into<String>) {
        self.table.insert(prompt_hash(prompt), completion.into());
    }

    /// Reads `{"<prompt sha256>": "completion", ...}`.
    pub fn from_json(id: impl Into<String>, json: &str) -> Result<Self, serde_json::Error> {
        let table: HashMap<String, String> = serde_json::from_str(json)?;
        let table = table.into_iter().map(|(k, v)| (k.to_ascii_lowercase(), v)).collect();
        Ok(Self { id: id.into(), table })
    }

    pub fn to_json(&self) -> String {
        let sorted: std::collections::BTreeMap<_, _> = self.table.iter().collect();
        serde_json::to_string_pretty(&sorted).expect("string map serializes")
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl LlmBackend for TableBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        params.check_prompt(prompt)?;
        let key = prompt_hash(prompt);
        self.table.get(&key).cloned().ok_or(LlmError::Unmapped(key))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub id: String,
    /// Base URL up to and including the API version, e.g. `http://host/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            id: "llm".into(),
            base_url: "http://127.0.0.1:8000/v1".into(),
            api_key: None,
            model: "default".into(),
            timeout_ms: 120_000,
            max_retries: 4,
            initial_backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl HttpBackendConfig {
    /// `None` when `DRIVETHRU_LLM_BASE_URL` is unset.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var(LLM_BASE_URL_ENV).ok().filter(|v| !v.is_empty())?;
        let mut cfg = Self { base_url, ..Self::default() };
        cfg.api_key = std::env::var(LLM_API_KEY_ENV).ok().filter(|v| !v.is_empty());
        if let Ok(model) = std::env::var(LLM_MODEL_ENV) {
            if !model.is_empty() {
                cfg.model = model;
            }
        }
        Some(cfg)
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Chat-completions client over blocking HTTP. Retries 429 and 5xx with
/// exponential backoff, honouring `Retry-After` seconds when present.
///
/// Must not be called from inside an async task; the service runs
/// corrections on blocking threads.
#[derive(Debug)]
pub struct HttpBackend {
    cfg: HttpBackendConfig,
    client: OnceLock<reqwest::blocking::Client>,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Self {
        let gate = Gate::new(cfg.max_in_flight);
        Self { cfg, client: OnceLock::new(), gate }
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.cfg
    }

    fn client(&self) -> &reqwest::blocking::Client {
        self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(Duration::from_millis(self.cfg.timeout_ms))
                .build()
                .expect("HTTP client builds with static settings")
        })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.base_url.trim_end_matches('/'), path)
    }

    fn send_once(&self, body: &ChatRequest<'_>) -> Result<Attempt, LlmError> {
        let mut req = self.client().post(self.endpoint("chat/completions")).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp.text().map_err(|e| LlmError::Protocol(e.to_string()))?;
        if status.is_success() {
            let parsed: ChatResponse =
                serde_json::from_str(&text).map_err(|e| LlmError::Protocol(e.to_string()))?;
            let content =
                parsed.choices.into_iter().next().and_then(|c| c.message.content).unwrap_or_default();
            return Ok(Attempt::Done(content));
        }
        let code = status.as_u16();
        if code == 429 || status.is_server_error() {
            return Ok(Attempt::Retry {
                retry_after,
                err: LlmError::BackendRefused { status: code, body: text },
            });
        }
        Err(LlmError::BackendRefused { status: code, body: text })
    }
}

enum Attempt {
    Done(String),
    Retry { retry_after: Option<Duration>, err: LlmError },
}

impl LlmBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.cfg.id
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        params.check_prompt(prompt)?;
        let model = if params.model == "default" { &self.cfg.model } else { &params.model };
        let body = ChatRequest {
            model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: params.temperature,
            max_tokens: params.max_tokens,
        };
        let _slot = self.gate.enter();
        let mut backoff = Duration::from_millis(self.cfg.initial_backoff_ms);
        let mut attempt = 0;
        loop {
            match self.send_once(&body)? {
                Attempt::Done(content) if content.trim().is_empty() => return Err(LlmError::ResponseEmpty),
                Attempt::Done(content) => return Ok(content),
                Attempt::Retry { retry_after, err } => {
                    if attempt >= self.cfg.max_retries {
                        return Err(err);
                    }
                    attempt += 1;
                    std::thread::sleep(retry_after.unwrap_or(backoff));
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
    }

    fn probe(&self) -> bool {
        let client = match reqwest::blocking::Client::builder().timeout(Duration::from_secs(3)).build() {
            Ok(c) => c,
            Err(_) => return false,
        };
        client.get(self.endpoint("models")).send().is_ok()
    }
}
