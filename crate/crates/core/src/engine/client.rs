//! Completion clients: the model contract, scripted replay and HTTP.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub stop: Vec<String>,
    pub max_tokens: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("replay script exhausted after {0} responses")]
    Exhausted(usize),
    #[error("no scripted response for prompt {0}")]
    UnknownPrompt(String),
    #[error("model client is not configured: {0}")]
    Config(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    Response(String),
    #[error("cannot read transcript {path}: {message}")]
    Transcript { path: String, message: String },
}

/// A text-completion model.
///
/// Implementations are shared across concurrently running tables and must
/// serialize access to any transport internally.
pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError>;

    /// Complete and stamp the call for the transcript.
    fn call(&self, request: &CompletionRequest) -> Result<TranscriptEntry, ClientError> {
        let completion = self.complete(request)?;
        Ok(TranscriptEntry::now(request.prompt.clone(), completion))
    }

    /// Whether identical prompts yield identical completions.
    fn is_deterministic(&self) -> bool {
        true
    }
}

impl<C: ModelClient + ?Sized> ModelClient for &C {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }

    fn call(&self, request: &CompletionRequest) -> Result<TranscriptEntry, ClientError> {
        (**self).call(request)
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

impl<C: ModelClient + ?Sized> ModelClient for std::sync::Arc<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }

    fn call(&self, request: &CompletionRequest) -> Result<TranscriptEntry, ClientError> {
        (**self).call(request)
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

/// A client computing completions with a closure; handy for scripted policies.
pub struct FnClient<F>(pub F);

impl<F> ModelClient for FnClient<F>
where
    F: Fn(&CompletionRequest) -> Result<String, ClientError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (self.0)(request)
    }
}

/// One persisted model call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt: String,
    pub completion: String,
    #[serde(default)]
    pub timestamp: String,
}

impl TranscriptEntry {
    pub fn now(prompt: impl Into<String>, completion: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            completion: completion.into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }
    }
}

/// Read a transcript JSONL file.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, ClientError> {
    let err = |message: String| ClientError::Transcript {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Hex SHA-256 of a prompt.
pub fn prompt_key(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

enum Script {
    Sequence {
        responses: VecDeque<String>,
        served: usize,
    },
    /// Completion and recorded timestamp per prompt hash.
    Keyed(HashMap<String, VecDeque<(String, String)>>),
}

/// Scripted responses, consumed in order or looked up by prompt hash.
///
/// Running out of script is always an error.
pub struct ReplayClient {
    script: Mutex<Script>,
}

impl ReplayClient {
    /// Serve `responses` in order regardless of the prompt.
    pub fn sequence<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            script: Mutex::new(Script::Sequence {
                responses: responses.into_iter().map(Into::into).collect(),
                served: 0,
            }),
        }
    }

    /// Serve each entry's completion when its exact prompt comes back.
    /// Repeated prompts are answered in transcript order.
    pub fn keyed(entries: &[TranscriptEntry]) -> Self {
        let mut map: HashMap<String, VecDeque<(String, String)>> = HashMap::new();
        for e in entries {
            map.entry(prompt_key(&e.prompt))
                .or_default()
                .push_back((e.completion.clone(), e.timestamp.clone()));
        }
        Self {
            script: Mutex::new(Script::Keyed(map)),
        }
    }

    pub fn from_transcript_file(path: &Path) -> Result<Self, ClientError> {
        Ok(Self::keyed(&read_transcript(path)?))
    }
}

impl ModelClient for ReplayClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        self.call(request).map(|e| e.completion)
    }

    /// Scripted calls carry no timestamp; replayed calls keep the recorded
    /// one, so a replayed transcript reproduces its source byte for byte.
    fn call(&self, request: &CompletionRequest) -> Result<TranscriptEntry, ClientError> {
        let mut script = self.script.lock().expect("replay script lock");
        let (completion, timestamp) = match &mut *script {
            Script::Sequence { responses, served } => {
                let next = responses
                    .pop_front()
                    .ok_or(ClientError::Exhausted(*served))?;
                *served += 1;
                (next, String::new())
            }
            Script::Keyed(map) => {
                let key = prompt_key(&request.prompt);
                map.get_mut(&key)
                    .and_then(VecDeque::pop_front)
                    .ok_or(ClientError::UnknownPrompt(key))?
            }
        };
        Ok(TranscriptEntry {
            prompt: request.prompt.clone(),
            completion,
            timestamp,
        })
    }
}

/// OpenAI-style text completion endpoint, greedy decoding.
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
    ) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build();
        Self {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Configure from TABLEX_ENDPOINT, TABLEX_API_KEY and TABLEX_MODEL.
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint = std::env::var("TABLEX_ENDPOINT")
            .map_err(|_| ClientError::Config("TABLEX_ENDPOINT is not set".into()))?;
        let model = std::env::var("TABLEX_MODEL")
            .map_err(|_| ClientError::Config("TABLEX_MODEL is not set".into()))?;
        let api_key = std::env::var("TABLEX_API_KEY")
            .ok()
            .filter(|k| !k.is_empty());
        Ok(Self::new(endpoint, api_key, model))
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ModelClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let mut body = serde_json::json!({
            "model": self.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": 0,
        });
        if !request.stop.is_empty() {
            body["stop"] = serde_json::json!(request.stop);
        }
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(ClientError::Status {
                status,
                body: text.chars().take(500).collect(),
            });
        }
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Response(e.to_string()))?;
        let choice = &value["choices"][0];
        choice["text"]
            .as_str()
            .or_else(|| choice["message"]["content"].as_str())
            .map(str::to_string)
            .ok_or_else(|| ClientError::Response("missing choices[0].text".into()))
    }
}
