//! Chat clients: a deterministic scripted transcript for tests and offline
//! runs, and an OpenAI-compatible HTTP endpoint.

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatMessage, Role};
use crate::error::{Error, Result};

/// The one capability the mining loop needs.
pub trait ChatClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String>;
}

/// Replays canned assistant texts, one per round, in order.
pub struct ScriptedClient {
    responses: Vec<String>,
    cursor: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TranscriptFile {
    Wrapped { rounds: Vec<String> },
    Plain(Vec<String>),
}

impl ScriptedClient {
    pub fn new(responses: Vec<String>) -> ScriptedClient {
        ScriptedClient { responses, cursor: 0 }
    }

    /// Load a JSON transcript: either `["text", ...]` or `{"rounds": [...]}`.
    pub fn from_path(path: &Path) -> Result<ScriptedClient> {
        let body = std::fs::read_to_string(path)?;
        let parsed: TranscriptFile = serde_json::from_str(&body)?;
        let responses = match parsed {
            TranscriptFile::Wrapped { rounds } => rounds,
            TranscriptFile::Plain(rounds) => rounds,
        };
        Ok(ScriptedClient::new(responses))
    }

    pub fn rounds_remaining(&self) -> usize {
        self.responses.len().saturating_sub(self.cursor)
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&mut self, _messages: &[ChatMessage]) -> Result<String> {
        let r = self
            .responses
            .get(self.cursor)
            .ok_or_else(|| Error::Chat(format!("transcript exhausted after {} rounds", self.cursor)))?
            .clone();
        self.cursor += 1;
        Ok(r)
    }
}

/// OpenAI-compatible chat-completions client. The API key comes from the
/// `ALPHAFORGE_LLM_KEY` environment variable; requests time out after 60 s
/// and are retried up to 3 times with exponential backoff.
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_retries: u32,
}

pub const LLM_KEY_ENV: &str = "ALPHAFORGE_LLM_KEY";

impl HttpChatClient {
    pub fn new(endpoint: &str, model: &str) -> Result<HttpChatClient> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Chat(format!("http client: {e}")))?;
        Ok(HttpChatClient {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: std::env::var(LLM_KEY_ENV).ok(),
            client,
            max_retries: 3,
        })
    }

    fn request_once(&self, body: &serde_json::Value) -> Result<String> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Chat(format!("request failed: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Error::Chat(format!("read body: {e}")))?;
        if !status.is_success() {
            return Err(Error::Chat(format!("endpoint returned {status}: {text}")));
        }
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Chat(format!("malformed response JSON: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| Error::Chat("response has no choices[0].message.content".into()))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        let body = json!({
            "model": self.model,
            "messages": messages
                .iter()
                .map(|m| json!({"role": role_name(m.role), "content": m.content}))
                .collect::<Vec<_>>(),
        });
        let mut last_err = None;
        for attempt in 0..self.max_retries {
            match self.request_once(&body) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    last_err = Some(e);
                    if attempt + 1 < self.max_retries {
                        std::thread::sleep(Duration::from_millis(250 << attempt));
                    }
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

pub(super) fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}
