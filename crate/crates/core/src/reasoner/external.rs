//! Tool-calling conversation with an external language model.
//!
//! The model sees the prompt from [`build_prompt`] and answers with either
//! `{"tool_calls": [{"tool": str, "args": {...}}]}` or `{"answer": id}`.
//! Tool calls are executed with the deterministic toolbox and the results
//! are sent back as the next user message.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{build_prompt, IN_CONTEXT_EXAMPLE};
use super::{GroundingPath, GroundingResult, Grounder, ReasonerError};
use crate::filter::filter_scene;
use crate::scene::{ObjectId, Scene};
use crate::toolbox::{Provenance, RankedCandidates, ToolCall};

const SYSTEM_MESSAGE: &str = "You are a careful spatial reasoning assistant. Reply with JSON only in the formats you are given.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalReasonerConfig {
    /// Base URL of a chat-completions endpoint, e.g. `https://host/v1`.
    pub base_url: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_rounds: usize,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Upper bound on conversations in flight during evaluation.
    pub max_concurrent: usize,
    /// Replaces the bundled in-context example.
    pub in_context_example: Option<String>,
    /// Scripted replies instead of a live endpoint: a JSON array of reply
    /// strings, or an object mapping utterances to such arrays.
    pub replay_file: Option<PathBuf>,
}

impl Default for ExternalReasonerConfig {
    fn default() -> Self {
        Self {
            base_url: None,
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_rounds: 8,
            api_key_env: "GROUND_API_KEY".into(),
            timeout_secs: 120,
            max_concurrent: 4,
            in_context_example: None,
            replay_file: None,
        }
    }
}

impl ExternalReasonerConfig {
    pub fn validate(&self) -> Result<(), ReasonerError> {
        if self.max_rounds == 0 {
            return Err(ReasonerError::Config("max_rounds must be at least 1".into()));
        }
        if self.max_concurrent == 0 {
            return Err(ReasonerError::Config("max_concurrent must be at least 1".into()));
        }
        if self.base_url.is_none() && self.replay_file.is_none() {
            return Err(ReasonerError::Config("set base_url or replay_file to use the external reasoner".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ReasonerError::Config("temperature must be in [0, 2]".into()));
        }
        Ok(())
    }

    pub fn example(&self) -> &str {
        self.in_context_example.as_deref().unwrap_or(IN_CONTEXT_EXAMPLE)
    }

    /// A fresh backend for one conversation about `utterance`.
    pub fn backend_for(&self, utterance: &str) -> Result<Box<dyn ChatBackend>, ReasonerError> {
        self.validate()?;
        if let Some(path) = &self.replay_file {
            return Ok(Box::new(ReplayBackend::load(path, utterance)?));
        }
        let base = self.base_url.as_deref().expect("validated");
        Ok(Box::new(HttpBackend::new(base, self)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            content: content.into(),
        }
    }
}

pub trait ChatBackend: Send {
    /// The assistant's reply to the conversation so far.
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, ReasonerError>;
}

/// OpenAI-style `POST {base_url}/chat/completions`.
pub struct HttpBackend {
    url: String,
    model: String,
    temperature: f64,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: &str, config: &ExternalReasonerConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Self {
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: config.model.clone(),
            temperature: config.temperature,
            token: std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty()),
            agent,
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, ReasonerError> {
        let body = json!({"model": self.model, "temperature": self.temperature, "messages": messages});
        let mut request = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let reply: Value = request
            .send_json(&body)
            .map_err(|e| ReasonerError::Endpoint(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| ReasonerError::Endpoint(e.to_string()))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ReasonerError::Endpoint(format!("no message content in response: {reply}")))
    }
}

/// Scripted replies for offline runs. Records every request it receives.
#[derive(Clone, Debug, Default)]
pub struct ReplayBackend {
    replies: Vec<String>,
    next: usize,
    pub requests: Vec<Vec<ChatMessage>>,
}

impl ReplayBackend {
    pub fn new(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            replies: replies.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn load(path: &Path, utterance: &str) -> Result<Self, ReasonerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReasonerError::Config(format!("cannot read replay file {}: {e}", path.display())))?;
        let bad = |e: String| ReasonerError::Config(format!("replay file {}: {e}", path.display()));
        match serde_json::from_str::<Value>(&text).map_err(|e| bad(e.to_string()))? {
            Value::Array(_) => {
                let replies: Vec<String> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
                Ok(Self::new(replies))
            }
            Value::Object(_) => {
                let mut scripts: BTreeMap<String, Vec<String>> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
                let replies = scripts
                    .remove(utterance.trim())
                    .ok_or_else(|| bad(format!("no script for {utterance:?}")))?;
                Ok(Self::new(replies))
            }
            _ => Err(bad("expected an array or an object".into())),
        }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, ReasonerError> {
        self.requests.push(messages.to_vec());
        let reply = self
            .replies
            .get(self.next)
            .cloned()
            .ok_or_else(|| ReasonerError::Endpoint("replay script exhausted".into()))?;
        self.next += 1;
        Ok(reply)
    }
}

#[derive(Debug, PartialEq)]
enum Reply {
    Calls(Vec<ToolCall>),
    Answer(ObjectId),
}

/// The JSON value in a reply: the whole text, else a fenced block, else the
/// span from the first `{` to the last `}`.
fn extract_json(reply: &str) -> Option<Value> {
    let text = reply.trim();
    if let Ok(v) = serde_json::from_str(text) {
        return Some(v);
    }
    if let Some(start) = text.find("```") {
        let body = &text[start + 3..];
        let body = body.strip_prefix("json").unwrap_or(body);
        if let Some(end) = body.find("```") {
            if let Ok(v) = serde_json::from_str(body[..end].trim()) {
                return Some(v);
            }
        }
    }
    let (start, end) = (text.find('{')?, text.rfind('}')?);
    (start < end).then(|| serde_json::from_str(&text[start..=end]).ok()).flatten()
}

fn parse_reply(reply: &str) -> Result<Reply, String> {
    let value = extract_json(reply).ok_or("no JSON object found in the reply")?;
    if let Some(answer) = value.get("answer") {
        return answer
            .as_u64()
            .and_then(|a| u32::try_from(a).ok())
            .map(|a| Reply::Answer(ObjectId(a)))
            .ok_or_else(|| format!("\"answer\" must be an object id, got {answer}"));
    }
    let calls = value.get("tool_calls").ok_or("expected \"tool_calls\" or \"answer\"")?;
    let calls: Vec<ToolCall> = serde_json::from_value(calls.clone()).map_err(|e| format!("bad \"tool_calls\": {e}"))?;
    if calls.is_empty() {
        return Err("\"tool_calls\" is empty".into());
    }
    Ok(Reply::Calls(calls))
}

/// Runs one conversation. Unknown tools and tool errors are reported back to
/// the model; two malformed replies in a row end the run.
pub fn run_external(
    config: &ExternalReasonerConfig,
    backend: &mut dyn ChatBackend,
    grounder: &Grounder,
    scene: &Scene,
    utterance: &str,
) -> Result<GroundingResult, ReasonerError> {
    if config.max_rounds == 0 {
        return Err(ReasonerError::Config("max_rounds must be at least 1".into()));
    }
    let labels: BTreeSet<&str> = scene.objects().iter().map(|o| o.label()).collect();
    let mentions = grounder.synonyms.extract_mentions(utterance, &grounder.vocab, labels);
    let filter = filter_scene(scene, &mentions, &grounder.synonyms);
    let prompt = build_prompt(scene, utterance, &filter.kept_ids, config.example());
    let toolbox = grounder.toolbox();

    let mut messages = vec![ChatMessage::new("system", SYSTEM_MESSAGE), ChatMessage::new("user", prompt)];
    let mut trace = Vec::new();
    let mut malformed = 0;
    for _ in 0..config.max_rounds {
        let reply = backend.complete(&messages)?;
        messages.push(ChatMessage::new("assistant", reply.clone()));
        match parse_reply(&reply) {
            Err(e) => {
                malformed += 1;
                if malformed >= 2 {
                    return Err(ReasonerError::MalformedToolCall(e));
                }
                messages.push(ChatMessage::new(
                    "user",
                    format!("Your reply could not be parsed: {e}. Reply with {{\"tool_calls\": [...]}} or {{\"answer\": <id>}}."),
                ));
            }
            Ok(Reply::Answer(id)) => {
                if !filter.kept_ids.contains(&id) {
                    return Err(ReasonerError::UnknownAnswer(id));
                }
                let ranked = RankedCandidates::new(
                    filter.kept_ids.iter().map(|k| (*k, if *k == id { 1.0 } else { 0.0 })),
                    Provenance::Unranked,
                );
                return Ok(GroundingResult {
                    target_id: Some(id),
                    ranked,
                    trace,
                    path: GroundingPath::External,
                    filter,
                    low_confidence: false,
                    attribute_soft_failed: false,
                });
            }
            Ok(Reply::Calls(calls)) => {
                malformed = 0;
                let results: Vec<Value> = calls
                    .iter()
                    .map(|call| match toolbox.execute(scene, call) {
                        Ok(record) => {
                            let v = json!({"tool": record.tool, "result_ids": record.result_ids, "scores": record.scores});
                            trace.push(record);
                            v
                        }
                        Err(e) => json!({"tool": call.tool, "error": e.to_string()}),
                    })
                    .collect();
                messages.push(ChatMessage::new("user", format!("Tool results: {}", Value::Array(results))));
            }
        }
    }
    Err(ReasonerError::RoundLimit(config.max_rounds))
}
