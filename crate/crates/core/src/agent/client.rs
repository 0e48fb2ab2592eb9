use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::scene::Action;

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

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Wall time of the call; the offline backends report zero.
    pub latency_s: f64,
}

/// A chat-style language model.
pub trait LlmClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<Completion, AgentError>;
    fn backend_tag(&self) -> String;
}

/// Conditions of a scripted rule; all present conditions must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleCondition {
    /// Case-insensitive substring of the navigation instruction.
    pub instruction_contains: Option<String>,
    /// Whether any line carries the HIGH marker.
    pub high_risk: Option<bool>,
    /// A vehicle rated MEDIUM or HIGH whose scene line shows this lane
    /// relation.
    pub elevated_risk_relation: Option<String>,
    /// Nearest vehicle ahead in the same lane (or direction) is closer
    /// than this, meters. False when there is none.
    pub front_gap_below: Option<f64>,
    /// Nearest such vehicle is farther than this, or there is none.
    pub front_gap_above: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    #[serde(default)]
    pub when: RuleCondition,
    pub reasoning: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRules {
    /// Reflection answer; `{wrong}` and `{truth}` are replaced by tokens.
    pub reflection: String,
    pub rules: Vec<ScriptedRule>,
    pub default: ScriptedRule,
}

/// Features the scripted backend reads from a scene prompt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptFeatures {
    pub instruction: String,
    pub high_risk: bool,
    /// Vehicles rated MEDIUM or HIGH.
    pub elevated_ids: Vec<i64>,
    /// (id, lane relation, signed longitudinal offset)
    pub vehicles: Vec<(i64, String, f64)>,
}

fn leading_id(text: &str) -> Option<i64> {
    let rest = text.split_once("Vehicle ")?.1;
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit() || *c == '-').collect();
    digits.parse().ok()
}

impl PromptFeatures {
    pub fn parse(prompt: &str) -> Self {
        let mut f = PromptFeatures::default();
        for line in prompt.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("Navigation:") {
                f.instruction = rest.trim().to_string();
                continue;
            }
            let high = line.contains("HIGH");
            if high || line.contains("MEDIUM") {
                f.high_risk |= high;
                if let Some(id) = leading_id(line) {
                    f.elevated_ids.push(id);
                }
                continue;
            }
            // "Vehicle 6 (sedan), adjacent left lane: 19.5 m behind, ..."
            if !line.starts_with("Vehicle ") {
                continue;
            }
            let (Some(id), Some((head, tail))) = (leading_id(line), line.split_once(": ")) else {
                continue;
            };
            let Some((_, relation)) = head.split_once("), ") else {
                continue;
            };
            let mut words = tail.split_whitespace();
            let (Some(d), Some("m"), Some(dir)) = (words.next(), words.next(), words.next()) else {
                continue;
            };
            let Ok(d) = d.parse::<f64>() else { continue };
            let lon = if dir.starts_with("behind") { -d } else { d };
            f.vehicles.push((id, relation.to_string(), lon));
        }
        f
    }

    pub fn front_gap(&self) -> Option<f64> {
        self.vehicles
            .iter()
            .filter(|(_, rel, lon)| (rel == "same lane" || rel == "same direction") && *lon >= 0.0)
            .map(|v| v.2)
            .min_by(f64::total_cmp)
    }

    fn matches(&self, c: &RuleCondition) -> bool {
        if let Some(s) = &c.instruction_contains {
            if !self.instruction.to_lowercase().contains(&s.to_lowercase()) {
                return false;
            }
        }
        if c.high_risk.is_some_and(|h| h != self.high_risk) {
            return false;
        }
        if let Some(rel) = &c.elevated_risk_relation {
            let hit = self
                .vehicles
                .iter()
                .any(|(id, r, _)| r == rel && self.elevated_ids.contains(id));
            if !hit {
                return false;
            }
        }
        let gap = self.front_gap();
        if let Some(below) = c.front_gap_below {
            if !gap.is_some_and(|g| g < below) {
                return false;
            }
        }
        if let Some(above) = c.front_gap_above {
            if gap.is_some_and(|g| g <= above) {
                return false;
            }
        }
        true
    }
}

const BUNDLED_RULES: &str = include_str!("../../data/scripted_rules.json");

/// Offline rule-table backend. Deterministic for every temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedClient {
    pub rules: ScriptedRules,
}

impl ScriptedClient {
    pub fn bundled() -> Self {
        ScriptedClient::from_json(BUNDLED_RULES).expect("bundled rule table parses")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let rules = serde_json::from_str(text).map_err(|e| AgentError::Config(format!("rule table: {e}")))?;
        Ok(ScriptedClient { rules })
    }

    /// A client that answers every scene with `action`.
    pub fn constant(action: Action) -> Self {
        let mut c = Self::bundled();
        c.rules.rules.clear();
        c.rules.default = ScriptedRule {
            when: RuleCondition::default(),
            reasoning: format!("Scripted answer: {}.", action.token()),
            action,
        };
        c
    }

    fn reflection(&self, prompt: &str) -> Option<String> {
        let token_after = |key: &str| {
            prompt
                .lines()
                .find_map(|l| l.trim().strip_prefix(key))
                .map(|s| s.trim().to_string())
        };
        let wrong = token_after("Wrong action:")?;
        let truth = token_after("Correct action:")?;
        Some(self.rules.reflection.replace("{wrong}", &wrong).replace("{truth}", &truth))
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, messages: &[ChatMessage], _temperature: f64) -> Result<Completion, AgentError> {
        let prompt = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User && (m.content.contains("Navigation:") || m.content.contains("Wrong action:")))
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        if let Some(text) = self.reflection(prompt) {
            return Ok(Completion { text, latency_s: 0.0 });
        }
        let features = PromptFeatures::parse(prompt);
        let rule = self
            .rules
            .rules
            .iter()
            .find(|r| features.matches(&r.when))
            .unwrap_or(&self.rules.default);
        Ok(Completion {
            text: format!("Reasoning: {}\nFinal decision: {}", rule.reasoning, rule.action.token()),
            latency_s: 0.0,
        })
    }

    fn backend_tag(&self) -> String {
        "scripted".into()
    }
}

/// Replays recorded responses in order, one per call.
#[derive(Debug)]
pub struct ReplayClient {
    responses: Vec<String>,
    next: Mutex<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReplayLine {
    Text(String),
    Object { content: String },
}

impl ReplayClient {
    pub fn new(responses: Vec<String>) -> Self {
        ReplayClient {
            responses,
            next: Mutex::new(0),
        }
    }

    /// One JSON string, or object with a `content` field, per line.
    pub fn from_jsonl(text: &str) -> Result<Self, AgentError> {
        let mut responses = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ReplayLine = serde_json::from_str(line)
                .map_err(|e| AgentError::Config(format!("replay line {}: {e}", k + 1)))?;
            responses.push(match parsed {
                ReplayLine::Text(t) | ReplayLine::Object { content: t } => t,
            });
        }
        Ok(Self::new(responses))
    }

    /// Answers that reproduce the given labels, one decision per scene.
    pub fn truth(labels: impl IntoIterator<Item = Action>) -> Self {
        Self::new(
            labels
                .into_iter()
                .map(|a| format!("Reasoning: Replaying the recorded driver action.\nFinal decision: {}", a.token()))
                .collect(),
        )
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - *self.next.lock().unwrap()
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, _messages: &[ChatMessage], _temperature: f64) -> Result<Completion, AgentError> {
        let mut next = self.next.lock().unwrap();
        let text = self
            .responses
            .get(*next)
            .cloned()
            .ok_or_else(|| AgentError::Transport(format!("replay exhausted after {} responses", *next)))?;
        *next += 1;
        Ok(Completion { text, latency_s: 0.0 })
    }

    fn backend_tag(&self) -> String {
        "replay".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WireClientConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key; no header when unset.
    pub api_key_env: String,
    pub timeout_s: f64,
    /// Transport retries per call.
    pub max_retries: u32,
}

impl Default for WireClientConfig {
    fn default() -> Self {
        WireClientConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_s: 60.0,
            max_retries: 2,
        }
    }
}

/// OpenAI-style `POST {base_url}/chat/completions` client.
pub struct WireClient {
    config: WireClientConfig,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatContent,
}

#[derive(Deserialize)]
struct ChatContent {
    content: String,
}

impl WireClient {
    pub fn new(config: WireClientConfig) -> Result<Self, AgentError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s.max(0.001)))
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(WireClient { config, http })
    }

    fn call_once(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, AgentError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut request = self.http.post(url).json(&ChatRequest {
            model: &self.config.model,
            messages,
            temperature,
        });
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            request = request.bearer_auth(key);
        }
        let transport = |e: reqwest::Error| AgentError::Transport(e.to_string());
        let response: ChatResponse = request
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(transport)?
            .json()
            .map_err(transport)?;
        response
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AgentError::Transport("response without choices".into()))
    }
}

impl LlmClient for WireClient {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<Completion, AgentError> {
        let start = Instant::now();
        let mut last = None;
        for _ in 0..=self.config.max_retries {
            match self.call_once(messages, temperature) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        latency_s: start.elapsed().as_secs_f64(),
                    })
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| AgentError::Transport("no attempt made".into())))
    }

    fn backend_tag(&self) -> String {
        format!("wire-{}", self.config.model)
    }
}
