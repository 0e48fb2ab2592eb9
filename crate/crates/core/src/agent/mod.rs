//! Prompt assembly, pluggable chat clients and the reasoning, reflection
//! and memory loop.

mod client;
mod episode;
mod prompt;

use thiserror::Error;

pub use client::{
    ChatMessage, Completion, LlmClient, PromptFeatures, ReplayClient, Role, RuleCondition, ScriptedClient,
    ScriptedRule, ScriptedRules, WireClient, WireClientConfig,
};
pub use episode::{
    Agent, AgentConfig, DecisionRecord, EpisodeLog, FewShotCounts, MatchState, Modules, ReflectionRecord,
    RetrievalQuery,
};
pub use prompt::{
    assemble_prompt, build_system_message, decode_action, decode_reflection, format_answer, reflection_prompt,
    scene_with_risk, token_estimate, PromptTemplates, RiskEmphasis,
};

use crate::memory::MemoryError;
use crate::risk_assessor::RiskError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("could not decode a decision from: {0:?}")]
    Parse(String),
    #[error("backend failure: {0}")]
    Transport(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("reflection requires a mismatched decision")]
    NotMismatched,
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}
