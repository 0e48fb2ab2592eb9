use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::prompt::{
    assemble_prompt, build_system_message, decode_action, decode_reflection, reflection_prompt, scene_with_risk,
    token_estimate, PromptTemplates, RiskEmphasis,
};
use super::{AgentError, ChatMessage, LlmClient};
use crate::eval::{safety_oracle, IdmParams, OracleConfig};
use crate::memory::{Embedder, NewRecord, Outcome, VectorStore};
use crate::risk_assessor::{risk_notification, NotificationTemplates, RiskThresholds};
use crate::risk_field::{GridSpec, RiskModel};
use crate::scene::{render_scene_text, Action, DatasetTag, LabeledScene};

/// Few-shot count per scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FewShotCounts {
    pub highway: usize,
    pub intersection: usize,
    pub roundabout: usize,
}

impl Default for FewShotCounts {
    fn default() -> Self {
        FewShotCounts {
            highway: 3,
            intersection: 3,
            roundabout: 2,
        }
    }
}

impl FewShotCounts {
    pub fn for_tag(&self, tag: DatasetTag) -> usize {
        match tag {
            DatasetTag::Highway => self.highway,
            DatasetTag::Intersection => self.intersection,
            DatasetTag::Roundabout => self.roundabout,
        }
    }
}

/// Text embedded for retrieval and stored records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalQuery {
    #[default]
    SceneText,
    SceneAndRisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub few_shots: FewShotCounts,
    /// Re-asks after an undecodable answer.
    pub max_retries: u32,
    pub temperature: f64,
    /// Applies only when the risk module is enabled.
    pub risk_emphasis: RiskEmphasis,
    pub retrieval_query: RetrievalQuery,
    /// Include stored risk text in few-shot user turns when risk is enabled.
    pub exemplar_risk: bool,
    /// Replace actions the safety oracle rejects with `decelerate`.
    pub hard_safety_gate: bool,
    /// Stamp records with wall-clock seconds instead of the scene index.
    pub wall_clock: bool,
    pub prompts: PromptTemplates,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            few_shots: FewShotCounts::default(),
            max_retries: 2,
            temperature: 0.0,
            risk_emphasis: RiskEmphasis::High,
            retrieval_query: RetrievalQuery::SceneText,
            exemplar_risk: true,
            hard_safety_gate: false,
            wall_clock: false,
            prompts: PromptTemplates::default(),
        }
    }
}

/// Which optional modules take part in a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modules {
    pub risk: bool,
    pub memory: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchState {
    Matched,
    Mismatched,
    NoLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionRecord {
    pub wrong_action: Action,
    pub true_label: Action,
    pub analysis: String,
    pub corrected_reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub scene_ref: String,
    pub scenario_tag: DatasetTag,
    pub risk_text: Option<String>,
    pub few_shot_ids: Vec<u64>,
    pub reasoning: String,
    /// Absent when no attempt produced a decodable decision.
    pub action: Option<Action>,
    pub true_label: Option<Action>,
    pub matched_truth: MatchState,
    pub reflection: Option<ReflectionRecord>,
    pub latency_s: f64,
    pub token_estimate: usize,
    pub attempts: u32,
    /// Set when the hard safety gate replaced the decoded action.
    pub gated_from: Option<Action>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub records: Vec<DecisionRecord>,
    pub store_size_before: usize,
    pub store_size_after: usize,
    pub qpr_evaluations: u64,
    pub retrievals: u64,
}

impl EpisodeLog {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

/// Everything one episode needs besides the scenes and the store.
pub struct Agent<'a> {
    pub config: &'a AgentConfig,
    pub modules: Modules,
    pub model: &'a RiskModel,
    pub grid: &'a GridSpec,
    pub thresholds: &'a RiskThresholds,
    pub templates: &'a NotificationTemplates,
    pub embedder: &'a dyn Embedder,
    pub client: &'a dyn LlmClient,
    pub oracle: &'a OracleConfig,
    pub idm: &'a IdmParams,
    qpr_evaluations: AtomicU64,
    retrievals: AtomicU64,
}

impl<'a> Agent<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &'a AgentConfig,
        modules: Modules,
        model: &'a RiskModel,
        grid: &'a GridSpec,
        thresholds: &'a RiskThresholds,
        templates: &'a NotificationTemplates,
        embedder: &'a dyn Embedder,
        client: &'a dyn LlmClient,
        oracle: &'a OracleConfig,
        idm: &'a IdmParams,
    ) -> Self {
        Agent {
            config,
            modules,
            model,
            grid,
            thresholds,
            templates,
            embedder,
            client,
            oracle,
            idm,
            qpr_evaluations: AtomicU64::new(0),
            retrievals: AtomicU64::new(0),
        }
    }

    pub fn qpr_evaluations(&self) -> u64 {
        self.qpr_evaluations.load(Ordering::Relaxed)
    }

    pub fn retrievals(&self) -> u64 {
        self.retrievals.load(Ordering::Relaxed)
    }

    pub fn system_message(&self) -> ChatMessage {
        let emphasis = if self.modules.risk {
            self.config.risk_emphasis
        } else {
            RiskEmphasis::Normal
        };
        build_system_message(&self.config.prompts, emphasis)
    }

    fn risk_text(&self, labeled: &LabeledScene) -> Result<Option<String>, AgentError> {
        if !self.modules.risk {
            return Ok(None);
        }
        self.qpr_evaluations.fetch_add(1, Ordering::Relaxed);
        let scene = &labeled.scene;
        let report = self
            .model
            .qpr_total(&scene.ego, &scene.neighbor_states(), &self.grid.around(&scene.ego));
        let n = risk_notification(&report, self.thresholds, self.templates)?;
        Ok(Some(n.to_text()))
    }

    fn query_text(&self, scene_text: &str, risk_text: Option<&str>) -> String {
        match self.config.retrieval_query {
            RetrievalQuery::SceneText => scene_text.to_string(),
            RetrievalQuery::SceneAndRisk => scene_with_risk(scene_text, risk_text),
        }
    }

    /// Risk, retrieval, prompt, completion and decoding for one scene.
    pub fn reason(&self, labeled: &LabeledScene, store: &VectorStore) -> Result<DecisionRecord, AgentError> {
        let scene_text = render_scene_text(&labeled.scene);
        let risk_text = self.risk_text(labeled)?;

        let mut few_shots = Vec::new();
        if self.modules.memory {
            self.retrievals.fetch_add(1, Ordering::Relaxed);
            let n = self.config.few_shots.for_tag(labeled.scene.dataset_tag);
            let query = self.query_text(&scene_text, risk_text.as_deref());
            few_shots = store.retrieve(self.embedder, &query, n)?;
        }
        let shots: Vec<_> = few_shots.iter().map(|(r, _)| *r).collect();
        let include_risk = self.modules.risk && self.config.exemplar_risk;
        let mut messages = assemble_prompt(
            &self.system_message(),
            &scene_text,
            risk_text.as_deref(),
            &shots,
            include_risk,
            &self.config.prompts.question,
        );

        let mut record = DecisionRecord {
            scene_ref: labeled.id.clone(),
            scenario_tag: labeled.scene.dataset_tag,
            risk_text,
            few_shot_ids: shots.iter().map(|r| r.record_id).collect(),
            reasoning: String::new(),
            action: None,
            true_label: Some(labeled.true_label),
            matched_truth: MatchState::NoLabel,
            reflection: None,
            latency_s: 0.0,
            token_estimate: 0,
            attempts: 0,
            gated_from: None,
            error: None,
        };
        for _ in 0..=self.config.max_retries {
            record.attempts += 1;
            record.token_estimate += token_estimate(&messages);
            let completion = self.client.complete(&messages, self.config.temperature)?;
            record.latency_s += completion.latency_s;
            match decode_action(&completion.text) {
                Ok((reasoning, action)) => {
                    record.reasoning = reasoning;
                    record.action = Some(action);
                    record.error = None;
                    break;
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    messages.push(ChatMessage::assistant(completion.text));
                    messages.push(ChatMessage::user(self.config.prompts.retry.clone()));
                }
            }
        }
        if let (Some(action), true) = (record.action, self.config.hard_safety_gate) {
            if action != Action::Decelerate && !safety_oracle(&labeled.scene, action, self.oracle, self.idm).safe {
                record.gated_from = Some(action);
                record.action = Some(Action::Decelerate);
            }
        }
        record.matched_truth = match record.action {
            Some(a) if a == labeled.true_label => MatchState::Matched,
            _ => MatchState::Mismatched,
        };
        Ok(record)
    }

    /// Asks the client why `record`'s action was wrong.
    pub fn reflect(
        &self,
        labeled: &LabeledScene,
        record: &DecisionRecord,
        true_label: Action,
    ) -> Result<ReflectionRecord, AgentError> {
        let wrong = match record.action {
            Some(a) if record.matched_truth == MatchState::Mismatched && a != true_label => a,
            _ => return Err(AgentError::NotMismatched),
        };
        let prompt = reflection_prompt(
            &self.config.prompts,
            &render_scene_text(&labeled.scene),
            record.risk_text.as_deref(),
            &record.reasoning,
            wrong,
            true_label,
        );
        let mut messages = vec![self.system_message(), ChatMessage::user(prompt)];
        let mut last_error = None;
        for _ in 0..=self.config.max_retries {
            let completion = self.client.complete(&messages, self.config.temperature)?;
            match decode_reflection(&completion.text) {
                Ok((analysis, corrected_reasoning)) => {
                    return Ok(ReflectionRecord {
                        wrong_action: wrong,
                        true_label,
                        analysis,
                        corrected_reasoning,
                    })
                }
                Err(e) => {
                    last_error = Some(e);
                    messages.push(ChatMessage::assistant(completion.text));
                    messages.push(ChatMessage::user(self.config.prompts.reflection.clone()));
                }
            }
        }
        Err(last_error.unwrap_or(AgentError::NotMismatched))
    }

    /// The reasoning, reflection and memory loop over `scenes` in order.
    /// Every scene that yields a decision adds exactly one record to
    /// `store`; scenes without a decodable decision are logged and skipped.
    pub fn run_episode(&self, scenes: &[LabeledScene], store: &mut VectorStore) -> Result<EpisodeLog, AgentError> {
        let before = store.len();
        let start_qpr = self.qpr_evaluations();
        let start_retrievals = self.retrievals();
        let mut records = Vec::with_capacity(scenes.len());
        for (index, labeled) in scenes.iter().enumerate() {
            let mut record = self.reason(labeled, store)?;
            let Some(action) = record.action else {
                records.push(record);
                continue;
            };
            let truth = labeled.true_label;
            let (stored_action, reasoning, reflection, outcome) = if action == truth {
                (action, record.reasoning.clone(), None, Outcome::Correct)
            } else {
                match self.reflect(labeled, &record, truth) {
                    Ok(r) => {
                        let out = (truth, r.corrected_reasoning.clone(), Some(r.analysis.clone()), Outcome::Corrected);
                        record.reflection = Some(r);
                        out
                    }
                    Err(AgentError::Parse(raw)) => {
                        record.error = Some(format!("reflection not decodable: {raw}"));
                        records.push(record);
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            };
            let scene_text = render_scene_text(&labeled.scene);
            let embedding = self
                .embedder
                .embed(&self.query_text(&scene_text, record.risk_text.as_deref()))?;
            let created_at = if self.config.wall_clock {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs())
            } else {
                index as u64
            };
            store.update(NewRecord {
                scene_text,
                embedding,
                risk_text: record.risk_text.clone().unwrap_or_default(),
                reasoning,
                action: stored_action,
                outcome,
                reflection,
                created_at,
            })?;
            records.push(record);
        }
        Ok(EpisodeLog {
            records,
            store_size_before: before,
            store_size_after: store.len(),
            qpr_evaluations: self.qpr_evaluations() - start_qpr,
            retrievals: self.retrievals() - start_retrievals,
        })
    }
}
