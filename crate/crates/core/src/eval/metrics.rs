use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{idm_accel, idm_leader, idm_policy, safety_oracle, EvalError, IdmParams, OracleConfig};
use crate::agent::{Agent, AgentConfig, DecisionRecord, EpisodeLog, LlmClient, MatchState, Modules};
use crate::memory::{bundled_exemplars, seed_memory, Embedder, VectorStore};
use crate::risk_assessor::{NotificationTemplates, RiskThresholds};
use crate::risk_field::{GridSpec, RiskModel};
use crate::scene::{DatasetTag, LabeledScene};

/// An evaluation condition: the IDM baseline or one agent ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Idm,
    Plain,
    Memory,
    Risk,
    Both,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Idm,
        Condition::Plain,
        Condition::Memory,
        Condition::Risk,
        Condition::Both,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Idm => "idm",
            Condition::Plain => "plain",
            Condition::Memory => "memory",
            Condition::Risk => "risk",
            Condition::Both => "both",
        }
    }

    /// Agent modules of the condition; `None` for the IDM baseline.
    pub fn modules(self) -> Option<Modules> {
        let (risk, memory) = match self {
            Condition::Idm => return None,
            Condition::Plain => (false, false),
            Condition::Memory => (false, true),
            Condition::Risk => (true, false),
            Condition::Both => (true, true),
        };
        Some(Modules { risk, memory })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| EvalError::BadParameter(format!("unknown condition {s:?}")))
    }
}

fn scenes_by_ref(scenes: &[LabeledScene]) -> BTreeMap<&str, &LabeledScene> {
    scenes.iter().map(|s| (s.id.as_str(), s)).collect()
}

/// Number of records whose action the safety oracle accepts. Records without
/// a decision count as unsafe.
pub fn count_safe(
    records: &[DecisionRecord],
    scenes: &[LabeledScene],
    oracle: &OracleConfig,
    idm: &IdmParams,
) -> Result<usize, EvalError> {
    let by_ref = scenes_by_ref(scenes);
    let mut safe = 0;
    for r in records {
        let Some(action) = r.action else { continue };
        let scene = by_ref
            .get(r.scene_ref.as_str())
            .ok_or_else(|| EvalError::BadParameter(format!("log refers to unknown scene {:?}", r.scene_ref)))?;
        if safety_oracle(&scene.scene, action, oracle, idm).safe {
            safe += 1;
        }
    }
    Ok(safe)
}

/// Fraction of logged scenes whose decision the safety oracle accepts.
pub fn safety_rate(
    log: &EpisodeLog,
    scenes: &[LabeledScene],
    oracle: &OracleConfig,
    idm: &IdmParams,
) -> Result<f64, EvalError> {
    if log.records.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    Ok(count_safe(&log.records, scenes, oracle, idm)? as f64 / log.records.len() as f64)
}

fn count_aligned(records: &[DecisionRecord]) -> Result<usize, EvalError> {
    let mut aligned = 0;
    for r in records {
        let truth = r.true_label.ok_or_else(|| EvalError::MissingLabels(r.scene_ref.clone()))?;
        if r.action == Some(truth) {
            aligned += 1;
        }
    }
    Ok(aligned)
}

/// Fraction of logged scenes whose decision equals the true label.
pub fn decision_alignment(log: &EpisodeLog) -> Result<f64, EvalError> {
    if log.records.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    Ok(count_aligned(&log.records)? as f64 / log.records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario_tag: DatasetTag,
    pub condition: Condition,
    pub scenes: usize,
    pub decided: usize,
    pub safe: usize,
    pub aligned: usize,
    pub reflections: usize,
    pub safety_rate: f64,
    pub decision_alignment: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn get(&self, tag: DatasetTag, condition: Condition) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.scenario_tag == tag && r.condition == condition)
    }
}

/// Episode of one condition on one scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionLog {
    pub condition: Condition,
    pub scenario_tag: DatasetTag,
    pub log: EpisodeLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub table: MetricsTable,
    pub logs: Vec<ConditionLog>,
}

impl Evaluation {
    /// Decision records of every condition, one JSON object per line,
    /// each tagged with its condition.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            condition: Condition,
            #[serde(flatten)]
            record: &'a DecisionRecord,
        }
        let mut out = String::new();
        for c in &self.logs {
            for record in &c.log.records {
                let line = Line {
                    condition: c.condition,
                    record,
                };
                out.push_str(&serde_json::to_string(&line).expect("records serialize"));
                out.push('\n');
            }
        }
        out
    }
}

/// Everything `evaluate` shares across conditions.
pub struct Evaluator<'a> {
    pub agent: &'a AgentConfig,
    pub model: &'a RiskModel,
    pub grid: &'a GridSpec,
    pub thresholds: &'a RiskThresholds,
    pub templates: &'a NotificationTemplates,
    pub embedder: &'a dyn Embedder,
    pub oracle: &'a OracleConfig,
    pub idm: &'a IdmParams,
    /// Seed each fresh store with the bundled exemplars of its family.
    pub seed_exemplars: bool,
}

/// IDM baseline decisions, logged in the agent's record format.
pub fn idm_episode(scenes: &[LabeledScene], idm: &IdmParams, lane_width: f64) -> EpisodeLog {
    let records = scenes
        .iter()
        .map(|s| {
            let action = idm_policy(&s.scene, idm, lane_width);
            let accel = match idm_leader(&s.scene, lane_width) {
                Some((gap, closing)) => idm_accel(s.scene.ego.speed, gap, closing, idm),
                None => idm_accel(s.scene.ego.speed, f64::INFINITY, 0.0, idm),
            };
            let reasoning = match accel {
                Ok(a) => format!("IDM acceleration {a:.3} m/s^2."),
                Err(e) => format!("IDM leader overlaps the ego: {e}."),
            };
            DecisionRecord {
                scene_ref: s.id.clone(),
                scenario_tag: s.scene.dataset_tag,
                risk_text: None,
                few_shot_ids: Vec::new(),
                reasoning,
                action: Some(action),
                true_label: Some(s.true_label),
                matched_truth: if action == s.true_label {
                    MatchState::Matched
                } else {
                    MatchState::Mismatched
                },
                reflection: None,
                latency_s: 0.0,
                token_estimate: 0,
                attempts: 0,
                gated_from: None,
                error: None,
            }
        })
        .collect();
    EpisodeLog {
        records,
        store_size_before: 0,
        store_size_after: 0,
        qpr_evaluations: 0,
        retrievals: 0,
    }
}

impl Evaluator<'_> {
    fn fresh_store(&self, tag: DatasetTag) -> Result<VectorStore, EvalError> {
        let mut store = VectorStore::for_embedder(self.embedder);
        if self.seed_exemplars {
            seed_memory(&mut store, self.embedder, &bundled_exemplars(tag))?;
        }
        Ok(store)
    }

    fn row(
        &self,
        tag: DatasetTag,
        condition: Condition,
        log: &EpisodeLog,
        scenes: &[LabeledScene],
    ) -> Result<MetricsRow, EvalError> {
        let n = log.records.len();
        let safe = count_safe(&log.records, scenes, self.oracle, self.idm)?;
        let aligned = count_aligned(&log.records)?;
        Ok(MetricsRow {
            scenario_tag: tag,
            condition,
            scenes: n,
            decided: log.records.iter().filter(|r| r.action.is_some()).count(),
            safe,
            aligned,
            reflections: log.records.iter().filter(|r| r.reflection.is_some()).count(),
            safety_rate: safe as f64 / n as f64,
            decision_alignment: aligned as f64 / n as f64,
        })
    }

    /// Runs every condition over the scenes of each scenario family present
    /// in `scenes`, in input order. Agent conditions get a fresh store per
    /// family and a client from `client_for`; returning the same client for
    /// several families continues its state across them.
    pub fn evaluate(
        &self,
        scenes: &[LabeledScene],
        conditions: &[Condition],
        client_for: &mut dyn FnMut(Condition, DatasetTag) -> Result<Arc<dyn LlmClient>, EvalError>,
    ) -> Result<Evaluation, EvalError> {
        if scenes.is_empty() {
            return Err(EvalError::EmptyLog);
        }
        let mut table = MetricsTable::default();
        let mut logs = Vec::new();
        for tag in DatasetTag::ALL {
            let family: Vec<LabeledScene> = scenes
                .iter()
                .filter(|s| s.scene.dataset_tag == tag)
                .cloned()
                .collect();
            if family.is_empty() {
                continue;
            }
            for &condition in conditions {
                let log = match condition.modules() {
                    None => idm_episode(&family, self.idm, self.oracle.lane_width),
                    Some(modules) => {
                        let client = client_for(condition, tag)?;
                        let agent = Agent::new(
                            self.agent,
                            modules,
                            self.model,
                            self.grid,
                            self.thresholds,
                            self.templates,
                            self.embedder,
                            client.as_ref(),
                            self.oracle,
                            self.idm,
                        );
                        let mut store = self.fresh_store(tag)?;
                        agent.run_episode(&family, &mut store)?
                    }
                };
                table.rows.push(self.row(tag, condition, &log, &family)?);
                logs.push(ConditionLog {
                    condition,
                    scenario_tag: tag,
                    log,
                });
            }
        }
        Ok(Evaluation { table, logs })
    }
}

/// Parses a comma-separated condition list.
pub fn parse_conditions(list: &str) -> Result<Vec<Condition>, EvalError> {
    let out: Vec<Condition> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(EvalError::BadParameter("no conditions given".into()));
    }
    Ok(out)
}
