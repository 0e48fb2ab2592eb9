use serde::{Deserialize, Serialize};

use super::{AgentError, ChatMessage};
use crate::memory::MemoryRecord;
use crate::scene::Action;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskEmphasis {
    Normal,
    #[default]
    High,
}

/// Prompt text, kept in the configuration so that every prompt is
/// auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub role: String,
    pub vocabulary_intro: String,
    pub format: String,
    pub safety: String,
    pub risk_priority: String,
    pub question: String,
    pub retry: String,
    pub reflection: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            role: "You are the decision module of an autonomous vehicle. You receive a textual description of the \
                   traffic scene around the ego vehicle and choose the ego vehicle's next maneuver."
                .into(),
            vocabulary_intro: "Choose exactly one of these actions:".into(),
            format: "First explain your analysis on a line starting with 'Reasoning:'. End with a single line \
                     'Final decision: <token>' where <token> is one of the action tokens above."
                .into(),
            safety: "Safety comes first: never choose an action that forces another road user to brake hard or \
                     that leaves less than two seconds to a collision. Prefer keeping your lane and speed when unsure."
                .into(),
            risk_priority: "Each scene may include a risk assessment listing every surrounding vehicle with a LOW, \
                            MEDIUM or HIGH risk level. Do not change lanes next to a vehicle rated MEDIUM or HIGH, \
                            and treat HIGH-risk vehicles as hard constraints: do not close in on them."
                .into(),
            question: "What should the ego vehicle do next?".into(),
            retry: "Answer with 'Final decision: <token>'.".into(),
            reflection: "Your previous decision for this scene was wrong. Explain why, then give corrected \
                         reasoning that leads to the correct action. Answer with a line starting with 'Analysis:', a \
                         line starting with 'Corrected reasoning:' and a final line 'Final decision: <token>'."
                .into(),
        }
    }
}

fn describe(action: Action) -> &'static str {
    match action {
        Action::Accelerate => "speed up in the current lane",
        Action::Decelerate => "slow down in the current lane",
        Action::LaneChangeLeft => "move to the adjacent lane on the left",
        Action::LaneChangeRight => "move to the adjacent lane on the right",
        Action::TurnLeft => "turn left along the road or ring",
        Action::TurnRight => "turn right along the road",
        Action::Idle => "keep the current lane and speed",
    }
}

/// System message: role, action vocabulary, output format, safety rules
/// and, for `RiskEmphasis::High`, the risk-priority paragraph.
pub fn build_system_message(templates: &PromptTemplates, emphasis: RiskEmphasis) -> ChatMessage {
    let mut parts = vec![templates.role.clone()];
    let mut vocabulary = templates.vocabulary_intro.clone();
    for a in Action::ALL {
        vocabulary.push_str(&format!("\n- {}: {}", a.token(), describe(a)));
    }
    parts.push(vocabulary);
    parts.push(templates.format.clone());
    parts.push(templates.safety.clone());
    if emphasis == RiskEmphasis::High {
        parts.push(templates.risk_priority.clone());
    }
    ChatMessage::system(parts.join("\n\n"))
}

/// Scene text followed by the risk block when present.
pub fn scene_with_risk(scene_text: &str, risk_text: Option<&str>) -> String {
    match risk_text {
        Some(r) if !r.is_empty() => format!("{scene_text}\n\n{r}"),
        _ => scene_text.to_string(),
    }
}

pub fn format_answer(reasoning: &str, action: Action) -> String {
    format!("Reasoning: {reasoning}\nFinal decision: {}", action.token())
}

/// System message, one user/assistant pair per few-shot record, then the
/// current scene. Exemplar risk text is included only with `include_risk`.
pub fn assemble_prompt(
    system: &ChatMessage,
    scene_text: &str,
    risk_text: Option<&str>,
    few_shots: &[&MemoryRecord],
    include_risk: bool,
    question: &str,
) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(2 + 2 * few_shots.len());
    messages.push(system.clone());
    for r in few_shots {
        let risk = include_risk.then_some(r.risk_text.as_str());
        messages.push(ChatMessage::user(scene_with_risk(&r.scene_text, risk)));
        messages.push(ChatMessage::assistant(format_answer(&r.reasoning, r.action)));
    }
    let mut last = scene_with_risk(scene_text, risk_text);
    if !question.is_empty() {
        last.push_str("\n\n");
        last.push_str(question);
    }
    messages.push(ChatMessage::user(last));
    messages
}

fn normalize(token: &str) -> String {
    let cleaned: String = token
        .chars()
        .map(|c| if c == '_' || c == '-' { ' ' } else { c })
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Canonical tokens and accepted synonyms, in normalized form.
fn lookup(token: &str) -> Option<Action> {
    for a in Action::ALL {
        if token == normalize(a.token()) {
            return Some(a);
        }
    }
    Some(match token {
        "change lane left" | "change lanes left" | "lane change to the left" | "change to the left lane" => {
            Action::LaneChangeLeft
        }
        "change lane right" | "change lanes right" | "lane change to the right" | "change to the right lane" => {
            Action::LaneChangeRight
        }
        "keep" | "maintain" | "keep lane" | "keep speed" | "maintain speed" | "remain idle" => Action::Idle,
        "brake" | "slow down" => Action::Decelerate,
        "speed up" => Action::Accelerate,
        "left turn" => Action::TurnLeft,
        "right turn" => Action::TurnRight,
        _ => return None,
    })
}

/// Splits a model answer into reasoning and action using its last
/// "Final decision:" line.
pub fn decode_action(output: &str) -> Result<(String, Action), AgentError> {
    const KEY: &str = "final decision:";
    let lines: Vec<&str> = output.lines().collect();
    let Some((idx, pos)) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| l.to_lowercase().find(KEY).map(|p| (i, p)))
    else {
        return Err(AgentError::Parse(output.to_string()));
    };
    // lowercase keeps byte offsets only for ASCII; recompute on the original
    let line = lines[idx];
    let start = line
        .char_indices()
        .map(|(b, _)| b)
        .find(|&b| line[b..].to_lowercase().starts_with(KEY))
        .unwrap_or(pos);
    let token = normalize(&line[start + KEY.len()..]);
    let action = lookup(&token).ok_or_else(|| AgentError::Parse(output.to_string()))?;
    let mut reasoning = lines[..idx].join("\n");
    let prefix = line[..start].trim();
    if !prefix.trim_matches('*').is_empty() {
        if !reasoning.is_empty() {
            reasoning.push('\n');
        }
        reasoning.push_str(prefix);
    }
    let reasoning = reasoning.trim();
    let reasoning = reasoning.strip_prefix("Reasoning:").unwrap_or(reasoning).trim();
    Ok((reasoning.to_string(), action))
}

/// Reflection request for a mismatched decision.
pub fn reflection_prompt(
    templates: &PromptTemplates,
    scene_text: &str,
    risk_text: Option<&str>,
    reasoning: &str,
    wrong: Action,
    truth: Action,
) -> String {
    format!(
        "{}\n\nScene:\n{}\n\nYour reasoning:\n{}\n\nWrong action: {}\nCorrect action: {}",
        templates.reflection,
        scene_with_risk(scene_text, risk_text),
        reasoning,
        wrong.token(),
        truth.token()
    )
}

/// Analysis and corrected reasoning of a reflection answer.
pub fn decode_reflection(output: &str) -> Result<(String, String), AgentError> {
    let lower = output.to_lowercase();
    let a = lower.find("analysis:").ok_or_else(|| AgentError::Parse(output.to_string()))?;
    let c = lower
        .find("corrected reasoning:")
        .filter(|&c| c > a)
        .ok_or_else(|| AgentError::Parse(output.to_string()))?;
    let analysis = output[a + "analysis:".len()..c].trim().to_string();
    let rest = &output[c + "corrected reasoning:".len()..];
    let end = rest.to_lowercase().rfind("final decision:").unwrap_or(rest.len());
    let corrected = rest[..end].trim().to_string();
    if analysis.is_empty() || corrected.is_empty() {
        return Err(AgentError::Parse(output.to_string()));
    }
    Ok((analysis, corrected))
}

/// Whitespace token count over all messages.
pub fn token_estimate(messages: &[ChatMessage]) -> usize {
    messages.iter().map(|m| m.content.split_whitespace().count()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::Outcome;

    #[test]
    fn vocabulary_once_each() {
        let m = build_system_message(&PromptTemplates::default(), RiskEmphasis::Normal);
        for a in Action::ALL {
            let line = format!("- {}:", a.token());
            assert_eq!(m.content.matches(&line).count(), 1, "{}", a.token());
        }
        assert!(!m.content.contains("HIGH-risk"));
        let high = build_system_message(&PromptTemplates::default(), RiskEmphasis::High);
        assert!(high.content.contains(&PromptTemplates::default().risk_priority));
    }

    #[test]
    fn decode_examples() {
        let (r, a) = decode_action("Reasoning: too close.\nFinal decision: decelerate").unwrap();
        assert_eq!((r.as_str(), a), ("too close.", Action::Decelerate));
        assert_eq!(decode_action("Final Decision: change lane left").unwrap().1, Action::LaneChangeLeft);
        assert_eq!(decode_action("**Final decision:** Slow down.").unwrap().1, Action::Decelerate);
        assert!(matches!(decode_action("I would probably merge."), Err(AgentError::Parse(_))));
        assert!(matches!(decode_action("Final decision: merge"), Err(AgentError::Parse(_))));
    }

    #[test]
    fn last_decision_line_wins() {
        let out = "Final decision: idle\nOn reflection.\nFinal decision: brake";
        let (r, a) = decode_action(out).unwrap();
        assert_eq!(a, Action::Decelerate);
        assert_eq!(r, "Final decision: idle\nOn reflection.");
    }

    #[test]
    fn round_trip_tokens() {
        for a in Action::ALL {
            assert_eq!(decode_action(&format!("Final decision: {}", a.token())).unwrap().1, a);
        }
    }

    #[test]
    fn prompt_sizes() {
        let sys = build_system_message(&PromptTemplates::default(), RiskEmphasis::Normal);
        assert_eq!(assemble_prompt(&sys, "scene", None, &[], false, "").len(), 2);
        let rec = MemoryRecord {
            record_id: 1,
            scene_text: "old".into(),
            embedding: vec![1.0],
            risk_text: "Risk assessment:\nx".into(),
            reasoning: "because".into(),
            action: Action::Idle,
            outcome: Outcome::Correct,
            reflection: None,
            created_at: 0,
        };
        let shots = [&rec, &rec, &rec];
        let m = assemble_prompt(&sys, "scene", Some("RISK BLOCK"), &shots, true, "Q?");
        assert_eq!(m.len(), 8);
        assert_eq!(m[7].content, "scene\n\nRISK BLOCK\n\nQ?");
        assert!(m[1].content.contains("Risk assessment:"));
        assert_eq!(m[2].content, "Reasoning: because\nFinal decision: idle");
    }

    #[test]
    fn reflection_round_trip() {
        let (a, c) = decode_reflection("Analysis: wrong gap.\nCorrected reasoning: brake.\nFinal decision: decelerate")
            .unwrap();
        assert_eq!((a.as_str(), c.as_str()), ("wrong gap.", "brake."));
        assert!(decode_reflection("Analysis: only").is_err());
    }
}
