//! Percentile risk thresholds, risk levels and textual risk notifications.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk_field::{GridSpec, QprConvention, QprReport, Relation, RiskModel};
use crate::scene::TrajectoryTable;

/// Minimum number of samples accepted by [`calibrate_thresholds`].
pub const MIN_CALIBRATION_SAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("no (frame, ego, neighbor) triple within the sampling radius")]
    EmptyDataset,
    #[error("at least {need} samples required, got {got}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("report uses {report:?} but thresholds were calibrated with {thresholds:?}")]
    ConventionMismatch {
        report: QprConvention,
        thresholds: QprConvention,
    },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskThresholds {
    pub t_low: f64,
    pub t_high: f64,
    pub sample_count: usize,
    pub convention: QprConvention,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub source_tag: String,
}

impl RiskThresholds {
    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.t_low.is_finite() && self.t_high.is_finite()) {
            return Err(RiskError::InvalidThresholds("thresholds must be finite".into()));
        }
        if self.t_low > self.t_high {
            return Err(RiskError::InvalidThresholds(format!(
                "t_low {} exceeds t_high {}",
                self.t_low, self.t_high
            )));
        }
        if self.sample_count < 1 {
            return Err(RiskError::InvalidThresholds("sample_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RiskError> {
        let t: RiskThresholds = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RiskError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskLevel {
    Low,
    Medium,
    High,
}

impl RiskLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Low => "low",
            RiskLevel::Medium => "medium",
            RiskLevel::High => "high",
        }
    }

    /// Upper-case marker used in notification text.
    pub fn marker(self) -> &'static str {
        match self {
            RiskLevel::Low => "LOW",
            RiskLevel::Medium => "MEDIUM",
            RiskLevel::High => "HIGH",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where calibration samples are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingOptions {
    /// Neighbors farther than this from the ego are not sampled.
    pub radius: f64,
    pub wheelbase_ratio: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            radius: 50.0,
            wheelbase_ratio: 0.6,
        }
    }
}

/// Row indices of the vehicles within `radius` of row `ego` in its frame,
/// in row order.
fn neighbors_in_radius(table: &TrajectoryTable, ego: usize, radius: f64) -> Vec<usize> {
    let e = table.row(ego);
    table
        .frame_range(e.frame)
        .unwrap_or(0..0)
        .filter(|&i| i != ego)
        .filter(|&i| {
            let r = table.row(i);
            (r.x - e.x).hypot(r.y - e.y) <= radius
        })
        .collect()
}

/// Per-vehicle QPR shares (front + rear) of `n` uniformly drawn
/// (frame, ego, neighbor) triples, with replacement.
///
/// A triple's share is taken from the QPR of the ego against all vehicles
/// within the radius, on a grid placed around the ego by `grid_spec`.
pub fn sample_qpr_distribution(
    table: &TrajectoryTable,
    n: usize,
    seed: u64,
    model: &RiskModel,
    grid_spec: &GridSpec,
    options: &SamplingOptions,
) -> Result<Vec<f64>, RiskError> {
    if n == 0 {
        return Err(RiskError::BadParameter("sample count must be at least 1".into()));
    }
    if !(options.radius.is_finite() && options.radius >= 0.0) {
        return Err(RiskError::BadParameter(format!("radius {}", options.radius)));
    }
    // prefix[i] = number of triples whose ego row index is below i
    let mut prefix = Vec::with_capacity(table.len() + 1);
    prefix.push(0u64);
    for ego in 0..table.len() {
        let count = neighbors_in_radius(table, ego, options.radius).len() as u64;
        prefix.push(prefix[ego] + count);
    }
    let total = *prefix.last().unwrap_or(&0);
    if total == 0 {
        return Err(RiskError::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<u64> = (0..n).map(|_| rng.gen_range(0..total)).collect();

    let mut cache: HashMap<usize, (Vec<usize>, QprReport)> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for k in draws {
        let ego = prefix.partition_point(|&p| p <= k) - 1;
        let local = (k - prefix[ego]) as usize;
        let (neighbors, report) = cache.entry(ego).or_insert_with(|| {
            let neighbors = neighbors_in_radius(table, ego, options.radius);
            let ego_state = table.state(ego, options.wheelbase_ratio);
            let states: Vec<_> = neighbors.iter().map(|&i| table.state(i, options.wheelbase_ratio)).collect();
            let report = model.qpr_total(&ego_state, &states, &grid_spec.around(&ego_state));
            (neighbors, report)
        });
        let id = table.row(neighbors[local]).id;
        out.push(report.per_vehicle.get(&id).map_or(0.0, |s| s.total()));
    }
    Ok(out)
}

/// 1-based nearest rank of percentile `pct` among `n` sorted values:
/// `ceil(pct * n / 100)`, at least 1.
pub fn nearest_rank(pct: u32, n: usize) -> usize {
    ((pct as usize * n).div_ceil(100)).max(1)
}

/// Nearest-rank 30th and 70th percentiles of the samples.
pub fn calibrate_thresholds(samples: &[f64], convention: QprConvention) -> Result<RiskThresholds, RiskError> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(RiskError::InsufficientSamples {
            got: samples.len(),
            need: MIN_CALIBRATION_SAMPLES,
        });
    }
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(RiskError::NonFiniteSample { index });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(RiskThresholds {
        t_low: sorted[nearest_rank(30, n) - 1],
        t_high: sorted[nearest_rank(70, n) - 1],
        sample_count: n,
        convention,
        seed: None,
        source_tag: String::new(),
    })
}

/// Level of a QPR value; both thresholds belong to `Medium`. A NaN input is
/// treated as `High`.
pub fn classify_risk(qpr: f64, thresholds: &RiskThresholds) -> RiskLevel {
    if qpr < thresholds.t_low {
        RiskLevel::Low
    } else if qpr <= thresholds.t_high {
        RiskLevel::Medium
    } else {
        RiskLevel::High
    }
}

/// Sentence templates. Placeholders: `{id}`, `{relation}` (front or rear),
/// `{level}` (LOW, MEDIUM, HIGH) and `{share}`; the scene line uses
/// `{level}` and `{total}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotificationTemplates {
    pub header: String,
    pub scene: String,
    pub front_low: String,
    pub front_medium: String,
    pub front_high: String,
    pub rear_low: String,
    pub rear_medium: String,
    pub rear_high: String,
}

impl Default for NotificationTemplates {
    fn default() -> Self {
        NotificationTemplates {
            header: "Risk assessment:".into(),
            scene: "Overall scene risk is {level} (total QPR {total}).".into(),
            front_low: "Vehicle {id} ({relation}) poses {level} risk (QPR share {share}).".into(),
            front_medium: "Vehicle {id} ({relation}) poses {level} risk (QPR share {share}); keep monitoring it."
                .into(),
            front_high: "Vehicle {id} ({relation}) poses {level} risk (QPR share {share}); do not close in on it."
                .into(),
            rear_low: "Vehicle {id} ({relation}) poses {level} risk (QPR share {share}).".into(),
            rear_medium: "Vehicle {id} ({relation}) poses {level} risk (QPR share {share}); watch it approaching."
                .into(),
            rear_high: "Vehicle {id} ({relation}) poses {level} risk (QPR share {share}); do not move into its path."
                .into(),
        }
    }
}

impl NotificationTemplates {
    fn template(&self, level: RiskLevel, relation: Relation) -> &str {
        match (relation, level) {
            (Relation::Front, RiskLevel::Low) => &self.front_low,
            (Relation::Front, RiskLevel::Medium) => &self.front_medium,
            (Relation::Front, RiskLevel::High) => &self.front_high,
            (Relation::Rear, RiskLevel::Low) => &self.rear_low,
            (Relation::Rear, RiskLevel::Medium) => &self.rear_medium,
            (Relation::Rear, RiskLevel::High) => &self.rear_high,
        }
    }

    /// Every participant template must name the id, relation and level.
    pub fn validate(&self) -> Result<(), String> {
        for t in [
            &self.front_low,
            &self.front_medium,
            &self.front_high,
            &self.rear_low,
            &self.rear_medium,
            &self.rear_high,
        ] {
            for key in ["{id}", "{relation}", "{level}"] {
                if !t.contains(key) {
                    return Err(format!("template {t:?} lacks {key}"));
                }
            }
        }
        Ok(())
    }
}

fn format_qpr(v: f64) -> String {
    format!("{v:.3}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRisk {
    pub id: i64,
    pub qpr_share: f64,
    pub level: RiskLevel,
    pub relation: Relation,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskNotification {
    pub participants: Vec<ParticipantRisk>,
    pub total: f64,
    pub scene_level: RiskLevel,
    pub scene_sentence: String,
    pub header: String,
}

impl RiskNotification {
    pub fn to_text(&self) -> String {
        let mut lines = vec![self.header.clone(), self.scene_sentence.clone()];
        lines.extend(self.participants.iter().map(|p| p.sentence.clone()));
        lines.join("\n")
    }
}

/// One sentence per neighbor of the report, ordered by descending share and
/// then ascending id.
pub fn risk_notification(
    report: &QprReport,
    thresholds: &RiskThresholds,
    templates: &NotificationTemplates,
) -> Result<RiskNotification, RiskError> {
    if report.convention != thresholds.convention {
        return Err(RiskError::ConventionMismatch {
            report: report.convention,
            thresholds: thresholds.convention,
        });
    }
    let mut participants: Vec<ParticipantRisk> = report
        .per_vehicle
        .iter()
        .map(|(&id, share)| {
            let qpr_share = share.total();
            let level = classify_risk(qpr_share, thresholds);
            let sentence = templates
                .template(level, share.relation)
                .replace("{id}", &id.to_string())
                .replace("{relation}", share.relation.as_str())
                .replace("{level}", level.marker())
                .replace("{share}", &format_qpr(qpr_share));
            ParticipantRisk {
                id,
                qpr_share,
                level,
                relation: share.relation,
                sentence,
            }
        })
        .collect();
    participants.sort_by(|a, b| b.qpr_share.total_cmp(&a.qpr_share).then(a.id.cmp(&b.id)));
    let scene_level = classify_risk(report.total, thresholds);
    Ok(RiskNotification {
        participants,
        total: report.total,
        scene_level,
        scene_sentence: templates
            .scene
            .replace("{level}", scene_level.marker())
            .replace("{total}", &format_qpr(report.total)),
        header: templates.header.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_field::{Grid, VehicleShare};
    use std::collections::BTreeMap;

    fn thresholds(t_low: f64, t_high: f64) -> RiskThresholds {
        RiskThresholds {
            t_low,
            t_high,
            sample_count: 10,
            convention: QprConvention::AreaIntegral,
            seed: None,
            source_tag: "test".into(),
        }
    }

    #[test]
    fn one_to_ten() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        let t = calibrate_thresholds(&s, QprConvention::AreaIntegral).unwrap();
        assert_eq!((t.t_low, t.t_high, t.sample_count), (3.0, 7.0, 10));
    }

    #[test]
    fn constant_samples() {
        let t = calibrate_thresholds(&[2.5; 17], QprConvention::GridSum).unwrap();
        assert_eq!((t.t_low, t.t_high), (2.5, 2.5));
    }

    #[test]
    fn too_few_or_non_finite() {
        assert!(matches!(
            calibrate_thresholds(&[1.0; 9], QprConvention::GridSum),
            Err(RiskError::InsufficientSamples { got: 9, need: 10 })
        ));
        let mut s = vec![1.0; 12];
        s[4] = f64::NAN;
        assert!(matches!(
            calibrate_thresholds(&s, QprConvention::GridSum),
            Err(RiskError::NonFiniteSample { index: 4 })
        ));
    }

    #[test]
    fn nearest_rank_values() {
        assert_eq!(nearest_rank(30, 10), 3);
        assert_eq!(nearest_rank(30, 11), 4);
        assert_eq!(nearest_rank(70, 11), 8);
        assert_eq!(nearest_rank(30, 1), 1);
    }

    #[test]
    fn boundaries_are_medium() {
        let t = thresholds(1.0, 2.0);
        assert_eq!(classify_risk(1.0, &t), RiskLevel::Medium);
        assert_eq!(classify_risk(2.0, &t), RiskLevel::Medium);
        assert_eq!(classify_risk(0.0, &t), RiskLevel::Low);
        assert_eq!(classify_risk(2.0001, &t), RiskLevel::High);
        assert_eq!(classify_risk(f64::NAN, &t), RiskLevel::High);
    }

    fn report(shares: &[(i64, f64, Relation)]) -> QprReport {
        let per_vehicle: BTreeMap<i64, VehicleShare> = shares
            .iter()
            .map(|&(id, v, relation)| {
                let (front, rear) = match relation {
                    Relation::Front => (v, 0.0),
                    Relation::Rear => (0.0, v),
                };
                (id, VehicleShare { front, rear, relation })
            })
            .collect();
        let total = shares.iter().map(|s| s.1).sum();
        QprReport {
            total,
            front: total,
            rear: 0.0,
            per_vehicle,
            grid: Grid::new(0.0, 0.0, 1, 1, 1.0),
            convention: QprConvention::AreaIntegral,
        }
    }

    #[test]
    fn empty_report() {
        let n = risk_notification(&report(&[]), &thresholds(1.0, 2.0), &NotificationTemplates::default()).unwrap();
        assert!(n.participants.is_empty());
        assert_eq!(n.scene_level, RiskLevel::Low);
    }

    #[test]
    fn high_marker_and_order() {
        let r = report(&[(3, 0.5, Relation::Front), (6, 5.0, Relation::Rear), (2, 1.5, Relation::Front)]);
        let n = risk_notification(&r, &thresholds(1.0, 2.0), &NotificationTemplates::default()).unwrap();
        let ids: Vec<i64> = n.participants.iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![6, 2, 3]);
        let s = &n.participants[0].sentence;
        assert!(s.contains("HIGH") && s.contains("Vehicle 6") && s.contains("rear"), "{s}");
        assert_eq!(n.participants[2].level, RiskLevel::Low);
        assert_eq!(n.scene_level, RiskLevel::High);
        assert!(n.to_text().starts_with("Risk assessment:\nOverall scene risk is HIGH"));
    }

    #[test]
    fn convention_mismatch() {
        let mut t = thresholds(1.0, 2.0);
        t.convention = QprConvention::GridSum;
        assert!(matches!(
            risk_notification(&report(&[]), &t, &NotificationTemplates::default()),
            Err(RiskError::ConventionMismatch { .. })
        ));
    }

    #[test]
    fn default_templates_valid() {
        NotificationTemplates::default().validate().unwrap();
        let bad = NotificationTemplates {
            rear_high: "Danger".into(),
            ..NotificationTemplates::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn invalid_thresholds() {
        assert!(thresholds(2.0, 1.0).validate().is_err());
        assert!(thresholds(1.0, 1.0).validate().is_ok());
    }
}
