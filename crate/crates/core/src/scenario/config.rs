//! Scenario configuration: TOML text with unit-annotated durations,
//! normalized to seconds on load.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::collaboration::{CaseStage, DwellModel, TransitionEdge, TransitionTable};
use crate::ids::SubjectId;
use crate::record::{Latencies, Role};
use crate::resources::ResourceKind;
use crate::time::{parse_duration, parse_rate, SimDuration, UnitError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },
    #[error("`{key}` needs a unit (s, min, h or d)")]
    MissingUnit { key: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.to_owned(),
            reason: reason.into(),
        }
    }

    /// The offending key, for validation and unit errors.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { key, .. } | ConfigError::MissingUnit { key } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Merged updates are pushed to readers after the feedback latency.
    VcsModel,
    /// Merged updates wait for the next periodic coordination round.
    Baseline,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::VcsModel => "vcs_model",
            Strategy::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArrivalProcess {
    /// Cases per second.
    Poisson { rate: f64 },
    /// Explicit arrival offsets from simulation start.
    List { times: Vec<SimDuration> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub name: String,
    pub kind: ResourceKind,
    pub capacity: u32,
    /// The stage whose activity holds one unit for its whole dwell.
    pub stage: Option<CaseStage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingSpec {
    /// Proposed start of the case-review meeting after enrollment.
    pub offset: SimDuration,
    pub duration: SimDuration,
}

/// A fully validated experiment description. Durations are in microsecond
/// ticks; rates are per second.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon: SimDuration,
    pub arrival: ArrivalProcess,
    pub latencies: Latencies,
    pub response_delay: SimDuration,
    pub p_flag: f64,
    pub transitions: TransitionTable,
    pub pool: Vec<(SubjectId, Role)>,
    pub resources: Vec<ResourceSpec>,
    pub strategy: Strategy,
    pub baseline_sync_interval: SimDuration,
    pub core_fraction: f64,
    pub contributions_per_stage: u32,
    pub meeting: MeetingSpec,
    pub bottleneck_threshold: f64,
    pub wait_ceiling: SimDuration,
}

const DAY: u64 = 86_400;

/// Default staff roster: role and head count.
const DEFAULT_POOL: [(Role, usize); 6] = [
    (Role::CaseManager, 3),
    (Role::Nurse, 8),
    (Role::LabTechnician, 4),
    (Role::AlliedHealth, 6),
    (Role::PsychoSocial, 2),
    (Role::Administrator, 2),
];

fn roster(counts: &[(Role, usize)]) -> Vec<(SubjectId, Role)> {
    counts
        .iter()
        .flat_map(|&(role, n)| {
            (1..=n).map(move |i| (SubjectId(format!("{}-{i}", role.name())), role))
        })
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            horizon: SimDuration::from_secs(180 * DAY),
            arrival: ArrivalProcess::Poisson {
                rate: 1.0 / DAY as f64,
            },
            latencies: Latencies::default(),
            response_delay: SimDuration::ZERO,
            p_flag: 0.1,
            transitions: TransitionTable::default(),
            pool: roster(&DEFAULT_POOL),
            resources: vec![
                ResourceSpec {
                    name: "oncologist".into(),
                    kind: ResourceKind::Personnel,
                    capacity: 4,
                    stage: Some(CaseStage::Diagnosis),
                },
                ResourceSpec {
                    name: "laboratory".into(),
                    kind: ResourceKind::Equipment,
                    capacity: 3,
                    stage: Some(CaseStage::InformationGathering),
                },
                ResourceSpec {
                    name: "treatment_unit".into(),
                    kind: ResourceKind::Facility,
                    capacity: 2,
                    stage: Some(CaseStage::TreatmentAssessment),
                },
            ],
            strategy: Strategy::VcsModel,
            baseline_sync_interval: SimDuration::from_secs(7 * DAY),
            core_fraction: 0.2,
            contributions_per_stage: 1,
            meeting: MeetingSpec {
                offset: SimDuration::from_secs(DAY),
                duration: SimDuration::from_secs(3600),
            },
            bottleneck_threshold: 0.85,
            wait_ceiling: SimDuration::from_secs(DAY),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        raw.normalize()
    }

    /// SHA-256 over the normalized configuration.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Re-checks the cross-field invariants, e.g. after programmatic edits.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == SimDuration::ZERO {
            return Err(ConfigError::invalid("horizon", "must be positive"));
        }
        match &self.arrival {
            ArrivalProcess::Poisson { rate } => {
                if !rate.is_finite() || *rate < 0.0 {
                    return Err(ConfigError::invalid("arrival.rate", "must be non-negative"));
                }
            }
            ArrivalProcess::List { times } => {
                if times.iter().any(|t| *t > self.horizon) {
                    return Err(ConfigError::invalid(
                        "arrival.times",
                        "arrival beyond horizon",
                    ));
                }
            }
        }
        check_probability("p_flag", self.p_flag)?;
        if !(self.core_fraction > 0.0 && self.core_fraction <= 1.0) {
            return Err(ConfigError::invalid("core_fraction", "must lie in (0, 1]"));
        }
        if !(self.bottleneck_threshold > 0.0 && self.bottleneck_threshold <= 1.0) {
            return Err(ConfigError::invalid(
                "bottleneck_threshold",
                "must lie in (0, 1]",
            ));
        }
        if self.strategy == Strategy::Baseline && self.baseline_sync_interval == SimDuration::ZERO {
            return Err(ConfigError::invalid(
                "baseline_sync_interval",
                "must be positive",
            ));
        }
        if !self.pool.iter().any(|(_, r)| *r == Role::CaseManager) {
            return Err(ConfigError::invalid(
                "pool",
                "needs at least one case_manager",
            ));
        }
        if let Some((id, role)) = self
            .pool
            .iter()
            .find(|(_, r)| matches!(r, Role::Patient | Role::Caretaker))
        {
            return Err(ConfigError::invalid(
                "pool",
                format!("{id}: {role} subjects are created per case"),
            ));
        }
        let mut ids: Vec<&SubjectId> = self.pool.iter().map(|(s, _)| s).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::invalid(
                "pool",
                format!("duplicate subject {}", w[0]),
            ));
        }
        let mut seen = BTreeMap::new();
        for r in &self.resources {
            if r.capacity == 0 {
                return Err(ConfigError::invalid(
                    &format!("resources.{}.capacity", r.name),
                    "must be positive",
                ));
            }
            if seen.insert(r.name.as_str(), ()).is_some() {
                return Err(ConfigError::invalid(
                    "resources",
                    format!("duplicate resource {}", r.name),
                ));
            }
            if let Some(stage) = r.stage {
                if !CaseStage::ACTIVE.contains(&stage) {
                    return Err(ConfigError::invalid(
                        &format!("resources.{}.stage", r.name),
                        format!("{stage} has no activity"),
                    ));
                }
            }
        }
        let mut stages: Vec<_> = self.resources.iter().filter_map(|r| r.stage).collect();
        stages.sort();
        if stages.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::invalid(
                "resources",
                "at most one resource per stage",
            ));
        }
        Ok(())
    }
}

fn check_probability(key: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            key,
            format!("{p} is not a probability"),
        ))
    }
}

// ---------------------------------------------------------------------------
// file format

/// A duration as written in the file; bare numbers are rejected for lack of a
/// unit.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DurationText {
    Text(String),
    Number(#[allow(dead_code)] f64),
}

fn duration(
    key: &str,
    value: Option<DurationText>,
    default: SimDuration,
) -> Result<SimDuration, ConfigError> {
    match value {
        None => Ok(default),
        Some(DurationText::Number(_)) => Err(ConfigError::MissingUnit {
            key: key.to_owned(),
        }),
        Some(DurationText::Text(text)) => parse_duration(&text).map_err(|e| unit_error(key, e)),
    }
}

fn unit_error(key: &str, e: UnitError) -> ConfigError {
    match e {
        UnitError::MissingUnit(_) => ConfigError::MissingUnit {
            key: key.to_owned(),
        },
        other => ConfigError::invalid(key, other.to_string()),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    strategy: Option<Strategy>,
    horizon: Option<DurationText>,
    feedback_latency: Option<DurationText>,
    validation_latency: Option<DurationText>,
    response_delay: Option<DurationText>,
    baseline_sync_interval: Option<DurationText>,
    p_flag: Option<f64>,
    core_fraction: Option<f64>,
    contributions_per_stage: Option<u32>,
    bottleneck_threshold: Option<f64>,
    wait_ceiling: Option<DurationText>,
    arrival: Option<RawArrival>,
    meeting: Option<RawMeeting>,
    stages: Option<RawStages>,
    pool: Option<Vec<RawPoolEntry>>,
    resources: Option<Vec<RawResource>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrival {
    process: String,
    rate: Option<DurationText>,
    times: Option<Vec<DurationText>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeeting {
    offset: Option<DurationText>,
    duration: Option<DurationText>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStages {
    dwell_model: Option<DwellModel>,
    dwell_means: Option<BTreeMap<String, DurationText>>,
    transitions: Option<Vec<RawEdge>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    from: String,
    to: String,
    p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoolEntry {
    role: String,
    id: Option<String>,
    count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResource {
    name: String,
    kind: ResourceKind,
    capacity: u32,
    stage: Option<String>,
}

fn stage(key: &str, name: &str) -> Result<CaseStage, ConfigError> {
    CaseStage::parse(name)
        .ok_or_else(|| ConfigError::invalid(key, format!("unknown stage {name:?}")))
}

impl RawConfig {
    fn normalize(self) -> Result<ScenarioConfig, ConfigError> {
        let d = ScenarioConfig::default();
        let horizon = match self.horizon {
            Some(DurationText::Text(t)) if t.trim_start().starts_with('-') => {
                return Err(ConfigError::invalid("horizon", "must be positive"))
            }
            other => duration("horizon", other, d.horizon)?,
        };
        let latencies = Latencies {
            feedback: duration(
                "feedback_latency",
                self.feedback_latency,
                d.latencies.feedback,
            )?,
            validation: duration(
                "validation_latency",
                self.validation_latency,
                d.latencies.validation,
            )?,
        };

        let arrival = match self.arrival {
            None => d.arrival.clone(),
            Some(raw) => match raw.process.as_str() {
                "poisson" => {
                    let rate = match raw.rate {
                        None => {
                            return Err(ConfigError::invalid(
                                "arrival.rate",
                                "required for poisson arrivals",
                            ))
                        }
                        Some(DurationText::Number(_)) => {
                            return Err(ConfigError::MissingUnit {
                                key: "arrival.rate".into(),
                            })
                        }
                        Some(DurationText::Text(t)) => {
                            parse_rate(&t).map_err(|e| unit_error("arrival.rate", e))?
                        }
                    };
                    ArrivalProcess::Poisson { rate }
                }
                "list" => {
                    let times = raw
                        .times
                        .ok_or_else(|| {
                            ConfigError::invalid("arrival.times", "required for list arrivals")
                        })?
                        .into_iter()
                        .map(|t| duration("arrival.times", Some(t), SimDuration::ZERO))
                        .collect::<Result<Vec<_>, _>>()?;
                    ArrivalProcess::List { times }
                }
                other => {
                    return Err(ConfigError::invalid(
                        "arrival.process",
                        format!("expected poisson or list, got {other:?}"),
                    ))
                }
            },
        };

        let transitions = match self.stages {
            None => d.transitions.clone(),
            Some(raw) => {
                let mut dwell = d.transitions.dwell_means().clone();
                for (name, value) in raw.dwell_means.unwrap_or_default() {
                    let key = format!("stages.dwell_means.{name}");
                    let st = stage(&key, &name)?;
                    dwell.insert(st, duration(&key, Some(value), SimDuration::ZERO)?);
                }
                let edges = match raw.transitions {
                    None => d.transitions.edges().to_vec(),
                    Some(list) => list
                        .into_iter()
                        .map(|e| {
                            Ok(TransitionEdge {
                                from: stage("stages.transitions.from", &e.from)?,
                                to: stage("stages.transitions.to", &e.to)?,
                                p: e.p,
                            })
                        })
                        .collect::<Result<Vec<_>, ConfigError>>()?,
                };
                let model = raw.dwell_model.unwrap_or(d.transitions.dwell_model());
                TransitionTable::new(edges, dwell, model)
                    .map_err(|e| ConfigError::invalid("stages.transitions", e.to_string()))?
            }
        };

        let pool = match self.pool {
            None => d.pool.clone(),
            Some(entries) => {
                let mut pool = Vec::new();
                for e in entries {
                    let role = Role::parse(&e.role).ok_or_else(|| {
                        ConfigError::invalid("pool.role", format!("unknown role {:?}", e.role))
                    })?;
                    match (e.id, e.count) {
                        (Some(id), None) => pool.push((SubjectId(id), role)),
                        (None, Some(n)) => pool.extend(roster(&[(role, n)])),
                        _ => {
                            return Err(ConfigError::invalid(
                                "pool",
                                "each entry needs exactly one of id or count",
                            ))
                        }
                    }
                }
                pool
            }
        };

        let resources = match self.resources {
            None => d.resources.clone(),
            Some(list) => list
                .into_iter()
                .map(|r| {
                    let stage = r
                        .stage
                        .map(|s| stage(&format!("resources.{}.stage", r.name), &s))
                        .transpose()?;
                    Ok(ResourceSpec {
                        name: r.name,
                        kind: r.kind,
                        capacity: r.capacity,
                        stage,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?,
        };

        let meeting = match self.meeting {
            None => d.meeting,
            Some(m) => MeetingSpec {
                offset: duration("meeting.offset", m.offset, d.meeting.offset)?,
                duration: duration("meeting.duration", m.duration, d.meeting.duration)?,
            },
        };

        let config = ScenarioConfig {
            seed: self.seed.unwrap_or(d.seed),
            horizon,
            arrival,
            latencies,
            response_delay: duration("response_delay", self.response_delay, d.response_delay)?,
            p_flag: self.p_flag.unwrap_or(d.p_flag),
            transitions,
            pool,
            resources,
            strategy: self.strategy.unwrap_or(d.strategy),
            baseline_sync_interval: duration(
                "baseline_sync_interval",
                self.baseline_sync_interval,
                d.baseline_sync_interval,
            )?,
            core_fraction: self.core_fraction.unwrap_or(d.core_fraction),
            contributions_per_stage: self
                .contributions_per_stage
                .unwrap_or(d.contributions_per_stage),
            meeting,
            bottleneck_threshold: self.bottleneck_threshold.unwrap_or(d.bottleneck_threshold),
            wait_ceiling: duration("wait_ceiling", self.wait_ceiling, d.wait_ceiling)?,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c.latencies.feedback, SimDuration::from_secs(15));
        assert_eq!(c.latencies.validation, SimDuration::from_secs(1440));
        assert_eq!(c.baseline_sync_interval, SimDuration::from_secs(604_800));
        assert_eq!(c, ScenarioConfig::default());
    }

    #[test]
    fn quarter_minute_normalizes() {
        let c = ScenarioConfig::from_toml_str("feedback_latency = \"0.25 min\"").unwrap();
        assert_eq!(c.latencies.feedback, SimDuration::from_secs(15));
    }

    #[test]
    fn negative_horizon_names_key() {
        let err = ScenarioConfig::from_toml_str("horizon = \"-5 d\"").unwrap_err();
        assert_eq!(err.key(), Some("horizon"));
        assert!(matches!(err, ConfigError::Validation { .. }));
        let err = ScenarioConfig::from_toml_str("horizon = \"0 s\"").unwrap_err();
        assert_eq!(err.key(), Some("horizon"));
    }

    #[test]
    fn bare_numbers_need_units() {
        let err = ScenarioConfig::from_toml_str("validation_latency = 1440").unwrap_err();
        assert!(matches!(err, ConfigError::MissingUnit { ref key } if key == "validation_latency"));
        let err = ScenarioConfig::from_toml_str("validation_latency = \"1440\"").unwrap_err();
        assert!(matches!(err, ConfigError::MissingUnit { .. }));
        let err = ScenarioConfig::from_toml_str("[arrival]\nprocess = \"poisson\"\nrate = 0.5")
            .unwrap_err();
        assert_eq!(err.key(), Some("arrival.rate"));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("horizon = "),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("feedback_latncy = \"1 s\""),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn probability_bounds() {
        let err = ScenarioConfig::from_toml_str("p_flag = 1.5").unwrap_err();
        assert_eq!(err.key(), Some("p_flag"));
    }

    #[test]
    fn full_tree() {
        let text = r#"
            seed = 9
            strategy = "baseline"
            horizon = "30 d"
            baseline_sync_interval = "1 d"

            [arrival]
            process = "list"
            times = ["0 s", "2 h"]

            [stages]
            dwell_model = "fixed"
            dwell_means = { diagnosis = "100 s" }

            [[pool]]
            role = "case_manager"
            id = "dr-a"

            [[pool]]
            role = "nurse"
            count = 2

            [[resources]]
            name = "scanner"
            kind = "equipment"
            capacity = 1
            stage = "diagnosis"
        "#;
        let c = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(c.strategy, Strategy::Baseline);
        assert_eq!(
            c.arrival,
            ArrivalProcess::List {
                times: vec![SimDuration::ZERO, SimDuration::from_secs(7200)]
            }
        );
        assert_eq!(
            c.transitions.dwell_mean(CaseStage::Diagnosis),
            Some(SimDuration::from_secs(100))
        );
        assert_eq!(c.transitions.dwell_model(), DwellModel::Fixed);
        assert_eq!(c.pool.len(), 3);
        assert_eq!(c.pool[1].0, SubjectId::new("nurse-1"));
        assert_eq!(c.resources.len(), 1);
    }

    #[test]
    fn pool_needs_manager() {
        let err =
            ScenarioConfig::from_toml_str("[[pool]]\nrole = \"nurse\"\ncount = 3").unwrap_err();
        assert_eq!(err.key(), Some("pool"));
    }

    #[test]
    fn digest_tracks_content() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
