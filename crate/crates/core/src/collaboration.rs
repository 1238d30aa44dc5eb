//! Per-case workflow: core-team formation, collaboration requests, and
//! progression through the case-monitoring stages.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CaseId, RequestId, SubjectId};
use crate::kernel::{Engine, EventKind, Target};
use crate::record::{CaseBook, RecordError, Right, Role, Section};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollabError {
    #[error("collaborator pool is empty")]
    EmptyPool,
    #[error("collaborator pool has no case manager")]
    NoCaseManagerInPool,
    #[error("core-team fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("case {0} is already closed")]
    TerminalStage(CaseId),
    #[error("case {case} cannot close from stage {stage}")]
    NotAssessed { case: CaseId, stage: CaseStage },
    #[error("invalid transition table: {0}")]
    InvalidTable(String),
    #[error("unknown collaboration request {0}")]
    UnknownRequest(RequestId),
    #[error("request {id} cannot move from {from:?} to {to:?}")]
    RequestOutOfOrder {
        id: RequestId,
        from: RequestState,
        to: RequestState,
    },
    #[error(transparent)]
    Record(#[from] RecordError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStage {
    Enrolled,
    Diagnosis,
    InformationGathering,
    IteratingSolutions,
    TreatmentAssessment,
    Closed,
}

impl CaseStage {
    pub const ALL: [CaseStage; 6] = [
        CaseStage::Enrolled,
        CaseStage::Diagnosis,
        CaseStage::InformationGathering,
        CaseStage::IteratingSolutions,
        CaseStage::TreatmentAssessment,
        CaseStage::Closed,
    ];

    /// The four monitoring stages that have a dwell time.
    pub const ACTIVE: [CaseStage; 4] = [
        CaseStage::Diagnosis,
        CaseStage::InformationGathering,
        CaseStage::IteratingSolutions,
        CaseStage::TreatmentAssessment,
    ];

    pub fn is_terminal(self) -> bool {
        self == CaseStage::Closed
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseStage::Enrolled => "enrolled",
            CaseStage::Diagnosis => "diagnosis",
            CaseStage::InformationGathering => "information_gathering",
            CaseStage::IteratingSolutions => "iterating_solutions",
            CaseStage::TreatmentAssessment => "treatment_assessment",
            CaseStage::Closed => "closed",
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            CaseStage::Enrolled => "E",
            CaseStage::Diagnosis => "D",
            CaseStage::InformationGathering => "IG",
            CaseStage::IteratingSolutions => "IS",
            CaseStage::TreatmentAssessment => "TA",
            CaseStage::Closed => "C",
        }
    }

    pub fn parse(s: &str) -> Option<CaseStage> {
        CaseStage::ALL.into_iter().find(|st| st.name() == s)
    }
}

impl fmt::Display for CaseStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellModel {
    /// Exponentially distributed around the configured mean.
    Exponential,
    /// Exactly the configured mean.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEdge {
    pub from: CaseStage,
    pub to: CaseStage,
    pub p: f64,
}

/// Stage-to-stage probabilities and per-stage dwell means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    edges: Vec<TransitionEdge>,
    dwell: BTreeMap<CaseStage, SimDuration>,
    dwell_model: DwellModel,
}

const DAY: u64 = 86_400;

impl Default for TransitionTable {
    fn default() -> Self {
        use CaseStage::*;
        let edges = [
            (Enrolled, Diagnosis, 1.0),
            (Diagnosis, InformationGathering, 1.0),
            (InformationGathering, IteratingSolutions, 0.8),
            (InformationGathering, Diagnosis, 0.2),
            (IteratingSolutions, TreatmentAssessment, 0.7),
            (IteratingSolutions, InformationGathering, 0.3),
            (TreatmentAssessment, Closed, 1.0),
        ];
        let dwell = [
            (Diagnosis, 2 * DAY),
            (InformationGathering, DAY),
            (IteratingSolutions, 3 * DAY),
            (TreatmentAssessment, DAY),
        ];
        TransitionTable::new(
            edges
                .iter()
                .map(|&(from, to, p)| TransitionEdge { from, to, p })
                .collect(),
            dwell
                .iter()
                .map(|&(s, d)| (s, SimDuration::from_secs(d)))
                .collect(),
            DwellModel::Exponential,
        )
        .expect("default table is valid")
    }
}

impl TransitionTable {
    pub fn new(
        edges: Vec<TransitionEdge>,
        dwell: BTreeMap<CaseStage, SimDuration>,
        dwell_model: DwellModel,
    ) -> Result<Self, CollabError> {
        let mut edges: Vec<_> = edges.into_iter().filter(|e| e.p != 0.0).collect();
        edges.sort_by_key(|e| (e.from, e.to));
        let table = TransitionTable {
            edges,
            dwell,
            dwell_model,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), CollabError> {
        let bad = |msg: String| Err(CollabError::InvalidTable(msg));
        for pair in self.edges.windows(2) {
            if (pair[0].from, pair[0].to) == (pair[1].from, pair[1].to) {
                return bad(format!("duplicate edge {} -> {}", pair[0].from, pair[0].to));
            }
        }
        for e in &self.edges {
            if !(0.0..=1.0).contains(&e.p) || e.p.is_nan() {
                return bad(format!(
                    "probability {} on {} -> {} outside [0, 1]",
                    e.p, e.from, e.to
                ));
            }
            if e.from.is_terminal() {
                return bad("closed has outgoing edges".into());
            }
            if e.to == CaseStage::Enrolled {
                return bad(format!(
                    "{} -> enrolled re-enters the initial stage",
                    e.from
                ));
            }
            if e.to == CaseStage::Closed && e.from != CaseStage::TreatmentAssessment {
                return bad(format!("{} -> closed skips treatment assessment", e.from));
            }
        }
        for stage in CaseStage::ALL.into_iter().filter(|s| !s.is_terminal()) {
            let total: f64 = self.outgoing(stage).map(|e| e.p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return bad(format!(
                    "outgoing probabilities from {stage} sum to {total}"
                ));
            }
        }
        for stage in CaseStage::ACTIVE {
            if !self.dwell.contains_key(&stage) {
                return bad(format!("missing dwell mean for {stage}"));
            }
        }
        Ok(())
    }

    pub fn edges(&self) -> &[TransitionEdge] {
        &self.edges
    }

    pub fn outgoing(&self, stage: CaseStage) -> impl Iterator<Item = &TransitionEdge> {
        self.edges.iter().filter(move |e| e.from == stage)
    }

    pub fn probability(&self, from: CaseStage, to: CaseStage) -> f64 {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map_or(0.0, |e| e.p)
    }

    pub fn dwell_mean(&self, stage: CaseStage) -> Option<SimDuration> {
        self.dwell.get(&stage).copied()
    }

    pub fn dwell_means(&self) -> &BTreeMap<CaseStage, SimDuration> {
        &self.dwell
    }

    pub fn dwell_model(&self) -> DwellModel {
        self.dwell_model
    }

    /// Draws the successor of `from`.
    pub fn sample_next<R: Rng + ?Sized>(&self, from: CaseStage, rng: &mut R) -> Option<CaseStage> {
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut last = None;
        for e in self.outgoing(from) {
            cumulative += e.p;
            last = Some(e.to);
            if u < cumulative {
                return last;
            }
        }
        last
    }

    /// Draws a dwell for `stage`; zero for stages without a mean.
    pub fn sample_dwell<R: Rng + ?Sized>(&self, stage: CaseStage, rng: &mut R) -> SimDuration {
        let Some(mean) = self.dwell_mean(stage) else {
            return SimDuration::ZERO;
        };
        match self.dwell_model {
            DwellModel::Fixed => mean,
            DwellModel::Exponential => {
                let u: f64 = rng.gen();
                let secs = -mean.as_secs_f64() * (1.0 - u).ln();
                SimDuration::from_secs_f64(secs).unwrap_or(SimDuration::ZERO)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreTeam {
    pub case_id: CaseId,
    pub leader: SubjectId,
    pub members: Vec<(SubjectId, Role)>,
    pub formed_at: SimTime,
    /// Set when the pool offered no collaborators besides the leader.
    pub leader_only: bool,
}

impl CoreTeam {
    pub fn size(&self) -> usize {
        self.members.len() + 1
    }
}

/// Selects a case manager and a Pareto-sized set of collaborators from `pool`
/// and issues their grants on `case`.
///
/// Team size (leader included) is `max(required, ceil(fraction * |pool|))`,
/// where `required` counts the leader plus one nurse and one lab technician
/// when the pool has them.
pub fn establish_core_team<R: Rng + ?Sized>(
    book: &mut CaseBook,
    case: CaseId,
    pool: &[(SubjectId, Role)],
    fraction: f64,
    rng: &mut R,
    now: SimTime,
) -> Result<CoreTeam, CollabError> {
    if pool.is_empty() {
        return Err(CollabError::EmptyPool);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CollabError::BadFraction(fraction));
    }
    let managers: Vec<&SubjectId> = pool
        .iter()
        .filter(|(_, r)| *r == Role::CaseManager)
        .map(|(s, _)| s)
        .collect();
    let leader = (*managers
        .choose(rng)
        .ok_or(CollabError::NoCaseManagerInPool)?)
    .clone();

    let mut eligible: Vec<(SubjectId, Role)> = pool
        .iter()
        .filter(|(_, r)| r.is_collaborator())
        .cloned()
        .collect();
    let mut members = Vec::new();
    for required in [Role::Nurse, Role::LabTechnician] {
        let candidates: Vec<usize> = (0..eligible.len())
            .filter(|&i| eligible[i].1 == required)
            .collect();
        if let Some(&i) = candidates.choose(rng) {
            members.push(eligible.swap_remove(i));
        }
    }
    let pareto = (fraction * pool.len() as f64 - 1e-9).ceil() as usize;
    let target = pareto.max(members.len() + 1);
    let extra = target.saturating_sub(members.len() + 1).min(eligible.len());
    // swap_remove reorders; sort back so the draw depends only on the pool
    eligible.sort();
    let (picked, _) = eligible.partial_shuffle(rng, extra);
    members.extend(picked.iter().cloned());

    book.assign_manager(case, &leader, now)?;
    for (subject, role) in &members {
        book.add_core_member(case, &leader, subject, *role, now)?;
    }
    Ok(CoreTeam {
        case_id: case,
        leader_only: members.is_empty(),
        leader,
        members,
        formed_at: now,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestState {
    Sent,
    Delivered,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollaborationRequest {
    pub id: RequestId,
    pub case_id: CaseId,
    pub collaborator: SubjectId,
    pub team: Role,
    pub role_description: String,
    /// Scheduled meetings as `(start, duration)`.
    pub schedule: Vec<(SimTime, SimDuration)>,
    pub prior_info: Vec<Section>,
    pub state: RequestState,
    pub sent_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub accepted_at: Option<SimTime>,
}

/// Outstanding and completed collaboration requests of a run.
#[derive(Debug, Clone, Default)]
pub struct RequestLedger {
    feedback_latency: SimDuration,
    response_delay: SimDuration,
    requests: Vec<CollaborationRequest>,
}

impl RequestLedger {
    pub fn new(feedback_latency: SimDuration, response_delay: SimDuration) -> Self {
        RequestLedger {
            feedback_latency,
            response_delay,
            requests: Vec::new(),
        }
    }

    pub fn requests(&self) -> &[CollaborationRequest] {
        &self.requests
    }

    pub fn get(&self, id: RequestId) -> Result<&CollaborationRequest, CollabError> {
        self.requests
            .get(id.index())
            .ok_or(CollabError::UnknownRequest(id))
    }

    /// Sends one request per team member; each is delivered after the
    /// feedback latency.
    pub fn open_collaboration(
        &mut self,
        engine: &mut Engine,
        book: &CaseBook,
        team: &CoreTeam,
        schedule: &[(SimTime, SimDuration)],
    ) -> Result<Vec<RequestId>, CollabError> {
        let policy = book.policy(team.case_id)?;
        let now = engine.now();
        let mut ids = Vec::with_capacity(team.members.len());
        for (subject, role) in &team.members {
            let id = RequestId(self.requests.len() as u64);
            let prior_info = Section::ALL
                .into_iter()
                .filter(|s| policy.allows(subject, *s, Right::Read))
                .collect();
            let writes = role
                .write_section()
                .map_or_else(|| "observer".to_owned(), |s| format!("maintains {s:?}"));
            self.requests.push(CollaborationRequest {
                id,
                case_id: team.case_id,
                collaborator: subject.clone(),
                team: *role,
                role_description: format!("{role} on {}: {writes}", team.case_id),
                schedule: schedule.to_vec(),
                prior_info,
                state: RequestState::Sent,
                sent_at: now,
                delivered_at: None,
                accepted_at: None,
            });
            engine.schedule_in(
                self.feedback_latency,
                EventKind::RequestDelivered,
                Target::Request(id),
            );
            ids.push(id);
        }
        Ok(ids)
    }

    fn advance(
        &mut self,
        id: RequestId,
        to: RequestState,
    ) -> Result<&mut CollaborationRequest, CollabError> {
        let req = self
            .requests
            .get_mut(id.index())
            .ok_or(CollabError::UnknownRequest(id))?;
        let expected = match to {
            RequestState::Delivered => RequestState::Sent,
            RequestState::Accepted => RequestState::Delivered,
            RequestState::Sent => unreachable!("requests never return to Sent"),
        };
        if req.state != expected {
            return Err(CollabError::RequestOutOfOrder {
                id,
                from: req.state,
                to,
            });
        }
        req.state = to;
        Ok(req)
    }

    /// Marks delivery and schedules acceptance after the response delay.
    pub fn deliver(&mut self, engine: &mut Engine, id: RequestId) -> Result<(), CollabError> {
        let now = engine.now();
        self.advance(id, RequestState::Delivered)?.delivered_at = Some(now);
        engine.schedule_in(
            self.response_delay,
            EventKind::RequestAccepted,
            Target::Request(id),
        );
        Ok(())
    }

    pub fn accept(&mut self, engine: &Engine, id: RequestId) -> Result<(), CollabError> {
        let now = engine.now();
        self.advance(id, RequestState::Accepted)?.accepted_at = Some(now);
        Ok(())
    }
}

/// Outcome of [`advance_stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageAdvance {
    pub stage: CaseStage,
    /// Activity duration drawn for the new stage; `None` once closed.
    pub dwell: Option<SimDuration>,
}

/// Moves `case` to a successor drawn from `table` and draws the new stage's
/// dwell. Drawing `Closed` closes the case.
///
/// Scheduling the stage's activity is left to the caller, which may first
/// need to acquire a resource for it.
pub fn advance_stage<R: Rng + ?Sized>(
    book: &mut CaseBook,
    case: CaseId,
    table: &TransitionTable,
    rng: &mut R,
    now: SimTime,
) -> Result<StageAdvance, CollabError> {
    let current = book.case(case)?.stage();
    if current.is_terminal() {
        return Err(CollabError::TerminalStage(case));
    }
    let next = table
        .sample_next(current, rng)
        .ok_or_else(|| CollabError::InvalidTable(format!("no successor for {current}")))?;
    if next == CaseStage::Closed {
        close_case(book, case, now)?;
        return Ok(StageAdvance {
            stage: CaseStage::Closed,
            dwell: None,
        });
    }
    let dwell = table.sample_dwell(next, rng);
    book.set_stage(case, next, now)?;
    Ok(StageAdvance {
        stage: next,
        dwell: Some(dwell),
    })
}

/// Closes an assessed case and returns its enrollment-to-close duration.
pub fn close_case(
    book: &mut CaseBook,
    case: CaseId,
    now: SimTime,
) -> Result<SimDuration, CollabError> {
    let record = book.case(case)?;
    let stage = record.stage();
    if stage != CaseStage::TreatmentAssessment {
        return Err(CollabError::NotAssessed { case, stage });
    }
    let total = now - record.enrolled_at;
    book.set_stage(case, CaseStage::Closed, now)?;
    Ok(total)
}
