//! Versioned case records and the contribution lifecycle.
//!
//! A contribution moves `Pending -> Approved -> Merged`, or detours through
//! `Flagged` and back to `Pending` on resubmission. Merging appends to the
//! case's linear history and bumps its version by one. Only merged content is
//! ever readable, and only by subjects the case manager has granted.

mod access;
mod audit;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collaboration::CaseStage;
use crate::ids::{CaseId, ContributionId, SubjectId};
use crate::kernel::{Engine, EventKind, Target};
use crate::time::{SimDuration, SimTime};

pub use access::{default_rights, AccessPolicy, GrantRefusal, Right, Role, Section};
pub use audit::{Action, AuditEntry, AuditTrail};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("enrollment requires non-empty bio-data")]
    EmptyEnrollment,
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("unknown contribution {0}")]
    UnknownContribution(ContributionId),
    #[error("{subject} lacks {right:?} on {section:?}")]
    AccessDenied {
        subject: SubjectId,
        section: Section,
        right: Right,
    },
    #[error("{0} is not pending")]
    NotPending(ContributionId),
    #[error("{0} is not flagged")]
    NotFlagged(ContributionId),
    #[error("{0} is not approved")]
    NotApproved(ContributionId),
    #[error("{subject} is not the case manager of {case}")]
    NotCaseManager { subject: SubjectId, case: CaseId },
    #[error("{subject} did not author {contrib}")]
    NotAuthor {
        subject: SubjectId,
        contrib: ContributionId,
    },
    #[error("write rights require core-team membership ({0})")]
    WriteRequiresCoreTeam(SubjectId),
    #[error("case {0} already has a case manager")]
    ManagerAlreadyAssigned(CaseId),
}

/// Delivery latencies applied by the record lifecycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Latencies {
    /// Collaborator feedback / notification latency.
    pub feedback: SimDuration,
    /// Time the case manager takes to validate one input.
    pub validation: SimDuration,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies {
            feedback: SimDuration::from_secs(15),
            validation: SimDuration::from_secs(1440),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContributionStatus {
    Pending,
    Flagged,
    Approved,
    Merged,
}

impl ContributionStatus {
    /// Whether `self -> next` is an edge of the lifecycle graph.
    pub fn can_become(self, next: ContributionStatus) -> bool {
        use ContributionStatus::*;
        matches!(
            (self, next),
            (Pending, Flagged) | (Pending, Approved) | (Flagged, Pending) | (Approved, Merged)
        )
    }
}

impl fmt::Display for ContributionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Irregular,
}

#[derive(Debug, Clone, Serialize)]
pub struct Contribution {
    pub contrib_id: ContributionId,
    pub case_id: CaseId,
    pub author: SubjectId,
    pub role: Role,
    pub submitted_at: SimTime,
    pub section: Section,
    pub payload: String,
    pub status: ContributionStatus,
    pub revision: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseRecord {
    pub case_id: CaseId,
    pub patient_bio: String,
    pub medical_history: String,
    pub caretaker_details: String,
    pub enrolled_at: SimTime,
    stage: CaseStage,
    stage_log: Vec<(SimTime, CaseStage)>,
    merged_log: Vec<ContributionId>,
    sections: BTreeMap<Section, String>,
}

impl CaseRecord {
    pub fn version(&self) -> u64 {
        self.merged_log.len() as u64
    }

    pub fn stage(&self) -> CaseStage {
        self.stage
    }

    /// Every stage the case has entered, with entry time, starting at
    /// `Enrolled`.
    pub fn stage_log(&self) -> &[(SimTime, CaseStage)] {
        &self.stage_log
    }

    pub fn merged_log(&self) -> &[ContributionId] {
        &self.merged_log
    }
}

/// All case records, contributions and access policies of one run.
#[derive(Debug, Clone, Default)]
pub struct CaseBook {
    latencies: Latencies,
    cases: Vec<CaseRecord>,
    policies: Vec<AccessPolicy>,
    contributions: Vec<Contribution>,
    audit: AuditTrail,
}

impl CaseBook {
    pub fn new(latencies: Latencies) -> Self {
        CaseBook {
            latencies,
            ..Default::default()
        }
    }

    pub fn latencies(&self) -> Latencies {
        self.latencies
    }

    pub fn audit(&self) -> &AuditTrail {
        &self.audit
    }

    pub fn cases(&self) -> &[CaseRecord] {
        &self.cases
    }

    pub fn contributions(&self) -> &[Contribution] {
        &self.contributions
    }

    pub fn case(&self, id: CaseId) -> Result<&CaseRecord, RecordError> {
        self.cases
            .get(id.index())
            .ok_or(RecordError::UnknownCase(id))
    }

    fn case_mut(&mut self, id: CaseId) -> Result<&mut CaseRecord, RecordError> {
        self.cases
            .get_mut(id.index())
            .ok_or(RecordError::UnknownCase(id))
    }

    pub fn policy(&self, id: CaseId) -> Result<&AccessPolicy, RecordError> {
        self.policies
            .get(id.index())
            .ok_or(RecordError::UnknownCase(id))
    }

    pub fn contribution(&self, id: ContributionId) -> Result<&Contribution, RecordError> {
        self.contributions
            .get(id.index())
            .ok_or(RecordError::UnknownContribution(id))
    }

    pub fn enroll_case(
        &mut self,
        bio: &str,
        history: &str,
        caretaker: &str,
        now: SimTime,
    ) -> Result<CaseId, RecordError> {
        if bio.trim().is_empty() {
            return Err(RecordError::EmptyEnrollment);
        }
        let case_id = CaseId(self.cases.len() as u64);
        self.cases.push(CaseRecord {
            case_id,
            patient_bio: bio.to_owned(),
            medical_history: history.to_owned(),
            caretaker_details: caretaker.to_owned(),
            enrolled_at: now,
            stage: CaseStage::Enrolled,
            stage_log: vec![(now, CaseStage::Enrolled)],
            merged_log: Vec::new(),
            sections: BTreeMap::new(),
        });
        self.policies.push(AccessPolicy::default());
        self.audit.record(
            now,
            case_id,
            None,
            None,
            Action::Enroll,
            None,
            Some(CaseStage::Enrolled.to_string()),
            0,
        );
        Ok(case_id)
    }

    /// Makes `manager` the case's leader and policy owner.
    pub fn assign_manager(
        &mut self,
        case: CaseId,
        manager: &SubjectId,
        now: SimTime,
    ) -> Result<(), RecordError> {
        let version = self.case(case)?.version();
        let policy = &mut self.policies[case.index()];
        if policy.owner().is_some() {
            return Err(RecordError::ManagerAlreadyAssigned(case));
        }
        policy.set_owner(manager.clone());
        self.audit.record(
            now,
            case,
            None,
            Some(manager),
            Action::AssignManager,
            None,
            None,
            version,
        );
        Ok(())
    }

    /// Adds a core-team member and issues the role's default rights.
    pub fn add_core_member(
        &mut self,
        case: CaseId,
        manager: &SubjectId,
        member: &SubjectId,
        role: Role,
        now: SimTime,
    ) -> Result<(), RecordError> {
        let version = self.case(case)?.version();
        let policy = &mut self.policies[case.index()];
        if !policy.is_owner(manager) {
            return Err(RecordError::NotCaseManager {
                subject: manager.clone(),
                case,
            });
        }
        policy.add_core_member(member.clone(), role);
        policy
            .apply_role_defaults(manager, member, role)
            .map_err(|e| refusal(e, manager, member, case))?;
        self.audit.record(
            now,
            case,
            None,
            Some(member),
            Action::AddMember,
            None,
            Some(role.to_string()),
            version,
        );
        Ok(())
    }

    /// Registers an information-access stakeholder with the role's default
    /// rights (reads only, since stakeholders are outside the core team).
    pub fn add_stakeholder(
        &mut self,
        case: CaseId,
        manager: &SubjectId,
        subject: &SubjectId,
        role: Role,
        now: SimTime,
    ) -> Result<(), RecordError> {
        let version = self.case(case)?.version();
        let policy = &mut self.policies[case.index()];
        policy
            .apply_role_defaults(manager, subject, role)
            .map_err(|e| refusal(e, manager, subject, case))?;
        self.audit.record(
            now,
            case,
            None,
            Some(subject),
            Action::Grant,
            None,
            Some(role.to_string()),
            version,
        );
        Ok(())
    }

    pub fn grant(
        &mut self,
        case: CaseId,
        manager: &SubjectId,
        subject: &SubjectId,
        section: Section,
        right: Right,
        now: SimTime,
    ) -> Result<(), RecordError> {
        let version = self.case(case)?.version();
        self.policies[case.index()]
            .grant(manager, subject, section, right)
            .map_err(|e| refusal(e, manager, subject, case))?;
        self.audit.record(
            now,
            case,
            None,
            Some(subject),
            Action::Grant,
            None,
            Some(format!("{section:?}:{right:?}")),
            version,
        );
        Ok(())
    }

    /// Records `author`'s input as a pending contribution and schedules its
    /// validation.
    pub fn submit_contribution(
        &mut self,
        engine: &mut Engine,
        case: CaseId,
        author: &SubjectId,
        section: Section,
        payload: &str,
    ) -> Result<ContributionId, RecordError> {
        let version = self.case(case)?.version();
        let policy = &self.policies[case.index()];
        if !policy.allows(author, section, Right::Write) {
            return Err(RecordError::AccessDenied {
                subject: author.clone(),
                section,
                right: Right::Write,
            });
        }
        let role = policy
            .role_of(author)
            .expect("write holders are registered");
        let now = engine.now();
        let contrib_id = ContributionId(self.contributions.len() as u64);
        self.contributions.push(Contribution {
            contrib_id,
            case_id: case,
            author: author.clone(),
            role,
            submitted_at: now,
            section,
            payload: payload.to_owned(),
            status: ContributionStatus::Pending,
            revision: 0,
        });
        self.audit.record(
            now,
            case,
            Some(contrib_id),
            Some(author),
            Action::Submit,
            None,
            Some(ContributionStatus::Pending.to_string()),
            version,
        );
        engine.schedule_in(
            self.latencies.validation,
            EventKind::ValidationCompleted,
            Target::Contribution(contrib_id),
        );
        Ok(contrib_id)
    }

    fn require_manager(&self, case: CaseId, subject: &SubjectId) -> Result<(), RecordError> {
        if self.policy(case)?.is_owner(subject) {
            Ok(())
        } else {
            Err(RecordError::NotCaseManager {
                subject: subject.clone(),
                case,
            })
        }
    }

    fn transition(
        &mut self,
        now: SimTime,
        id: ContributionId,
        actor: &SubjectId,
        action: Action,
        next: ContributionStatus,
    ) {
        let contrib = &mut self.contributions[id.index()];
        debug_assert!(contrib.status.can_become(next));
        let old = contrib.status;
        contrib.status = next;
        let case = contrib.case_id;
        let version = self.cases[case.index()].version();
        self.audit.record(
            now,
            case,
            Some(id),
            Some(actor),
            action,
            Some(old.to_string()),
            Some(next.to_string()),
            version,
        );
    }

    /// Case-manager validation. An irregular verdict flags the contribution
    /// and schedules a notification to its author.
    pub fn validate(
        &mut self,
        engine: &mut Engine,
        id: ContributionId,
        manager: &SubjectId,
        verdict: Verdict,
    ) -> Result<ContributionStatus, RecordError> {
        let contrib = self.contribution(id)?;
        if contrib.status != ContributionStatus::Pending {
            return Err(RecordError::NotPending(id));
        }
        self.require_manager(contrib.case_id, manager)?;
        let now = engine.now();
        let next = match verdict {
            Verdict::Ok => {
                self.transition(
                    now,
                    id,
                    manager,
                    Action::Approve,
                    ContributionStatus::Approved,
                );
                ContributionStatus::Approved
            }
            Verdict::Irregular => {
                self.transition(now, id, manager, Action::Flag, ContributionStatus::Flagged);
                engine.schedule_in(
                    self.latencies.feedback,
                    EventKind::RequestDelivered,
                    Target::Contribution(id),
                );
                ContributionStatus::Flagged
            }
        };
        Ok(next)
    }

    /// Author's corrected input for a flagged contribution. Returns the new
    /// revision number.
    pub fn resubmit(
        &mut self,
        engine: &mut Engine,
        id: ContributionId,
        caller: &SubjectId,
        payload: &str,
    ) -> Result<u32, RecordError> {
        let contrib = self.contribution(id)?;
        if contrib.status != ContributionStatus::Flagged {
            return Err(RecordError::NotFlagged(id));
        }
        if &contrib.author != caller {
            return Err(RecordError::NotAuthor {
                subject: caller.clone(),
                contrib: id,
            });
        }
        let now = engine.now();
        {
            let contrib = &mut self.contributions[id.index()];
            contrib.payload = payload.to_owned();
            contrib.revision += 1;
            contrib.submitted_at = now;
        }
        self.transition(
            now,
            id,
            caller,
            Action::Resubmit,
            ContributionStatus::Pending,
        );
        engine.schedule_in(
            self.latencies.validation,
            EventKind::ValidationCompleted,
            Target::Contribution(id),
        );
        Ok(self.contributions[id.index()].revision)
    }

    /// Appends an approved contribution to the case history. Returns the new
    /// version.
    pub fn approve_and_merge(
        &mut self,
        engine: &mut Engine,
        id: ContributionId,
        manager: &SubjectId,
    ) -> Result<u64, RecordError> {
        let contrib = self.contribution(id)?;
        if contrib.status != ContributionStatus::Approved {
            return Err(RecordError::NotApproved(id));
        }
        let case = contrib.case_id;
        self.require_manager(case, manager)?;
        let (section, payload) = (contrib.section, contrib.payload.clone());
        let record = &mut self.cases[case.index()];
        record.merged_log.push(id);
        record.sections.insert(section, payload);
        let version = record.version();
        self.transition(
            engine.now(),
            id,
            manager,
            Action::Merge,
            ContributionStatus::Merged,
        );
        engine.schedule_in(
            SimDuration::ZERO,
            EventKind::MergeCompleted,
            Target::Contribution(id),
        );
        Ok(version)
    }

    /// Current merged content of `section`, or `None` if nothing has been
    /// merged there yet.
    pub fn read_section(
        &self,
        case: CaseId,
        subject: &SubjectId,
        section: Section,
    ) -> Result<Option<&str>, RecordError> {
        let record = self.case(case)?;
        if !self.policies[case.index()].allows(subject, section, Right::Read) {
            return Err(RecordError::AccessDenied {
                subject: subject.clone(),
                section,
                right: Right::Read,
            });
        }
        Ok(record.sections.get(&section).map(String::as_str))
    }

    pub(crate) fn set_stage(
        &mut self,
        case: CaseId,
        stage: CaseStage,
        now: SimTime,
    ) -> Result<(), RecordError> {
        let record = self.case_mut(case)?;
        let old = record.stage;
        record.stage = stage;
        record.stage_log.push((now, stage));
        let version = record.version();
        let action = if stage == CaseStage::Closed {
            Action::Close
        } else {
            Action::Stage
        };
        self.audit.record(
            now,
            case,
            None,
            None,
            action,
            Some(old.to_string()),
            Some(stage.to_string()),
            version,
        );
        Ok(())
    }

    /// Notes a resource grant for a case activity in the audit trail.
    pub fn note_resource_grant(
        &mut self,
        case: CaseId,
        resource: &str,
        stage: CaseStage,
        now: SimTime,
    ) -> Result<(), RecordError> {
        let version = self.case(case)?.version();
        self.audit.record(
            now,
            case,
            None,
            Some(&SubjectId::new(resource)),
            Action::ResourceGrant,
            None,
            Some(stage.to_string()),
            version,
        );
        Ok(())
    }
}

fn refusal(e: GrantRefusal, manager: &SubjectId, subject: &SubjectId, case: CaseId) -> RecordError {
    match e {
        GrantRefusal::NotOwner => RecordError::NotCaseManager {
            subject: manager.clone(),
            case,
        },
        GrantRefusal::WriteRequiresCoreTeam => RecordError::WriteRequiresCoreTeam(subject.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        engine: Engine,
        book: CaseBook,
        case: CaseId,
        manager: SubjectId,
        nurse: SubjectId,
    }

    fn fixture() -> Fixture {
        let mut book = CaseBook::new(Latencies::default());
        let case = book
            .enroll_case("patient P001", "", "caretaker C1", SimTime::ZERO)
            .unwrap();
        let manager = SubjectId::new("cm-1");
        let nurse = SubjectId::new("nurse-1");
        book.assign_manager(case, &manager, SimTime::ZERO).unwrap();
        book.add_core_member(case, &manager, &nurse, Role::Nurse, SimTime::ZERO)
            .unwrap();
        book.add_stakeholder(
            case,
            &manager,
            &"patient".into(),
            Role::Patient,
            SimTime::ZERO,
        )
        .unwrap();
        Fixture {
            engine: Engine::new(),
            book,
            case,
            manager,
            nurse,
        }
    }

    #[test]
    fn enrollment() {
        let mut book = CaseBook::default();
        let a = book
            .enroll_case("patient P001", "", "caretaker C1", SimTime::ZERO)
            .unwrap();
        let b = book
            .enroll_case("patient P002", "", "", SimTime::ZERO)
            .unwrap();
        assert_ne!(a, b);
        assert_eq!(book.case(a).unwrap().version(), 0);
        assert!(book.case(b).unwrap().merged_log().is_empty());
        assert_eq!(book.case(a).unwrap().stage(), CaseStage::Enrolled);
        assert_eq!(
            book.enroll_case("", "h", "c", SimTime::ZERO),
            Err(RecordError::EmptyEnrollment)
        );
    }

    #[test]
    fn nurse_submission_schedules_validation_after_1440_s() {
        let mut f = fixture();
        let id = f
            .book
            .submit_contribution(
                &mut f.engine,
                f.case,
                &f.nurse,
                Section::TreatmentPlan,
                "plan v1",
            )
            .unwrap();
        assert_eq!(
            f.book.contribution(id).unwrap().status,
            ContributionStatus::Pending
        );
        let ev = f.engine.step().unwrap();
        assert_eq!(ev.kind, EventKind::ValidationCompleted);
        assert_eq!(ev.time, SimTime::from_secs(1440));
        assert_eq!(ev.target, Target::Contribution(id));
    }

    #[test]
    fn patient_cannot_write() {
        let mut f = fixture();
        let err = f
            .book
            .submit_contribution(
                &mut f.engine,
                f.case,
                &"patient".into(),
                Section::LabResults,
                "x",
            )
            .unwrap_err();
        assert!(matches!(
            err,
            RecordError::AccessDenied {
                right: Right::Write,
                ..
            }
        ));
        assert!(matches!(
            f.book.submit_contribution(
                &mut f.engine,
                CaseId(99),
                &f.nurse,
                Section::TreatmentPlan,
                "x"
            ),
            Err(RecordError::UnknownCase(_))
        ));
    }

    #[test]
    fn zero_validation_latency_fires_at_submission_time() {
        let mut book = CaseBook::new(Latencies {
            feedback: SimDuration::from_secs(15),
            validation: SimDuration::ZERO,
        });
        let case = book.enroll_case("p", "", "", SimTime::ZERO).unwrap();
        let cm = SubjectId::new("cm");
        book.assign_manager(case, &cm, SimTime::ZERO).unwrap();
        let mut engine = Engine::new();
        engine
            .schedule(SimTime::from_secs(100), EventKind::SyncTick, Target::None)
            .unwrap();
        engine.step();
        book.submit_contribution(&mut engine, case, &cm, Section::ProgressSummary, "s")
            .unwrap();
        assert_eq!(engine.step().unwrap().time, SimTime::from_secs(100));
    }

    #[test]
    fn validation_outcomes() {
        let mut f = fixture();
        let ok = f
            .book
            .submit_contribution(&mut f.engine, f.case, &f.nurse, Section::TreatmentPlan, "a")
            .unwrap();
        let bad = f
            .book
            .submit_contribution(&mut f.engine, f.case, &f.nurse, Section::TreatmentPlan, "b")
            .unwrap();
        f.engine.run_until(SimTime::from_secs(1440)).unwrap();

        assert_eq!(
            f.book.validate(&mut f.engine, ok, &f.manager, Verdict::Ok),
            Ok(ContributionStatus::Approved)
        );
        assert_eq!(
            f.book
                .validate(&mut f.engine, bad, &f.manager, Verdict::Irregular),
            Ok(ContributionStatus::Flagged)
        );
        let note = f.engine.step().unwrap();
        assert_eq!(note.kind, EventKind::RequestDelivered);
        assert_eq!(note.time, SimTime::from_secs(1455));
        assert_eq!(note.target, Target::Contribution(bad));

        assert_eq!(
            f.book.validate(&mut f.engine, ok, &f.manager, Verdict::Ok),
            Err(RecordError::NotPending(ok))
        );
    }

    #[test]
    fn only_manager_validates_and_merges() {
        let mut f = fixture();
        let id = f
            .book
            .submit_contribution(&mut f.engine, f.case, &f.nurse, Section::TreatmentPlan, "a")
            .unwrap();
        assert!(matches!(
            f.book.validate(&mut f.engine, id, &f.nurse, Verdict::Ok),
            Err(RecordError::NotCaseManager { .. })
        ));
        f.book
            .validate(&mut f.engine, id, &f.manager, Verdict::Ok)
            .unwrap();
        assert!(matches!(
            f.book.approve_and_merge(&mut f.engine, id, &f.nurse),
            Err(RecordError::NotCaseManager { .. })
        ));
    }

    #[test]
    fn resubmission_cycles() {
        let mut f = fixture();
        let id = f
            .book
            .submit_contribution(&mut f.engine, f.case, &f.nurse, Section::TreatmentPlan, "a")
            .unwrap();
        for expected_revision in 1..=2 {
            f.book
                .validate(&mut f.engine, id, &f.manager, Verdict::Irregular)
                .unwrap();
            assert!(matches!(
                f.book.resubmit(&mut f.engine, id, &f.manager, "x"),
                Err(RecordError::NotAuthor { .. })
            ));
            assert_eq!(
                f.book.resubmit(&mut f.engine, id, &f.nurse, "fixed"),
                Ok(expected_revision)
            );
            assert_eq!(
                f.book.contribution(id).unwrap().status,
                ContributionStatus::Pending
            );
        }
        f.book
            .validate(&mut f.engine, id, &f.manager, Verdict::Ok)
            .unwrap();
        f.book
            .approve_and_merge(&mut f.engine, id, &f.manager)
            .unwrap();
        assert_eq!(
            f.book.resubmit(&mut f.engine, id, &f.nurse, "late"),
            Err(RecordError::NotFlagged(id))
        );
    }

    #[test]
    fn merge_bumps_version_and_exposes_content() {
        let mut f = fixture();
        let id = f
            .book
            .submit_contribution(
                &mut f.engine,
                f.case,
                &f.nurse,
                Section::TreatmentPlan,
                "plan v1",
            )
            .unwrap();
        assert_eq!(
            f.book.approve_and_merge(&mut f.engine, id, &f.manager),
            Err(RecordError::NotApproved(id))
        );
        let patient = SubjectId::new("patient");
        assert_eq!(
            f.book
                .read_section(f.case, &patient, Section::TreatmentPlan),
            Ok(None)
        );

        f.book
            .validate(&mut f.engine, id, &f.manager, Verdict::Ok)
            .unwrap();
        assert_eq!(
            f.book
                .read_section(f.case, &patient, Section::TreatmentPlan),
            Ok(None)
        );
        assert_eq!(
            f.book.approve_and_merge(&mut f.engine, id, &f.manager),
            Ok(1)
        );
        assert_eq!(
            f.book
                .read_section(f.case, &patient, Section::TreatmentPlan),
            Ok(Some("plan v1"))
        );
        assert_eq!(f.book.case(f.case).unwrap().merged_log(), &[id]);
    }

    #[test]
    fn grant_then_read() {
        let mut f = fixture();
        let ps = SubjectId::new("ps-1");
        assert!(f
            .book
            .read_section(f.case, &ps, Section::LabResults)
            .is_err());
        f.book
            .grant(
                f.case,
                &f.manager,
                &ps,
                Section::LabResults,
                Right::Read,
                SimTime::ZERO,
            )
            .unwrap();
        assert_eq!(
            f.book.read_section(f.case, &ps, Section::LabResults),
            Ok(None)
        );
        assert!(matches!(
            f.book.grant(
                f.case,
                &f.nurse,
                &ps,
                Section::LabResults,
                Right::Read,
                SimTime::ZERO
            ),
            Err(RecordError::NotCaseManager { .. })
        ));
        assert_eq!(
            f.book.grant(
                f.case,
                &f.manager,
                &ps,
                Section::TreatmentPlan,
                Right::Write,
                SimTime::ZERO
            ),
            Err(RecordError::WriteRequiresCoreTeam(ps))
        );
    }

    #[test]
    fn lifecycle_edges() {
        use ContributionStatus::*;
        let all = [Pending, Flagged, Approved, Merged];
        let legal: Vec<_> = all
            .iter()
            .flat_map(|a| all.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_become(*b))
            .collect();
        assert_eq!(
            legal,
            vec![
                (Pending, Flagged),
                (Pending, Approved),
                (Flagged, Pending),
                (Approved, Merged)
            ]
        );
    }
}
