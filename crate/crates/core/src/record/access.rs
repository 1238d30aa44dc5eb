//! Discretionary access control over record sections.
//!
//! The case manager owns the policy and is the only subject who may grant.
//! Anything not explicitly granted is denied.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::SubjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    CaseManager,
    Nurse,
    LabTechnician,
    AlliedHealth,
    Patient,
    Caretaker,
    Administrator,
    PsychoSocial,
}

impl Role {
    pub const ALL: [Role; 8] = [
        Role::CaseManager,
        Role::Nurse,
        Role::LabTechnician,
        Role::AlliedHealth,
        Role::Patient,
        Role::Caretaker,
        Role::Administrator,
        Role::PsychoSocial,
    ];

    /// The section a collaborator in this role writes to, if any.
    pub fn write_section(self) -> Option<Section> {
        match self {
            Role::CaseManager => Some(Section::ProgressSummary),
            Role::Nurse => Some(Section::TreatmentPlan),
            Role::LabTechnician => Some(Section::LabResults),
            Role::AlliedHealth => Some(Section::Appointments),
            Role::PsychoSocial => Some(Section::CounsellingNotes),
            Role::Patient | Role::Caretaker | Role::Administrator => None,
        }
    }

    /// Roles that may be selected into a core team as members.
    pub fn is_collaborator(self) -> bool {
        matches!(
            self,
            Role::Nurse | Role::LabTechnician | Role::AlliedHealth | Role::PsychoSocial
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::CaseManager => "case_manager",
            Role::Nurse => "nurse",
            Role::LabTechnician => "lab_technician",
            Role::AlliedHealth => "allied_health",
            Role::Patient => "patient",
            Role::Caretaker => "caretaker",
            Role::Administrator => "administrator",
            Role::PsychoSocial => "psycho_social",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    LabResults,
    TreatmentPlan,
    TeamDetails,
    Appointments,
    ProgressSummary,
    CounsellingNotes,
    FullRecord,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::LabResults,
        Section::TreatmentPlan,
        Section::TeamDetails,
        Section::Appointments,
        Section::ProgressSummary,
        Section::CounsellingNotes,
        Section::FullRecord,
    ];

    /// The four sections patients and caretakers can view.
    pub const CARE_VIEW: [Section; 4] = [
        Section::LabResults,
        Section::TreatmentPlan,
        Section::TeamDetails,
        Section::Appointments,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Right {
    Read,
    Write,
}

/// Default rights table for a role.
///
/// Writes are only ever issued to core-team members; see
/// [`AccessPolicy::apply_role_defaults`].
pub fn default_rights(role: Role) -> BTreeSet<(Section, Right)> {
    let mut rights = BTreeSet::new();
    match role {
        Role::CaseManager => {
            for s in Section::ALL {
                rights.insert((s, Right::Read));
                rights.insert((s, Right::Write));
            }
        }
        Role::Nurse | Role::LabTechnician | Role::AlliedHealth => {
            rights.extend(Section::CARE_VIEW.map(|s| (s, Right::Read)));
            if let Some(s) = role.write_section() {
                rights.insert((s, Right::Write));
            }
        }
        Role::Patient | Role::Caretaker => {
            rights.extend(Section::CARE_VIEW.map(|s| (s, Right::Read)));
        }
        Role::Administrator => {
            rights.insert((Section::ProgressSummary, Right::Read));
            rights.insert((Section::TeamDetails, Right::Read));
        }
        Role::PsychoSocial => {
            rights.insert((Section::ProgressSummary, Right::Read));
            rights.insert((Section::CounsellingNotes, Right::Write));
        }
    }
    rights
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrantRefusal {
    NotOwner,
    WriteRequiresCoreTeam,
}

/// Per-case grants keyed by subject identity.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AccessPolicy {
    granted_by: Option<SubjectId>,
    core_team: BTreeSet<SubjectId>,
    roles: BTreeMap<SubjectId, Role>,
    grants: BTreeMap<SubjectId, BTreeSet<(Section, Right)>>,
}

impl AccessPolicy {
    pub fn owner(&self) -> Option<&SubjectId> {
        self.granted_by.as_ref()
    }

    pub fn is_owner(&self, subject: &SubjectId) -> bool {
        self.granted_by.as_ref() == Some(subject)
    }

    pub fn is_core_member(&self, subject: &SubjectId) -> bool {
        self.is_owner(subject) || self.core_team.contains(subject)
    }

    pub fn role_of(&self, subject: &SubjectId) -> Option<Role> {
        self.roles.get(subject).copied()
    }

    pub fn allows(&self, subject: &SubjectId, section: Section, right: Right) -> bool {
        self.grants
            .get(subject)
            .is_some_and(|set| set.contains(&(section, right)))
    }

    pub fn rights_of(&self, subject: &SubjectId) -> BTreeSet<(Section, Right)> {
        self.grants.get(subject).cloned().unwrap_or_default()
    }

    /// Subjects holding `right` on `section`, in identity order.
    pub fn holders(&self, section: Section, right: Right) -> impl Iterator<Item = &SubjectId> {
        self.grants
            .iter()
            .filter(move |(_, set)| set.contains(&(section, right)))
            .map(|(s, _)| s)
    }

    pub(crate) fn set_owner(&mut self, manager: SubjectId) {
        self.roles.insert(manager.clone(), Role::CaseManager);
        self.grants
            .insert(manager.clone(), default_rights(Role::CaseManager));
        self.granted_by = Some(manager);
    }

    pub(crate) fn add_core_member(&mut self, subject: SubjectId, role: Role) {
        self.roles.insert(subject.clone(), role);
        self.core_team.insert(subject);
    }

    pub(crate) fn register(&mut self, subject: SubjectId, role: Role) {
        self.roles.entry(subject).or_insert(role);
    }

    pub(crate) fn grant(
        &mut self,
        manager: &SubjectId,
        subject: &SubjectId,
        section: Section,
        right: Right,
    ) -> Result<(), GrantRefusal> {
        if !self.is_owner(manager) {
            return Err(GrantRefusal::NotOwner);
        }
        if right == Right::Write && !self.is_core_member(subject) {
            return Err(GrantRefusal::WriteRequiresCoreTeam);
        }
        self.grants
            .entry(subject.clone())
            .or_default()
            .insert((section, right));
        Ok(())
    }

    /// Grants the role's default rights. Write rights are withheld from
    /// subjects outside the core team. Returns the rights actually granted.
    pub(crate) fn apply_role_defaults(
        &mut self,
        manager: &SubjectId,
        subject: &SubjectId,
        role: Role,
    ) -> Result<Vec<(Section, Right)>, GrantRefusal> {
        if !self.is_owner(manager) {
            return Err(GrantRefusal::NotOwner);
        }
        self.register(subject.clone(), role);
        let core = self.is_core_member(subject);
        let mut applied = Vec::new();
        for (section, right) in default_rights(role) {
            if right == Right::Write && !core {
                continue;
            }
            self.grant(manager, subject, section, right)?;
            applied.push((section, right));
        }
        Ok(applied)
    }

    /// Every Write grant belongs to a core-team member.
    pub fn writes_are_core_only(&self) -> bool {
        self.grants.iter().all(|(subject, set)| {
            set.iter().all(|(_, r)| *r == Right::Read) || self.is_core_member(subject)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn care_view_roles_read_exactly_four_sections() {
        for role in [Role::Patient, Role::Caretaker] {
            let rights = default_rights(role);
            assert_eq!(rights.len(), 4);
            for s in Section::CARE_VIEW {
                assert!(rights.contains(&(s, Right::Read)));
            }
        }
    }

    #[test]
    fn write_sections_are_distinct_for_members() {
        let mut seen = BTreeSet::new();
        for role in Role::ALL.into_iter().filter(|r| r.is_collaborator()) {
            assert!(seen.insert(role.write_section().unwrap()));
        }
    }

    #[test]
    fn non_owner_cannot_grant() {
        let mut p = AccessPolicy::default();
        p.set_owner("cm".into());
        assert_eq!(
            p.grant(
                &"nurse".into(),
                &"x".into(),
                Section::LabResults,
                Right::Read
            ),
            Err(GrantRefusal::NotOwner)
        );
    }

    #[test]
    fn write_requires_core_team() {
        let mut p = AccessPolicy::default();
        p.set_owner("cm".into());
        assert_eq!(
            p.grant(
                &"cm".into(),
                &"outsider".into(),
                Section::TreatmentPlan,
                Right::Write
            ),
            Err(GrantRefusal::WriteRequiresCoreTeam)
        );
        p.add_core_member("n1".into(), Role::Nurse);
        assert!(p
            .grant(
                &"cm".into(),
                &"n1".into(),
                Section::TreatmentPlan,
                Right::Write
            )
            .is_ok());
        assert!(p.writes_are_core_only());
    }

    #[test]
    fn psycho_social_outside_team_gets_reads_only() {
        let mut p = AccessPolicy::default();
        p.set_owner("cm".into());
        let applied = p
            .apply_role_defaults(&"cm".into(), &"ps".into(), Role::PsychoSocial)
            .unwrap();
        assert_eq!(applied, vec![(Section::ProgressSummary, Right::Read)]);
    }
}
