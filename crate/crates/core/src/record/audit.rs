//! Append-only transition log.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ids::{CaseId, ContributionId, SubjectId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Enroll,
    AssignManager,
    AddMember,
    Grant,
    Submit,
    Approve,
    Flag,
    Resubmit,
    Merge,
    Stage,
    ResourceGrant,
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Seconds since simulation start.
    pub time: f64,
    pub case_id: CaseId,
    pub contrib_id: Option<ContributionId>,
    pub actor: Option<SubjectId>,
    pub action: Action,
    pub old_status: Option<String>,
    pub new_status: Option<String>,
    pub version: u64,
}

#[derive(Debug, Clone, Default)]
pub struct AuditTrail {
    entries: Vec<AuditEntry>,
}

impl AuditTrail {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn record(
        &mut self,
        time: SimTime,
        case_id: CaseId,
        contrib_id: Option<ContributionId>,
        actor: Option<&SubjectId>,
        action: Action,
        old_status: Option<String>,
        new_status: Option<String>,
        version: u64,
    ) {
        self.entries.push(AuditEntry {
            time: time.as_secs_f64(),
            case_id,
            contrib_id,
            actor: actor.cloned(),
            action,
            old_status,
            new_status,
            version,
        });
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn for_case(&self, case: CaseId) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(move |e| e.case_id == case)
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
