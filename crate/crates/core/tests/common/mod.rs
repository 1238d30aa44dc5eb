#![allow(dead_code)]

use std::collections::BTreeMap;

use caseflow::ids::{CaseId, ContributionId, SubjectId};
use caseflow::kernel::Engine;
use caseflow::record::{
    Action, CaseBook, ContributionStatus, Latencies, RecordError, Right, Role, Section, Verdict,
};
use caseflow::time::SimTime;

/// The declared default table, written out independently of the library.
pub fn declared_allows(role: Role, in_core: bool, section: Section, right: Right) -> bool {
    use Section::*;
    let care_view = matches!(
        section,
        LabResults | TreatmentPlan | TeamDetails | Appointments
    );
    match (role, right) {
        (Role::CaseManager, _) => true,
        (Role::Nurse, Right::Write) => in_core && section == TreatmentPlan,
        (Role::LabTechnician, Right::Write) => in_core && section == LabResults,
        (Role::AlliedHealth, Right::Write) => in_core && section == Appointments,
        (Role::Nurse | Role::LabTechnician | Role::AlliedHealth, Right::Read) => care_view,
        (Role::Patient | Role::Caretaker, Right::Read) => care_view,
        (Role::Patient | Role::Caretaker, Right::Write) => false,
        (Role::Administrator, Right::Read) => matches!(section, ProgressSummary | TeamDetails),
        (Role::Administrator, Right::Write) => false,
        (Role::PsychoSocial, Right::Read) => section == ProgressSummary,
        (Role::PsychoSocial, Right::Write) => in_core && section == CounsellingNotes,
    }
}

pub const SECTIONS: [Section; 7] = [
    Section::LabResults,
    Section::TreatmentPlan,
    Section::TeamDetails,
    Section::Appointments,
    Section::ProgressSummary,
    Section::CounsellingNotes,
    Section::FullRecord,
];

/// Subjects of the lifecycle fixture: (id, role, core member).
pub const CAST: [(&str, Role, bool); 6] = [
    ("cm", Role::CaseManager, true),
    ("cm-other", Role::CaseManager, false),
    ("nurse", Role::Nurse, true),
    ("lab", Role::LabTechnician, true),
    ("patient", Role::Patient, false),
    ("admin", Role::Administrator, false),
];

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Submit {
        who: usize,
        section: usize,
    },
    Validate {
        contrib: usize,
        who: usize,
        ok: bool,
    },
    Resubmit {
        contrib: usize,
        who: usize,
    },
    Merge {
        contrib: usize,
        who: usize,
    },
    Read {
        who: usize,
        section: usize,
    },
}

impl Op {
    /// Maps raw numbers onto an operation; lets both proptest and a plain RNG
    /// drive the model.
    pub fn from_raw(kind: u8, a: u8, b: u8, flag: bool) -> Op {
        let who = a as usize % CAST.len();
        match kind % 5 {
            0 => Op::Submit {
                who,
                section: b as usize % SECTIONS.len(),
            },
            1 => Op::Validate {
                contrib: b as usize,
                who,
                ok: flag,
            },
            2 => Op::Resubmit {
                contrib: b as usize,
                who,
            },
            3 => Op::Merge {
                contrib: b as usize,
                who,
            },
            _ => Op::Read {
                who,
                section: b as usize % SECTIONS.len(),
            },
        }
    }
}

#[derive(Debug, Clone)]
struct ModelContrib {
    author: usize,
    section: Section,
    payload: String,
    status: ContributionStatus,
}

/// Replays `ops` against a fresh case and a hand-written model of the
/// lifecycle, checking every outcome and the history invariants after each
/// step. Returns the number of merges.
pub fn check_lifecycle(ops: &[Op]) -> Result<usize, String> {
    let mut engine = Engine::new();
    let mut book = CaseBook::new(Latencies::default());
    let now = SimTime::ZERO;
    let case = book
        .enroll_case("patient P1", "", "caretaker C1", now)
        .unwrap();
    let id = |i: usize| SubjectId::new(CAST[i].0);
    book.assign_manager(case, &id(0), now).unwrap();
    for (i, (_, role, core)) in CAST.iter().enumerate().skip(1) {
        if *role == Role::CaseManager {
            continue;
        }
        if *core {
            book.add_core_member(case, &id(0), &id(i), *role, now)
                .unwrap();
        } else {
            book.add_stakeholder(case, &id(0), &id(i), *role, now)
                .unwrap();
        }
    }

    let mut model: Vec<ModelContrib> = Vec::new();
    let mut merged: Vec<ContributionId> = Vec::new();
    let mut content: BTreeMap<Section, String> = BTreeMap::new();

    for (step, op) in ops.iter().enumerate() {
        let ctx = |msg: String| format!("step {step} {op:?}: {msg}");
        match *op {
            Op::Submit { who, section } => {
                let section = SECTIONS[section];
                let (_, role, core) = CAST[who];
                let payload = format!("payload-{step}");
                let got = book.submit_contribution(&mut engine, case, &id(who), section, &payload);
                let allowed = declared_allows(role, core, section, Right::Write) && who != 1;
                match (got, allowed) {
                    (Ok(cid), true) => {
                        if cid.index() != model.len() {
                            return Err(ctx(format!("unexpected id {cid}")));
                        }
                        model.push(ModelContrib {
                            author: who,
                            section,
                            payload,
                            status: ContributionStatus::Pending,
                        });
                    }
                    (Err(RecordError::AccessDenied { .. }), false) => {}
                    (other, _) => return Err(ctx(format!("got {other:?}, allowed={allowed}"))),
                }
            }
            Op::Validate { contrib, who, ok } => {
                let Some(i) = pick(contrib, model.len()) else {
                    continue;
                };
                let cid = ContributionId(i as u64);
                let verdict = if ok { Verdict::Ok } else { Verdict::Irregular };
                let got = book.validate(&mut engine, cid, &id(who), verdict);
                let expect = if model[i].status != ContributionStatus::Pending {
                    Err("NotPending")
                } else if who != 0 {
                    Err("NotCaseManager")
                } else if ok {
                    Ok(ContributionStatus::Approved)
                } else {
                    Ok(ContributionStatus::Flagged)
                };
                match (&got, expect) {
                    (Ok(s), Ok(e)) if *s == e => model[i].status = e,
                    (Err(RecordError::NotPending(_)), Err("NotPending")) => {}
                    (Err(RecordError::NotCaseManager { .. }), Err("NotCaseManager")) => {}
                    _ => return Err(ctx(format!("got {got:?}, expected {expect:?}"))),
                }
            }
            Op::Resubmit { contrib, who } => {
                let Some(i) = pick(contrib, model.len()) else {
                    continue;
                };
                let cid = ContributionId(i as u64);
                let payload = format!("payload-{step}");
                let got = book.resubmit(&mut engine, cid, &id(who), &payload);
                let expect = if model[i].status != ContributionStatus::Flagged {
                    Err("NotFlagged")
                } else if model[i].author != who {
                    Err("NotAuthor")
                } else {
                    Ok(())
                };
                match (&got, expect) {
                    (Ok(_), Ok(())) => {
                        model[i].status = ContributionStatus::Pending;
                        model[i].payload = payload;
                    }
                    (Err(RecordError::NotFlagged(_)), Err("NotFlagged")) => {}
                    (Err(RecordError::NotAuthor { .. }), Err("NotAuthor")) => {}
                    _ => return Err(ctx(format!("got {got:?}, expected {expect:?}"))),
                }
            }
            Op::Merge { contrib, who } => {
                let Some(i) = pick(contrib, model.len()) else {
                    continue;
                };
                let cid = ContributionId(i as u64);
                let got = book.approve_and_merge(&mut engine, cid, &id(who));
                let expect = if model[i].status != ContributionStatus::Approved {
                    Err("NotApproved")
                } else if who != 0 {
                    Err("NotCaseManager")
                } else {
                    Ok(merged.len() as u64 + 1)
                };
                match (&got, expect) {
                    (Ok(v), Ok(e)) if *v == e => {
                        model[i].status = ContributionStatus::Merged;
                        merged.push(cid);
                        content.insert(model[i].section, model[i].payload.clone());
                    }
                    (Err(RecordError::NotApproved(_)), Err("NotApproved")) => {}
                    (Err(RecordError::NotCaseManager { .. }), Err("NotCaseManager")) => {}
                    _ => return Err(ctx(format!("got {got:?}, expected {expect:?}"))),
                }
            }
            Op::Read { who, section } => {
                let section = SECTIONS[section];
                let (_, role, core) = CAST[who];
                let allowed = declared_allows(role, core, section, Right::Read) && who != 1;
                let got = book.read_section(case, &id(who), section);
                match (got, allowed) {
                    (Ok(text), true) => {
                        if text != content.get(&section).map(String::as_str) {
                            return Err(ctx(format!(
                                "read {text:?}, merged content {:?}",
                                content.get(&section)
                            )));
                        }
                    }
                    (Err(RecordError::AccessDenied { .. }), false) => {}
                    (other, _) => return Err(ctx(format!("got {other:?}, allowed={allowed}"))),
                }
            }
        }

        let record = book.case(case).unwrap();
        if record.merged_log() != merged.as_slice() {
            return Err(ctx("merged log diverged from model".into()));
        }
        if record.version() != merged.len() as u64 {
            return Err(ctx("version differs from merged log length".into()));
        }
        for c in book.contributions() {
            if c.status != model[c.contrib_id.index()].status {
                return Err(ctx(format!("{} status {:?}", c.contrib_id, c.status)));
            }
        }
    }
    replay_audit(&book, case)?;
    Ok(merged.len())
}

fn pick(raw: usize, len: usize) -> Option<usize> {
    (len > 0).then(|| raw % len)
}

/// Walks the audit trail: each merge follows an approval, each approval a
/// pending state, and flagged work only moves on through resubmission.
pub fn replay_audit(book: &CaseBook, case: CaseId) -> Result<(), String> {
    let mut state: BTreeMap<ContributionId, Action> = BTreeMap::new();
    for e in book.audit().for_case(case) {
        let Some(cid) = e.contrib_id else { continue };
        let prev = state.get(&cid).copied();
        let legal = match e.action {
            Action::Submit => prev.is_none(),
            Action::Approve | Action::Flag => {
                matches!(prev, Some(Action::Submit | Action::Resubmit))
            }
            Action::Resubmit => prev == Some(Action::Flag),
            Action::Merge => prev == Some(Action::Approve),
            _ => true,
        };
        if !legal {
            return Err(format!("{cid}: {:?} after {prev:?}", e.action));
        }
        state.insert(cid, e.action);
    }
    Ok(())
}
