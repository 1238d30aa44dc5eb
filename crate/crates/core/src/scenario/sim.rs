//! Event handlers that drive cases through enrollment, stage activities and
//! contribution review under one coordination strategy.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::collaboration::{
    advance_stage, establish_core_team, CaseStage, CollabError, CoreTeam, RequestLedger,
};
use crate::ids::{CaseId, ContributionId, SubjectId};
use crate::kernel::{
    detect_conflict, Booking, Calendar, ConflictKind, ConflictReport, Engine, Event, EventId,
    EventKind, KernelError, Resolution, Target,
};
use crate::record::{CaseBook, ContributionStatus, RecordError, Right, Role, Section, Verdict};
use crate::resources::{detect_bottleneck, RequestOutcome, ResourceError, ResourceId, ResourceSet};
use crate::time::{SimDuration, SimTime};

use super::config::{ArrivalProcess, ConfigError, ScenarioConfig, Strategy};
use super::metrics::{durations_of, summarize, DelayKind, DelaySample, RunReport};

#[derive(Debug, Error)]
pub enum Fault {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Collaboration(#[from] CollabError),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Inconsistent(String),
}

/// A module error that aborted a run, with the clock and case it hit.
#[derive(Debug, Error)]
#[error("t={time} s{}: {fault}", .case.map(|c| format!(" ({c})")).unwrap_or_default())]
pub struct SimError {
    pub time: SimTime,
    pub case: Option<CaseId>,
    #[source]
    pub fault: Fault,
}

/// A contribution travelling from its author to the repository.
#[derive(Debug, Clone)]
struct Draft {
    case: CaseId,
    author: SubjectId,
    section: Section,
    payload: String,
    authored_at: SimTime,
    revises: Option<ContributionId>,
}

struct CaseState {
    /// Stage and dwell draws.
    flow_rng: ChaCha8Rng,
    /// Team selection, authorship and review verdicts.
    collab_rng: ChaCha8Rng,
    team: CoreTeam,
    dwell: SimDuration,
    first_diagnosis: Option<SimTime>,
    evaluated: bool,
    treatment_requested: Option<SimTime>,
}

struct ContribTimes {
    authored_at: SimTime,
    merged_at: Option<SimTime>,
}

/// Everything a finished run produced.
pub struct RunOutcome {
    pub report: RunReport,
    pub samples: Vec<DelaySample>,
    pub book: CaseBook,
    pub requests: RequestLedger,
    pub resources: ResourceSet,
    pub conflicts: Vec<ConflictReport>,
    /// Holds the dispatched-event trace when tracing was enabled.
    pub engine: Engine,
}

fn case_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Arrival offsets: explicit, or a Poisson stream on RNG stream 0 cut at the
/// horizon.
pub fn arrival_times(config: &ScenarioConfig) -> Vec<SimTime> {
    match &config.arrival {
        ArrivalProcess::List { times } => {
            let mut t: Vec<SimTime> = times.iter().map(|d| SimTime::ZERO + *d).collect();
            t.sort();
            t
        }
        ArrivalProcess::Poisson { rate } => {
            let mut out = Vec::new();
            if *rate <= 0.0 {
                return out;
            }
            let mut rng = case_rng(config.seed, 0);
            let horizon = config.horizon.as_secs_f64();
            let mut t = 0.0;
            loop {
                let u: f64 = rng.gen();
                t += -(1.0 - u).ln() / rate;
                if t >= horizon {
                    return out;
                }
                out.push(SimTime::from_secs_f64(t).expect("finite arrival time"));
            }
        }
    }
}

/// One run, advanced an event at a time.
pub struct Simulation {
    config: ScenarioConfig,
    engine: Engine,
    book: CaseBook,
    requests: RequestLedger,
    resources: ResourceSet,
    stage_resource: BTreeMap<CaseStage, ResourceId>,
    calendar: Calendar,
    cases: Vec<CaseState>,
    contribs: Vec<ContribTimes>,
    in_flight: HashMap<EventId, Draft>,
    pending_sync: Vec<ContributionId>,
    samples: Vec<DelaySample>,
    conflicts: Vec<ConflictReport>,
    arrivals_left: usize,
    open_cases: usize,
    open_contribs: usize,
    flags: usize,
    merges: usize,
    updates_delivered: usize,
    reads_served: u64,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        Self::build(config, false)
    }

    /// Like [`Simulation::new`], keeping every dispatched event.
    pub fn traced(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        Self::build(config, true)
    }

    fn build(config: &ScenarioConfig, trace: bool) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut engine = Engine::new();
        if trace {
            engine = engine.with_trace();
        }
        let mut resources = ResourceSet::new();
        let mut stage_resource = BTreeMap::new();
        for spec in &config.resources {
            let id = resources
                .add(&spec.name, spec.kind, spec.capacity)
                .map_err(|e| ConfigError::Validation {
                    key: format!("resources.{}", spec.name),
                    reason: e.to_string(),
                })?;
            if let Some(stage) = spec.stage {
                stage_resource.insert(stage, id);
            }
        }
        let arrivals = arrival_times(config);
        for (i, at) in arrivals.iter().enumerate() {
            engine
                .schedule(*at, EventKind::CaseArrival, Target::Arrival(i as u64))
                .expect("arrivals are in the future");
        }
        if config.strategy == Strategy::Baseline {
            engine
                .schedule(SimTime::ZERO, EventKind::SyncTick, Target::None)
                .expect("clock starts at zero");
        }
        Ok(Simulation {
            book: CaseBook::new(config.latencies),
            requests: RequestLedger::new(config.latencies.feedback, config.response_delay),
            config: config.clone(),
            engine,
            resources,
            stage_resource,
            calendar: Calendar::new(),
            cases: Vec::new(),
            contribs: Vec::new(),
            in_flight: HashMap::new(),
            pending_sync: Vec::new(),
            samples: Vec::new(),
            conflicts: Vec::new(),
            arrivals_left: arrivals.len(),
            open_cases: 0,
            open_contribs: 0,
            flags: 0,
            merges: 0,
            updates_delivered: 0,
            reads_served: 0,
        })
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn book(&self) -> &CaseBook {
        &self.book
    }

    pub fn resources(&self) -> &ResourceSet {
        &self.resources
    }

    pub fn requests(&self) -> &RequestLedger {
        &self.requests
    }

    pub fn samples(&self) -> &[DelaySample] {
        &self.samples
    }

    pub fn conflicts(&self) -> &[ConflictReport] {
        &self.conflicts
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    pub fn team(&self, case: CaseId) -> Option<&CoreTeam> {
        self.cases.get(case.index()).map(|c| &c.team)
    }

    /// Dispatches the next event. `Ok(None)` once the queue has drained.
    pub fn step(&mut self) -> Result<Option<Event>, SimError> {
        let Some(event) = self.engine.step() else {
            return Ok(None);
        };
        if let Err(fault) = self.dispatch(&event) {
            return Err(SimError {
                time: event.time,
                case: self.case_of(&event),
                fault,
            });
        }
        Ok(Some(event))
    }

    /// Steps until the queue drains: all arrivals enrolled, all cases closed
    /// and every merged update delivered.
    pub fn run(mut self) -> Result<RunOutcome, SimError> {
        while self.step()?.is_some() {}
        if self.open_cases > 0 || self.open_contribs > 0 {
            return Err(SimError {
                time: self.now(),
                case: None,
                fault: Fault::Inconsistent(format!(
                    "queue drained with {} open cases and {} open contributions",
                    self.open_cases, self.open_contribs
                )),
            });
        }
        Ok(self.finish())
    }

    fn case_of(&self, event: &Event) -> Option<CaseId> {
        match event.target {
            Target::Case(c) => Some(c),
            Target::Contribution(id) | Target::Update(id) => {
                self.book.contribution(id).ok().map(|c| c.case_id)
            }
            Target::Request(id) => self.requests.get(id).ok().map(|r| r.case_id),
            Target::Arrival(i) => Some(CaseId(i)),
            Target::Grant(_) | Target::None => self.in_flight.get(&event.id).map(|d| d.case),
        }
    }

    fn dispatch(&mut self, event: &Event) -> Result<(), Fault> {
        match (event.kind, event.target) {
            (EventKind::CaseArrival, Target::Arrival(_)) => self.on_arrival(),
            (EventKind::AppointmentStart, Target::Case(_)) => Ok(()),
            (EventKind::AppointmentEnd, Target::Case(case)) => self.on_activity_end(case),
            (EventKind::ResourceFreed, Target::Grant(grant)) => {
                for g in self.resources.release(&mut self.engine, grant)? {
                    let rid = self.resources.owner_of(g.grant)?;
                    self.activity_started(g.holder, Some(rid))?;
                }
                Ok(())
            }
            (EventKind::ContributionSubmitted, Target::Case(_)) => self.on_submitted(event.id),
            (EventKind::ValidationCompleted, Target::Contribution(id)) => self.on_validated(id),
            (EventKind::MergeCompleted, Target::Contribution(id)) => self.on_merged(id),
            (EventKind::RequestDelivered, Target::Request(id)) => {
                Ok(self.requests.deliver(&mut self.engine, id)?)
            }
            (EventKind::RequestAccepted, Target::Request(id)) => {
                Ok(self.requests.accept(&self.engine, id)?)
            }
            (EventKind::RequestDelivered, Target::Contribution(id)) => self.on_flag_notice(id),
            (EventKind::RequestDelivered, Target::Update(id)) => self.deliver_update(id),
            (EventKind::SyncTick, Target::None) => self.on_sync_tick(),
            (kind, target) => Err(Fault::Inconsistent(format!(
                "unexpected {kind} for {target}"
            ))),
        }
    }

    fn on_arrival(&mut self) -> Result<(), Fault> {
        let now = self.now();
        let index = self.book.cases().len() as u64;
        let case = self.book.enroll_case(
            &format!("patient P{index:05}"),
            "referred for multidisciplinary review",
            &format!("caretaker of P{index:05}"),
            now,
        )?;
        self.arrivals_left -= 1;
        self.open_cases += 1;

        let seed = self.config.seed;
        let mut flow_rng = case_rng(seed, 2 * index + 1);
        let mut collab_rng = case_rng(seed, 2 * index + 2);
        let team = establish_core_team(
            &mut self.book,
            case,
            &self.config.pool,
            self.config.core_fraction,
            &mut collab_rng,
            now,
        )?;

        let leader = team.leader.clone();
        self.book.add_stakeholder(
            case,
            &leader,
            &SubjectId(format!("patient-{index}")),
            Role::Patient,
            now,
        )?;
        self.book.add_stakeholder(
            case,
            &leader,
            &SubjectId(format!("caretaker-{index}")),
            Role::Caretaker,
            now,
        )?;
        let outsiders: Vec<(SubjectId, Role)> = self
            .config
            .pool
            .iter()
            .filter(|(s, r)| {
                matches!(r, Role::Administrator | Role::PsychoSocial)
                    && *s != leader
                    && !team.members.iter().any(|(m, _)| m == s)
            })
            .cloned()
            .collect();
        for (subject, role) in outsiders {
            self.book
                .add_stakeholder(case, &leader, &subject, role, now)?;
        }

        let schedule = self.book_meeting(case, &team, now);
        self.requests
            .open_collaboration(&mut self.engine, &self.book, &team, &[schedule])?;

        let advance = advance_stage(
            &mut self.book,
            case,
            &self.config.transitions,
            &mut flow_rng,
            now,
        )?;
        self.cases.push(CaseState {
            flow_rng,
            collab_rng,
            team,
            dwell: SimDuration::ZERO,
            first_diagnosis: None,
            evaluated: false,
            treatment_requested: None,
        });
        debug_assert_eq!(self.cases.len(), self.book.cases().len());
        match advance.dwell {
            Some(dwell) => self.enter_stage(case, advance.stage, dwell),
            None => Err(Fault::Inconsistent("case closed at enrollment".into())),
        }
    }

    /// Books the case-review meeting on every team member's calendar at the
    /// earliest slot all of them have free.
    fn book_meeting(
        &mut self,
        case: CaseId,
        team: &CoreTeam,
        now: SimTime,
    ) -> (SimTime, SimDuration) {
        let duration = self.config.meeting.duration;
        let proposed = now + self.config.meeting.offset;
        let mut people = vec![team.leader.0.clone()];
        people.extend(team.members.iter().map(|(s, _)| s.0.clone()));
        let start = self
            .calendar
            .earliest_common_gap(&people, proposed, duration);
        for person in &people {
            let candidate = Booking {
                id: case.0,
                resource: person.clone(),
                start: proposed,
                duration,
            };
            if let Some(mut report) = detect_conflict(&candidate, &self.calendar) {
                report.resolution = Resolution::Rescheduled(start);
                self.conflicts.push(report);
            }
        }
        if duration > SimDuration::ZERO {
            for person in &people {
                self.calendar.commit_at(person, start, duration, case.0);
            }
        }
        (start, duration)
    }

    fn enter_stage(
        &mut self,
        case: CaseId,
        stage: CaseStage,
        dwell: SimDuration,
    ) -> Result<(), Fault> {
        let now = self.now();
        let state = &mut self.cases[case.index()];
        state.dwell = dwell;
        if stage == CaseStage::Diagnosis && state.first_diagnosis.is_none() {
            state.first_diagnosis = Some(now);
        }
        match self.stage_resource.get(&stage).copied() {
            Some(rid) => match self
                .resources
                .request(&mut self.engine, rid, 1, case, dwell)?
            {
                RequestOutcome::Granted(_) => self.activity_started(case, Some(rid)),
                RequestOutcome::Queued { conflict, .. } => {
                    self.conflicts.push(conflict);
                    Ok(())
                }
            },
            None => self.activity_started(case, None),
        }
    }

    fn activity_started(
        &mut self,
        case: CaseId,
        resource: Option<ResourceId>,
    ) -> Result<(), Fault> {
        let now = self.now();
        let stage = self.book.case(case)?.stage();
        if let Some(rid) = resource {
            let name = self.resources.pool(rid)?.name().to_owned();
            self.book.note_resource_grant(case, &name, stage, now)?;
        }
        let state = &mut self.cases[case.index()];
        if stage == CaseStage::TreatmentAssessment {
            if let Some(from) = state.treatment_requested.take() {
                self.samples.push(DelaySample {
                    case_id: case,
                    kind: DelayKind::TreatmentAccessDelay,
                    duration: now - from,
                });
            }
        }
        let dwell = state.dwell;
        self.engine.schedule_in(
            SimDuration::ZERO,
            EventKind::AppointmentStart,
            Target::Case(case),
        );
        self.engine
            .schedule_in(dwell, EventKind::AppointmentEnd, Target::Case(case));
        Ok(())
    }

    fn on_activity_end(&mut self, case: CaseId) -> Result<(), Fault> {
        let now = self.now();
        let stage = self.book.case(case)?.stage();
        for _ in 0..self.config.contributions_per_stage {
            self.author(case, stage, now);
        }

        let state = &mut self.cases[case.index()];
        let advance = advance_stage(
            &mut self.book,
            case,
            &self.config.transitions,
            &mut state.flow_rng,
            now,
        )?;
        match (stage, advance.stage) {
            (CaseStage::InformationGathering, CaseStage::IteratingSolutions)
                if !state.evaluated =>
            {
                state.evaluated = true;
                let from = state
                    .first_diagnosis
                    .ok_or_else(|| Fault::Inconsistent("evaluation before diagnosis".into()))?;
                self.samples.push(DelaySample {
                    case_id: case,
                    kind: DelayKind::ClinicalEvaluationDelay,
                    duration: now - from,
                });
            }
            (CaseStage::IteratingSolutions, CaseStage::TreatmentAssessment) => {
                state.treatment_requested = Some(now);
            }
            _ => {}
        }
        match advance.dwell {
            Some(dwell) => self.enter_stage(case, advance.stage, dwell),
            None => {
                self.open_cases -= 1;
                Ok(())
            }
        }
    }

    /// A core member writes up the finished activity and sends it in.
    fn author(&mut self, case: CaseId, stage: CaseStage, now: SimTime) {
        let state = &mut self.cases[case.index()];
        let (author, section) = match state.team.members.choose(&mut state.collab_rng) {
            Some((s, role)) => (
                s.clone(),
                role.write_section().unwrap_or(Section::ProgressSummary),
            ),
            None => (state.team.leader.clone(), Section::ProgressSummary),
        };
        let draft = Draft {
            case,
            payload: format!("{stage} update from {author} at t={now}"),
            author,
            section,
            authored_at: now,
            revises: None,
        };
        self.send(draft, self.config.latencies.feedback);
        self.open_contribs += 1;
    }

    fn send(&mut self, draft: Draft, delay: SimDuration) {
        let handle = self.engine.schedule_in(
            delay,
            EventKind::ContributionSubmitted,
            Target::Case(draft.case),
        );
        self.in_flight.insert(handle.id(), draft);
    }

    fn on_submitted(&mut self, event: EventId) -> Result<(), Fault> {
        let draft = self
            .in_flight
            .remove(&event)
            .ok_or_else(|| Fault::Inconsistent("submission without a draft".into()))?;
        match draft.revises {
            Some(id) => {
                self.book
                    .resubmit(&mut self.engine, id, &draft.author, &draft.payload)?;
            }
            None => {
                let id = self.book.submit_contribution(
                    &mut self.engine,
                    draft.case,
                    &draft.author,
                    draft.section,
                    &draft.payload,
                )?;
                debug_assert_eq!(id.index(), self.contribs.len());
                self.contribs.push(ContribTimes {
                    authored_at: draft.authored_at,
                    merged_at: None,
                });
            }
        }
        Ok(())
    }

    fn on_validated(&mut self, id: ContributionId) -> Result<(), Fault> {
        let case = self.book.contribution(id)?.case_id;
        let state = &mut self.cases[case.index()];
        let verdict = if state.collab_rng.gen::<f64>() < self.config.p_flag {
            Verdict::Irregular
        } else {
            Verdict::Ok
        };
        let leader = state.team.leader.clone();
        match self.book.validate(&mut self.engine, id, &leader, verdict)? {
            ContributionStatus::Approved => {
                self.book.approve_and_merge(&mut self.engine, id, &leader)?;
            }
            _ => self.flags += 1,
        }
        Ok(())
    }

    fn on_flag_notice(&mut self, id: ContributionId) -> Result<(), Fault> {
        let now = self.now();
        let c = self.book.contribution(id)?;
        let draft = Draft {
            case: c.case_id,
            author: c.author.clone(),
            section: c.section,
            payload: format!("{} (revision {})", c.payload, c.revision + 1),
            authored_at: now,
            revises: Some(id),
        };
        self.send(
            draft,
            self.config.response_delay + self.config.latencies.feedback,
        );
        Ok(())
    }

    fn on_merged(&mut self, id: ContributionId) -> Result<(), Fault> {
        let now = self.now();
        let case = self.book.contribution(id)?.case_id;
        let times = &mut self.contribs[id.index()];
        times.merged_at = Some(now);
        self.samples.push(DelaySample {
            case_id: case,
            kind: DelayKind::SubmitToMergeDelay,
            duration: now - times.authored_at,
        });
        self.merges += 1;
        self.open_contribs -= 1;
        match self.config.strategy {
            Strategy::VcsModel => {
                self.engine.schedule_in(
                    self.config.latencies.feedback,
                    EventKind::RequestDelivered,
                    Target::Update(id),
                );
            }
            Strategy::Baseline => self.pending_sync.push(id),
        }
        Ok(())
    }

    /// Makes a merged contribution visible to everyone entitled to read its
    /// section.
    fn deliver_update(&mut self, id: ContributionId) -> Result<(), Fault> {
        let now = self.now();
        let c = self.book.contribution(id)?;
        let (case, section) = (c.case_id, c.section);
        let merged_at = self.contribs[id.index()]
            .merged_at
            .ok_or_else(|| Fault::Inconsistent(format!("{id} delivered before merge")))?;
        self.samples.push(DelaySample {
            case_id: case,
            kind: DelayKind::InfoAvailabilityDelay,
            duration: now - merged_at,
        });
        let readers: Vec<SubjectId> = self
            .book
            .policy(case)?
            .holders(section, Right::Read)
            .cloned()
            .collect();
        for reader in &readers {
            self.book.read_section(case, reader, section)?;
            self.reads_served += 1;
        }
        self.updates_delivered += 1;
        Ok(())
    }

    fn on_sync_tick(&mut self) -> Result<(), Fault> {
        for id in std::mem::take(&mut self.pending_sync) {
            self.deliver_update(id)?;
        }
        if self.arrivals_left > 0 || self.open_cases > 0 || self.open_contribs > 0 {
            self.engine.schedule_in(
                self.config.baseline_sync_interval,
                EventKind::SyncTick,
                Target::None,
            );
        }
        Ok(())
    }

    /// Closes the utilization integrals and summarizes the run so far.
    pub fn finish(mut self) -> RunOutcome {
        let now = self.now();
        let end = now.max(SimTime::ZERO + self.config.horizon);
        let span = end - SimTime::ZERO;
        self.resources.finish(end);
        let utilization: Vec<_> = (0..self.resources.pools().len())
            .map(|i| {
                self.resources
                    .utilization_report(ResourceId(i), span)
                    .expect("finished pools report")
            })
            .collect();
        let bottlenecks = detect_bottleneck(
            &utilization,
            self.config.bottleneck_threshold,
            self.config.wait_ceiling.as_secs_f64(),
        );

        let mut stage_paths = BTreeMap::new();
        for record in self.book.cases() {
            let path: Vec<&str> = record.stage_log().iter().map(|(_, s)| s.code()).collect();
            *stage_paths.entry(path.join(">")).or_insert(0) += 1;
        }
        let delays = DelayKind::ALL
            .into_iter()
            .map(|k| {
                (
                    k.name().to_owned(),
                    summarize(&durations_of(&self.samples, k)),
                )
            })
            .collect();
        let closed = self
            .book
            .cases()
            .iter()
            .filter(|c| c.stage() == CaseStage::Closed)
            .count();
        let days = span.as_secs_f64() / 86_400.0;
        let report = RunReport {
            config_digest: self.config.digest(),
            seed: self.config.seed,
            strategy: self.config.strategy.name().to_owned(),
            horizon_s: self.config.horizon.as_secs_f64(),
            end_time_s: now.as_secs_f64(),
            span_s: span.as_secs_f64(),
            cases_enrolled: self.book.cases().len(),
            cases_closed: closed,
            throughput_per_day: if days > 0.0 {
                closed as f64 / days
            } else {
                0.0
            },
            contributions: self.book.contributions().len(),
            merges: self.merges,
            flags: self.flags,
            updates_delivered: self.updates_delivered,
            reads_served: self.reads_served,
            double_bookings: self
                .conflicts
                .iter()
                .filter(|c| c.kind == ConflictKind::DoubleBooking)
                .count(),
            resource_shortages: self
                .conflicts
                .iter()
                .filter(|c| c.kind == ConflictKind::ResourceShortage)
                .count(),
            events_dispatched: self.engine.counters().dispatched,
            bottlenecks,
            delays,
            stage_paths,
            utilization,
        };
        RunOutcome {
            report,
            samples: self.samples,
            book: self.book,
            requests: self.requests,
            resources: self.resources,
            conflicts: self.conflicts,
            engine: self.engine,
        }
    }
}

/// Runs `config` to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutcome, SimError> {
    Simulation::new(config)
        .map_err(|e| SimError {
            time: SimTime::ZERO,
            case: None,
            fault: e.into(),
        })?
        .run()
}

/// Runs `config` to completion, keeping the event trace.
pub fn run_scenario_traced(config: &ScenarioConfig) -> Result<RunOutcome, SimError> {
    Simulation::traced(config)
        .map_err(|e| SimError {
            time: SimTime::ZERO,
            case: None,
            fault: e.into(),
        })?
        .run()
}
