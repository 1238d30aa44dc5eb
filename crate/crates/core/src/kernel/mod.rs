//! Deterministic discrete-event engine.
//!
//! Events are dispatched in the lexicographic order of `(time, priority, seq)`
//! where `seq` is the insertion counter. Cancellation is lazy: a cancelled
//! entry stays in the heap and is skipped when it surfaces.

mod calendar;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CaseId, ContributionId, GrantId, RequestId};
use crate::time::{SimDuration, SimTime};

pub use calendar::{detect_conflict, Booking, Calendar, ConflictKind, ConflictReport, Resolution};

static NEXT_RUN: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
    #[error("horizon {horizon} is behind the clock ({now})")]
    HorizonBehindClock { horizon: SimTime, now: SimTime },
    #[error("event handle does not belong to this engine")]
    UnknownHandle,
    #[error("priority {0} out of range 0..=9")]
    BadPriority(u8),
}

/// Dispatch priority, 0 most urgent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Priority(u8);

impl Priority {
    pub const MOST_URGENT: Priority = Priority(0);
    /// Validation and merge events.
    pub const CRITICAL: Priority = Priority(3);
    pub const DEFAULT: Priority = Priority(5);
    pub const LEAST_URGENT: Priority = Priority(9);

    pub fn new(level: u8) -> Result<Self, KernelError> {
        if level <= 9 {
            Ok(Priority(level))
        } else {
            Err(KernelError::BadPriority(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    CaseArrival,
    RequestDelivered,
    RequestAccepted,
    ContributionSubmitted,
    ValidationCompleted,
    MergeCompleted,
    ResourceFreed,
    SyncTick,
    AppointmentStart,
    AppointmentEnd,
}

impl EventKind {
    pub fn default_priority(self) -> Priority {
        match self {
            EventKind::ValidationCompleted | EventKind::MergeCompleted => Priority::CRITICAL,
            _ => Priority::DEFAULT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::CaseArrival => "CaseArrival",
            EventKind::RequestDelivered => "RequestDelivered",
            EventKind::RequestAccepted => "RequestAccepted",
            EventKind::ContributionSubmitted => "ContributionSubmitted",
            EventKind::ValidationCompleted => "ValidationCompleted",
            EventKind::MergeCompleted => "MergeCompleted",
            EventKind::ResourceFreed => "ResourceFreed",
            EventKind::SyncTick => "SyncTick",
            EventKind::AppointmentStart => "AppointmentStart",
            EventKind::AppointmentEnd => "AppointmentEnd",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What an event addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    None,
    /// Index into the run's arrival stream.
    Arrival(u64),
    Case(CaseId),
    Contribution(ContributionId),
    /// Delivery of a merged contribution to its readers.
    Update(ContributionId),
    Request(RequestId),
    Grant(GrantId),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::None => f.write_str("-"),
            Target::Arrival(i) => write!(f, "arrival:{i}"),
            Target::Case(id) => id.fmt(f),
            Target::Contribution(id) => id.fmt(f),
            Target::Update(id) => write!(f, "update:{}", id.0),
            Target::Request(id) => id.fmt(f),
            Target::Grant(id) => id.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: EventId,
    pub time: SimTime,
    pub priority: Priority,
    pub seq: u64,
    pub kind: EventKind,
    pub target: Target,
}

impl Event {
    fn key(&self) -> (SimTime, Priority, u64) {
        (self.time, self.priority, self.seq)
    }

    /// One tab-separated trace line: time, kind, target, priority, seq.
    pub fn trace_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.time,
            self.kind,
            self.target,
            self.priority.level(),
            self.seq
        )
    }
}

// BinaryHeap is a max-heap, so the ordering is reversed.
struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.0.key() == other.0.key()
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.key().cmp(&self.0.key())
    }
}

/// Returned by [`Engine::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle {
    run: u64,
    id: EventId,
}

impl EventHandle {
    pub fn id(&self) -> EventId {
        self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancelOutcome {
    Cancelled,
    AlreadyDispatched,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub scheduled: u64,
    pub dispatched: u64,
    pub cancelled: u64,
}

/// Simulation clock plus pending-event queue. One engine per run; engines share
/// no state and may be moved across threads.
pub struct Engine {
    run: u64,
    clock: SimTime,
    queue: BinaryHeap<Queued>,
    live: HashSet<EventId>,
    next_seq: u64,
    counters: EngineCounters,
    trace: Option<Vec<Event>>,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine {
            run: NEXT_RUN.fetch_add(1, AtomicOrdering::Relaxed),
            clock: SimTime::ZERO,
            queue: BinaryHeap::new(),
            live: HashSet::new(),
            next_seq: 0,
            counters: EngineCounters::default(),
            trace: None,
        }
    }

    /// Keeps a copy of every dispatched event for [`Engine::write_trace`].
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn counters(&self) -> EngineCounters {
        self.counters
    }

    /// Number of scheduled events that have neither fired nor been cancelled.
    pub fn live(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn schedule(
        &mut self,
        at: SimTime,
        kind: EventKind,
        target: Target,
    ) -> Result<EventHandle, KernelError> {
        self.schedule_with_priority(at, kind, target, kind.default_priority())
    }

    pub fn schedule_with_priority(
        &mut self,
        at: SimTime,
        kind: EventKind,
        target: Target,
        priority: Priority,
    ) -> Result<EventHandle, KernelError> {
        if at < self.clock {
            return Err(KernelError::SchedulingInPast {
                at,
                now: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let id = EventId(seq);
        self.queue.push(Queued(Event {
            id,
            time: at,
            priority,
            seq,
            kind,
            target,
        }));
        self.live.insert(id);
        self.counters.scheduled += 1;
        Ok(EventHandle { run: self.run, id })
    }

    /// Schedules relative to the current clock; never fails.
    pub fn schedule_in(
        &mut self,
        delay: SimDuration,
        kind: EventKind,
        target: Target,
    ) -> EventHandle {
        self.schedule(self.clock + delay, kind, target)
            .expect("a non-negative delay cannot land in the past")
    }

    pub fn cancel(&mut self, handle: EventHandle) -> Result<CancelOutcome, KernelError> {
        if handle.run != self.run || handle.id.0 >= self.next_seq {
            return Err(KernelError::UnknownHandle);
        }
        if self.live.remove(&handle.id) {
            self.counters.cancelled += 1;
            Ok(CancelOutcome::Cancelled)
        } else {
            Ok(CancelOutcome::AlreadyDispatched)
        }
    }

    fn discard_stale(&mut self) {
        while let Some(top) = self.queue.peek() {
            if self.live.contains(&top.0.id) {
                break;
            }
            self.queue.pop();
        }
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.discard_stale();
        self.queue.peek().map(|q| q.0.time)
    }

    /// Removes the minimum live event and advances the clock to it.
    pub fn step(&mut self) -> Option<Event> {
        self.discard_stale();
        let Queued(event) = self.queue.pop()?;
        self.live.remove(&event.id);
        debug_assert!(event.time >= self.clock);
        self.clock = event.time;
        self.counters.dispatched += 1;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(event);
        }
        Some(event)
    }

    /// Dispatches the next event if it is due at or before `horizon`.
    pub fn step_until(&mut self, horizon: SimTime) -> Option<Event> {
        match self.peek_time() {
            Some(t) if t <= horizon => self.step(),
            _ => None,
        }
    }

    /// Dispatches every event due at or before `horizon`, discarding them.
    pub fn run_until(&mut self, horizon: SimTime) -> Result<usize, KernelError> {
        self.run_until_with(horizon, |_, _| {})
    }

    /// Like [`Engine::run_until`] but hands each dispatched event to `handler`,
    /// which may schedule further events.
    pub fn run_until_with<F>(
        &mut self,
        horizon: SimTime,
        mut handler: F,
    ) -> Result<usize, KernelError>
    where
        F: FnMut(&mut Engine, Event),
    {
        if horizon < self.clock {
            return Err(KernelError::HorizonBehindClock {
                horizon,
                now: self.clock,
            });
        }
        let mut count = 0;
        while let Some(event) = self.step_until(horizon) {
            handler(self, event);
            count += 1;
        }
        Ok(count)
    }

    pub fn trace(&self) -> &[Event] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn write_trace<W: Write>(&self, mut out: W) -> io::Result<()> {
        for event in self.trace() {
            writeln!(out, "{}", event.trace_line())?;
        }
        Ok(())
    }
}
