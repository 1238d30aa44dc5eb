//! Finite-capacity resource pools with queued grants and utilization tracking.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CaseId, GrantId};
use crate::kernel::{ConflictKind, ConflictReport, Engine, EventKind, Resolution, Target};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResourceError {
    #[error("request for {units} units exceeds capacity {capacity} of {resource}")]
    UnitsExceedCapacity {
        resource: String,
        units: u32,
        capacity: u32,
    },
    #[error("request must ask for at least one unit")]
    ZeroUnits,
    #[error("capacity of {0} must be positive")]
    ZeroCapacity(String),
    #[error("{0} was already released")]
    AlreadyReleased(GrantId),
    #[error("unknown grant {0}")]
    UnknownGrant(GrantId),
    #[error("unknown resource #{0}")]
    UnknownResource(usize),
    #[error("utilization of {0} requested before the run finished")]
    RunNotFinished(String),
    #[error("invariant violated on {resource}: {detail}")]
    Invariant { resource: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Personnel,
    Facility,
    Equipment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceId(pub usize);

/// A request waiting for units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waiting {
    /// Per-pool request sequence number.
    pub seq: u64,
    pub holder: CaseId,
    pub units: u32,
    pub duration: SimDuration,
    pub enqueued_at: SimTime,
}

/// Chooses which waiting request to admit next.
pub trait AllocationPolicy: fmt::Debug + Send + Sync {
    /// Index into `queue` of the request to admit with `free` units available,
    /// or `None` to leave the queue as is.
    fn select(&self, queue: &VecDeque<Waiting>, free: u32) -> Option<usize>;
}

/// First come, first served; the head blocks everyone behind it.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fifo;

impl AllocationPolicy for Fifo {
    fn select(&self, queue: &VecDeque<Waiting>, free: u32) -> Option<usize> {
        queue.front().filter(|w| w.units <= free).map(|_| 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrantRecord {
    pub grant: GrantId,
    pub seq: u64,
    pub holder: CaseId,
    pub units: u32,
    pub requested_at: SimTime,
    pub granted_at: SimTime,
    pub release_at: SimTime,
    /// Whether the request had to wait in the queue.
    pub queued: bool,
}

impl GrantRecord {
    pub fn wait(&self) -> SimDuration {
        self.granted_at - self.requested_at
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestOutcome {
    Granted(GrantRecord),
    Queued {
        position: usize,
        conflict: ConflictReport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRecord {
    pub resource_id: String,
    /// Integral of units in use over time, in unit-seconds.
    pub busy_time: f64,
    pub horizon: f64,
    pub utilization: f64,
    pub max_queue_len: usize,
    /// Mean wait over requests that were queued before being granted.
    pub mean_wait: f64,
    pub queued_requests: usize,
    pub grants: usize,
}

#[derive(Debug)]
pub struct ResourcePool {
    name: String,
    kind: ResourceKind,
    capacity: u32,
    in_use: u32,
    queue: VecDeque<Waiting>,
    active: BTreeMap<GrantId, GrantRecord>,
    log: Vec<GrantRecord>,
    next_seq: u64,
    busy_area_micros: u128,
    last_change: SimTime,
    max_queue_len: usize,
    releases: u64,
    finished_at: Option<SimTime>,
    policy: Box<dyn AllocationPolicy>,
}

impl ResourcePool {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ResourceKind {
        self.kind
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn in_use(&self) -> u32 {
        self.in_use
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Every grant issued so far, in grant order.
    pub fn grant_log(&self) -> &[GrantRecord] {
        &self.log
    }

    fn accumulate(&mut self, now: SimTime) {
        let span = (now - self.last_change).as_micros() as u128;
        self.busy_area_micros += span * self.in_use as u128;
        self.last_change = self.last_change.max(now);
    }

    /// Admits waiters chosen by the policy. `fresh` is the sequence number of a
    /// request that has not waited yet.
    fn admit(
        &mut self,
        engine: &mut Engine,
        next_grant: &mut u64,
        fresh: Option<u64>,
    ) -> Vec<GrantRecord> {
        let now = engine.now();
        let mut granted = Vec::new();
        while let Some(i) = self.policy.select(&self.queue, self.capacity - self.in_use) {
            let w = self.queue.remove(i).expect("policy returned a valid index");
            let grant = GrantId(*next_grant);
            *next_grant += 1;
            self.accumulate(now);
            self.in_use += w.units;
            let record = GrantRecord {
                grant,
                seq: w.seq,
                holder: w.holder,
                units: w.units,
                requested_at: w.enqueued_at,
                granted_at: now,
                release_at: now + w.duration,
                queued: fresh != Some(w.seq),
            };
            engine.schedule_in(w.duration, EventKind::ResourceFreed, Target::Grant(grant));
            granted.push(record);
        }
        granted
    }

    /// Checks capacity safety and FIFO work conservation.
    pub fn check_invariants(&self) -> Result<(), ResourceError> {
        let fail = |detail: String| {
            Err(ResourceError::Invariant {
                resource: self.name.clone(),
                detail,
            })
        };
        if self.in_use > self.capacity {
            return fail(format!(
                "in_use {} > capacity {}",
                self.in_use, self.capacity
            ));
        }
        let held: u32 = self.active.values().map(|g| g.units).sum();
        if held != self.in_use {
            return fail(format!(
                "active grants hold {held} units but in_use is {}",
                self.in_use
            ));
        }
        if self.log.len() as u64 - self.releases != self.active.len() as u64 {
            return fail("grants - releases != active grants".into());
        }
        if self
            .policy
            .select(&self.queue, self.capacity - self.in_use)
            .is_some()
        {
            return fail("admissible request left waiting".into());
        }
        Ok(())
    }
}

/// All resource pools of a run. Grant identifiers are unique across pools.
#[derive(Debug, Default)]
pub struct ResourceSet {
    pools: Vec<ResourcePool>,
    grant_owner: Vec<ResourceId>,
}

impl ResourceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        name: &str,
        kind: ResourceKind,
        capacity: u32,
    ) -> Result<ResourceId, ResourceError> {
        self.add_with_policy(name, kind, capacity, Box::new(Fifo))
    }

    pub fn add_with_policy(
        &mut self,
        name: &str,
        kind: ResourceKind,
        capacity: u32,
        policy: Box<dyn AllocationPolicy>,
    ) -> Result<ResourceId, ResourceError> {
        if capacity == 0 {
            return Err(ResourceError::ZeroCapacity(name.to_owned()));
        }
        self.pools.push(ResourcePool {
            name: name.to_owned(),
            kind,
            capacity,
            in_use: 0,
            queue: VecDeque::new(),
            active: BTreeMap::new(),
            log: Vec::new(),
            next_seq: 0,
            busy_area_micros: 0,
            last_change: SimTime::ZERO,
            max_queue_len: 0,
            releases: 0,
            finished_at: None,
            policy,
        });
        Ok(ResourceId(self.pools.len() - 1))
    }

    pub fn pools(&self) -> &[ResourcePool] {
        &self.pools
    }

    pub fn pool(&self, id: ResourceId) -> Result<&ResourcePool, ResourceError> {
        self.pools
            .get(id.0)
            .ok_or(ResourceError::UnknownResource(id.0))
    }

    pub fn owner_of(&self, grant: GrantId) -> Result<ResourceId, ResourceError> {
        self.grant_owner
            .get(grant.index())
            .copied()
            .ok_or(ResourceError::UnknownGrant(grant))
    }

    fn record_grants(&mut self, id: ResourceId, granted: &[GrantRecord]) {
        for g in granted {
            debug_assert_eq!(g.grant.index(), self.grant_owner.len());
            self.grant_owner.push(id);
            let pool = &mut self.pools[id.0];
            pool.active.insert(g.grant, g.clone());
            pool.log.push(g.clone());
        }
    }

    /// Asks `resource` for `units` held for `duration`. Granted requests get a
    /// `ResourceFreed` event at `now + duration`; others wait in line.
    pub fn request(
        &mut self,
        engine: &mut Engine,
        resource: ResourceId,
        units: u32,
        holder: CaseId,
        duration: SimDuration,
    ) -> Result<RequestOutcome, ResourceError> {
        let mut next_grant = self.grant_owner.len() as u64;
        let pool = self
            .pools
            .get_mut(resource.0)
            .ok_or(ResourceError::UnknownResource(resource.0))?;
        if units == 0 {
            return Err(ResourceError::ZeroUnits);
        }
        if units > pool.capacity {
            return Err(ResourceError::UnitsExceedCapacity {
                resource: pool.name.clone(),
                units,
                capacity: pool.capacity,
            });
        }
        let seq = pool.next_seq;
        pool.next_seq += 1;
        pool.queue.push_back(Waiting {
            seq,
            holder,
            units,
            duration,
            enqueued_at: engine.now(),
        });
        let granted = pool.admit(engine, &mut next_grant, Some(seq));
        let outcome = match granted.iter().find(|g| g.seq == seq) {
            Some(g) => RequestOutcome::Granted(g.clone()),
            None => {
                pool.max_queue_len = pool.max_queue_len.max(pool.queue.len());
                let position = pool
                    .queue
                    .iter()
                    .position(|w| w.seq == seq)
                    .expect("still waiting")
                    + 1;
                let mut events = vec![seq];
                events.extend(pool.active.keys().map(|g| g.0));
                RequestOutcome::Queued {
                    position,
                    conflict: ConflictReport {
                        kind: ConflictKind::ResourceShortage,
                        events,
                        resolution: Resolution::Queued,
                    },
                }
            }
        };
        self.record_grants(resource, &granted);
        Ok(outcome)
    }

    /// Returns a grant's units and admits waiting requests. Returns the grants
    /// issued to waiters, all at the current timestamp.
    pub fn release(
        &mut self,
        engine: &mut Engine,
        grant: GrantId,
    ) -> Result<Vec<GrantRecord>, ResourceError> {
        let owner = self.owner_of(grant)?;
        let mut next_grant = self.grant_owner.len() as u64;
        let pool = &mut self.pools[owner.0];
        let record = pool
            .active
            .remove(&grant)
            .ok_or(ResourceError::AlreadyReleased(grant))?;
        pool.accumulate(engine.now());
        pool.in_use -= record.units;
        pool.releases += 1;
        let granted = pool.admit(engine, &mut next_grant, None);
        self.record_grants(owner, &granted);
        Ok(granted)
    }

    /// Closes the utilization integrals at `end`.
    pub fn finish(&mut self, end: SimTime) {
        for pool in &mut self.pools {
            pool.accumulate(end);
            pool.finished_at = Some(end);
        }
    }

    pub fn utilization_report(
        &self,
        id: ResourceId,
        horizon: SimDuration,
    ) -> Result<UtilizationRecord, ResourceError> {
        let pool = self.pool(id)?;
        if pool.finished_at.is_none() {
            return Err(ResourceError::RunNotFinished(pool.name.clone()));
        }
        let busy_time = pool.busy_area_micros as f64 / 1e6;
        let horizon_s = horizon.as_secs_f64();
        let utilization = if horizon_s > 0.0 {
            (busy_time / (pool.capacity as f64 * horizon_s)).min(1.0)
        } else {
            0.0
        };
        let waited: Vec<f64> = pool
            .log
            .iter()
            .filter(|g| g.queued)
            .map(|g| g.wait().as_secs_f64())
            .collect();
        let mean_wait = if waited.is_empty() {
            0.0
        } else {
            waited.iter().sum::<f64>() / waited.len() as f64
        };
        Ok(UtilizationRecord {
            resource_id: pool.name.clone(),
            busy_time,
            horizon: horizon_s,
            utilization,
            max_queue_len: pool.max_queue_len,
            mean_wait,
            queued_requests: waited.len(),
            grants: pool.log.len(),
        })
    }

    pub fn check_invariants(&self) -> Result<(), ResourceError> {
        self.pools
            .iter()
            .try_for_each(ResourcePool::check_invariants)
    }
}

/// Resources whose utilization reaches `threshold`, or that queued requests
/// whose mean wait exceeded `wait_ceiling` seconds.
pub fn detect_bottleneck(
    records: &[UtilizationRecord],
    threshold: f64,
    wait_ceiling: f64,
) -> Vec<String> {
    records
        .iter()
        .filter(|r| {
            r.utilization >= threshold || (r.max_queue_len > 0 && r.mean_wait > wait_ceiling)
        })
        .map(|r| r.resource_id.clone())
        .collect()
}
