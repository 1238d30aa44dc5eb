//! Per-resource booking calendars and double-booking detection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConflictKind {
    DoubleBooking,
    ResourceShortage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Rescheduled(SimTime),
    Queued,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub kind: ConflictKind,
    /// Identifiers of the colliding entries, candidate first.
    pub events: Vec<u64>,
    pub resolution: Resolution,
}

/// A half-open interval `[start, start + duration)` on one resource.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Booking {
    pub id: u64,
    pub resource: String,
    pub start: SimTime,
    pub duration: SimDuration,
}

impl Booking {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Interval {
    start: SimTime,
    end: SimTime,
    id: u64,
}

fn overlaps(a_start: SimTime, a_end: SimTime, b: &Interval) -> bool {
    a_start < b.end && b.start < a_end
}

/// Committed bookings, kept sorted and non-overlapping per resource.
#[derive(Debug, Clone, Default)]
pub struct Calendar {
    by_resource: BTreeMap<String, Vec<Interval>>,
}

impl Calendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.by_resource.values().all(Vec::is_empty)
    }

    /// Committed `(start, end)` pairs on `resource`, sorted by start.
    pub fn intervals(&self, resource: &str) -> Vec<(SimTime, SimTime)> {
        self.by_resource
            .get(resource)
            .map(|v| v.iter().map(|i| (i.start, i.end)).collect())
            .unwrap_or_default()
    }

    /// Earliest start at or after `from` where an interval of `duration` fits
    /// on `resource`.
    pub fn earliest_gap(&self, resource: &str, from: SimTime, duration: SimDuration) -> SimTime {
        let mut start = from;
        if let Some(list) = self.by_resource.get(resource) {
            for iv in list {
                if iv.end <= start {
                    continue;
                }
                if overlaps(start, start + duration, iv) {
                    start = iv.end;
                } else {
                    // sorted and disjoint: nothing later can overlap either
                    break;
                }
            }
        }
        start
    }

    /// Earliest start at or after `from` free on every listed resource.
    pub fn earliest_common_gap(
        &self,
        resources: &[String],
        from: SimTime,
        duration: SimDuration,
    ) -> SimTime {
        let mut start = from;
        loop {
            let next = resources
                .iter()
                .fold(start, |s, r| s.max(self.earliest_gap(r, s, duration)));
            if next == start {
                return start;
            }
            start = next;
        }
    }

    /// Commits `booking`, moving it to the earliest feasible gap if it collides.
    /// Returns the committed start and the conflict that forced a move, if any.
    pub fn book(&mut self, booking: Booking) -> (SimTime, Option<ConflictReport>) {
        let report = detect_conflict(&booking, self);
        let start = match &report {
            Some(ConflictReport {
                resolution: Resolution::Rescheduled(at),
                ..
            }) => *at,
            _ => booking.start,
        };
        self.insert(
            &booking.resource,
            start,
            start + booking.duration,
            booking.id,
        );
        (start, report)
    }

    /// Commits an interval the caller already knows to be free.
    pub fn commit_at(&mut self, resource: &str, start: SimTime, duration: SimDuration, id: u64) {
        debug_assert_eq!(self.earliest_gap(resource, start, duration), start);
        self.insert(resource, start, start + duration, id);
    }

    fn insert(&mut self, resource: &str, start: SimTime, end: SimTime, id: u64) {
        let list = self.by_resource.entry(resource.to_owned()).or_default();
        let pos = list.partition_point(|iv| iv.start < start);
        list.insert(pos, Interval { start, end, id });
    }
}

/// Checks `candidate` against committed bookings on the same resource.
pub fn detect_conflict(candidate: &Booking, calendar: &Calendar) -> Option<ConflictReport> {
    let list = calendar.by_resource.get(&candidate.resource)?;
    let end = candidate.end();
    let colliding: Vec<u64> = list
        .iter()
        .filter(|iv| overlaps(candidate.start, end, iv))
        .map(|iv| iv.id)
        .collect();
    if colliding.is_empty() {
        return None;
    }
    let new_start = calendar.earliest_gap(&candidate.resource, candidate.start, candidate.duration);
    let mut events = Vec::with_capacity(colliding.len() + 1);
    events.push(candidate.id);
    events.extend(colliding);
    Some(ConflictReport {
        kind: ConflictKind::DoubleBooking,
        events,
        resolution: Resolution::Rescheduled(new_start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn booking(id: u64, resource: &str, start: u64, len: u64) -> Booking {
        Booking {
            id,
            resource: resource.into(),
            start: SimTime::from_secs(start),
            duration: SimDuration::from_secs(len),
        }
    }

    #[test]
    fn empty_calendar_never_conflicts() {
        assert_eq!(
            detect_conflict(&booking(1, "A", 0, 10), &Calendar::new()),
            None
        );
    }

    #[test]
    fn overlap_on_same_resource_reschedules_to_gap_end() {
        let mut cal = Calendar::new();
        cal.book(booking(1, "A", 100, 100));
        let report = detect_conflict(&booking(2, "A", 150, 100), &cal).unwrap();
        assert_eq!(report.kind, ConflictKind::DoubleBooking);
        assert_eq!(report.events, vec![2, 1]);
        assert_eq!(
            report.resolution,
            Resolution::Rescheduled(SimTime::from_secs(200))
        );
        assert_eq!(detect_conflict(&booking(3, "B", 150, 100), &cal), None);
    }

    #[test]
    fn touching_intervals_do_not_overlap() {
        let mut cal = Calendar::new();
        cal.book(booking(1, "A", 100, 100));
        assert_eq!(detect_conflict(&booking(2, "A", 200, 50), &cal), None);
        assert_eq!(detect_conflict(&booking(3, "A", 50, 50), &cal), None);
    }

    #[test]
    fn skips_gaps_too_small() {
        let mut cal = Calendar::new();
        cal.book(booking(1, "A", 0, 100));
        cal.book(booking(2, "A", 130, 100));
        // 30 s gap at [100,130) is too small for 50 s
        let (start, report) = cal.book(booking(3, "A", 50, 50));
        assert_eq!(start, SimTime::from_secs(230));
        assert!(report.is_some());
        // but a 30 s slot fits exactly
        let (start, _) = cal.book(booking(4, "A", 90, 30));
        assert_eq!(start, SimTime::from_secs(100));
    }

    #[test]
    fn common_gap_across_resources() {
        let mut cal = Calendar::new();
        cal.book(booking(1, "A", 0, 100));
        cal.book(booking(2, "B", 100, 100));
        let start = cal.earliest_common_gap(
            &["A".into(), "B".into()],
            SimTime::ZERO,
            SimDuration::from_secs(50),
        );
        assert_eq!(start, SimTime::from_secs(200));
    }
}
