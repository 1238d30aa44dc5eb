//! Delay samples, summary statistics and run reports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ids::CaseId;
use crate::resources::UtilizationRecord;
use crate::time::SimDuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DelayKind {
    /// First diagnosis entry to first move from information gathering into
    /// iterating solutions.
    ClinicalEvaluationDelay,
    /// Leaving iterating solutions for treatment assessment to the first
    /// treatment-assessment resource grant.
    TreatmentAccessDelay,
    /// Merge of a contribution to its delivery to readers.
    InfoAvailabilityDelay,
    /// Authoring of a contribution to its merge.
    SubmitToMergeDelay,
}

impl DelayKind {
    pub const ALL: [DelayKind; 4] = [
        DelayKind::ClinicalEvaluationDelay,
        DelayKind::TreatmentAccessDelay,
        DelayKind::InfoAvailabilityDelay,
        DelayKind::SubmitToMergeDelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DelayKind::ClinicalEvaluationDelay => "ClinicalEvaluationDelay",
            DelayKind::TreatmentAccessDelay => "TreatmentAccessDelay",
            DelayKind::InfoAvailabilityDelay => "InfoAvailabilityDelay",
            DelayKind::SubmitToMergeDelay => "SubmitToMergeDelay",
        }
    }

    pub fn parse(s: &str) -> Option<DelayKind> {
        DelayKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelaySample {
    pub case_id: CaseId,
    pub kind: DelayKind,
    pub duration: SimDuration,
}

/// Count, mean and nearest-rank percentiles, in seconds. Empty sets carry
/// only the count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p95: Option<f64>,
    pub max: Option<f64>,
}

/// Smallest value with at least `q` of the data at or below it.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

pub fn summarize(values: &[f64]) -> DelayStats {
    if values.is_empty() {
        return DelayStats::default();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    DelayStats {
        count: values.len(),
        mean: Some(values.iter().sum::<f64>() / values.len() as f64),
        p50: nearest_rank(&sorted, 0.5),
        p95: nearest_rank(&sorted, 0.95),
        max: sorted.last().copied(),
    }
}

/// Durations of one kind, in seconds and sample order.
pub fn durations_of(samples: &[DelaySample], kind: DelayKind) -> Vec<f64> {
    samples
        .iter()
        .filter(|s| s.kind == kind)
        .map(|s| s.duration.as_secs_f64())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub seed: u64,
    pub strategy: String,
    pub horizon_s: f64,
    /// Clock value when the last event fired.
    pub end_time_s: f64,
    /// Denominator for utilization and throughput.
    pub span_s: f64,
    pub cases_enrolled: usize,
    pub cases_closed: usize,
    pub throughput_per_day: f64,
    pub contributions: usize,
    pub merges: usize,
    pub flags: usize,
    pub updates_delivered: usize,
    pub reads_served: u64,
    pub double_bookings: usize,
    pub resource_shortages: usize,
    pub events_dispatched: u64,
    pub bottlenecks: Vec<String>,
    pub delays: BTreeMap<String, DelayStats>,
    pub stage_paths: BTreeMap<String, u64>,
    pub utilization: Vec<UtilizationRecord>,
}

impl RunReport {
    pub fn delay(&self, kind: DelayKind) -> DelayStats {
        self.delays.get(kind.name()).copied().unwrap_or_default()
    }

    /// TOML rendering of the whole report.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_samples_csv<W: Write>(samples: &[DelaySample], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case_id", "kind", "duration_s"])?;
    for s in samples {
        w.write_record([
            s.case_id.0.to_string(),
            s.kind.to_string(),
            fmt_f64(s.duration.as_secs_f64()),
        ])?;
    }
    w.flush()
}

/// Parses the output of [`write_samples_csv`].
pub fn read_samples_csv(text: &str) -> Result<Vec<DelaySample>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?;
    if header != vec!["case_id", "kind", "duration_s"] {
        return Err(format!("unexpected header {header:?}"));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let bad = || format!("bad row {rec:?}");
            let case = rec[0].parse().map_err(|_| bad())?;
            let kind = DelayKind::parse(&rec[1]).ok_or_else(bad)?;
            let secs: f64 = rec[2].parse().map_err(|_| bad())?;
            let duration = SimDuration::from_secs_f64(secs).map_err(|_| bad())?;
            Ok(DelaySample {
                case_id: CaseId(case),
                kind,
                duration,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.5), Some(10.0));
        assert_eq!(nearest_rank(&v, 0.95), Some(19.0));
        assert_eq!(nearest_rank(&v, 1.0), Some(20.0));
        assert_eq!(nearest_rank(&[7.0], 0.95), Some(7.0));
        assert_eq!(nearest_rank(&[], 0.5), None);
    }

    #[test]
    fn summary() {
        let s = summarize(&[3.0, 1.0, 2.0]);
        assert_eq!(s.count, 3);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.p50, Some(2.0));
        assert_eq!(s.max, Some(3.0));
        assert_eq!(summarize(&[]).mean, None);
    }

    #[test]
    fn csv_round_trip() {
        let samples = vec![
            DelaySample {
                case_id: CaseId(0),
                kind: DelayKind::SubmitToMergeDelay,
                duration: SimDuration::from_secs(1455),
            },
            DelaySample {
                case_id: CaseId(3),
                kind: DelayKind::InfoAvailabilityDelay,
                duration: SimDuration::from_micros(1_234_567),
            },
        ];
        let mut buf = Vec::new();
        write_samples_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("0,SubmitToMergeDelay,1455.0\n"));
        assert_eq!(read_samples_csv(&text).unwrap(), samples);
    }
}
