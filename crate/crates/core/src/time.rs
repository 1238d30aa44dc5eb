//! Simulated time.
//!
//! Time is kept as an integer count of microseconds since simulation start so
//! that latency arithmetic is exact and event ordering is a plain integer
//! comparison. Public conversions speak seconds.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MICROS_PER_SEC: u64 = 1_000_000;

/// A point on the simulated time axis.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

/// A non-negative span of simulated time.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimDuration(u64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeError {
    #[error("time value must be finite and non-negative, got {0}")]
    OutOfRange(f64),
}

fn secs_to_micros(secs: f64) -> Result<u64, TimeError> {
    if !secs.is_finite() || secs < 0.0 || secs * MICROS_PER_SEC as f64 > u64::MAX as f64 {
        return Err(TimeError::OutOfRange(secs));
    }
    Ok((secs * MICROS_PER_SEC as f64).round() as u64)
}

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(secs: u64) -> Self {
        SimTime(secs * MICROS_PER_SEC)
    }

    pub fn from_secs_f64(secs: f64) -> Result<Self, TimeError> {
        secs_to_micros(secs).map(SimTime)
    }

    pub fn from_micros(micros: u64) -> Self {
        SimTime(micros)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    /// Elapsed span since `earlier`; zero if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }
}

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub fn from_secs(secs: u64) -> Self {
        SimDuration(secs * MICROS_PER_SEC)
    }

    pub fn from_secs_f64(secs: f64) -> Result<Self, TimeError> {
        secs_to_micros(secs).map(SimDuration)
    }

    pub fn from_micros(micros: u64) -> Self {
        SimDuration(micros)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign<SimDuration> for SimTime {
    fn add_assign(&mut self, rhs: SimDuration) {
        *self = *self + rhs;
    }
}

impl Add for SimDuration {
    type Output = SimDuration;

    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimDuration;

    fn sub(self, rhs: SimTime) -> SimDuration {
        self.since(rhs)
    }
}

/// Seconds with millisecond precision, e.g. `1455.000`.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let millis = (self.0 + 500) / 1000;
        write!(f, "{}.{:03}", millis / 1000, millis % 1000)
    }
}

impl fmt::Display for SimDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} s", self.as_secs_f64())
    }
}

/// Duration units accepted in configuration text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Minutes,
    Hours,
    Days,
}

impl TimeUnit {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "s" => Some(TimeUnit::Seconds),
            "min" => Some(TimeUnit::Minutes),
            "h" => Some(TimeUnit::Hours),
            "d" => Some(TimeUnit::Days),
            _ => None,
        }
    }

    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Minutes => 60.0,
            TimeUnit::Hours => 3600.0,
            TimeUnit::Days => 86_400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("missing unit in {0:?}")]
    MissingUnit(String),
    #[error("unknown unit in {0:?} (expected s, min, h or d)")]
    UnknownUnit(String),
    #[error("not a number in {0:?}")]
    BadNumber(String),
    #[error("value {0:?} must be finite and non-negative")]
    Negative(String),
}

fn split_number(text: &str) -> (&str, &str) {
    let text = text.trim();
    let end = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (num, rest) = text.split_at(end);
    (num.trim(), rest.trim())
}

/// Parses `"<number> <unit>"` (the space is optional) into a duration.
pub fn parse_duration(text: &str) -> Result<SimDuration, UnitError> {
    let (num, unit) = split_number(text);
    if unit.is_empty() {
        return Err(UnitError::MissingUnit(text.to_owned()));
    }
    let unit = TimeUnit::parse(unit).ok_or_else(|| UnitError::UnknownUnit(text.to_owned()))?;
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError::BadNumber(text.to_owned()))?;
    if !value.is_finite() || value < 0.0 {
        return Err(UnitError::Negative(text.to_owned()));
    }
    SimDuration::from_secs_f64(value * unit.seconds())
        .map_err(|_| UnitError::Negative(text.to_owned()))
}

/// Parses a rate written `"<number> /<unit>"` into events per second.
pub fn parse_rate(text: &str) -> Result<f64, UnitError> {
    let (num, rest) = split_number(text);
    let unit = rest.strip_prefix('/').map(str::trim).unwrap_or("");
    if unit.is_empty() {
        return Err(UnitError::MissingUnit(text.to_owned()));
    }
    let unit = TimeUnit::parse(unit).ok_or_else(|| UnitError::UnknownUnit(text.to_owned()))?;
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError::BadNumber(text.to_owned()))?;
    if !value.is_finite() || value < 0.0 {
        return Err(UnitError::Negative(text.to_owned()));
    }
    Ok(value / unit.seconds())
}
