//! Spatially uniform, time-dependent potential energy schedules.
//!
//! A program is a chain of segments, each either a constant level or a
//! raised-cosine ramp `U(s) = a + (b - a)(1 - cos(pi s / d)) / 2` between two
//! levels. Ramps have zero slope at both ends, so a chain that is continuous
//! is automatically C1. Every segment integrates in closed form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CONTINUITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant { level: f64 },
    Ramp { from: f64, to: f64 },
}

impl Profile {
    pub fn start_level(&self) -> f64 {
        match *self {
            Profile::Constant { level } => level,
            Profile::Ramp { from, .. } => from,
        }
    }

    pub fn end_level(&self) -> f64 {
        match *self {
            Profile::Constant { level } => level,
            Profile::Ramp { to, .. } => to,
        }
    }

    fn shifted(self, offset: f64) -> Self {
        match self {
            Profile::Constant { level } => Profile::Constant {
                level: level + offset,
            },
            Profile::Ramp { from, to } => Profile::Ramp {
                from: from + offset,
                to: to + offset,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "SegmentRecord", into = "SegmentRecord")]
pub struct Segment {
    pub duration: f64,
    pub profile: Profile,
}

/// Flat serialized form of [`Segment`]: `{ kind, duration, level }` or
/// `{ kind, duration, from, to }`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum SegmentRecord {
    Constant { duration: f64, level: f64 },
    Ramp { duration: f64, from: f64, to: f64 },
}

impl From<SegmentRecord> for Segment {
    fn from(r: SegmentRecord) -> Self {
        match r {
            SegmentRecord::Constant { duration, level } => Segment::constant(duration, level),
            SegmentRecord::Ramp { duration, from, to } => Segment {
                duration,
                profile: Profile::Ramp { from, to },
            },
        }
    }
}

impl From<Segment> for SegmentRecord {
    fn from(s: Segment) -> Self {
        let duration = s.duration;
        match s.profile {
            Profile::Constant { level } => SegmentRecord::Constant { duration, level },
            Profile::Ramp { from, to } => SegmentRecord::Ramp { duration, from, to },
        }
    }
}

impl Segment {
    pub fn constant(duration: f64, level: f64) -> Self {
        Self {
            duration,
            profile: Profile::Constant { level },
        }
    }

    pub fn ramp(duration: f64, from: f64, to: f64) -> Self {
        Self {
            duration,
            profile: Profile::Ramp { from, to },
        }
    }

    /// Value at local time `s` in `[0, duration]`.
    fn value_at(&self, s: f64) -> f64 {
        match self.profile {
            Profile::Constant { level } => level,
            Profile::Ramp { from, to } => {
                from + 0.5 * (to - from) * (1.0 - (PI * s / self.duration).cos())
            }
        }
    }

    /// Exact integral over local times `[a, b]`, `0 <= a <= b <= duration`.
    fn integral_local(&self, a: f64, b: f64) -> f64 {
        let width = b - a;
        match self.profile {
            Profile::Constant { level } => level * width,
            Profile::Ramp { from, to } => {
                let w = PI / self.duration;
                // sin(wb) - sin(wa) without cancellation for short intervals
                let dsin = 2.0 * (0.5 * w * (a + b)).cos() * (0.5 * w * width).sin();
                from * width + 0.5 * (to - from) * (width - dsin / w)
            }
        }
    }

    fn integral(&self) -> f64 {
        match self.profile {
            Profile::Constant { level } => level * self.duration,
            Profile::Ramp { from, to } => 0.5 * (from + to) * self.duration,
        }
    }

    /// Largest `|U|` over local times `[a, b]`; ramps are monotone.
    fn max_abs_local(&self, a: f64, b: f64) -> f64 {
        match self.profile {
            Profile::Constant { level } => level.abs(),
            Profile::Ramp { .. } => self.value_at(a).abs().max(self.value_at(b).abs()),
        }
    }
}

/// Ordered schedule of uniform potential energy `U(t)` on `[0, T]`.
///
/// [`PotentialProgram::new`] insists on continuity across segment boundaries;
/// [`PotentialProgram::with_steps`] also admits level jumps, which the elevator
/// programs use where the (cancelled) ascent and descent legs would be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct PotentialProgram {
    segments: Vec<Segment>,
    starts: Vec<f64>,
    total: f64,
}

impl PotentialProgram {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        Self::check_continuity(&segments)?;
        Self::with_steps(segments)
    }

    /// Like [`PotentialProgram::new`] but allows jumps between segments.
    pub fn with_steps(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter {
                name: "segments",
                reason: "a program needs at least one segment".into(),
            });
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.duration.is_finite() && seg.duration > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "duration",
                    reason: format!("segment {i} has duration {}", seg.duration),
                });
            }
            let levels = [seg.profile.start_level(), seg.profile.end_level()];
            if levels.iter().any(|l| !l.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "level",
                    reason: format!("segment {i} has a non-finite level"),
                });
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for seg in &segments {
            starts.push(acc);
            acc += seg.duration;
        }
        Ok(Self {
            segments,
            starts,
            total: acc,
        })
    }

    fn check_continuity(segments: &[Segment]) -> Result<()> {
        for (i, pair) in segments.windows(2).enumerate() {
            let end = pair[0].profile.end_level();
            let start = pair[1].profile.start_level();
            let scale = end.abs().max(start.abs()).max(1.0);
            if (end - start).abs() > CONTINUITY_TOLERANCE * scale {
                return Err(Error::InvalidParameter {
                    name: "segments",
                    reason: format!(
                        "discontinuity between segments {i} and {}: {end} -> {start}",
                        i + 1
                    ),
                });
            }
        }
        Ok(())
    }

    /// True when no segment boundary carries a level jump.
    pub fn is_continuous(&self) -> bool {
        Self::check_continuity(&self.segments).is_ok()
    }

    /// Zero potential for `duration`.
    pub fn zero(duration: f64) -> Result<Self> {
        Self::new(vec![Segment::constant(duration, 0.0)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.total
    }

    /// Closed-form `integral of U(t) dt` over the whole program.
    pub fn integral(&self) -> f64 {
        self.segments.iter().map(Segment::integral).sum()
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.check_support(t)?;
        let i = self.segment_index(t);
        Ok(self.segments[i].value_at(t - self.starts[i]))
    }

    /// Closed-form integral of `U` over `[a, b]`.
    pub fn integral_between(&self, a: f64, b: f64) -> Result<f64> {
        self.check_support(a)?;
        self.check_support(b)?;
        if b < a {
            return Ok(-self.integral_between(b, a)?);
        }
        Ok(self.fold_between(a, b, 0.0, |acc, seg, lo, hi| {
            acc + seg.integral_local(lo, hi)
        }))
    }

    /// Largest `|U(t)|` for `t` in `[a, b]`.
    pub fn max_abs_between(&self, a: f64, b: f64) -> Result<f64> {
        self.check_support(a)?;
        self.check_support(b)?;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Ok(self.fold_between(a, b, 0.0, |acc, seg, lo, hi| {
            acc.max(seg.max_abs_local(lo, hi))
        }))
    }

    pub fn max_abs(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                s.profile
                    .start_level()
                    .abs()
                    .max(s.profile.end_level().abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    /// Same schedule with every level shifted by `offset`.
    pub fn offset(&self, offset: f64) -> Result<Self> {
        Self::with_steps(
            self.segments
                .iter()
                .map(|s| Segment {
                    duration: s.duration,
                    profile: s.profile.shifted(offset),
                })
                .collect(),
        )
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &PotentialProgram) -> Result<Self> {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Self::with_steps(segments)
    }

    fn check_support(&self, t: f64) -> Result<()> {
        if t.is_finite() && (0.0..=self.total).contains(&t) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "t = {t} is outside the program support [0, {}]",
                self.total
            )))
        }
    }

    fn segment_index(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    fn fold_between<A>(
        &self,
        a: f64,
        b: f64,
        init: A,
        mut f: impl FnMut(A, &Segment, f64, f64) -> A,
    ) -> A {
        let mut acc = init;
        let mut i = self.segment_index(a);
        loop {
            let seg = &self.segments[i];
            let start = self.starts[i];
            let lo = (a - start).clamp(0.0, seg.duration);
            let hi = (b - start).clamp(lo, seg.duration);
            acc = f(acc, seg, lo, hi);
            i += 1;
            if i == self.segments.len() || self.starts[i] >= b {
                break;
            }
        }
        acc
    }
}

impl TryFrom<Vec<Segment>> for PotentialProgram {
    type Error = Error;

    fn try_from(segments: Vec<Segment>) -> Result<Self> {
        Self::with_steps(segments)
    }
}

impl From<PotentialProgram> for Vec<Segment> {
    fn from(program: PotentialProgram) -> Self {
        program.segments
    }
}
