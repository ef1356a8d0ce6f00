//! Dispersion-threshold (I-DT) fixation detection.
//!
//! A fixation is a maximal run of valid samples whose dispersion
//! `(max_x - min_x) + (max_y - min_y)` stays within `dispersion_px` and whose
//! time span reaches `min_duration_ms`. Stretches without valid data (invalid
//! samples or missing rows) of at most `max_gap_ms` are bridged; longer ones
//! split the stream so that no fixation crosses them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GazeSample, Recording, ResponseEvent};
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixationError {
    #[error("recording has no valid samples")]
    NoValidSamples,
    #[error("invalid fixation config: {0}")]
    InvalidConfig(&'static str),
}

impl FixationError {
    pub fn code(&self) -> &'static str {
        match self {
            FixationError::NoValidSamples => "NoValidSamples",
            FixationError::InvalidConfig(_) => "ValidationError",
        }
    }
}

/// A dispersion-stable gaze segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    /// Centroid, pixels.
    pub cx: f64,
    pub cy: f64,
    /// Milliseconds since recording start.
    pub onset: f64,
    /// Milliseconds from the first to the last member sample.
    pub duration: f64,
    /// Number of valid member samples.
    pub n: usize,
}

impl Fixation {
    pub fn centroid(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixationConfig {
    pub dispersion_px: f64,
    pub min_duration_ms: u64,
    pub max_gap_ms: u64,
}

impl Default for FixationConfig {
    fn default() -> Self {
        Self {
            dispersion_px: 60.0,
            min_duration_ms: 100,
            max_gap_ms: 75,
        }
    }
}

impl FixationConfig {
    pub fn validate(&self) -> Result<(), FixationError> {
        if !(self.dispersion_px.is_finite() && self.dispersion_px > 0.0) {
            return Err(FixationError::InvalidConfig(
                "dispersion_px must be positive",
            ));
        }
        if self.min_duration_ms == 0 {
            return Err(FixationError::InvalidConfig(
                "min_duration_ms must be positive",
            ));
        }
        if self.max_gap_ms == 0 {
            return Err(FixationError::InvalidConfig("max_gap_ms must be positive"));
        }
        Ok(())
    }
}

/// Segments a recording into fixations, ordered by onset and disjoint in time.
pub fn detect_fixations(
    recording: &Recording,
    cfg: &FixationConfig,
) -> Result<Vec<Fixation>, FixationError> {
    cfg.validate()?;
    let valid: Vec<&GazeSample> = recording.valid_samples().collect();
    if valid.is_empty() {
        return Err(FixationError::NoValidSamples);
    }

    let mut fixations = Vec::new();
    let mut seg_start = 0;
    for i in 1..=valid.len() {
        let split = i == valid.len() || valid[i].t - valid[i - 1].t > cfg.max_gap_ms;
        if split {
            detect_in_segment(&valid[seg_start..i], cfg, &mut fixations);
            seg_start = i;
        }
    }
    Ok(fixations)
}

#[derive(Clone, Copy)]
struct Bounds {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Bounds {
    fn of(s: &GazeSample) -> Self {
        Self {
            min_x: s.x,
            max_x: s.x,
            min_y: s.y,
            max_y: s.y,
        }
    }

    fn with(mut self, s: &GazeSample) -> Self {
        self.min_x = self.min_x.min(s.x);
        self.max_x = self.max_x.max(s.x);
        self.min_y = self.min_y.min(s.y);
        self.max_y = self.max_y.max(s.y);
        self
    }

    fn dispersion(&self) -> f64 {
        (self.max_x - self.min_x) + (self.max_y - self.min_y)
    }
}

fn detect_in_segment(samples: &[&GazeSample], cfg: &FixationConfig, out: &mut Vec<Fixation>) {
    let len = samples.len();
    let mut start = 0;
    while start < len {
        // Smallest window starting here that spans the minimum duration.
        let t0 = samples[start].t;
        let Some(mut end) = (start..len).find(|&j| samples[j].t - t0 >= cfg.min_duration_ms) else {
            break;
        };
        let mut bounds = samples[start + 1..=end]
            .iter()
            .fold(Bounds::of(samples[start]), |b, s| b.with(s));
        if bounds.dispersion() > cfg.dispersion_px {
            start += 1;
            continue;
        }
        while end + 1 < len {
            let grown = bounds.with(samples[end + 1]);
            if grown.dispersion() > cfg.dispersion_px {
                break;
            }
            bounds = grown;
            end += 1;
        }
        out.push(summarize(&samples[start..=end]));
        start = end + 1;
    }
}

fn summarize(members: &[&GazeSample]) -> Fixation {
    let n = members.len();
    let (sx, sy) = members
        .iter()
        .fold((0.0, 0.0), |(sx, sy), s| (sx + s.x, sy + s.y));
    let first = members[0].t;
    let last = members[n - 1].t;
    Fixation {
        cx: sx / n as f64,
        cy: sy / n as f64,
        onset: first as f64,
        duration: (last - first) as f64,
        n,
    }
}

/// Fixation and timing aggregates for one answered question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSummary {
    pub question_id: String,
    pub fixation_count: usize,
    pub total_fixation_ms: f64,
    /// Zero when the interval holds no fixation.
    pub mean_fixation_ms: f64,
    /// Time since the previous response (or since recording start).
    pub latency_ms: i64,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub questions: Vec<QuestionSummary>,
    /// Time of the last response.
    pub total_time_ms: i64,
    pub correct_count: usize,
    /// Mean latency over questions marked correct, if any are.
    pub mean_correct_latency_ms: Option<f64>,
    /// Fixations with onset at or after the last response.
    pub unassigned_fixations: usize,
}

/// Per-question aggregates. Question `i` owns the fixations whose onset lies
/// in `[t(response_{i-1}), t(response_i))`, with the first interval starting
/// at zero.
pub fn fixation_summary(fixations: &[Fixation], responses: &[ResponseEvent]) -> TrialSummary {
    let mut responses: Vec<&ResponseEvent> = responses.iter().collect();
    responses.sort_by_key(|r| r.t);

    let mut questions = Vec::with_capacity(responses.len());
    let mut prev = 0i64;
    for r in &responses {
        let (lo, hi) = (prev as f64, r.t as f64);
        let (count, total) = fixations
            .iter()
            .filter(|f| f.onset >= lo && f.onset < hi)
            .fold((0usize, 0.0), |(c, t), f| (c + 1, t + f.duration));
        questions.push(QuestionSummary {
            question_id: r.question_id.clone(),
            fixation_count: count,
            total_fixation_ms: total,
            mean_fixation_ms: if count == 0 {
                0.0
            } else {
                total / count as f64
            },
            latency_ms: r.t - prev,
            correct: r.correct,
        });
        prev = r.t;
    }

    let correct: Vec<i64> = questions
        .iter()
        .filter(|q| q.correct == Some(true))
        .map(|q| q.latency_ms)
        .collect();
    let last = responses.last().map(|r| r.t);
    TrialSummary {
        total_time_ms: last.unwrap_or(0),
        correct_count: correct.len(),
        mean_correct_latency_ms: (!correct.is_empty())
            .then(|| correct.iter().sum::<i64>() as f64 / correct.len() as f64),
        unassigned_fixations: match last {
            Some(t) => fixations.iter().filter(|f| f.onset >= t as f64).count(),
            None => fixations.len(),
        },
        questions,
    }
}
