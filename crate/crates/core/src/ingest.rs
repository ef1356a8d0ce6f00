//! Gaze-log, trial-metadata and fixation-table I/O.
//!
//! Gaze logs are comma-separated text with the header `t_ms,x_px,y_px,valid`.
//! Coordinates are screen pixels with the origin at the top-left corner, x to
//! the right and y downward. Timestamps are milliseconds since recording
//! start; absolute wall-clock stamps (epoch milliseconds) and negative stamps
//! are rebased so the first retained sample sits at `t = 0`.
//!
//! Trial metadata is a JSON document with the optional sections `screen`,
//! `stimulus`, `aoi` and `responses`:
//!
//! ```json
//! {
//!   "screen": { "width": 1366, "height": 768 },
//!   "stimulus": { "path": "bar_graph.png", "width": 1366, "height": 768 },
//!   "aoi": [
//!     { "name": "deceptive", "rect": [100, 100, 300, 200] },
//!     { "name": "legend", "polygon": [[900, 50], [1300, 50], [1300, 140]] }
//!   ],
//!   "responses": [
//!     { "question_id": "Q1", "answer": "B", "t_ms": 10000, "correct": true }
//!   ]
//! }
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fixation::Fixation;
use crate::sequence::{AoiSpec, GeometryError};
use crate::Point;

/// Header line of the gaze-log format.
pub const GAZE_LOG_HEADER: &str = "t_ms,x_px,y_px,valid";
/// Header line of the fixation-table format.
pub const FIXATION_HEADER: &str = "onset_ms,duration_ms,cx_px,cy_px,n";

/// Fraction of malformed data rows above which a log is rejected.
const MAX_MALFORMED_FRACTION: f64 = 0.5;
/// Number of malformed-row diagnostics retained in a [`ParseReport`].
const MAX_REPORTED_ROWS: usize = 20;
/// Timestamps at or above this are epoch milliseconds (after March 1973).
const WALL_CLOCK_THRESHOLD_MS: i64 = 100_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("gaze log is empty")]
    EmptyLog,
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("corrupt log: {malformed} of {rows} data rows are malformed (first bad row: line {first_line})")]
    CorruptLog {
        malformed: usize,
        rows: usize,
        first_line: usize,
    },
    #[error("invalid screen size {width}x{height}")]
    InvalidScreen { width: i64, height: i64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("metadata error at {path}: {message}")]
    Meta { path: String, message: String },
    #[error("stimulus is {stimulus_w}x{stimulus_h} but screen is {screen_w}x{screen_h} and no scale factor is given")]
    StimulusMismatch {
        stimulus_w: u32,
        stimulus_h: u32,
        screen_w: u32,
        screen_h: u32,
    },
    #[error(
        "response {question_id} at t={t_ms} ms lies outside the recording span [0, {span_ms}]"
    )]
    ResponseOutOfSpan {
        question_id: String,
        t_ms: i64,
        span_ms: u64,
    },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::EmptyLog => "EmptyLog",
            IngestError::SchemaError(_) => "SchemaError",
            IngestError::CorruptLog { .. } => "CorruptLog",
            IngestError::InvalidScreen { .. } => "InvalidScreen",
            IngestError::Geometry(_) => "GeometryError",
            IngestError::Meta { .. } => "MetaError",
            IngestError::StimulusMismatch { .. } => "StimulusMismatch",
            IngestError::ResponseOutOfSpan { .. } => "ResponseOutOfSpan",
        }
    }
}

/// Screen (or stimulus) size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub width: u32,
    pub height: u32,
}

impl ScreenSpec {
    pub fn new(width: u32, height: u32) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidScreen {
                width: width as i64,
                height: height as i64,
            });
        }
        Ok(Self { width, height })
    }

    /// Whether `(x, y)` lies in the closed rectangle `[0, width] × [0, height]`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width as f64).contains(&x) && (0.0..=self.height as f64).contains(&y)
    }
}

impl std::str::FromStr for ScreenSpec {
    type Err = IngestError;

    /// Parses `WxH`, e.g. `1366x768`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IngestError::SchemaError(format!("screen size {s:?} is not of the form WxH"));
        let (w, h) = s.trim().split_once(['x', 'X', '×']).ok_or_else(bad)?;
        let w: u32 = w.trim().parse().map_err(|_| bad())?;
        let h: u32 = h.trim().parse().map_err(|_| bad())?;
        ScreenSpec::new(w, h)
    }
}

impl std::fmt::Display for ScreenSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// One timestamped on-screen gaze coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Milliseconds since recording start.
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A question answered during the trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEvent {
    pub question_id: String,
    pub answer: String,
    /// Milliseconds since recording start.
    pub t: i64,
    pub correct: Option<bool>,
}

/// The image shown during the recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub path: String,
    pub width: u32,
    pub height: u32,
    /// Stimulus pixels per screen pixel, required when the stimulus and the
    /// screen differ in size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// An ordered gaze-sample stream plus trial metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub id: String,
    pub screen: ScreenSpec,
    #[serde(default)]
    pub stimulus: Option<Stimulus>,
    pub samples: Vec<GazeSample>,
    #[serde(default)]
    pub responses: Vec<ResponseEvent>,
    #[serde(default)]
    pub aois: Vec<AoiSpec>,
    pub sample_rate_hz: f64,
}

impl Recording {
    pub fn valid_samples(&self) -> impl Iterator<Item = &GazeSample> {
        self.samples.iter().filter(|s| s.valid)
    }

    /// Time of the last sample, i.e. the recording span starting at zero.
    pub fn span_ms(&self) -> u64 {
        self.samples.last().map_or(0, |s| s.t)
    }

    /// Merges parsed trial metadata into this recording, validating the
    /// stimulus size and response timestamps.
    pub fn attach_meta(&mut self, meta: TrialMeta) -> Result<(), IngestError> {
        if let Some(stimulus) = &meta.stimulus {
            check_stimulus(stimulus, self.screen)?;
        }
        let span = self.span_ms();
        if let Some(r) = meta.responses.iter().find(|r| r.t < 0 || r.t as u64 > span) {
            return Err(IngestError::ResponseOutOfSpan {
                question_id: r.question_id.clone(),
                t_ms: r.t,
                span_ms: span,
            });
        }
        if meta.stimulus.is_some() {
            self.stimulus = meta.stimulus;
        }
        self.responses = meta.responses;
        self.aois = meta.aois;
        Ok(())
    }
}

fn check_stimulus(stimulus: &Stimulus, screen: ScreenSpec) -> Result<(), IngestError> {
    let same = stimulus.width == screen.width && stimulus.height == screen.height;
    if !same && stimulus.scale.is_none() {
        return Err(IngestError::StimulusMismatch {
            stimulus_w: stimulus.width,
            stimulus_h: stimulus.height,
            screen_w: screen.width,
            screen_h: screen.height,
        });
    }
    Ok(())
}

/// A data row that could not be parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedRow {
    /// 1-based line number in the source text.
    pub line: usize,
    pub reason: String,
}

/// Row accounting for a parsed gaze log.
///
/// `rows_in == samples_out + malformed + deduplicated` always holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_in: usize,
    pub samples_out: usize,
    pub malformed: usize,
    pub deduplicated: usize,
    /// Samples flagged valid in the source but outside the screen.
    pub out_of_range: usize,
    /// Amount subtracted from every source timestamp.
    pub rebased_by_ms: i64,
    /// The first few malformed rows.
    pub malformed_rows: Vec<MalformedRow>,
}

/// Parses a gaze log (see [`GAZE_LOG_HEADER`]) into a [`Recording`].
///
/// Samples are stably sorted by timestamp; later rows repeating a timestamp
/// are dropped and counted. Valid samples outside the screen are kept with
/// `valid = false`.
pub fn parse_gaze_log(
    raw: &str,
    screen: ScreenSpec,
) -> Result<(Recording, ParseReport), IngestError> {
    let mut lines = raw
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines.next().ok_or(IngestError::EmptyLog)?;
    let header = header.trim_start_matches('\u{feff}');
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns != GAZE_LOG_HEADER.split(',').collect::<Vec<_>>() {
        return Err(IngestError::SchemaError(format!(
            "expected header {GAZE_LOG_HEADER:?}, found {header:?}"
        )));
    }

    let mut report = ParseReport::default();
    let mut parsed: Vec<(i64, f64, f64, bool)> = Vec::new();
    for (line_no, line) in lines {
        report.rows_in += 1;
        match parse_sample_row(line) {
            Ok(row) => parsed.push(row),
            Err(reason) => {
                report.malformed += 1;
                if report.malformed_rows.len() < MAX_REPORTED_ROWS {
                    report.malformed_rows.push(MalformedRow {
                        line: line_no,
                        reason,
                    });
                }
            }
        }
    }
    if report.rows_in == 0 {
        return Err(IngestError::EmptyLog);
    }
    if report.malformed as f64 > MAX_MALFORMED_FRACTION * report.rows_in as f64 {
        return Err(IngestError::CorruptLog {
            malformed: report.malformed,
            rows: report.rows_in,
            first_line: report.malformed_rows.first().map_or(0, |r| r.line),
        });
    }
    if parsed.is_empty() {
        return Err(IngestError::EmptyLog);
    }

    // Stable: the first occurrence of a repeated timestamp survives the dedup.
    parsed.sort_by_key(|r| r.0);
    let before = parsed.len();
    parsed.dedup_by_key(|r| r.0);
    report.deduplicated = before - parsed.len();

    let first = parsed[0].0;
    let origin = if !(0..WALL_CLOCK_THRESHOLD_MS).contains(&first) {
        first
    } else {
        0
    };
    report.rebased_by_ms = origin;
    let samples: Vec<GazeSample> = parsed
        .into_iter()
        .map(|(t, x, y, valid)| {
            let in_range = screen.contains(x, y);
            if valid && !in_range {
                report.out_of_range += 1;
            }
            GazeSample {
                t: (t - origin) as u64,
                x,
                y,
                valid: valid && in_range,
            }
        })
        .collect();
    report.samples_out = samples.len();

    let recording = Recording {
        id: String::new(),
        screen,
        stimulus: None,
        sample_rate_hz: estimate_rate(&samples),
        samples,
        responses: Vec::new(),
        aois: Vec::new(),
    };
    Ok((recording, report))
}

fn parse_sample_row(line: &str) -> Result<(i64, f64, f64, bool), String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let t: i64 = fields[0]
        .parse()
        .map_err(|_| format!("timestamp {:?} is not an integer", fields[0]))?;
    let coord = |s: &str, name: &str| -> Result<f64, String> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("{name} {s:?} is not a finite number")),
        }
    };
    let x = coord(fields[1], "x")?;
    let y = coord(fields[2], "y")?;
    let valid = match fields[3] {
        "1" | "true" | "TRUE" | "True" => true,
        "0" | "false" | "FALSE" | "False" => false,
        other => return Err(format!("validity flag {other:?} is not 0/1")),
    };
    Ok((t, x, y, valid))
}

/// Nominal rate from the median inter-sample interval; 60 Hz when the
/// stream is too short to tell.
fn estimate_rate(samples: &[GazeSample]) -> f64 {
    let mut gaps: Vec<u64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    if gaps.is_empty() {
        return 60.0;
    }
    gaps.sort_unstable();
    let median = gaps[gaps.len() / 2].max(1);
    1000.0 / median as f64
}

/// Writes samples back out in the gaze-log format.
pub fn export_gaze_log(samples: &[GazeSample]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(GAZE_LOG_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.t, s.x, s.y, u8::from(s.valid));
    }
    out
}

/// Parsed trial-metadata document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialMeta {
    pub screen: Option<ScreenSpec>,
    pub stimulus: Option<Stimulus>,
    pub aois: Vec<AoiSpec>,
    /// Sorted by time.
    pub responses: Vec<ResponseEvent>,
    /// Unknown fields and other non-fatal issues.
    pub warnings: Vec<String>,
}

/// Parses a trial-metadata JSON document.
///
/// Unknown fields produce warnings. AOIs are given either as `rect:
/// [x0, y0, x1, y1]` (expanded to four vertices) or as `polygon: [[x, y], ...]`.
pub fn parse_trial_meta(raw: &str) -> Result<TrialMeta, IngestError> {
    let doc: Value = serde_json::from_str(raw).map_err(|e| IngestError::Meta {
        path: "$".into(),
        message: e.to_string(),
    })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| meta_err("$", "document must be an object"))?;

    let mut meta = TrialMeta::default();
    for (key, value) in obj {
        match key.as_str() {
            "screen" => meta.screen = Some(parse_screen(value, "$.screen")?),
            "stimulus" => meta.stimulus = Some(parse_stimulus(value, &mut meta.warnings)?),
            "aoi" => {
                let list = value
                    .as_array()
                    .ok_or_else(|| meta_err("$.aoi", "expected a list"))?;
                for (i, item) in list.iter().enumerate() {
                    meta.aois
                        .push(parse_aoi(item, &format!("$.aoi[{i}]"), &mut meta.warnings)?);
                }
            }
            "responses" => {
                let list = value
                    .as_array()
                    .ok_or_else(|| meta_err("$.responses", "expected a list"))?;
                for (i, item) in list.iter().enumerate() {
                    meta.responses.push(parse_response(
                        item,
                        &format!("$.responses[{i}]"),
                        &mut meta.warnings,
                    )?);
                }
            }
            other => meta
                .warnings
                .push(format!("unknown field $.{other} ignored")),
        }
    }
    meta.responses.sort_by_key(|r| r.t);
    if let (Some(stimulus), Some(screen)) = (&meta.stimulus, meta.screen) {
        check_stimulus(stimulus, screen)?;
    }
    Ok(meta)
}

fn meta_err(path: &str, message: &str) -> IngestError {
    IngestError::Meta {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn object<'a>(
    value: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>, IngestError> {
    value
        .as_object()
        .ok_or_else(|| meta_err(path, "expected an object"))
}

fn field_u32(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<u32, IngestError> {
    obj.get(key)
        .and_then(Value::as_u64)
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| meta_err(&format!("{path}.{key}"), "expected a non-negative integer"))
}

fn warn_unknown(
    obj: &serde_json::Map<String, Value>,
    known: &[&str],
    path: &str,
    warnings: &mut Vec<String>,
) {
    for key in obj.keys().filter(|k| !known.contains(&k.as_str())) {
        warnings.push(format!("unknown field {path}.{key} ignored"));
    }
}

fn parse_screen(value: &Value, path: &str) -> Result<ScreenSpec, IngestError> {
    let obj = object(value, path)?;
    ScreenSpec::new(
        field_u32(obj, "width", path)?,
        field_u32(obj, "height", path)?,
    )
}

fn parse_stimulus(value: &Value, warnings: &mut Vec<String>) -> Result<Stimulus, IngestError> {
    let path = "$.stimulus";
    let obj = object(value, path)?;
    warn_unknown(obj, &["path", "width", "height", "scale"], path, warnings);
    let file = obj
        .get("path")
        .and_then(Value::as_str)
        .ok_or_else(|| meta_err("$.stimulus.path", "expected a string"))?;
    let scale = match obj.get("scale") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(s) if s > 0.0 && s.is_finite() => Some(s),
            _ => return Err(meta_err("$.stimulus.scale", "expected a positive number")),
        },
    };
    Ok(Stimulus {
        path: file.to_string(),
        width: field_u32(obj, "width", path)?,
        height: field_u32(obj, "height", path)?,
        scale,
    })
}

fn parse_aoi(
    value: &Value,
    path: &str,
    warnings: &mut Vec<String>,
) -> Result<AoiSpec, IngestError> {
    let obj = object(value, path)?;
    warn_unknown(obj, &["name", "rect", "polygon"], path, warnings);
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| meta_err(&format!("{path}.name"), "expected a string"))?;
    let number = |v: &Value, p: &str| v.as_f64().ok_or_else(|| meta_err(p, "expected a number"));

    let vertices = match (obj.get("rect"), obj.get("polygon")) {
        (Some(rect), None) => {
            let rect_path = format!("{path}.rect");
            let r = rect
                .as_array()
                .filter(|a| a.len() == 4)
                .ok_or_else(|| meta_err(&rect_path, "expected [x0, y0, x1, y1]"))?;
            let c: Vec<f64> = r
                .iter()
                .map(|v| number(v, &rect_path))
                .collect::<Result<_, _>>()?;
            let (x0, x1) = (c[0].min(c[2]), c[0].max(c[2]));
            let (y0, y1) = (c[1].min(c[3]), c[1].max(c[3]));
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ]
        }
        (None, Some(poly)) => {
            let poly_path = format!("{path}.polygon");
            let list = poly
                .as_array()
                .ok_or_else(|| meta_err(&poly_path, "expected a vertex list"))?;
            list.iter()
                .enumerate()
                .map(|(i, v)| {
                    let vp = format!("{poly_path}[{i}]");
                    let pair = v
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .ok_or_else(|| meta_err(&vp, "expected [x, y]"))?;
                    Ok(Point::new(number(&pair[0], &vp)?, number(&pair[1], &vp)?))
                })
                .collect::<Result<Vec<_>, IngestError>>()?
        }
        (Some(_), Some(_)) => return Err(meta_err(path, "give either rect or polygon, not both")),
        (None, None) => return Err(meta_err(path, "missing rect or polygon")),
    };
    Ok(AoiSpec::new(name, vertices)?)
}

fn parse_response(
    value: &Value,
    path: &str,
    warnings: &mut Vec<String>,
) -> Result<ResponseEvent, IngestError> {
    let obj = object(value, path)?;
    warn_unknown(
        obj,
        &["question_id", "answer", "t_ms", "correct"],
        path,
        warnings,
    );
    let text = |key: &str| -> Result<String, IngestError> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            _ => Err(meta_err(&format!("{path}.{key}"), "expected a string")),
        }
    };
    let t = obj
        .get("t_ms")
        .and_then(|v| v.as_i64().or_else(|| v.as_f64().map(|f| f.round() as i64)))
        .ok_or_else(|| meta_err(&format!("{path}.t_ms"), "expected a number"))?;
    let correct = match obj.get("correct") {
        None | Some(Value::Null) => None,
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => return Err(meta_err(&format!("{path}.correct"), "expected a boolean")),
    };
    Ok(ResponseEvent {
        question_id: text("question_id")?,
        answer: text("answer")?,
        t,
        correct,
    })
}

/// Serializes fixations as comma-separated text with six decimals.
pub fn export_fixations(fixations: &[Fixation]) -> String {
    let mut out = String::with_capacity(48 * (fixations.len() + 1));
    out.push_str(FIXATION_HEADER);
    out.push('\n');
    for f in fixations {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{}",
            f.onset, f.duration, f.cx, f.cy, f.n
        );
    }
    out
}

/// Parses the output of [`export_fixations`].
pub fn parse_fixations(raw: &str) -> Result<Vec<Fixation>, IngestError> {
    let mut lines = raw
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(IngestError::EmptyLog)?;
    if header.trim_start_matches('\u{feff}').trim() != FIXATION_HEADER {
        return Err(IngestError::SchemaError(format!(
            "expected header {FIXATION_HEADER:?}, found {header:?}"
        )));
    }
    lines
        .map(|(line_no, line)| {
            let bad = |what: &str| {
                IngestError::SchemaError(format!("line {line_no}: {what} in {line:?}"))
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let num = |s: &str| -> Result<f64, IngestError> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad("non-numeric field"))
            };
            Ok(Fixation {
                onset: num(fields[0])?,
                duration: num(fields[1])?,
                cx: num(fields[2])?,
                cy: num(fields[3])?,
                n: fields[4]
                    .parse()
                    .map_err(|_| bad("non-integer sample count"))?,
            })
        })
        .collect()
}
