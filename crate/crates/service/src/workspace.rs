//! On-disk workspace: uploaded recordings, cached analysis artifacts and a
//! JSON index tying them together.
//!
//! ```text
//! <root>/index.json
//! <root>/recordings/<id>/log.csv        raw upload
//! <root>/recordings/<id>/meta.json      raw metadata, if any
//! <root>/recordings/<id>/recording.json parsed recording
//! <root>/artifacts/<job>.{json,png,svg}
//! ```
//!
//! Job ids are derived from the cache key (recording id, kind, canonical
//! parameters), so an identical request maps to the same job and the same
//! artifact file.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use gazekit::ingest::{self, ParseReport, Recording, ScreenSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, AnalysisKind, AnalysisParams, Artifact};
use crate::error::{ApiError, ErrorBody};

const INDEX_FILE: &str = "index.json";
const INDEX_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisJob {
    pub id: String,
    pub recording_id: String,
    pub kind: AnalysisKind,
    /// Canonicalized parameters, defaults filled in.
    pub params: serde_json::Value,
    pub status: JobStatus,
    /// Artifact path relative to the workspace root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl AnalysisJob {
    fn advance(&mut self, next: JobStatus) {
        let ok = matches!(
            (self.status, next),
            (JobStatus::Queued, JobStatus::Running)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        );
        assert!(ok, "illegal job transition {:?} -> {next:?}", self.status);
        self.status = next;
    }

    fn is_final(&self) -> bool {
        matches!(self.status, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub id: String,
    pub screen: ScreenSpec,
    pub samples: usize,
    pub valid_samples: usize,
    pub span_ms: u64,
    pub has_meta: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    format: u32,
    next_recording: u64,
    recordings: BTreeMap<String, RecordingEntry>,
    jobs: BTreeMap<String, AnalysisJob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub id: String,
    pub samples: usize,
    pub report: ParseReport,
    /// Non-fatal metadata warnings (e.g. unknown fields).
    pub warnings: Vec<String>,
}

/// Outcome of [`Workspace::run_analysis`].
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub job: AnalysisJob,
    /// Served from an earlier identical request.
    pub cached: bool,
}

pub struct Workspace {
    root: PathBuf,
    index: RwLock<Index>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn rec_dir(id: &str) -> PathBuf {
    Path::new("recordings").join(id)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

/// `job-` plus the first 20 hex digits of SHA-256 over the cache key.
pub fn job_id(recording_id: &str, kind: AnalysisKind, canonical_params: &str) -> String {
    let mut h = Sha256::new();
    h.update(recording_id.as_bytes());
    h.update([0]);
    h.update(kind.as_str().as_bytes());
    h.update([0]);
    h.update(canonical_params.as_bytes());
    format!("job-{}", &hex::encode(h.finalize())[..20])
}

impl Workspace {
    /// Opens (creating if needed) the workspace at `root`. Index entries whose
    /// files have gone missing are dropped.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let root = root.into();
        fs::create_dir_all(root.join("recordings"))?;
        fs::create_dir_all(root.join("artifacts"))?;
        let index_path = root.join(INDEX_FILE);
        let mut index = if index_path.exists() {
            let raw = fs::read(&index_path)?;
            serde_json::from_slice::<Index>(&raw)
                .map_err(|e| ApiError::Storage(format!("{}: {e}", index_path.display())))?
        } else {
            Index {
                format: INDEX_FORMAT,
                ..Default::default()
            }
        };
        index
            .recordings
            .retain(|id, _| root.join(rec_dir(id)).join("recording.json").is_file());
        let recordings = &index.recordings;
        index.jobs.retain(|_, job| {
            recordings.contains_key(&job.recording_id)
                && job.is_final()
                && job.result.as_ref().is_none_or(|r| root.join(r).is_file())
        });
        let ws = Self {
            root,
            index: RwLock::new(index),
            locks: Mutex::new(HashMap::new()),
        };
        ws.persist(&ws.index.read().expect("index lock"))?;
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn persist(&self, index: &Index) -> Result<(), ApiError> {
        let bytes = serde_json::to_vec_pretty(index).expect("index serializes");
        write_atomic(&self.root.join(INDEX_FILE), &bytes)?;
        Ok(())
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Parses and stores a gaze log (plus optional trial metadata). The
    /// screen comes from `screen` or, failing that, from the metadata.
    /// Every upload gets a fresh id, identical payloads included.
    pub fn upload(
        &self,
        log: &str,
        screen: Option<ScreenSpec>,
        meta: Option<&str>,
    ) -> Result<UploadReceipt, ApiError> {
        let meta_doc = meta.map(ingest::parse_trial_meta).transpose()?;
        let screen = screen
            .or_else(|| meta_doc.as_ref().and_then(|m| m.screen))
            .ok_or_else(|| {
                ApiError::validation(
                    Some("screen".into()),
                    "screen size is required (WxH or metadata screen)",
                )
            })?;
        let (mut recording, report) = ingest::parse_gaze_log(log, screen)?;
        let warnings = meta_doc
            .as_ref()
            .map(|m| m.warnings.clone())
            .unwrap_or_default();
        if let Some(m) = meta_doc {
            recording.attach_meta(m)?;
        }

        let mut index = self.index.write().expect("index lock");
        index.next_recording += 1;
        let id = format!("rec-{:06}", index.next_recording);
        recording.id = id.clone();
        let dir = self.root.join(rec_dir(&id));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("log.csv"), log)?;
        if let Some(m) = meta {
            fs::write(dir.join("meta.json"), m)?;
        }
        let body = serde_json::to_vec(&recording).expect("recording serializes");
        write_atomic(&dir.join("recording.json"), &body)?;
        index.recordings.insert(
            id.clone(),
            RecordingEntry {
                id: id.clone(),
                screen,
                samples: recording.samples.len(),
                valid_samples: recording.valid_samples().count(),
                span_ms: recording.span_ms(),
                has_meta: meta.is_some(),
            },
        );
        self.persist(&index)?;
        Ok(UploadReceipt {
            id,
            samples: recording.samples.len(),
            report,
            warnings,
        })
    }

    pub fn recordings(&self) -> Vec<RecordingEntry> {
        self.index
            .read()
            .expect("index lock")
            .recordings
            .values()
            .cloned()
            .collect()
    }

    pub fn recording_entry(&self, id: &str) -> Result<RecordingEntry, ApiError> {
        self.index
            .read()
            .expect("index lock")
            .recordings
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("recording", id))
    }

    pub fn recording(&self, id: &str) -> Result<Recording, ApiError> {
        self.recording_entry(id)?;
        let raw = fs::read(self.root.join(rec_dir(id)).join("recording.json"))?;
        serde_json::from_slice(&raw).map_err(|e| ApiError::Storage(format!("recording {id}: {e}")))
    }

    /// The gaze log exactly as uploaded.
    pub fn raw_log(&self, id: &str) -> Result<String, ApiError> {
        self.recording_entry(id)?;
        Ok(fs::read_to_string(
            self.root.join(rec_dir(id)).join("log.csv"),
        )?)
    }

    pub fn job(&self, id: &str) -> Result<AnalysisJob, ApiError> {
        self.index
            .read()
            .expect("index lock")
            .jobs
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }

    /// Artifact bytes of a finished job.
    pub fn artifact(&self, job: &AnalysisJob) -> Result<Vec<u8>, ApiError> {
        let Some(path) = &job.result else {
            return Err(ApiError::not_found("artifact of job", &job.id));
        };
        Ok(fs::read(self.root.join(path))?)
    }

    /// Runs (or fetches from cache) an analysis. Domain failures produce a
    /// failed job; only a missing recording or invalid parameters are
    /// returned as errors.
    pub fn run_analysis(
        &self,
        recording_id: &str,
        kind: AnalysisKind,
        params: serde_json::Value,
    ) -> Result<JobOutcome, ApiError> {
        self.recording_entry(recording_id)?;
        let params = AnalysisParams::parse(kind, params)?;
        self.run_parsed(recording_id, &params)
    }

    pub fn run_parsed(
        &self,
        recording_id: &str,
        params: &AnalysisParams,
    ) -> Result<JobOutcome, ApiError> {
        let canonical = params.canonical();
        let id = job_id(recording_id, params.kind(), &canonical);
        let cached = |this: &Self| {
            this.index
                .read()
                .expect("index lock")
                .jobs
                .get(&id)
                .cloned()
        };
        if let Some(job) = cached(self) {
            return Ok(JobOutcome { job, cached: true });
        }

        let lock = self.lock_for(recording_id);
        let _guard = lock.lock().expect("recording lock");
        if let Some(job) = cached(self) {
            return Ok(JobOutcome { job, cached: true });
        }
        let recording = self.recording(recording_id)?;
        let mut job = AnalysisJob {
            id: id.clone(),
            recording_id: recording_id.to_string(),
            kind: params.kind(),
            params: serde_json::from_str(&canonical).expect("canonical parameters are JSON"),
            status: JobStatus::Queued,
            result: None,
            content_type: None,
            error: None,
        };
        job.advance(JobStatus::Running);
        match analysis::run(&recording, params) {
            Ok(artifact) => {
                let rel = format!("artifacts/{id}.{}", artifact.extension());
                write_atomic(&self.root.join(&rel), &artifact.bytes())?;
                job.result = Some(rel);
                job.content_type = Some(artifact.content_type().to_string());
                job.advance(JobStatus::Done);
            }
            Err(e @ (ApiError::Storage(_) | ApiError::NotFound { .. })) => return Err(e),
            Err(e) => {
                job.error = Some(e.body());
                job.advance(JobStatus::Failed);
            }
        }
        let mut index = self.index.write().expect("index lock");
        index.jobs.insert(id, job.clone());
        self.persist(&index)?;
        Ok(JobOutcome { job, cached: false })
    }

    /// Runs `params` and returns the artifact, or the job's error.
    pub fn run_to_artifact(
        &self,
        recording_id: &str,
        params: &AnalysisParams,
    ) -> Result<(AnalysisJob, Vec<u8>), ApiError> {
        let outcome = self.run_parsed(recording_id, params)?;
        if let Some(err) = &outcome.job.error {
            return Err(ApiError::Replay(err.clone()));
        }
        let bytes = self.artifact(&outcome.job)?;
        Ok((outcome.job, bytes))
    }

    /// Computes an artifact without touching the cache.
    pub fn compute(
        &self,
        recording_id: &str,
        params: &AnalysisParams,
    ) -> Result<Artifact, ApiError> {
        analysis::run(&self.recording(recording_id)?, params)
    }
}
