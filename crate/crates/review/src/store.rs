//! Review state: a base dataset manifest plus an append-only decision log.
//!
//! The log holds one JSON [`LogEntry`] per line and is fsynced after every
//! append. State is always the fold of the log over the manifest, so a
//! restart after a crash at any point reproduces the state of the last
//! fully written line. A partially written final line is discarded (and
//! truncated away before new appends).

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use occkit_core::manifest::{ClipManifest, DatasetManifest, Verdict};

use crate::error::{ReviewError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionVerdict {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCode {
    Occluded,
    BadMask,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub candidate_id: String,
    pub verdict: DecisionVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<ReasonCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub reviewer: String,
    /// UTC seconds.
    pub timestamp: u64,
}

/// One log line: a decision and the candidate version it produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Position in the log, from 1.
    pub seq: u64,
    /// Number of decisions on this candidate including this one.
    pub version: u64,
    #[serde(flatten)]
    pub decision: Decision,
}

/// What a reviewer submits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub verdict: DecisionVerdict,
    #[serde(default)]
    pub reason: Option<ReasonCode>,
    #[serde(default)]
    pub comment: Option<String>,
    pub reviewer: String,
    /// Defaults to the server clock.
    #[serde(default)]
    pub timestamp: Option<u64>,
    /// If given, the write only succeeds when the candidate is still at this
    /// version; otherwise the response is a conflict.
    #[serde(default)]
    pub expected_version: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
    AutoRejected,
    All,
}

impl Status {
    pub fn parse(s: &str) -> Option<Status> {
        Some(match s {
            "pending" => Status::Pending,
            "accepted" => Status::Accepted,
            "rejected" => Status::Rejected,
            "auto_rejected" | "auto_reject" => Status::AutoRejected,
            "all" => Status::All,
            _ => return None,
        })
    }

    fn matches(self, v: Verdict) -> bool {
        match self {
            Status::Pending => matches!(v, Verdict::Pending | Verdict::AutoPass),
            Status::Accepted => v == Verdict::HumanAccept,
            Status::Rejected => v == Verdict::HumanReject,
            Status::AutoRejected => v == Verdict::AutoReject,
            Status::All => true,
        }
    }
}

/// In-memory state: the fold of a log over the base manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ReviewState {
    base: DatasetManifest,
    index: HashMap<String, usize>,
    /// Latest entry per candidate.
    latest: BTreeMap<String, LogEntry>,
    history: Vec<LogEntry>,
}

impl ReviewState {
    pub fn new(base: DatasetManifest) -> Self {
        let index = base
            .clips
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clip_id.clone(), i))
            .collect();
        ReviewState {
            base,
            index,
            latest: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    /// Folds entries in order. Entries for unknown or auto-rejected
    /// candidates are ignored.
    pub fn fold<'a>(base: DatasetManifest, entries: impl IntoIterator<Item = &'a LogEntry>) -> Self {
        let mut s = ReviewState::new(base);
        for e in entries {
            s.apply(e.clone());
        }
        s
    }

    fn apply(&mut self, e: LogEntry) {
        match self.index.get(&e.decision.candidate_id) {
            Some(&i) if self.base.clips[i].verdict != Verdict::AutoReject => {
                self.latest.insert(e.decision.candidate_id.clone(), e.clone());
                self.history.push(e);
            }
            _ => warn!("ignoring log entry {} for {}", e.seq, e.decision.candidate_id),
        }
    }

    pub fn base(&self) -> &DatasetManifest {
        &self.base
    }

    pub fn history(&self) -> &[LogEntry] {
        &self.history
    }

    pub fn clip(&self, id: &str) -> Option<&ClipManifest> {
        self.index.get(id).map(|&i| &self.base.clips[i])
    }

    pub fn version(&self, id: &str) -> u64 {
        self.latest.get(id).map_or(0, |e| e.version)
    }

    pub fn latest(&self, id: &str) -> Option<&LogEntry> {
        self.latest.get(id)
    }

    /// Manifest verdict with the latest human decision applied.
    pub fn effective_verdict(&self, clip: &ClipManifest) -> Verdict {
        if clip.verdict == Verdict::AutoReject {
            return Verdict::AutoReject;
        }
        match self.latest.get(&clip.clip_id).map(|e| e.decision.verdict) {
            Some(DecisionVerdict::Accept) => Verdict::HumanAccept,
            Some(DecisionVerdict::Reject) => Verdict::HumanReject,
            None => clip.verdict,
        }
    }

    /// Clips with the given status, in clip id order, starting after `after`.
    pub fn list<'a>(&'a self, status: Status, after: Option<&'a str>) -> impl Iterator<Item = &'a ClipManifest> + 'a {
        self.base
            .clips
            .iter()
            .filter(move |c| after.is_none_or(|a| c.clip_id.as_str() > a))
            .filter(move |c| status.matches(self.effective_verdict(c)))
    }

    /// The base manifest with decisions applied to every clip's verdict.
    pub fn current_manifest(&self) -> DatasetManifest {
        let mut m = self.base.clone();
        for c in &mut m.clips {
            c.verdict = self.effective_verdict(c);
        }
        m
    }

    /// Only clips whose effective verdict is `verdict`, resharded.
    pub fn export(&self, verdict: Verdict) -> DatasetManifest {
        let clips = self
            .base
            .clips
            .iter()
            .filter(|c| self.effective_verdict(c) == verdict)
            .map(|c| ClipManifest {
                verdict,
                ..c.clone()
            })
            .collect();
        let mut m = DatasetManifest::new(self.base.difficulty, self.base.shard_size, clips)
            .expect("subset of a valid manifest is valid");
        m.check_config = self.base.check_config.clone();
        m.config = self.base.config.clone();
        m
    }
}

/// Parses log text. Returns the entries and the byte length of the valid
/// prefix; a malformed or unterminated final line is dropped, corruption
/// anywhere else is an error.
pub fn parse_log(text: &str) -> Result<(Vec<LogEntry>, usize)> {
    let mut entries = Vec::new();
    let mut good = 0;
    let mut rest = text;
    while !rest.is_empty() {
        let (line, complete) = match rest.find('\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let consumed = line.len() + complete as usize;
        let last = consumed == rest.len();
        if line.trim().is_empty() && complete {
            good += consumed;
            rest = &rest[consumed..];
            continue;
        }
        match serde_json::from_str::<LogEntry>(line) {
            Ok(e) if complete => entries.push(e),
            _ if last => {
                warn!("dropping truncated log tail at byte {good}");
                break;
            }
            Err(e) => {
                return Err(ReviewError::CorruptLog {
                    offset: good as u64,
                    reason: e.to_string(),
                })
            }
            Ok(_) => unreachable!("an unterminated line is always the last"),
        }
        good += consumed;
        rest = &rest[consumed..];
    }
    Ok((entries, good))
}

pub fn now_utc() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Writer {
    file: File,
    next_seq: u64,
    since_snapshot: u64,
}

/// Thread-safe review store. Reads take a shared lock; decision writes are
/// serialized through a single log writer and become visible only after the
/// log line is durable.
pub struct ReviewStore {
    state: RwLock<ReviewState>,
    writer: Mutex<Writer>,
    log_path: PathBuf,
    manifest_dir: PathBuf,
    /// Write `<log>.snapshot.json` every this many decisions (0 disables).
    pub snapshot_every: u64,
}

impl ReviewStore {
    /// Loads the manifest, replays the log (creating it if missing) and
    /// trims any truncated tail.
    pub fn open(manifest_path: &Path, log_path: &Path) -> Result<Self> {
        let base = DatasetManifest::read(manifest_path)?;
        let manifest_dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::with_manifest(base, manifest_dir, log_path)
    }

    pub fn with_manifest(base: DatasetManifest, manifest_dir: PathBuf, log_path: &Path) -> Result<Self> {
        let text = match fs::read(log_path) {
            Ok(b) => String::from_utf8_lossy(&b).into_owned(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(ReviewError::io(log_path, e)),
        };
        let (entries, good) = parse_log(&text)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .map_err(|e| ReviewError::io(log_path, e))?;
        if good < text.len() {
            file.set_len(good as u64).map_err(|e| ReviewError::io(log_path, e))?;
            file.sync_all().map_err(|e| ReviewError::io(log_path, e))?;
        }
        let next_seq = entries.last().map_or(1, |e| e.seq + 1);
        let state = ReviewState::fold(base, &entries);
        info!("replayed {} decisions from {}", entries.len(), log_path.display());
        Ok(ReviewStore {
            state: RwLock::new(state),
            writer: Mutex::new(Writer {
                file,
                next_seq,
                since_snapshot: 0,
            }),
            log_path: log_path.to_path_buf(),
            manifest_dir,
            snapshot_every: 100,
        })
    }

    pub fn read<T>(&self, f: impl FnOnce(&ReviewState) -> T) -> T {
        f(&self.state.read().unwrap_or_else(|p| p.into_inner()))
    }

    pub fn manifest_dir(&self) -> &Path {
        &self.manifest_dir
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    /// Appends a decision, fsyncs, then updates memory.
    pub fn decide(&self, candidate_id: &str, req: DecisionRequest) -> Result<LogEntry> {
        if req.reviewer.trim().is_empty() {
            return Err(ReviewError::BadRequest("reviewer must not be empty".into()));
        }
        let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let version = self.read(|s| {
            let clip = s.clip(candidate_id).ok_or_else(|| ReviewError::NotFound(candidate_id.to_string()))?;
            if clip.verdict == Verdict::AutoReject {
                return Err(ReviewError::NotReviewable(candidate_id.to_string()));
            }
            let current = s.version(candidate_id);
            match req.expected_version {
                Some(v) if v != current => Err(ReviewError::Conflict {
                    candidate_id: candidate_id.to_string(),
                    current_version: current,
                }),
                _ => Ok(current + 1),
            }
        })?;
        let entry = LogEntry {
            seq: w.next_seq,
            version,
            decision: Decision {
                candidate_id: candidate_id.to_string(),
                verdict: req.verdict,
                reason: req.reason,
                comment: req.comment,
                reviewer: req.reviewer,
                timestamp: req.timestamp.unwrap_or_else(now_utc),
            },
        };
        let mut line = serde_json::to_string(&entry).expect("log entry serializes");
        line.push('\n');
        w.file
            .write_all(line.as_bytes())
            .and_then(|_| w.file.sync_data())
            .map_err(|e| ReviewError::io(&self.log_path, e))?;
        w.next_seq += 1;
        self.state
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .apply(entry.clone());
        w.since_snapshot += 1;
        if self.snapshot_every > 0 && w.since_snapshot >= self.snapshot_every {
            w.since_snapshot = 0;
            if let Err(e) = self.snapshot() {
                warn!("snapshot failed: {e}");
            }
        }
        Ok(entry)
    }

    pub fn snapshot_path(&self) -> PathBuf {
        let mut p = self.log_path.clone().into_os_string();
        p.push(".snapshot.json");
        p.into()
    }

    /// Writes the current manifest (decisions applied) next to the log.
    pub fn snapshot(&self) -> Result<PathBuf> {
        let m = self.read(|s| s.current_manifest());
        let path = self.snapshot_path();
        m.write_atomic(&path)?;
        Ok(path)
    }
}
