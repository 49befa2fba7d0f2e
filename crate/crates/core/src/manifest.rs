//! Per-clip and dataset manifests.
//!
//! Manifests are pretty-printed JSON. Serialization is deterministic: field
//! order is fixed by the struct definitions and maps are `BTreeMap`s.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::check::{CheckConfig, RuleId};
use crate::error::{Error, Result};
use crate::occluder::BankKind;

pub const MANIFEST_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Easy,
    Hard,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Easy => "easy",
            Strategy::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Strategy::Easy),
            "hard" => Ok(Strategy::Hard),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    AutoPass,
    AutoReject,
    HumanAccept,
    HumanReject,
}

/// Per-frame occluder placement: sub-pixel centers and scale multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccluderTrack {
    pub positions: Vec<(f64, f64)>,
    pub scales: Vec<f64>,
}

impl OccluderTrack {
    pub fn new(positions: Vec<(f64, f64)>, scales: Vec<f64>) -> Result<Self> {
        if positions.len() != scales.len() {
            return Err(Error::InvalidParameter(format!(
                "{} positions but {} scales",
                positions.len(),
                scales.len()
            )));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!("non-positive scale {s}")));
        }
        Ok(OccluderTrack { positions, scales })
    }

    pub fn empty() -> Self {
        OccluderTrack {
            positions: Vec::new(),
            scales: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Worst value of one heuristic rule across a clip's frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub rule_id: RuleId,
    pub passed: bool,
    pub worst_measured: f64,
    pub failing_frames: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub clip_id: String,
    pub strategy: Strategy,
    pub frame_count: usize,
    pub occluder_id: String,
    pub occluder_bank: Option<BankKind>,
    pub track: OccluderTrack,
    pub occlusion_rates: Vec<f64>,
    pub feather_radius: u32,
    pub rng_seed: u64,
    pub verdict: Verdict,
    pub reject_reasons: Vec<RuleId>,
    #[serde(default)]
    pub checks: Vec<RuleSummary>,
    /// Directory of the source candidate, for review tooling.
    #[serde(default)]
    pub source_dir: Option<String>,
}

impl ClipManifest {
    pub fn validate(&self) -> Result<()> {
        if self.occlusion_rates.len() != self.track.len() {
            return Err(Error::InvalidParameter(format!(
                "clip {}: {} rates for a track of {}",
                self.clip_id,
                self.occlusion_rates.len(),
                self.track.len()
            )));
        }
        if let Some(r) = self.occlusion_rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidParameter(format!(
                "clip {}: occlusion rate {r} outside [0,1]",
                self.clip_id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub shard_id: u32,
    /// Index range into `clips`, end exclusive.
    pub start: usize,
    pub end: usize,
    pub first_clip: String,
    pub last_clip: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedClip {
    pub clip_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub difficulty: Strategy,
    pub shard_size: usize,
    pub clips: Vec<ClipManifest>,
    pub shards: Vec<Shard>,
    #[serde(default)]
    pub skipped: Vec<SkippedClip>,
    #[serde(default)]
    pub check_config: Option<CheckConfig>,
    /// Effective pipeline configuration, when produced by a pipeline run.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

impl DatasetManifest {
    /// Sorts clips by id and assigns shards of `shard_size`.
    pub fn new(difficulty: Strategy, shard_size: usize, mut clips: Vec<ClipManifest>) -> Result<Self> {
        if shard_size == 0 {
            return Err(Error::Config("shard_size must be >= 1".into()));
        }
        clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        let shards = assign_shards(&clips, shard_size);
        let m = DatasetManifest {
            version: MANIFEST_VERSION.to_string(),
            difficulty,
            shard_size,
            clips,
            shards,
            skipped: Vec::new(),
            check_config: None,
            config: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn reshard(&mut self, shard_size: usize) -> Result<()> {
        if shard_size == 0 {
            return Err(Error::Config("shard_size must be >= 1".into()));
        }
        self.shard_size = shard_size;
        self.shards = assign_shards(&self.clips, shard_size);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.clips {
            if !seen.insert(c.clip_id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate clip id {}", c.clip_id)));
            }
            c.validate()?;
        }
        let mut next = 0;
        for s in &self.shards {
            if s.start != next || s.end <= s.start || s.end > self.clips.len() {
                return Err(Error::InvalidParameter(format!(
                    "shard {} [{}, {}) breaks the partition",
                    s.shard_id, s.start, s.end
                )));
            }
            next = s.end;
        }
        if next != self.clips.len() {
            return Err(Error::InvalidParameter("shards do not cover all clips".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.at(path))
    }

    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }
}

fn assign_shards(clips: &[ClipManifest], shard_size: usize) -> Vec<Shard> {
    clips
        .chunks(shard_size)
        .enumerate()
        .map(|(i, chunk)| Shard {
            shard_id: i as u32,
            start: i * shard_size,
            end: i * shard_size + chunk.len(),
            first_clip: chunk[0].clip_id.clone(),
            last_clip: chunk[chunk.len() - 1].clip_id.clone(),
        })
        .collect()
}

/// serde_json reports line/column; convert to a byte offset.
pub(crate) fn json_error(text: &str, e: serde_json::Error) -> Error {
    let mut offset = 0usize;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == e.line() {
            offset += e.column().saturating_sub(1).min(line.len());
            break;
        }
        offset += line.len();
    }
    Error::Malformed {
        what: "json",
        offset: offset as u64,
        reason: e.to_string(),
    }
}

pub fn clip_to_json(clip: &ClipManifest) -> String {
    let mut s = serde_json::to_string_pretty(clip).expect("clip manifest serializes");
    s.push('\n');
    s
}

pub fn clip_from_json(text: &str) -> Result<ClipManifest> {
    let c: ClipManifest = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
    c.validate()?;
    Ok(c)
}

/// Write via a temp file in the same directory and rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
