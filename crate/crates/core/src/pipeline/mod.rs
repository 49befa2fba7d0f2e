//! Batch dataset construction: ingest candidate clips, screen them, overlay
//! occluders, and emit a sharded manifest.

mod config;
mod ingest;
mod run;
pub mod seed;
mod stats;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{BankDirs, OverlayOverrides, PipelineConfig, SourceConfig};
pub use ingest::{ingest, open_candidate, write_candidate, Candidate, Ingested, LoadedCandidate, DEFAULT_FPS};
pub use run::{run_pipeline, write_clip, MANIFEST_FILE};
pub use stats::{rate_bin, stats, RateBin, StatsReport, RATE_BINS};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

/// Re-shards `manifest` and writes one self-contained manifest per shard as
/// `shard-NNNN.json` in `dir`. Returns the written paths in shard order.
pub fn write_shards(manifest: &mut DatasetManifest, shard_size: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    manifest.reshard(shard_size)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(manifest.shards.len());
    for s in &manifest.shards {
        let mut part = DatasetManifest::new(manifest.difficulty, shard_size, manifest.clips[s.start..s.end].to_vec())?;
        part.check_config = manifest.check_config.clone();
        part.config = manifest.config.clone();
        let path = dir.join(format!("shard-{:04}.json", s.shard_id));
        part.write_atomic(&path)?;
        paths.push(path);
    }
    Ok(paths)
}
