use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::ingest::{ingest, Candidate};
use super::seed::{clip_seed, occluder_index};
use crate::check::run_amodal_check;
use crate::codec;
use crate::error::{Error, Result};
use crate::manifest::{write_atomic, clip_to_json, ClipManifest, DatasetManifest, OccluderTrack, SkippedClip, Verdict};
use crate::occluder::{load_bank, BankKind, OccluderAsset};
use crate::overlay::{synthesize_pair, StrategyConfig, SynthesizedPair};

pub const MANIFEST_FILE: &str = "manifest.json";

enum Outcome {
    Clip(ClipManifest),
    Skipped(SkippedClip),
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    strategy: StrategyConfig,
    banks: BTreeMap<BankKind, Vec<OccluderAsset>>,
}

/// Runs ingest → amodal check → synthesis over every source and writes
/// `<output_dir>/<clip_id>/{occluded,gt,gt_masks,occluder_masks}/NNNN.png`,
/// a per-clip `manifest.json`, and the dataset `manifest.json` (atomically).
///
/// Per-clip problems are recorded as skipped clips; only failures that
/// affect the whole run (bad config, unreadable source, unwritable output)
/// are returned as errors.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let mut banks = BTreeMap::new();
    for s in &cfg.sources {
        if banks.contains_key(&s.domain) {
            continue;
        }
        let dir = cfg.banks.get(s.domain).expect("validated");
        let bank = load_bank(dir, s.domain)?;
        if bank.is_empty() {
            return Err(Error::Config(format!("{} bank {} has no occluders", s.domain.as_str(), dir.display())));
        }
        banks.insert(s.domain, bank);
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut skipped = Vec::new();
    for s in &cfg.sources {
        let found = ingest(&s.path, s.domain)?;
        candidates.extend(found.candidates);
        skipped.extend(found.skipped);
    }
    candidates.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    // the same id in two sources: keep the first (sources are ordered)
    let mut unique: Vec<Candidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if unique.last().is_some_and(|p| p.clip_id == c.clip_id) {
            skipped.push(SkippedClip {
                reason: format!("duplicate clip id (also in {})", unique.last().unwrap().dir.display()),
                clip_id: c.clip_id,
            });
        } else {
            unique.push(c);
        }
    }
    info!("{} candidates, {} skipped during ingest", unique.len(), skipped.len());

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let ctx = Ctx {
        cfg,
        strategy: cfg.strategy_config(),
        banks,
    };
    let workers = if cfg.worker_count == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.worker_count
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<Outcome>> = pool.install(|| unique.par_iter().map(|c| process(&ctx, c)).collect());

    let mut clips = Vec::new();
    for o in outcomes {
        match o? {
            Outcome::Clip(c) => clips.push(c),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    skipped.sort_by(|a, b| a.clip_id.cmp(&b.clip_id).then_with(|| a.reason.cmp(&b.reason)));

    let mut manifest = DatasetManifest::new(cfg.strategy, cfg.shard_size, clips)?;
    manifest.skipped = skipped;
    manifest.check_config = Some(cfg.check.clone());
    manifest.config = Some(cfg.embedded());
    manifest.write_atomic(&cfg.output_dir.join(MANIFEST_FILE))?;
    info!(
        "wrote {} clips ({} skipped) to {}",
        manifest.clips.len(),
        manifest.skipped.len(),
        cfg.output_dir.display()
    );
    Ok(manifest)
}

fn process(ctx: &Ctx, cand: &Candidate) -> Result<Outcome> {
    let skip = |reason: String| {
        warn!("skipping {}: {reason}", cand.clip_id);
        Ok(Outcome::Skipped(SkippedClip {
            clip_id: cand.clip_id.clone(),
            reason,
        }))
    };
    let seed = clip_seed(ctx.cfg.root_seed, &cand.clip_id);
    let loaded = match cand.load() {
        Ok(l) => l,
        Err(e) => return skip(format!("load: {e}")),
    };
    let report = match run_amodal_check(&loaded.masks, loaded.depths.as_deref(), &ctx.cfg.check) {
        Ok(r) => r,
        Err(e) => return skip(format!("amodal check: {e}")),
    };
    let source_dir = Some(cand.dir.to_string_lossy().into_owned());
    if report.verdict == Verdict::AutoReject {
        return Ok(Outcome::Clip(ClipManifest {
            clip_id: cand.clip_id.clone(),
            strategy: ctx.strategy.strategy,
            frame_count: cand.frame_count(),
            occluder_id: String::new(),
            occluder_bank: None,
            track: OccluderTrack::empty(),
            occlusion_rates: Vec::new(),
            feather_radius: ctx.strategy.feather_radius,
            rng_seed: seed,
            verdict: Verdict::AutoReject,
            reject_reasons: report.reject_reasons.clone(),
            checks: report.summaries(),
            source_dir,
        }));
    }

    let bank = &ctx.banks[&cand.domain];
    let occ = &bank[occluder_index(seed, bank.len())];
    let pair = match synthesize_pair(&cand.clip_id, &loaded.clip, &loaded.masks, occ, &ctx.strategy, seed) {
        Ok(p) => p,
        Err(e) => return skip(format!("synthesis: {e}")),
    };
    let mut manifest = pair.manifest.clone();
    manifest.checks = report.summaries();
    manifest.source_dir = source_dir;
    write_clip(&ctx.cfg.output_dir.join(&cand.clip_id), &pair, &loaded.masks, &manifest)?;
    Ok(Outcome::Clip(manifest))
}

/// Output layout for one synthesized pair.
pub fn write_clip(dir: &Path, pair: &SynthesizedPair, gt_masks: &[crate::mask::Mask], manifest: &ClipManifest) -> Result<()> {
    let subdirs = ["occluded", "gt", "gt_masks", "occluder_masks"];
    for s in subdirs {
        let d = dir.join(s);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for i in 0..pair.occluded.len() {
        let name = codec::frame_file_name(i);
        codec::write_frame(&dir.join("occluded").join(&name), &pair.occluded.frames()[i])?;
        codec::write_frame(&dir.join("gt").join(&name), &pair.gt.frames()[i])?;
        codec::write_mask(&dir.join("gt_masks").join(&name), &gt_masks[i])?;
        codec::write_mask(&dir.join("occluder_masks").join(&name), &pair.footprints[i])?;
    }
    write_atomic(&dir.join(MANIFEST_FILE), clip_to_json(manifest).as_bytes())
}
