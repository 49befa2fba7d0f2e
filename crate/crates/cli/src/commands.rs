use std::fs::{self, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use occkit_core::check::{run_amodal_check, CheckConfig};
use occkit_core::codec;
use occkit_core::image2video::{self, MotionKind, MotionParams};
use occkit_core::manifest::{DatasetManifest, SkippedClip, Strategy};
use occkit_core::metrics::{evaluate_clip, EvalOptions, MetricReport};
use occkit_core::occluder::{load_bank, BankKind};
use occkit_core::overlay::{synthesize_pair, StrategyConfig};
use occkit_core::pipeline::{self, open_candidate, seed, write_candidate, write_clip, PipelineConfig};
use occkit_core::stitch::{self, CommandCompleter, StitchConfig};
use occkit_core::{synthetic, Error, Frame, Mask, VideoClip};

use crate::{
    BankArg, CheckArgs, DemoArgs, EvalArgs, Img2vidArgs, KindArg, PipelineArgs, ServeArgs, ShardArgs, StatsArgs,
    StitchArgs, StrategyArg, SynthArgs,
};

/// Bad command-line values; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Easy => Strategy::Easy,
            StrategyArg::Hard => Strategy::Hard,
        }
    }
}

impl From<BankArg> for BankKind {
    fn from(b: BankArg) -> Self {
        match b {
            BankArg::Generic => BankKind::Generic,
            BankArg::Driving => BankKind::Driving,
        }
    }
}

fn print_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sorted_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    v.sort();
    Ok(v)
}

pub fn check(a: CheckArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            CheckConfig::from_toml(&text).map_err(|e| e.at(p))?
        }
        None => CheckConfig::default(),
    };
    if let Some(v) = a.boundary_margin {
        cfg.boundary_margin = v;
    }
    if let Some(v) = a.min_area_fraction {
        cfg.min_area_fraction = v;
    }
    if let Some(v) = a.max_hole_count {
        cfg.max_hole_count = v;
    }
    if let Some(v) = a.max_hole_area_fraction {
        cfg.max_hole_area_fraction = v;
    }
    if let Some(v) = a.depth_band {
        cfg.depth_band = v;
    }
    if let Some(v) = a.depth_threshold {
        cfg.depth_closer_fraction_threshold = v;
    }
    cfg.validate()?;

    let cand = open_candidate(&a.candidate, BankKind::Generic)?;
    let loaded = cand.load()?;
    let report = run_amodal_check(&loaded.masks, loaded.depths.as_deref(), &cfg)?;
    let out = serde_json::json!({
        "clip_id": cand.clip_id,
        "verdict": report.verdict,
        "reject_reasons": report.reject_reasons,
        "checks": report.summaries(),
        "frames": report.frames,
        "config": cfg,
    });
    print_json(&out, a.out.as_deref())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let kind: BankKind = a.bank_kind.into();
    let bank = load_bank(&a.occluder_bank, kind)?;
    if bank.is_empty() {
        return Err(Error::Config(format!("no occluders in {}", a.occluder_bank.display())).into());
    }
    let mut cfg = StrategyConfig::for_strategy(a.strategy.into());
    if let Some(r) = a.feather {
        cfg.feather_radius = r;
    }
    let (candidates, mut skipped) = if a.input.join("frames").is_dir() {
        (vec![open_candidate(&a.input, kind)?], Vec::new())
    } else {
        let found = pipeline::ingest(&a.input, kind)?;
        (found.candidates, found.skipped)
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut clips = Vec::new();
    for cand in &candidates {
        let loaded = match cand.load() {
            Ok(l) => l,
            Err(e) => {
                warn!("skipping {}: {e}", cand.clip_id);
                skipped.push(SkippedClip { clip_id: cand.clip_id.clone(), reason: e.to_string() });
                continue;
            }
        };
        let s = seed::clip_seed(a.seed, &cand.clip_id);
        let occ = &bank[seed::occluder_index(s, bank.len())];
        match synthesize_pair(&cand.clip_id, &loaded.clip, &loaded.masks, occ, &cfg, s) {
            Ok(pair) => {
                let mut m = pair.manifest.clone();
                m.source_dir = Some(cand.dir.to_string_lossy().into_owned());
                write_clip(&a.out.join(&cand.clip_id), &pair, &loaded.masks, &m)?;
                info!("{}: occluder {} rates {:?}", cand.clip_id, occ.id, m.occlusion_rates);
                clips.push(m);
            }
            Err(e) => {
                warn!("skipping {}: {e}", cand.clip_id);
                skipped.push(SkippedClip { clip_id: cand.clip_id.clone(), reason: e.to_string() });
            }
        }
    }
    let mut manifest = DatasetManifest::new(cfg.strategy, 256, clips)?;
    manifest.skipped = skipped;
    manifest.write_atomic(&a.out.join(pipeline::MANIFEST_FILE))?;
    info!("{} pairs written, {} skipped", manifest.clips.len(), manifest.skipped.len());
    Ok(())
}

pub fn img2vid(a: Img2vidArgs) -> Result<()> {
    let img = codec::read_frame(&a.image)?.without_alpha();
    let mask = codec::read_mask(&a.mask)?;
    let kind = match a.kind {
        KindArg::Zoom => MotionKind::Zoom,
        KindArg::Move => MotionKind::ParallelMove,
        KindArg::Warp => MotionKind::Warp,
    };
    let mut motion = if a.randomize {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        MotionParams::random(kind, a.frames, img.width(), img.height(), &mut rng)
    } else {
        MotionParams::identity(kind, a.frames)
    };
    if let Some(z) = a.zoom_end {
        motion.zoom_end = z;
    }
    if let Some(d) = a.displacement {
        motion.displacement = d;
    }
    if let Some(h) = a.homography {
        motion.homography_end = h;
    }
    let seq = image2video::run(&img, &mask, &motion).map_err(|e| match e {
        Error::InvalidParameter(_) | Error::InvalidFrameCount(_) => anyhow::Error::new(UsageError(e.to_string())),
        other => other.into(),
    })?;
    write_candidate(&a.out, &seq.clip, &seq.masks, None)?;
    print_json(&motion, Some(&a.out.join("motion.json")))?;
    info!("{} frames written to {}", seq.clip.len(), a.out.display());
    Ok(())
}

pub fn stitch(a: StitchArgs) -> Result<()> {
    let cfg = StitchConfig { k: a.k, m: a.m, mask_threshold: a.mask_threshold };
    cfg.validate()?;
    let mut completer = CommandCompleter::from_uri(&a.completer)?;
    let cand = open_candidate(&a.clip, BankKind::Generic)?;
    let loaded = cand.load()?;
    let out = stitch::stitch(&loaded.clip, &loaded.masks, &mut completer, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (i, f) in out.frames().iter().enumerate() {
        codec::write_frame(&a.out.join(codec::frame_file_name(i)), f)?;
    }
    info!("{} windows, {} frames written", stitch::plan_windows(out.len(), &cfg)?.len(), out.len());
    Ok(())
}

fn read_clip(dir: &Path) -> Result<VideoClip> {
    let frames = sorted_pngs(dir)?
        .iter()
        .map(|p| Ok(codec::read_frame(p)?.without_alpha()))
        .collect::<Result<Vec<Frame>>>()?;
    if frames.is_empty() {
        bail!("no frames in {}", dir.display());
    }
    Ok(VideoClip::new(frames, pipeline::DEFAULT_FPS)?)
}

fn read_masks(dir: &Path) -> Result<Vec<Mask>> {
    sorted_pngs(dir)?.iter().map(|p| Ok(codec::read_mask(p)?)).collect()
}

fn eval_one(id: &str, pred: &Path, gt: &Path, opts: &EvalOptions) -> Result<MetricReport> {
    let p = read_clip(pred)?;
    let g = read_clip(&gt.join("gt"))?;
    let gm = read_masks(&gt.join("gt_masks"))?;
    let mut report = evaluate_clip(&p, &g, &gm, None, opts).with_context(|| format!("clip {id}"))?;
    report.clip_id = Some(id.to_string());
    Ok(report)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let opts = EvalOptions { dilation: a.dilation, resize_256: a.resize_256, mask_threshold: a.mask_threshold };
    let mut reports = Vec::new();
    if a.gt.join("gt").is_dir() {
        let id = a.gt.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        reports.push(eval_one(&id, &a.pred, &a.gt, &opts)?);
    } else {
        let mut ids: Vec<String> = fs::read_dir(&a.gt)
            .with_context(|| format!("reading {}", a.gt.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("gt").is_dir())
            .filter_map(|e| e.file_name().to_str().map(str::to_string))
            .collect();
        ids.sort();
        if ids.is_empty() {
            return Err(UsageError(format!("{} holds no gt/ clips", a.gt.display())).into());
        }
        for id in ids {
            reports.push(eval_one(&id, &a.pred.join(&id), &a.gt.join(&id), &opts)?);
        }
    }
    if let Some(csv) = &a.csv {
        let fresh = !csv.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv)
            .with_context(|| format!("opening {}", csv.display()))?;
        if fresh {
            writeln!(f, "{}", MetricReport::csv_header())?;
        }
        for r in &reports {
            writeln!(f, "{}", r.csv_row())?;
        }
    }
    print_json(&reports, a.out.as_deref())
}

pub fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(s) = a.root_seed {
        cfg.root_seed = s;
    }
    if let Some(s) = a.strategy {
        cfg.strategy = s.into();
    }
    if let Some(w) = a.workers {
        cfg.worker_count = w;
    }
    if let Some(n) = a.shard_size {
        cfg.shard_size = n;
    }
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    let m = pipeline::run_pipeline(&cfg)?;
    let summary = serde_json::json!({
        "manifest": cfg.output_dir.join(pipeline::MANIFEST_FILE),
        "clips": m.clips.len(),
        "skipped": m.skipped.len(),
        "shards": m.shards.len(),
    });
    print_json(&summary, None)
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let m = DatasetManifest::read(&a.manifest)?;
    print_json(&pipeline::stats(&m), None)
}

pub fn shard(a: ShardArgs) -> Result<()> {
    let mut m = DatasetManifest::read(&a.manifest)?;
    let paths = pipeline::write_shards(&mut m, a.shard_size, &a.out)?;
    print_json(&paths, None)
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let cfg = occkit_review::ServeConfig {
        manifest: a.manifest,
        log: a.log,
        addr: SocketAddr::new(a.host, a.port),
        ui_dir: a.ui,
        snapshot_every: a.snapshot_every,
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(occkit_review::serve(cfg))?;
    Ok(())
}

pub fn demo(a: DemoArgs) -> Result<()> {
    let clips = a.out.join("clips");
    fs::create_dir_all(&clips).with_context(|| format!("creating {}", clips.display()))?;
    for i in 0..a.clips {
        let s = synthetic::scene_clip(a.seed.wrapping_add(i as u64), a.frames, a.size, a.size);
        write_candidate(&clips.join(format!("clip-{i:04}")), &s.clip, &s.masks, Some(&s.depths))?;
    }
    for (kind, count) in [(BankKind::Generic, 12), (BankKind::Driving, 6)] {
        let dir = a.out.join("occluders").join(kind.as_str());
        fs::create_dir_all(&dir)?;
        let side = (a.size / 3).max(16);
        for (i, occ) in synthetic::occluder_bank(a.seed ^ kind as u64, count, kind, side).iter().enumerate() {
            codec::write_frame(&dir.join(format!("occ-{i:03}.png")), occ.rgba())?;
        }
    }
    let config = format!(
        "root_seed = {}\nstrategy = \"easy\"\noutput_dir = \"dataset\"\nshard_size = 64\n\n\
         [[sources]]\npath = \"clips\"\ndomain = \"generic\"\n\n\
         [banks]\ngeneric = \"occluders/generic\"\ndriving = \"occluders/driving\"\n",
        a.seed
    );
    fs::write(a.out.join("pipeline.toml"), config)?;
    info!("wrote {} clips and banks; run `occkit pipeline --config {}`", a.clips, a.out.join("pipeline.toml").display());
    Ok(())
}
