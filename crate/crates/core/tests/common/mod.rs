#![allow(dead_code)]

use std::fs;
use std::path::Path;

use occkit_core::codec;
use occkit_core::occluder::BankKind;
use occkit_core::pipeline::{write_candidate, BankDirs, OverlayOverrides, PipelineConfig, SourceConfig};
use occkit_core::check::CheckConfig;
use occkit_core::manifest::Strategy;
use occkit_core::synthetic;

/// Writes `count` procedural clips under `dir/clip-NNN`.
pub fn write_scene_clips(dir: &Path, count: usize, frames: usize, side: u32, seed: u64) {
    for i in 0..count {
        let s = synthetic::scene_clip(seed + i as u64, frames, side, side);
        write_candidate(&dir.join(format!("clip-{i:03}")), &s.clip, &s.masks, Some(&s.depths)).unwrap();
    }
}

pub fn write_bank(dir: &Path, kind: BankKind, count: usize, seed: u64) {
    fs::create_dir_all(dir).unwrap();
    for (i, occ) in synthetic::occluder_bank(seed, count, kind, 120).iter().enumerate() {
        codec::write_frame(&dir.join(format!("occ-{i:03}.png")), occ.rgba()).unwrap();
    }
}

/// Clips + generic bank under `root`, output to `root/out`.
pub fn setup(root: &Path, clips: usize, frames: usize, side: u32, strategy: Strategy) -> PipelineConfig {
    write_scene_clips(&root.join("clips"), clips, frames, side, 1000);
    write_bank(&root.join("bank"), BankKind::Generic, 6, 77);
    PipelineConfig {
        root_seed: 2024,
        strategy,
        sources: vec![SourceConfig {
            path: root.join("clips"),
            domain: BankKind::Generic,
        }],
        banks: BankDirs {
            generic: Some(root.join("bank")),
            driving: None,
        },
        check: CheckConfig::default(),
        overlay: OverlayOverrides::default(),
        shard_size: 8,
        worker_count: 2,
        output_dir: root.join("out"),
    }
}

/// Every file under `dir`, as (relative path, bytes), sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((p.strip_prefix(base).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    walk(dir, dir, &mut out);
    out.sort();
    out
}
