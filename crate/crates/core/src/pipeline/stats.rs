use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::manifest::DatasetManifest;

pub const RATE_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Distribution summary of a dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub clips: usize,
    pub skipped: usize,
    /// Frames with a recorded occlusion rate.
    pub frames: usize,
    pub strategy_counts: BTreeMap<String, usize>,
    pub verdict_counts: BTreeMap<String, usize>,
    /// Clips failing each rule.
    pub reject_reasons: BTreeMap<String, usize>,
    /// Synthesized clips per occluder bank.
    pub bank_usage: BTreeMap<String, usize>,
    pub occluder_usage: BTreeMap<String, usize>,
    /// Ten equal bins over [0, 1]; a rate of exactly 1 lands in the last bin.
    pub rate_histogram: Vec<RateBin>,
    pub mean_rate: Option<f64>,
}

fn key<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn rate_bin(rate: f64) -> usize {
    ((rate * RATE_BINS as f64).floor() as usize).min(RATE_BINS - 1)
}

pub fn stats(manifest: &DatasetManifest) -> StatsReport {
    let mut r = StatsReport {
        clips: manifest.clips.len(),
        skipped: manifest.skipped.len(),
        frames: 0,
        strategy_counts: BTreeMap::new(),
        verdict_counts: BTreeMap::new(),
        reject_reasons: BTreeMap::new(),
        bank_usage: BTreeMap::new(),
        occluder_usage: BTreeMap::new(),
        rate_histogram: (0..RATE_BINS)
            .map(|i| RateBin {
                lo: i as f64 / RATE_BINS as f64,
                hi: (i + 1) as f64 / RATE_BINS as f64,
                count: 0,
            })
            .collect(),
        mean_rate: None,
    };
    let mut sum = 0.0;
    for c in &manifest.clips {
        *r.strategy_counts.entry(key(&c.strategy)).or_default() += 1;
        *r.verdict_counts.entry(key(&c.verdict)).or_default() += 1;
        for reason in &c.reject_reasons {
            *r.reject_reasons.entry(key(reason)).or_default() += 1;
        }
        if let Some(bank) = c.occluder_bank {
            *r.bank_usage.entry(bank.as_str().to_string()).or_default() += 1;
        }
        if !c.occluder_id.is_empty() {
            *r.occluder_usage.entry(c.occluder_id.clone()).or_default() += 1;
        }
        for &rate in &c.occlusion_rates {
            r.rate_histogram[rate_bin(rate)].count += 1;
            sum += rate;
            r.frames += 1;
        }
    }
    if r.frames > 0 {
        r.mean_rate = Some(sum / r.frames as f64);
    }
    r
}
