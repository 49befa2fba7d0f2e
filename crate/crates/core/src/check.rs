//! Heuristic amodal checks that auto-reject candidates which are probably
//! occluded, too small, cut off by the frame edge, or badly segmented.
//!
//! Nothing here ever auto-accepts: a candidate that passes every rule is left
//! `Pending` for a human reviewer.
//!
//! The depth rule compares the ring of background pixels around the mask
//! (`dilate(mask) \ mask`, square structuring element) against the median
//! depth of the mask's own boundary pixels. It is one concrete realization of
//! "surrounded by closer regions" and works with estimated or sensor depth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::DepthMap;
use crate::manifest::{RuleSummary, Verdict};
use crate::mask::Mask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub boundary_margin: u32,
    pub min_area_fraction: f64,
    pub max_hole_count: u32,
    pub max_hole_area_fraction: f64,
    pub depth_band: u32,
    pub depth_closer_fraction_threshold: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            boundary_margin: 2,
            min_area_fraction: 0.005,
            max_hole_count: 3,
            max_hole_area_fraction: 0.05,
            depth_band: 5,
            depth_closer_fraction_threshold: 0.4,
        }
    }
}

impl CheckConfig {
    /// Reads thresholds from TOML: either top-level keys or a `[check]` table.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let table = match table.get("check") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => table,
        };
        let cfg: CheckConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_area_fraction", self.min_area_fraction),
            ("max_hole_area_fraction", self.max_hole_area_fraction),
            ("depth_closer_fraction_threshold", self.depth_closer_fraction_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is not in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    DepthOccluded,
    TouchesBoundary,
    TooSmall,
    TooManyHoles,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub rule_id: RuleId,
    pub passed: bool,
    pub measured: f64,
}

/// Minimum distance from a set bit to the nearest image edge; fails when it is
/// below `boundary_margin`.
pub fn check_boundary(mask: &Mask, cfg: &CheckConfig) -> Result<CheckResult> {
    let b = mask.bbox().ok_or(Error::EmptyMask)?;
    let (w, h) = mask.dims();
    let d = b.x_min.min(b.y_min).min(w - b.x_max).min(h - b.y_max);
    Ok(CheckResult {
        rule_id: RuleId::TouchesBoundary,
        passed: d >= cfg.boundary_margin,
        measured: d as f64,
    })
}

pub fn check_area(mask: &Mask, cfg: &CheckConfig) -> CheckResult {
    let (w, h) = mask.dims();
    let fraction = mask.area() as f64 / (w as f64 * h as f64);
    CheckResult {
        rule_id: RuleId::TooSmall,
        passed: fraction >= cfg.min_area_fraction,
        measured: fraction,
    }
}

/// Areas of the 4-connected background components that cannot be reached
/// from the image border, in scan order of their first pixel.
pub fn find_holes(mask: &Mask) -> Vec<u64> {
    let (w, h) = mask.dims();
    let (wu, hu) = (w as usize, h as usize);
    // 0 = unvisited background, 1 = foreground or visited
    let mut visited: Vec<bool> = (0..wu * hu)
        .map(|i| mask.get((i % wu) as u32, (i / wu) as u32))
        .collect();
    let mut stack = Vec::new();

    let fill = |start: usize, visited: &mut Vec<bool>, stack: &mut Vec<usize>| -> u64 {
        if visited[start] {
            return 0;
        }
        visited[start] = true;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = (i % wu, i / wu);
            let mut visit = |j: usize| {
                if !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < wu {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - wu);
            }
            if y + 1 < hu {
                visit(i + wu);
            }
        }
        area
    };

    for x in 0..wu {
        fill(x, &mut visited, &mut stack);
        fill((hu - 1) * wu + x, &mut visited, &mut stack);
    }
    for y in 0..hu {
        fill(y * wu, &mut visited, &mut stack);
        fill(y * wu + wu - 1, &mut visited, &mut stack);
    }
    let mut holes = Vec::new();
    for i in 0..wu * hu {
        let a = fill(i, &mut visited, &mut stack);
        if a > 0 {
            holes.push(a);
        }
    }
    holes
}

pub fn check_holes(mask: &Mask, cfg: &CheckConfig) -> Result<CheckResult> {
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    let holes = find_holes(mask);
    let hole_area: u64 = holes.iter().sum();
    let passed = holes.len() as u64 <= cfg.max_hole_count as u64
        && hole_area as f64 <= cfg.max_hole_area_fraction * area as f64;
    Ok(CheckResult {
        rule_id: RuleId::TooManyHoles,
        passed,
        measured: holes.len() as f64,
    })
}

/// Set pixels with at least one in-image 4-neighbor that is unset.
pub fn inner_boundary(mask: &Mask) -> Vec<(u32, u32)> {
    mask.iter_set()
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            let (w, h) = (mask.width() as i64, mask.height() as i64);
            [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                .iter()
                .any(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < w && ny < h && !mask.get(nx as u32, ny as u32))
        })
        .collect()
}

pub fn check_depth_occlusion(mask: &Mask, depth: &DepthMap, cfg: &CheckConfig) -> Result<CheckResult> {
    if depth.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected_w: mask.width(),
            expected_h: mask.height(),
            got_w: depth.dims().0,
            got_h: depth.dims().1,
        });
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut boundary: Vec<f32> = inner_boundary(mask)
        .into_iter()
        .map(|(x, y)| depth.get(x, y))
        .collect();
    let band = mask.dilate_square(cfg.depth_band).and_not(mask)?;
    let fraction = if boundary.is_empty() || band.is_empty() {
        0.0
    } else {
        boundary.sort_by(f32::total_cmp);
        let n = boundary.len();
        let median = if n % 2 == 1 {
            boundary[n / 2] as f64
        } else {
            (boundary[n / 2 - 1] as f64 + boundary[n / 2] as f64) / 2.0
        };
        let closer = band.iter_set().filter(|&(x, y)| (depth.get(x, y) as f64) < median).count();
        closer as f64 / band.area() as f64
    };
    Ok(CheckResult {
        rule_id: RuleId::DepthOccluded,
        passed: fraction <= cfg.depth_closer_fraction_threshold,
        measured: fraction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub reject_reasons: Vec<RuleId>,
    pub frames: Vec<Vec<CheckResult>>,
}

impl CheckReport {
    /// Per-rule worst value and failing frames across the clip.
    pub fn summaries(&self) -> Vec<RuleSummary> {
        let mut rules: BTreeSet<RuleId> = BTreeSet::new();
        for f in &self.frames {
            rules.extend(f.iter().map(|r| r.rule_id));
        }
        rules
            .into_iter()
            .map(|rule_id| {
                let mut failing = Vec::new();
                let mut worst: Option<f64> = None;
                for (i, f) in self.frames.iter().enumerate() {
                    for r in f.iter().filter(|r| r.rule_id == rule_id) {
                        if !r.passed {
                            failing.push(i);
                        }
                        // boundary distance and area are bad when low, the rest when high
                        let low_is_bad = matches!(rule_id, RuleId::TouchesBoundary | RuleId::TooSmall);
                        worst = Some(match worst {
                            None => r.measured,
                            Some(w) if low_is_bad => w.min(r.measured),
                            Some(w) => w.max(r.measured),
                        });
                    }
                }
                RuleSummary {
                    rule_id,
                    passed: failing.is_empty(),
                    worst_measured: worst.unwrap_or(0.0),
                    failing_frames: failing,
                }
            })
            .collect()
    }
}

/// Runs every rule on every frame; the depth rule only when depth is given.
pub fn run_amodal_check(masks: &[Mask], depths: Option<&[DepthMap]>, cfg: &CheckConfig) -> Result<CheckReport> {
    if masks.is_empty() {
        return Err(Error::InvalidFrameCount(0));
    }
    if let Some(d) = depths {
        if d.len() != masks.len() {
            return Err(Error::InvalidParameter(format!(
                "{} depth maps for {} masks",
                d.len(),
                masks.len()
            )));
        }
    }
    let mut reasons = BTreeSet::new();
    let mut frames = Vec::with_capacity(masks.len());
    for (i, mask) in masks.iter().enumerate() {
        let mut results = vec![
            check_boundary(mask, cfg)?,
            check_area(mask, cfg),
            check_holes(mask, cfg)?,
        ];
        if let Some(d) = depths {
            results.push(check_depth_occlusion(mask, &d[i], cfg)?);
        }
        reasons.extend(results.iter().filter(|r| !r.passed).map(|r| r.rule_id));
        frames.push(results);
    }
    Ok(CheckReport {
        verdict: if reasons.is_empty() {
            Verdict::Pending
        } else {
            Verdict::AutoReject
        },
        reject_reasons: reasons.into_iter().collect(),
        frames,
    })
}
