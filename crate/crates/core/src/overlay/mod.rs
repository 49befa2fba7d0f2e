//! Occluded/ground-truth pair synthesis.
//!
//! Two track strategies are supported. `Easy` samples independent valid
//! placements for the first and last frame and interpolates linearly between
//! them. `Hard` samples one placement for the first frame and then follows the
//! object's bounding box, growing the occluder with the cube root of the
//! box's larger side ratio, with feathered edges.

mod raster;
mod track;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use raster::{
    blend, composite, feather, occluded_pixels, render_layer, Layer, Placement, FOOTPRINT_THRESHOLD,
};
pub use track::{interpolate_track_easy, track_hard};

use crate::error::{Error, Result};
use crate::frame::{Frame, VideoClip};
use crate::manifest::{ClipManifest, OccluderTrack, Strategy, Verdict};
use crate::mask::Mask;
use crate::occluder::OccluderAsset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Closed interval of acceptable occlusion rates at constrained frames.
    pub rate_range: (f64, f64),
    pub feather_radius: u32,
    pub placement_budget: u32,
    /// Log-uniform range of the scale, relative to
    /// object bbox diagonal / occluder diagonal.
    pub scale_range: (f64, f64),
}

impl StrategyConfig {
    pub fn easy() -> Self {
        StrategyConfig {
            strategy: Strategy::Easy,
            rate_range: (0.3, 0.7),
            feather_radius: 0,
            placement_budget: 200,
            scale_range: (0.3, 2.0),
        }
    }

    pub fn hard() -> Self {
        StrategyConfig {
            strategy: Strategy::Hard,
            rate_range: (0.4, 0.8),
            feather_radius: 2,
            placement_budget: 200,
            scale_range: (0.3, 2.0),
        }
    }

    pub fn for_strategy(strategy: Strategy) -> Self {
        match strategy {
            Strategy::Easy => Self::easy(),
            Strategy::Hard => Self::hard(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rate_range;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("rate_range ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")));
        }
        if self.placement_budget == 0 {
            return Err(Error::Config("placement_budget must be >= 1".into()));
        }
        let (s_lo, s_hi) = self.scale_range;
        if !(s_lo > 0.0 && s_lo <= s_hi && s_hi.is_finite()) {
            return Err(Error::Config(format!("scale_range ({s_lo}, {s_hi}) must be positive and ordered")));
        }
        Ok(())
    }

    pub fn rate_ok(&self, rate: f64) -> bool {
        self.rate_range.0 <= rate && rate <= self.rate_range.1
    }
}

/// Fraction of `object` covered by `footprint`.
pub fn occlusion_rate(object: &Mask, footprint: &Mask) -> Result<f64> {
    let area = object.area();
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(object.intersection_area(footprint)? as f64 / area as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledPlacement {
    pub placement: Placement,
    pub rate: f64,
    pub attempts: u32,
}

/// Rejection-samples a placement whose occlusion rate on `object` lies in
/// `cfg.rate_range`. Centers are uniform over the object's bbox grown to 1.5×
/// about its center; scales are log-uniform. `None` once the budget is spent.
pub fn sample_placement(
    object: &Mask,
    occ: &OccluderAsset,
    cfg: &StrategyConfig,
    rng: &mut impl Rng,
) -> Result<Option<SampledPlacement>> {
    let bbox = object.bbox().ok_or(Error::EmptyMask)?;
    let area = object.area() as f64;
    let (cx, cy) = bbox.center();
    let (bw, bh) = (bbox.width() as f64 * 1.5, bbox.height() as f64 * 1.5);
    let base = bbox.diagonal() / occ.diagonal();
    let (ln_lo, ln_hi) = (cfg.scale_range.0.ln(), cfg.scale_range.1.ln());
    for attempt in 1..=cfg.placement_budget {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let w: f64 = rng.random();
        let placement = Placement {
            center: (cx + (u - 0.5) * bw, cy + (v - 0.5) * bh),
            scale: base * (ln_lo + w * (ln_hi - ln_lo)).exp(),
        };
        let rate = occluded_pixels(object, occ, &placement) as f64 / area;
        if cfg.rate_ok(rate) {
            return Ok(Some(SampledPlacement {
                placement,
                rate,
                attempts: attempt,
            }));
        }
    }
    Ok(None)
}

/// Easy endpoints: independent placements for the first and last frame.
pub fn sample_endpoints(
    first: &Mask,
    last: &Mask,
    occ: &OccluderAsset,
    cfg: &StrategyConfig,
    rng: &mut impl Rng,
) -> Result<Option<(SampledPlacement, SampledPlacement)>> {
    let Some(a) = sample_placement(first, occ, cfg, rng)? else {
        return Ok(None);
    };
    let Some(b) = sample_placement(last, occ, cfg, rng)? else {
        return Ok(None);
    };
    Ok(Some((a, b)))
}

/// The object cut out onto a white background.
pub fn isolate_object(frame: &Frame, mask: &Mask) -> Result<Frame> {
    if frame.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected_w: frame.width(),
            expected_h: frame.height(),
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    let mut out = Frame::filled(frame.width(), frame.height(), [255; 3]);
    for (x, y) in mask.iter_set() {
        out.set(x, y, frame.get(x, y));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SynthesizedPair {
    pub occluded: VideoClip,
    pub gt: VideoClip,
    /// Binary occluder footprint per frame.
    pub footprints: Vec<Mask>,
    pub manifest: ClipManifest,
}

/// Builds one occluded/ground-truth pair. Fully determined by the inputs and
/// `seed`.
pub fn synthesize_pair(
    clip_id: &str,
    clip: &VideoClip,
    masks: &[Mask],
    occ: &OccluderAsset,
    cfg: &StrategyConfig,
    seed: u64,
) -> Result<SynthesizedPair> {
    cfg.validate()?;
    if masks.len() != clip.len() {
        return Err(Error::InvalidParameter(format!(
            "{} masks for {} frames",
            masks.len(),
            clip.len()
        )));
    }
    let (w, h) = clip.dims();
    for m in masks {
        if m.dims() != (w, h) {
            return Err(Error::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                got_w: m.width(),
                got_h: m.height(),
            });
        }
    }
    let n = clip.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let track = match cfg.strategy {
        Strategy::Easy => {
            let (a, b) = sample_endpoints(&masks[0], &masks[n - 1], occ, cfg, &mut rng)?.ok_or(
                Error::PlacementFailed {
                    attempts: cfg.placement_budget,
                },
            )?;
            debug!("{clip_id}: endpoints after {} + {} attempts", a.attempts, b.attempts);
            if n == 1 {
                OccluderTrack::new(vec![a.placement.center], vec![a.placement.scale])?
            } else {
                interpolate_track_easy(
                    a.placement.center,
                    a.placement.scale,
                    b.placement.center,
                    b.placement.scale,
                    n,
                )?
            }
        }
        Strategy::Hard => {
            let a = sample_placement(&masks[0], occ, cfg, &mut rng)?.ok_or(Error::PlacementFailed {
                attempts: cfg.placement_budget,
            })?;
            debug!("{clip_id}: start placement after {} attempts", a.attempts);
            let bboxes = masks
                .iter()
                .enumerate()
                .map(|(i, m)| m.bbox().ok_or(Error::DegenerateBBox { frame: i }))
                .collect::<Result<Vec<_>>>()?;
            track_hard(a.placement.center, a.placement.scale, &bboxes)?
        }
    };

    let mut occluded = Vec::with_capacity(n);
    let mut gt = Vec::with_capacity(n);
    let mut footprints = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for (i, (frame, mask)) in clip.frames().iter().zip(masks).enumerate() {
        let p = Placement {
            center: track.positions[i],
            scale: track.scales[i],
        };
        let (out, footprint) = composite(frame, occ, &p, cfg.feather_radius);
        rates.push(occlusion_rate(mask, &footprint)?);
        occluded.push(out);
        gt.push(isolate_object(frame, mask)?);
        footprints.push(footprint);
    }

    let manifest = ClipManifest {
        clip_id: clip_id.to_string(),
        strategy: cfg.strategy,
        frame_count: n,
        occluder_id: occ.id.clone(),
        occluder_bank: Some(occ.source_bank),
        track,
        occlusion_rates: rates,
        feather_radius: cfg.feather_radius,
        rng_seed: seed,
        verdict: Verdict::Pending,
        reject_reasons: Vec::new(),
        checks: Vec::new(),
        source_dir: None,
    };
    Ok(SynthesizedPair {
        occluded: VideoClip::new(occluded, clip.fps)?,
        gt: VideoClip::new(gt, clip.fps)?,
        footprints,
        manifest,
    })
}
