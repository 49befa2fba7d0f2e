//! Mask IoU and region-restricted PSNR/SSIM.
//!
//! Image metrics are computed inside a box around the ground-truth amodal
//! mask, grown by `dilation` pixels, so the white background of
//! object-on-white renderings does not inflate scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, VideoClip};
use crate::image2video::sample_clamped;
use crate::mask::{BBox, Mask};
use crate::stitch::derive_mask;

pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: u32 = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const DEFAULT_DILATION: u32 = 7;
pub const DEFAULT_MASK_THRESHOLD: u8 = 250;

pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.union_area(b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn dilated_bbox(gt_amodal: &Mask, dilation: u32) -> Result<BBox> {
    let b = gt_amodal.bbox().ok_or(Error::EmptyMask)?;
    Ok(b.expand(dilation, gt_amodal.width(), gt_amodal.height()))
}

fn check_region(pred: &Frame, gt: &Frame, region: &BBox) -> Result<()> {
    pred.same_dims(gt)?;
    if region.x_min >= region.x_max || region.y_min >= region.y_max {
        return Err(Error::EmptyRegion);
    }
    if region.x_max > pred.width() || region.y_max > pred.height() {
        return Err(Error::InvalidParameter(format!(
            "region {region:?} outside {}x{}",
            pred.width(),
            pred.height()
        )));
    }
    Ok(())
}

/// Mean squared error over the region, all channels.
pub fn mse(pred: &Frame, gt: &Frame, region: &BBox) -> Result<f64> {
    check_region(pred, gt, region)?;
    let mut sum = 0u64;
    for y in region.y_min..region.y_max {
        for x in region.x_min..region.x_max {
            let (a, b) = (pred.get(x, y), gt.get(x, y));
            for c in 0..3 {
                let d = a[c] as i64 - b[c] as i64;
                sum += (d * d) as u64;
            }
        }
    }
    Ok(sum as f64 / (region.area() * 3) as f64)
}

/// PSNR in dB for 8-bit data; zero error reports [`PSNR_CAP`].
pub fn psnr(pred: &Frame, gt: &Frame, region: &BBox) -> Result<f64> {
    let e = mse(pred, gt, region)?;
    if e == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (255.0f64 * 255.0 / e).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW as usize] {
    let mut k = [0.0; SSIM_WINDOW as usize];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Single-scale SSIM: 11×11 Gaussian window (σ = 1.5), evaluated at every
/// window position fully inside the region, averaged over positions and then
/// over the three channels.
pub fn ssim(pred: &Frame, gt: &Frame, region: &BBox) -> Result<f64> {
    check_region(pred, gt, region)?;
    let (rw, rh) = (region.width(), region.height());
    if rw < SSIM_WINDOW || rh < SSIM_WINDOW {
        return Err(Error::RegionTooSmall {
            w: rw,
            h: rh,
            min: SSIM_WINDOW,
        });
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let kernel = gaussian_kernel();
    let win = SSIM_WINDOW as usize;
    let (rw, rh) = (rw as usize, rh as usize);
    let (ow, oh) = (rw - win + 1, rh - win + 1);

    let mut total = 0.0;
    for c in 0..3 {
        let plane = |f: &Frame| -> Vec<f64> {
            let mut v = Vec::with_capacity(rw * rh);
            for y in region.y_min..region.y_max {
                for x in region.x_min..region.x_max {
                    v.push(f.get(x, y)[c] as f64);
                }
            }
            v
        };
        let a = plane(pred);
        let b = plane(gt);
        let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        // separable valid-mode filtering
        let filter = |src: &[f64]| -> Vec<f64> {
            let mut horiz = vec![0.0; ow * rh];
            for y in 0..rh {
                for x in 0..ow {
                    let mut s = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        s += w * src[y * rw + x + k];
                    }
                    horiz[y * ow + x] = s;
                }
            }
            let mut out = vec![0.0; ow * oh];
            for y in 0..oh {
                for x in 0..ow {
                    let mut s = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        s += w * horiz[(y + k) * ow + x];
                    }
                    out[y * ow + x] = s;
                }
            }
            out
        };
        let (mu_a, mu_b) = (filter(&a), filter(&b));
        let (e_aa, e_bb, e_ab) = (filter(&aa), filter(&bb), filter(&ab));
        let mut sum = 0.0;
        for i in 0..ow * oh {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
        total += sum / (ow * oh) as f64;
    }
    Ok(total / 3.0)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub iou: f64,
    pub crop_region: Option<BBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub miou: Option<f64>,
    pub frames_scored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub clip_id: Option<String>,
    pub frames: Vec<FrameMetrics>,
    pub aggregates: Aggregates,
    pub dilation: u32,
    pub psnr_cap: f64,
    pub resized_to_256: bool,
    /// Reserved for metrics that need neural networks; always null here.
    pub lpips: Option<f64>,
    pub clip_t: Option<f64>,
    pub fvd: Option<f64>,
}

impl MetricReport {
    pub fn csv_header() -> &'static str {
        "clip_id,frames,frames_scored,psnr,ssim,miou,dilation"
    }

    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.clip_id.as_deref().unwrap_or(""),
            self.frames.len(),
            self.aggregates.frames_scored,
            f(self.aggregates.psnr),
            f(self.aggregates.ssim),
            f(self.aggregates.miou),
            self.dilation
        )
    }
}

/// Aggregates over the frames whose GT mask is non-empty (those carrying a
/// crop region).
pub fn aggregate(frames: &[FrameMetrics]) -> Aggregates {
    let scored: Vec<&FrameMetrics> = frames.iter().filter(|f| f.crop_region.is_some()).collect();
    let mean = |vals: Vec<f64>| -> Option<f64> {
        let vals: Vec<f64> = vals.into_iter().filter(|v| v.is_finite()).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Aggregates {
        psnr: mean(scored.iter().filter_map(|f| f.psnr).collect()),
        ssim: mean(scored.iter().filter_map(|f| f.ssim).collect()),
        miou: mean(scored.iter().map(|f| f.iou).collect()),
        frames_scored: scored.len(),
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub dilation: u32,
    /// Bilinear-resize frames (nearest for masks) to 256×256 before scoring.
    pub resize_256: bool,
    /// Threshold for deriving predicted masks from object-on-white frames.
    pub mask_threshold: u8,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            dilation: DEFAULT_DILATION,
            resize_256: false,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
        }
    }
}

pub fn resize_frame(f: &Frame, w: u32, h: u32) -> Frame {
    let (sx, sy) = (f.width() as f64 / w as f64, f.height() as f64 / h as f64);
    Frame::from_fn(w, h, |x, y| sample_clamped(f, (x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5))
}

pub fn resize_mask(m: &Mask, w: u32, h: u32) -> Mask {
    let (sx, sy) = (m.width() as f64 / w as f64, m.height() as f64 / h as f64);
    Mask::from_fn(w, h, |x, y| {
        m.get_signed(((x as f64 + 0.5) * sx).floor() as i64, ((y as f64 + 0.5) * sy).floor() as i64)
    })
}

/// Per-frame PSNR/SSIM inside the dilated GT box and IoU on full masks.
/// Predicted masks default to thresholding the predicted frames.
pub fn evaluate_clip(
    pred: &VideoClip,
    gt: &VideoClip,
    gt_amodal_masks: &[Mask],
    pred_masks: Option<&[Mask]>,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    if pred.len() != gt.len() || gt_amodal_masks.len() != gt.len() || pred_masks.is_some_and(|m| m.len() != gt.len()) {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} predicted frames, {} gt frames, {} gt masks",
            pred.len(),
            gt.len(),
            gt_amodal_masks.len()
        )));
    }
    let mut frames = Vec::with_capacity(gt.len());
    for i in 0..gt.len() {
        let (mut p, mut g) = (pred.frames()[i].clone(), gt.frames()[i].clone());
        p.same_dims(&g)?;
        let mut gm = gt_amodal_masks[i].clone();
        let mut pm = match pred_masks {
            Some(m) => m[i].clone(),
            None => derive_mask(&p, opts.mask_threshold),
        };
        if opts.resize_256 {
            p = resize_frame(&p, 256, 256);
            g = resize_frame(&g, 256, 256);
            gm = resize_mask(&gm, 256, 256);
            pm = resize_mask(&pm, 256, 256);
        }
        let iou = iou(&pm, &gm)?;
        let metrics = if gm.is_empty() {
            FrameMetrics {
                psnr: None,
                ssim: None,
                iou,
                crop_region: None,
            }
        } else {
            let region = dilated_bbox(&gm, opts.dilation)?;
            FrameMetrics {
                psnr: Some(psnr(&p, &g, &region)?),
                ssim: Some(ssim(&p, &g, &region)?),
                iou,
                crop_region: Some(region),
            }
        };
        frames.push(metrics);
    }
    Ok(MetricReport {
        clip_id: None,
        aggregates: aggregate(&frames),
        frames,
        dilation: opts.dilation,
        psnr_cap: PSNR_CAP,
        resized_to_256: opts.resize_256,
        lpips: None,
        clip_t: None,
        fvd: None,
    })
}
