//! Turning a single annotated image into a short clip by simulated camera or
//! object motion: center zoom, parallel foreground/background motion, and a
//! progressive homography warp. Parameters are interpolated linearly from the
//! identity at frame 0 to the target at frame `N - 1`.
//!
//! Pixel coordinates in this module are pixel-center indices: pixel `(x, y)`
//! sits at `(x, y)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, VideoClip};
use crate::mask::Mask;

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Zoom,
    ParallelMove,
    Warp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub kind: MotionKind,
    pub frames: usize,
    /// Side fraction of the final center crop, in (0, 1].
    pub zoom_end: f64,
    /// Total foreground displacement in pixels at the last frame.
    pub displacement: (f64, f64),
    pub homography_end: Mat3,
}

impl MotionParams {
    pub fn identity(kind: MotionKind, frames: usize) -> Self {
        MotionParams {
            kind,
            frames,
            zoom_end: 1.0,
            displacement: (0.0, 0.0),
            homography_end: IDENTITY,
        }
    }

    /// Draws moderate motion parameters for a `width`×`height` image.
    pub fn random(kind: MotionKind, frames: usize, width: u32, height: u32, rng: &mut impl Rng) -> Self {
        let mut motion = MotionParams::identity(kind, frames);
        let (w, h) = (width as f64, height as f64);
        match kind {
            MotionKind::Zoom => motion.zoom_end = rng.random_range(0.5..0.9),
            MotionKind::ParallelMove => {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let mag = rng.random_range(0.05..0.15) * w.min(h);
                motion.displacement = (mag * angle.cos(), mag * angle.sin());
            }
            MotionKind::Warp => {
                let mut m = IDENTITY;
                m[0][0] += rng.random_range(-0.1..0.1);
                m[1][1] += rng.random_range(-0.1..0.1);
                m[0][1] = rng.random_range(-0.05..0.05);
                m[1][0] = rng.random_range(-0.05..0.05);
                m[0][2] = rng.random_range(-0.05..0.05) * w;
                m[1][2] = rng.random_range(-0.05..0.05) * h;
                m[2][0] = rng.random_range(-1e-4..1e-4);
                m[2][1] = rng.random_range(-1e-4..1e-4);
                motion.homography_end = m;
            }
        }
        motion
    }

    fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidFrameCount(self.frames));
        }
        Ok(())
    }

    fn t(&self, i: usize) -> f64 {
        i as f64 / (self.frames - 1) as f64
    }
}

/// Frames plus the correspondingly transformed object masks.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub clip: VideoClip,
    pub masks: Vec<Mask>,
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (1.0 - t) * a + t * b
}

/// Bilinear sample with coordinates clamped to the image.
pub fn sample_clamped(img: &Frame, sx: f64, sy: f64) -> [u8; 3] {
    let sx = sx.clamp(0.0, (img.width() - 1) as f64);
    let sy = sy.clamp(0.0, (img.height() - 1) as f64);
    bilinear(img, sx, sy)
}

/// Bilinear sample, `None` outside the pixel-center domain.
pub fn sample_or_none(img: &Frame, sx: f64, sy: f64) -> Option<[u8; 3]> {
    if !(sx >= 0.0 && sy >= 0.0 && sx <= (img.width() - 1) as f64 && sy <= (img.height() - 1) as f64) {
        return None;
    }
    Some(bilinear(img, sx, sy))
}

fn bilinear(img: &Frame, sx: f64, sy: f64) -> [u8; 3] {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let (fx, fy) = (sx - x0, sy - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
        let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
        out[ch] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn check_mask(img: &Frame, mask: &Mask) -> Result<()> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected_w: img.width(),
            expected_h: img.height(),
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    Ok(())
}

/// Progressive center crop resized back to full size.
pub fn zoom_sequence(img: &Frame, mask: &Mask, motion: &MotionParams) -> Result<Sequence> {
    motion.validate()?;
    check_mask(img, mask)?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(motion.zoom_end > 0.0 && motion.zoom_end <= 1.0) {
        return Err(Error::InvalidParameter(format!("zoom_end {} not in (0, 1]", motion.zoom_end)));
    }
    if motion.zoom_end * w < 2.0 || motion.zoom_end * h < 2.0 {
        return Err(Error::InvalidParameter("final crop is smaller than 2x2".into()));
    }
    let mut frames = Vec::with_capacity(motion.frames);
    let mut masks = Vec::with_capacity(motion.frames);
    for i in 0..motion.frames {
        let f = lerp(1.0, motion.zoom_end, motion.t(i));
        // continuous position of output pixel center x + 0.5 inside the crop
        let src = |x: u32, size: f64| size / 2.0 + (x as f64 + 0.5 - size / 2.0) * f;
        frames.push(Frame::from_fn(img.width(), img.height(), |x, y| {
            sample_clamped(img, src(x, w) - 0.5, src(y, h) - 0.5)
        }));
        masks.push(Mask::from_fn(img.width(), img.height(), |x, y| {
            let (sx, sy) = (src(x, w).floor() as i64, src(y, h).floor() as i64);
            mask.get_signed(sx, sy)
        }));
    }
    Ok(Sequence {
        clip: VideoClip::new(frames, 0.0)?,
        masks,
    })
}

/// Fills pixels under `mask` by repeated averaging of known 4-neighbors.
///
/// An onion-peel pass seeds every masked pixel from already-known neighbors,
/// then Gauss-Seidel sweeps relax the fill toward the discrete harmonic
/// interpolant. Every filled value stays within the range of the unmasked
/// pixels bordering the mask.
pub fn fill_masked(img: &Frame, mask: &Mask) -> Result<Frame> {
    check_mask(img, mask)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if mask.area() as usize == w * h {
        return Err(Error::InvalidParameter("nothing to fill from: mask covers the image".into()));
    }
    let mut vals: Vec<[f32; 3]> = img
        .pixels()
        .chunks_exact(3)
        .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
        .collect();
    let mut known: Vec<bool> = (0..w * h).map(|i| !mask.get((i % w) as u32, (i / w) as u32)).collect();
    let unknown: Vec<usize> = mask
        .iter_set()
        .map(|(x, y)| y as usize * w + x as usize)
        .collect();
    let neighbors = |i: usize| {
        let (x, y) = (i % w, i / w);
        let mut n = [usize::MAX; 4];
        if x > 0 {
            n[0] = i - 1;
        }
        if x + 1 < w {
            n[1] = i + 1;
        }
        if y > 0 {
            n[2] = i - w;
        }
        if y + 1 < h {
            n[3] = i + w;
        }
        n
    };

    let mut remaining = unknown.clone();
    while !remaining.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &remaining {
            let mut sum = [0f32; 3];
            let mut cnt = 0;
            for j in neighbors(i).into_iter().filter(|&j| j != usize::MAX && known[j]) {
                for c in 0..3 {
                    sum[c] += vals[j][c];
                }
                cnt += 1;
            }
            if cnt > 0 {
                layer.push((i, sum.map(|s| s / cnt as f32)));
            } else {
                rest.push(i);
            }
        }
        if layer.is_empty() {
            return Err(Error::InvalidParameter("masked region has no known neighbors".into()));
        }
        for (i, v) in layer {
            vals[i] = v;
            known[i] = true;
        }
        remaining = rest;
    }

    for _ in 0..500 {
        let mut max_change = 0f32;
        for &i in &unknown {
            let mut sum = [0f32; 3];
            let mut cnt = 0;
            for j in neighbors(i).into_iter().filter(|&j| j != usize::MAX) {
                for c in 0..3 {
                    sum[c] += vals[j][c];
                }
                cnt += 1;
            }
            for c in 0..3 {
                let v = sum[c] / cnt as f32;
                max_change = max_change.max((v - vals[i][c]).abs());
                vals[i][c] = v;
            }
        }
        if max_change < 0.01 {
            break;
        }
    }

    let mut out = img.clone().without_alpha();
    for &i in &unknown {
        let v = vals[i].map(|c| c.round().clamp(0.0, 255.0) as u8);
        out.set((i % w) as u32, (i / w) as u32, v);
    }
    Ok(out)
}

/// Foreground slides by `lerp(0, displacement, t)` (rounded to whole pixels)
/// over an inpainted background that moves half as far the other way.
pub fn parallel_move_sequence(img: &Frame, fg_mask: &Mask, motion: &MotionParams) -> Result<Sequence> {
    motion.validate()?;
    check_mask(img, fg_mask)?;
    let bbox = fg_mask.bbox().ok_or(Error::EmptyMask)?;
    if bbox.x_min == 0 || bbox.y_min == 0 || bbox.x_max == img.width() || bbox.y_max == img.height() {
        return Err(Error::InvalidParameter("foreground mask touches the image border".into()));
    }
    let plate = fill_masked(img, fg_mask)?;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut frames = Vec::with_capacity(motion.frames);
    let mut masks = Vec::with_capacity(motion.frames);
    for i in 0..motion.frames {
        let t = motion.t(i);
        let (fx, fy) = (motion.displacement.0 * t, motion.displacement.1 * t);
        let (dx, dy) = (fx.round() as i64, fy.round() as i64);
        let (bx, by) = ((-fx / 2.0).round() as i64, (-fy / 2.0).round() as i64);
        let mut frame = Frame::from_fn(img.width(), img.height(), |x, y| {
            let sx = (x as i64 - bx).clamp(0, w - 1) as u32;
            let sy = (y as i64 - by).clamp(0, h - 1) as u32;
            plate.get(sx, sy)
        });
        for (x, y) in fg_mask.iter_set() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < w && ny < h {
                frame.set(nx as u32, ny as u32, img.get(x, y));
            }
        }
        frames.push(frame);
        masks.push(fg_mask.shifted(dx, dy));
    }
    Ok(Sequence {
        clip: VideoClip::new(frames, 0.0)?,
        masks,
    })
}

pub fn mat_mul_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (r, row) in m.iter().enumerate() {
        out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

/// Projective image of a point.
pub fn warp_point(m: &Mat3, p: (f64, f64)) -> (f64, f64) {
    let v = mat_mul_vec(m, [p.0, p.1, 1.0]);
    (v[0] / v[2], v[1] / v[2])
}

pub fn determinant(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn invert(m: &Mat3) -> Option<Mat3> {
    let det = determinant(m);
    let scale = m.iter().flatten().fold(0f64, |a, v| a.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3).max(1e-300) {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / det)))
}

/// `lerp(I, H, t)` element-wise, renormalized to a unit bottom-right entry.
pub fn interpolate_homography(end: &Mat3, t: f64) -> Result<Mat3> {
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = lerp(IDENTITY[r][c], end[r][c], t);
        }
    }
    let z = m[2][2];
    if z.abs() < 1e-12 {
        return Err(Error::InvalidParameter(format!("interpolated homography at t={t} has zero scale")));
    }
    Ok(m.map(|row| row.map(|v| v / z)))
}

/// Progressive homography warp by inverse mapping. Out-of-source samples are
/// black; masks use nearest-neighbor sampling.
pub fn warp_sequence(img: &Frame, mask: &Mask, motion: &MotionParams) -> Result<Sequence> {
    motion.validate()?;
    check_mask(img, mask)?;
    let mut frames = Vec::with_capacity(motion.frames);
    let mut masks = Vec::with_capacity(motion.frames);
    for i in 0..motion.frames {
        let m = interpolate_homography(&motion.homography_end, motion.t(i))?;
        let inv = invert(&m).ok_or_else(|| {
            Error::InvalidParameter(format!("interpolated homography at frame {i} is not invertible"))
        })?;
        let src = |x: u32, y: u32| -> Option<(f64, f64)> {
            let v = mat_mul_vec(&inv, [x as f64, y as f64, 1.0]);
            (v[2].abs() > 1e-12).then(|| (v[0] / v[2], v[1] / v[2]))
        };
        frames.push(Frame::from_fn(img.width(), img.height(), |x, y| {
            src(x, y)
                .and_then(|(sx, sy)| sample_or_none(img, sx, sy))
                .unwrap_or([0, 0, 0])
        }));
        masks.push(Mask::from_fn(img.width(), img.height(), |x, y| {
            src(x, y).is_some_and(|(sx, sy)| mask.get_signed((sx + 0.5).floor() as i64, (sy + 0.5).floor() as i64))
        }));
    }
    Ok(Sequence {
        clip: VideoClip::new(frames, 0.0)?,
        masks,
    })
}

pub fn run(img: &Frame, mask: &Mask, motion: &MotionParams) -> Result<Sequence> {
    match motion.kind {
        MotionKind::Zoom => zoom_sequence(img, mask, motion),
        MotionKind::ParallelMove => parallel_move_sequence(img, mask, motion),
        MotionKind::Warp => warp_sequence(img, mask, motion),
    }
}
