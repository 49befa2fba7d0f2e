//! Procedurally generated candidate clips and occluders.
//!
//! A clip is a random ellipse or star-shaped polygon with its own texture,
//! moving and rescaling linearly over a textured background while staying
//! clear of the frame border. Used for demos, tests and throughput checks.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frame::{DepthMap, Frame, VideoClip};
use crate::mask::Mask;
use crate::occluder::{BankKind, OccluderAsset};

#[derive(Clone, Debug)]
enum Shape {
    Ellipse { rx: f64, ry: f64, angle: f64 },
    /// Radii at evenly spaced angles (star-shaped about the center).
    Polygon { radii: Vec<f64> },
}

impl Shape {
    fn random(rng: &mut impl Rng, size: f64) -> Shape {
        if rng.random_bool(0.5) {
            Shape::Ellipse {
                rx: size * rng.random_range(0.7..1.0),
                ry: size * rng.random_range(0.5..1.0),
                angle: rng.random_range(0.0..TAU),
            }
        } else {
            let n = rng.random_range(5..10);
            Shape::Polygon {
                radii: (0..n).map(|_| size * rng.random_range(0.75..1.0)).collect(),
            }
        }
    }

    /// Upper bound on the distance from center to edge at unit scale.
    fn extent(&self) -> f64 {
        match self {
            Shape::Ellipse { rx, ry, .. } => rx.max(*ry),
            Shape::Polygon { radii } => radii.iter().cloned().fold(0.0, f64::max),
        }
    }

    fn contains(&self, dx: f64, dy: f64, scale: f64) -> bool {
        let (dx, dy) = (dx / scale, dy / scale);
        match self {
            Shape::Ellipse { rx, ry, angle } => {
                let (s, c) = angle.sin_cos();
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Polygon { radii } => {
                let n = radii.len();
                let r = dx.hypot(dy);
                let a = dy.atan2(dx).rem_euclid(TAU);
                let step = TAU / n as f64;
                let i = ((a / step) as usize).min(n - 1);
                let j = (i + 1) % n;
                // edge between vertex i and i+1; test along the ray
                let (a0, a1) = (i as f64 * step, (i + 1) as f64 * step);
                let (p0, p1) = ((radii[i] * a0.cos(), radii[i] * a0.sin()), (radii[j] * a1.cos(), radii[j] * a1.sin()));
                let (ex, ey) = (p1.0 - p0.0, p1.1 - p0.1);
                let (ux, uy) = (a.cos(), a.sin());
                let denom = ux * ey - uy * ex;
                if denom.abs() < 1e-12 {
                    return r <= radii[i];
                }
                let t = (p0.0 * ey - p0.1 * ex) / denom;
                r <= t
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Texture {
    base: [f64; 3],
    amp: [f64; 3],
    freq: (f64, f64),
    phase: f64,
    salt: u64,
}

impl Texture {
    fn random(rng: &mut impl Rng) -> Texture {
        Texture {
            base: [0; 3].map(|_: u8| rng.random_range(40.0..215.0)),
            amp: [0; 3].map(|_: u8| rng.random_range(10.0..40.0)),
            freq: (rng.random_range(0.02..0.3), rng.random_range(0.02..0.3)),
            phase: rng.random_range(0.0..TAU),
            salt: rng.random(),
        }
    }

    fn at(&self, x: f64, y: f64) -> [u8; 3] {
        let wave = (x * self.freq.0 + y * self.freq.1 + self.phase).sin();
        let h = hash2(x as u64, y as u64, self.salt);
        let noise = (h % 17) as f64 - 8.0;
        let mut out = [0u8; 3];
        for c in 0..3 {
            // keep away from pure white so object-on-white thresholds stay clean
            out[c] = (self.base[c] + self.amp[c] * wave + noise).clamp(0.0, 240.0) as u8;
        }
        out
    }
}

fn hash2(x: u64, y: u64, salt: u64) -> u64 {
    let mut h = x.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ y.wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ salt;
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^ (h >> 29)
}

/// One generated candidate clip.
#[derive(Clone, Debug)]
pub struct SceneClip {
    pub clip: VideoClip,
    pub masks: Vec<Mask>,
    pub depths: Vec<DepthMap>,
    /// Background frames without the object, for ground-truth checks.
    pub background: Frame,
}

/// Clip of `frames` frames at `width`×`height`, fully determined by `seed`.
pub fn scene_clip(seed: u64, frames: usize, width: u32, height: u32) -> SceneClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let min_side = w.min(h);
    let size = min_side * rng.random_range(0.12..0.2);
    let shape = Shape::random(&mut rng, size);
    let obj_tex = Texture::random(&mut rng);
    let bg_tex = Texture::random(&mut rng);
    let scale0: f64 = rng.random_range(0.85..1.1);
    let scale1 = scale0 * rng.random_range(0.8..1.25);
    let margin = 8.0;
    let reach = shape.extent() * scale0.max(scale1) + margin;
    let pick = |rng: &mut ChaCha8Rng, size: f64| rng.random_range(reach..(size - reach).max(reach + 1.0));
    let c0 = (pick(&mut rng, w), pick(&mut rng, h));
    let c1 = (pick(&mut rng, w), pick(&mut rng, h));

    let background = Frame::from_fn(width, height, |x, y| bg_tex.at(x as f64, y as f64));
    let mut out_frames = Vec::with_capacity(frames);
    let mut masks = Vec::with_capacity(frames);
    let mut depths = Vec::with_capacity(frames);
    for i in 0..frames {
        let t = if frames > 1 { i as f64 / (frames - 1) as f64 } else { 0.0 };
        let c = (c0.0 + (c1.0 - c0.0) * t, c0.1 + (c1.1 - c0.1) * t);
        let s = scale0 + (scale1 - scale0) * t;
        let r = shape.extent() * s + 1.0;
        let mask = Mask::from_fn(width, height, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - c.0, y as f64 + 0.5 - c.1);
            // cheap square reject before the exact test
            dx.abs() <= r && dy.abs() <= r && shape.contains(dx, dy, s)
        });
        let mut frame = background.clone();
        for (x, y) in mask.iter_set() {
            frame.set(x, y, obj_tex.at(x as f64 - c.0, y as f64 - c.1));
        }
        let depth = DepthMap::from_fn(width, height, |x, y| if mask.get(x, y) { 4.0 } else { 10.0 })
            .expect("finite depth");
        out_frames.push(frame);
        masks.push(mask);
        depths.push(depth);
    }
    SceneClip {
        clip: VideoClip::new(out_frames, 24.0).expect("uniform frames"),
        masks,
        depths,
        background,
    }
}

/// Random opaque shape with a soft one-pixel alpha rim.
pub fn occluder(seed: u64, id: &str, bank: BankKind, max_side: u32) -> OccluderAsset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rng.random_range(max_side as f64 * 0.25..max_side as f64 * 0.5);
    let shape = Shape::random(&mut rng, size);
    let tex = Texture::random(&mut rng);
    let side = (2.0 * shape.extent()).ceil() as u32 + 4;
    let c = side as f64 / 2.0;
    let mut pixels = Vec::with_capacity((side * side * 3) as usize);
    let mut alpha = Vec::with_capacity((side * side) as usize);
    for y in 0..side {
        for x in 0..side {
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            let inside = shape.contains(dx, dy, 1.0);
            let near = inside || shape.contains(dx, dy, 1.0 + 1.5 / size);
            pixels.extend_from_slice(&tex.at(x as f64, y as f64));
            alpha.push(if inside { 255 } else if near { 96 } else { 0 });
        }
    }
    let frame = Frame::with_alpha(side, side, pixels, alpha).expect("consistent planes");
    OccluderAsset::new(id, frame, bank).expect("occluder has opaque pixels")
}

/// `count` occluders with ids `<bank>/occ-NNN`.
pub fn occluder_bank(seed: u64, count: usize, bank: BankKind, max_side: u32) -> Vec<OccluderAsset> {
    (0..count)
        .map(|i| {
            occluder(
                seed.wrapping_add(i as u64 * 0x9E37_79B9),
                &format!("{}/occ-{i:03}", bank.as_str()),
                bank,
                max_side,
            )
        })
        .collect()
}
