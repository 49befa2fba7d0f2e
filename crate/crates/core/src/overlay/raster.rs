//! Occluder rasterization, feathering and alpha compositing.
//!
//! An occluder placed at center `p` with scale `s` covers frame pixel `(x, y)`
//! with the bilinear sample of the asset at
//! `((x + 0.5 - p.x) / s + w / 2 - 0.5, (y + 0.5 - p.y) / s + h / 2 - 0.5)`,
//! i.e. the asset resized by `s` about its own center. Samples outside the
//! asset are transparent. The binary footprint is `alpha >= 128`.

use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::mask::Mask;
use crate::occluder::OccluderAsset;

pub const FOOTPRINT_THRESHOLD: u8 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub center: (f64, f64),
    pub scale: f64,
}

/// Occluder rendered into frame coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
    pub alpha: Vec<u8>,
}

impl Layer {
    pub fn footprint(&self) -> Mask {
        Mask::from_plane(self.width, self.height, &self.alpha, FOOTPRINT_THRESHOLD)
            .expect("layer planes match their dims")
    }

    /// Alpha thresholded to {0, 255}.
    pub fn binary_alpha(&self) -> Vec<u8> {
        self.alpha
            .iter()
            .map(|&a| if a >= FOOTPRINT_THRESHOLD { 255 } else { 0 })
            .collect()
    }

    pub fn rgb_frame(&self) -> Frame {
        Frame::new(self.width, self.height, self.rgb.clone()).expect("layer planes match their dims")
    }
}

/// Pixel range (clipped to the frame) that the placed occluder can touch.
fn touched_range(occ: &OccluderAsset, p: &Placement, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
    let hw = p.scale * occ.width() as f64 / 2.0 + 1.0;
    let hh = p.scale * occ.height() as f64 / 2.0 + 1.0;
    let x0 = (p.center.0 - hw).floor().max(0.0);
    let y0 = (p.center.1 - hh).floor().max(0.0);
    let x1 = (p.center.0 + hw).ceil().min(width as f64);
    let y1 = (p.center.1 + hh).ceil().min(height as f64);
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    Some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
}

#[inline]
fn asset_coords(occ: &OccluderAsset, p: &Placement, x: u32, y: u32) -> (f64, f64) {
    (
        (x as f64 + 0.5 - p.center.0) / p.scale + occ.width() as f64 / 2.0 - 0.5,
        (y as f64 + 0.5 - p.center.1) / p.scale + occ.height() as f64 / 2.0 - 0.5,
    )
}

#[inline]
fn sample_alpha(occ: &OccluderAsset, ax: f64, ay: f64) -> u8 {
    let (w, h) = (occ.width() as i64, occ.height() as i64);
    let x0 = ax.floor();
    let y0 = ay.floor();
    let (fx, fy) = (ax - x0, ay - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    if x0 < -1 || y0 < -1 || x0 >= w || y0 >= h {
        return 0;
    }
    let alpha = occ.rgba().alpha().expect("occluders carry alpha");
    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            alpha[(y * w + x) as usize] as f64
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
}

#[inline]
fn sample_rgb(occ: &OccluderAsset, ax: f64, ay: f64) -> [u8; 3] {
    let (w, h) = (occ.width() as i64, occ.height() as i64);
    let x0 = ax.floor();
    let y0 = ay.floor();
    let (fx, fy) = (ax - x0, ay - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let rgba = occ.rgba();
    // color extends past the silhouette edge so fringe pixels keep the asset's hue
    let at = |x: i64, y: i64| rgba.get(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32);
    let (a, b, c, d) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
        let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
        out[ch] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

pub fn render_layer(occ: &OccluderAsset, p: &Placement, width: u32, height: u32) -> Layer {
    let n = width as usize * height as usize;
    let mut layer = Layer {
        width,
        height,
        rgb: vec![0; n * 3],
        alpha: vec![0; n],
    };
    let Some((x0, y0, x1, y1)) = touched_range(occ, p, width, height) else {
        return layer;
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let (ax, ay) = asset_coords(occ, p, x, y);
            let a = sample_alpha(occ, ax, ay);
            if a == 0 {
                continue;
            }
            let i = y as usize * width as usize + x as usize;
            layer.alpha[i] = a;
            layer.rgb[i * 3..i * 3 + 3].copy_from_slice(&sample_rgb(occ, ax, ay));
        }
    }
    layer
}

/// Number of `object` pixels inside the footprint of the placed occluder,
/// without rendering a full layer.
pub fn occluded_pixels(object: &Mask, occ: &OccluderAsset, p: &Placement) -> u64 {
    let Some((x0, y0, x1, y1)) = touched_range(occ, p, object.width(), object.height()) else {
        return 0;
    };
    let mut n = 0;
    for y in y0..y1 {
        for x in x0..x1 {
            if object.get(x, y) {
                let (ax, ay) = asset_coords(occ, p, x, y);
                if sample_alpha(occ, ax, ay) >= FOOTPRINT_THRESHOLD {
                    n += 1;
                }
            }
        }
    }
    n
}

/// Box blur with a `(2r+1)²` window averaged over the in-image part of the
/// window. Radius 0 returns the plane unchanged.
pub fn feather(alpha: &[u8], width: u32, height: u32, radius: u32) -> Vec<u8> {
    assert_eq!(alpha.len(), width as usize * height as usize);
    if radius == 0 {
        return alpha.to_vec();
    }
    let (w, h, r) = (width as usize, height as usize, radius as usize);
    // horizontal window sums with in-bounds counts
    let mut row_sum = vec![0u32; w * h];
    let mut row_cnt = vec![0u32; w];
    for x in 0..w {
        row_cnt[x] = (x.min(r) + (w - 1 - x).min(r) + 1) as u32;
    }
    for y in 0..h {
        let row = &alpha[y * w..(y + 1) * w];
        let mut acc: u32 = row[..r.min(w - 1) + 1].iter().map(|&v| v as u32).sum();
        for x in 0..w {
            row_sum[y * w + x] = acc;
            if x + r + 1 < w {
                acc += row[x + r + 1] as u32;
            }
            if x >= r {
                acc -= row[x - r] as u32;
            }
        }
    }
    let mut out = vec![0u8; w * h];
    for x in 0..w {
        let mut acc: u32 = (0..r.min(h - 1) + 1).map(|y| row_sum[y * w + x]).sum();
        for y in 0..h {
            let col_cnt = (y.min(r) + (h - 1 - y).min(r) + 1) as u32;
            let denom = col_cnt * row_cnt[x];
            out[y * w + x] = ((acc + denom / 2) / denom).min(255) as u8;
            if y + r + 1 < h {
                acc += row_sum[(y + r + 1) * w + x];
            }
            if y >= r {
                acc -= row_sum[(y - r) * w + x];
            }
        }
    }
    out
}

/// `out = α·layer + (1 − α)·frame`, rounded to nearest, per channel.
pub fn blend(frame: &Frame, layer_rgb: &[u8], alpha: &[u8]) -> Frame {
    assert_eq!(layer_rgb.len(), frame.pixels().len());
    assert_eq!(alpha.len() * 3, frame.pixels().len());
    let mut out = frame.clone().without_alpha();
    let px = out.pixels_mut();
    for (i, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let a = a as u32;
        for c in 0..3 {
            let j = i * 3 + c;
            px[j] = ((a * layer_rgb[j] as u32 + (255 - a) * frame.pixels()[j] as u32 + 127) / 255) as u8;
        }
    }
    out
}

/// Renders, binarizes, feathers and blends one occluder over a frame.
/// Returns the composited frame and the binary footprint.
pub fn composite(frame: &Frame, occ: &OccluderAsset, p: &Placement, feather_radius: u32) -> (Frame, Mask) {
    let layer = render_layer(occ, p, frame.width(), frame.height());
    let alpha = feather(&layer.binary_alpha(), frame.width(), frame.height(), feather_radius);
    (blend(frame, &layer.rgb, &alpha), layer.footprint())
}
