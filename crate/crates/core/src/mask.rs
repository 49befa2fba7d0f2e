//! Binary per-frame object masks and axis-aligned boxes.
//!
//! Masks are bit-packed row-major. Inside JSON documents a mask is written as
//! a run-length string `WxH:r0,r1,...` whose runs alternate unset/set starting
//! with an (possibly zero-length) unset run.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, inclusive-exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidParameter(format!(
                "degenerate box ({x_min},{y_min},{x_max},{y_max})"
            )));
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    /// Center in continuous coordinates (pixel `x` spans `[x, x+1)`).
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min as f64 + self.x_max as f64) / 2.0,
            (self.y_min as f64 + self.y_max as f64) / 2.0,
        )
    }

    pub fn diagonal(&self) -> f64 {
        (self.width() as f64).hypot(self.height() as f64)
    }

    /// Grow by `by` pixels on every side, clamped to a `width`×`height` image.
    pub fn expand(&self, by: u32, width: u32, height: u32) -> BBox {
        BBox {
            x_min: self.x_min.saturating_sub(by),
            y_min: self.y_min.saturating_sub(by),
            x_max: self.x_max.saturating_add(by).min(width),
            y_max: self.y_max.saturating_add(by).min(height),
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn full(width: u32, height: u32) -> BBox {
        BBox {
            x_min: 0,
            y_min: 0,
            x_max: width,
            y_max: height,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

impl Mask {
    /// An all-unset mask.
    ///
    /// Panics if either dimension is zero.
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be >= 1");
        let bits = width as usize * height as usize;
        Mask {
            width,
            height,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let mut m = Mask::new(width, height);
        for w in m.words.iter_mut() {
            *w = u64::MAX;
        }
        m.clear_padding();
        m
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Mask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    /// Build from an 8-bit plane; values `>= threshold` are set.
    pub fn from_plane(width: u32, height: u32, plane: &[u8], threshold: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("{width}x{height}")));
        }
        if plane.len() != width as usize * height as usize {
            return Err(Error::InvalidDimensions(format!(
                "plane of {} values for {width}x{height}",
                plane.len()
            )));
        }
        let mut m = Mask::new(width, height);
        for (i, &v) in plane.iter().enumerate() {
            if v >= threshold {
                m.words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(m)
    }

    /// 0/255 plane, row-major.
    pub fn to_plane(&self) -> Vec<u8> {
        (0..self.len())
            .map(|i| if self.bit(i) { 255 } else { 0 })
            .collect()
    }

    fn clear_padding(&mut self) {
        let bits = self.len();
        let rem = bits % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bit(y as usize * self.width as usize + x as usize)
    }

    /// Out-of-bounds coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u64) < self.width as u64
            && (y as u64) < self.height as u64
            && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        let i = y as usize * self.width as usize + x as usize;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Number of set bits.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn same_dims(&self, other: &Mask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<u64> {
        self.same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    pub fn union_area(&self, other: &Mask) -> Result<u64> {
        self.same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as u64)
            .sum())
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.same_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        self.same_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        })
    }

    /// `self \ other`.
    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        self.same_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
        })
    }

    /// Tightest box around all set bits, `None` when empty.
    pub fn bbox(&self) -> Option<BBox> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut y_min = None;
        let mut y_max = 0;
        let mut x_min = usize::MAX;
        let mut x_max = 0;
        for y in 0..h {
            let mut row_any = false;
            let row = y * w;
            for x in 0..w {
                if self.bit(row + x) {
                    row_any = true;
                    x_min = x_min.min(x);
                    break;
                }
            }
            if !row_any {
                continue;
            }
            for x in (0..w).rev() {
                if self.bit(row + x) {
                    x_max = x_max.max(x + 1);
                    break;
                }
            }
            y_min.get_or_insert(y);
            y_max = y + 1;
        }
        y_min.map(|y_min| BBox {
            x_min: x_min as u32,
            y_min: y_min as u32,
            x_max: x_max as u32,
            y_max: y_max as u32,
        })
    }

    /// Coordinates of set bits in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + tz;
                Some(((i % w) as u32, (i / w) as u32))
            })
        })
    }

    /// Translate by `(dx, dy)`; bits shifted out of the image are dropped.
    pub fn shifted(&self, dx: i64, dy: i64) -> Mask {
        let mut out = Mask::new(self.width, self.height);
        for (x, y) in self.iter_set() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < self.width as i64 && ny < self.height as i64 {
                out.set(nx as u32, ny as u32, true);
            }
        }
        out
    }

    /// Rotate 90° clockwise.
    pub fn rotated_cw(&self) -> Mask {
        let (w, h) = self.dims();
        let mut out = Mask::new(h, w);
        for (x, y) in self.iter_set() {
            out.set(h - 1 - y, x, true);
        }
        out
    }

    /// Chebyshev (square structuring element) dilation by `radius`.
    pub fn dilate_square(&self, radius: u32) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let r = radius as i64;
        let mut horiz = Mask::new(self.width, self.height);
        for y in 0..h {
            // distance since the last set bit, sweeping both ways
            let mut last: Option<i64> = None;
            for x in 0..w {
                if self.get(x as u32, y as u32) {
                    last = Some(x);
                }
                if last.is_some_and(|l| x - l <= r) {
                    horiz.set(x as u32, y as u32, true);
                }
            }
            last = None;
            for x in (0..w).rev() {
                if self.get(x as u32, y as u32) {
                    last = Some(x);
                }
                if last.is_some_and(|l| l - x <= r) {
                    horiz.set(x as u32, y as u32, true);
                }
            }
        }
        let mut out = Mask::new(self.width, self.height);
        for x in 0..w {
            let mut last: Option<i64> = None;
            for y in 0..h {
                if horiz.get(x as u32, y as u32) {
                    last = Some(y);
                }
                if last.is_some_and(|l| y - l <= r) {
                    out.set(x as u32, y as u32, true);
                }
            }
            last = None;
            for y in (0..h).rev() {
                if horiz.get(x as u32, y as u32) {
                    last = Some(y);
                }
                if last.is_some_and(|l| l - y <= r) {
                    out.set(x as u32, y as u32, true);
                }
            }
        }
        out
    }

    /// Run-length string form.
    pub fn to_rle(&self) -> String {
        let mut runs = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for i in 0..self.len() {
            let b = self.bit(i);
            if b != current {
                runs.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        if run > 0 {
            runs.push(run);
        }
        let body: Vec<String> = runs.iter().map(u64::to_string).collect();
        format!("{}x{}:{}", self.width, self.height, body.join(","))
    }

    pub fn from_rle(s: &str) -> Result<Mask> {
        let bad = |offset: usize, reason: &str| Error::Malformed {
            what: "mask rle",
            offset: offset as u64,
            reason: reason.to_string(),
        };
        let colon = s.find(':').ok_or_else(|| bad(0, "missing ':'"))?;
        let header = &s[..colon];
        let xpos = header.find('x').ok_or_else(|| bad(0, "missing 'x' in header"))?;
        let width: u32 = header[..xpos]
            .parse()
            .map_err(|_| bad(0, "bad width"))?;
        let height: u32 = header[xpos + 1..]
            .parse()
            .map_err(|_| bad(xpos + 1, "bad height"))?;
        if width == 0 || height == 0 {
            return Err(bad(0, "zero dimension"));
        }
        let total = width as u64 * height as u64;
        let mut m = Mask::new(width, height);
        let mut pos = 0u64;
        let mut set = false;
        let mut offset = colon + 1;
        let body = &s[colon + 1..];
        if !body.is_empty() {
            for tok in body.split(',') {
                let run: u64 = tok.parse().map_err(|_| bad(offset, "bad run length"))?;
                if pos + run > total {
                    return Err(bad(offset, "runs exceed mask size"));
                }
                if set {
                    for i in pos..pos + run {
                        let i = i as usize;
                        m.words[i / 64] |= 1 << (i % 64);
                    }
                }
                pos += run;
                set = !set;
                offset += tok.len() + 1;
            }
        }
        if pos != total {
            return Err(bad(s.len(), "runs do not cover mask"));
        }
        Ok(m)
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rle())
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Mask::from_rle(&s).map_err(serde::de::Error::custom)
    }
}
