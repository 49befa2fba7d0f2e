use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BBox;

/// A single 8-bit RGB image with an optional alpha plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    alpha: Option<Vec<u8>>,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(Error::InvalidDimensions(format!(
                "{} bytes for {width}x{height} RGB",
                pixels.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
            alpha: None,
        })
    }

    pub fn with_alpha(width: u32, height: u32, pixels: Vec<u8>, alpha: Vec<u8>) -> Result<Self> {
        let mut f = Frame::new(width, height, pixels)?;
        if alpha.len() != width as usize * height as usize {
            return Err(Error::InvalidDimensions(format!(
                "{} alpha bytes for {width}x{height}",
                alpha.len()
            )));
        }
        f.alpha = Some(alpha);
        Ok(f)
    }

    /// Uniform color frame. Panics on zero dimensions.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "frame dimensions must be >= 1");
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Frame {
            width,
            height,
            pixels,
            alpha: None,
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut frame = Frame::filled(width, height, [0; 3]);
        for y in 0..height {
            for x in 0..width {
                frame.set(x, y, f(x, y));
            }
        }
        frame
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn alpha(&self) -> Option<&[u8]> {
        self.alpha.as_deref()
    }

    pub fn into_parts(self) -> (u32, u32, Vec<u8>, Option<Vec<u8>>) {
        (self.width, self.height, self.pixels, self.alpha)
    }

    pub fn without_alpha(mut self) -> Frame {
        self.alpha = None;
        self
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.idx(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.idx(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Alpha at a pixel; 255 when the frame has no alpha plane.
    #[inline]
    pub fn alpha_at(&self, x: u32, y: u32) -> u8 {
        match &self.alpha {
            Some(a) => a[y as usize * self.width as usize + x as usize],
            None => 255,
        }
    }

    pub fn same_dims(&self, other: &Frame) -> Result<()> {
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

    /// Copy of a sub-rectangle.
    pub fn crop(&self, region: BBox) -> Result<Frame> {
        if region.x_max > self.width || region.y_max > self.height {
            return Err(Error::InvalidParameter(format!(
                "crop {region:?} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Frame::from_fn(region.width(), region.height(), |x, y| {
            self.get(region.x_min + x, region.y_min + y)
        }))
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!("{width}x{height}")));
    }
    Ok(())
}

/// Ordered frames sharing one size.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    frames: Vec<Frame>,
    pub fps: f64,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidFrameCount(0))?;
        for f in &frames[1..] {
            first.same_dims(f)?;
        }
        Ok(VideoClip { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (u32, u32) {
        self.frames[0].dims()
    }
}

/// Relative per-pixel depth; smaller is closer to the camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    width: u32,
    height: u32,
    depth: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, depth: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if depth.len() != width as usize * height as usize {
            return Err(Error::InvalidDimensions(format!(
                "{} depth values for {width}x{height}",
                depth.len()
            )));
        }
        if let Some(bad) = depth.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!("depth value {bad}")));
        }
        Ok(DepthMap {
            width,
            height,
            depth,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f32) -> Result<Self> {
        let mut depth = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                depth.push(f(x, y));
            }
        }
        DepthMap::new(width, height, depth)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.depth[y as usize * self.width as usize + x as usize]
    }
}
