//! Segmented occluder images and the banks they are drawn from.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::mask::{BBox, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    Generic,
    Driving,
}

impl BankKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BankKind::Generic => "generic",
            BankKind::Driving => "driving",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccluderAsset {
    pub id: String,
    rgba: Frame,
    pub source_bank: BankKind,
    /// Pixels with alpha >= 128.
    pub native_area: u64,
}

impl OccluderAsset {
    /// Trims the image to the bounding box of its nonzero alpha.
    pub fn new(id: impl Into<String>, rgba: Frame, source_bank: BankKind) -> Result<Self> {
        let id = id.into();
        let alpha = rgba
            .alpha()
            .ok_or_else(|| Error::InvalidParameter(format!("occluder {id} has no alpha channel")))?;
        let support = Mask::from_plane(rgba.width(), rgba.height(), alpha, 1)?;
        let bbox = support
            .bbox()
            .ok_or_else(|| Error::InvalidParameter(format!("occluder {id} is fully transparent")))?;
        let rgba = if bbox == BBox::full(rgba.width(), rgba.height()) {
            rgba
        } else {
            trim(&rgba, bbox)
        };
        let native_area = rgba.alpha().unwrap().iter().filter(|&&a| a >= 128).count() as u64;
        Ok(OccluderAsset {
            id,
            rgba,
            source_bank,
            native_area,
        })
    }

    pub fn rgba(&self) -> &Frame {
        &self.rgba
    }

    pub fn width(&self) -> u32 {
        self.rgba.width()
    }

    pub fn height(&self) -> u32 {
        self.rgba.height()
    }

    pub fn diagonal(&self) -> f64 {
        (self.width() as f64).hypot(self.height() as f64)
    }
}

fn trim(rgba: &Frame, bbox: BBox) -> Frame {
    let alpha = rgba.alpha().unwrap();
    let mut pixels = Vec::with_capacity(bbox.area() as usize * 3);
    let mut a = Vec::with_capacity(bbox.area() as usize);
    for y in bbox.y_min..bbox.y_max {
        for x in bbox.x_min..bbox.x_max {
            pixels.extend_from_slice(&rgba.get(x, y));
            a.push(alpha[y as usize * rgba.width() as usize + x as usize]);
        }
    }
    Frame::with_alpha(bbox.width(), bbox.height(), pixels, a).expect("trimmed dims are valid")
}

/// Loads every `*.png` in `dir` as an occluder, sorted by file name.
/// Asset ids are `<bank>/<file stem>`.
pub fn load_bank(dir: &Path, kind: BankKind) -> Result<Vec<OccluderAsset>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let mut bank = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        let frame = codec::read_frame(&path)?;
        let asset = OccluderAsset::new(format!("{}/{stem}", kind.as_str()), frame, kind)
            .map_err(|e| e.at(&path))?;
        bank.push(asset);
    }
    Ok(bank)
}
