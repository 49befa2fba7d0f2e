//! Candidate discovery: `<source>/<clip_id>/{frames,masks[,depth]}/NNNN.png`.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::codec;
use crate::error::{Error, Result};
use crate::frame::{DepthMap, VideoClip};
use crate::manifest::SkippedClip;
use crate::mask::Mask;
use crate::occluder::BankKind;

pub const DEFAULT_FPS: f64 = 24.0;

/// A validated candidate clip. Pixel data stays on disk until [`Candidate::load`].
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub clip_id: String,
    pub dir: PathBuf,
    pub domain: BankKind,
    pub frame_names: Vec<String>,
    pub width: u32,
    pub height: u32,
    pub has_depth: bool,
}

#[derive(Clone, Debug)]
pub struct LoadedCandidate {
    pub clip: VideoClip,
    pub masks: Vec<Mask>,
    pub depths: Option<Vec<DepthMap>>,
}

#[derive(Clone, Debug, Default)]
pub struct Ingested {
    /// Sorted by clip id.
    pub candidates: Vec<Candidate>,
    pub skipped: Vec<SkippedClip>,
}

impl Candidate {
    pub fn frame_count(&self) -> usize {
        self.frame_names.len()
    }

    pub fn load(&self) -> Result<LoadedCandidate> {
        let mut frames = Vec::with_capacity(self.frame_count());
        let mut masks = Vec::with_capacity(self.frame_count());
        for name in &self.frame_names {
            frames.push(codec::read_frame(&self.dir.join("frames").join(name))?.without_alpha());
            masks.push(codec::read_mask(&self.dir.join("masks").join(name))?);
        }
        let depths = if self.has_depth {
            let d = self
                .frame_names
                .iter()
                .map(|n| codec::read_depth(&self.dir.join("depth").join(n)))
                .collect::<Result<Vec<_>>>()?;
            Some(d)
        } else {
            None
        };
        for (i, (f, m)) in frames.iter().zip(&masks).enumerate() {
            if f.dims() != (self.width, self.height) || m.dims() != (self.width, self.height) {
                return Err(Error::InvalidParameter(format!("frame {i} changed size since ingest")));
            }
        }
        Ok(LoadedCandidate {
            clip: VideoClip::new(frames, DEFAULT_FPS)?,
            masks,
            depths,
        })
    }
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name.to_string());
        }
    }
    names.sort();
    Ok(names)
}

fn validate_clip(dir: &Path, clip_id: &str, domain: BankKind) -> std::result::Result<Candidate, String> {
    let frames_dir = dir.join("frames");
    let masks_dir = dir.join("masks");
    if !frames_dir.is_dir() {
        return Err("missing frames/".into());
    }
    if !masks_dir.is_dir() {
        return Err("missing masks/".into());
    }
    let names = png_names(&frames_dir).map_err(|e| e.to_string())?;
    if names.is_empty() {
        return Err("no frames".into());
    }
    let mask_names = png_names(&masks_dir).map_err(|e| e.to_string())?;
    if mask_names != names {
        return Err(format!("{} frames but {} masks with matching names", names.len(), mask_names.len()));
    }
    let depth_dir = dir.join("depth");
    let has_depth = depth_dir.is_dir();
    if has_depth && png_names(&depth_dir).map_err(|e| e.to_string())? != names {
        return Err("depth/ does not match frames/".into());
    }

    let (w, h) = codec::read_png_dims(&frames_dir.join(&names[0])).map_err(|e| e.to_string())?;
    let mut subdirs = vec![&frames_dir, &masks_dir];
    if has_depth {
        subdirs.push(&depth_dir);
    }
    for name in &names {
        for sub in &subdirs {
            let path = sub.join(name);
            let dims = codec::read_png_dims(&path).map_err(|e| e.to_string())?;
            if dims != (w, h) {
                return Err(format!(
                    "{}: {}x{} does not match {}x{}",
                    path.display(),
                    dims.0,
                    dims.1,
                    w,
                    h
                ));
            }
        }
    }
    Ok(Candidate {
        clip_id: clip_id.to_string(),
        dir: dir.to_path_buf(),
        domain,
        frame_names: names,
        width: w,
        height: h,
        has_depth,
    })
}

/// Validates a single candidate directory; the clip id is its directory name.
pub fn open_candidate(dir: &Path, domain: BankKind) -> Result<Candidate> {
    let clip_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidParameter(format!("{}: no usable directory name", dir.display())))?;
    validate_clip(dir, clip_id, domain).map_err(|reason| Error::InvalidParameter(format!("{}: {reason}", dir.display())))
}

/// Walks one source directory. An unreadable source is an error; problems
/// inside individual clips only skip that clip.
pub fn ingest(source: &Path, domain: BankKind) -> Result<Ingested> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(source).map_err(|e| Error::io(source, e))? {
        let entry = entry.map_err(|e| Error::io(source, e))?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push((entry.file_name(), path));
        }
    }
    dirs.sort();
    let mut out = Ingested::default();
    for (name, path) in dirs {
        let Some(clip_id) = name.to_str() else {
            let reason = "clip directory name is not UTF-8".to_string();
            warn!("skipping {}: {reason}", path.display());
            out.skipped.push(SkippedClip {
                clip_id: name.to_string_lossy().into_owned(),
                reason,
            });
            continue;
        };
        match validate_clip(&path, clip_id, domain) {
            Ok(c) => out.candidates.push(c),
            Err(reason) => {
                warn!("skipping {clip_id}: {reason}");
                out.skipped.push(SkippedClip {
                    clip_id: clip_id.to_string(),
                    reason,
                });
            }
        }
    }
    Ok(out)
}

/// Writes a candidate in the layout [`ingest`] reads.
pub fn write_candidate(dir: &Path, clip: &VideoClip, masks: &[Mask], depths: Option<&[DepthMap]>) -> Result<()> {
    for sub in ["frames", "masks"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    for (i, (f, m)) in clip.frames().iter().zip(masks).enumerate() {
        let name = codec::frame_file_name(i);
        codec::write_frame(&dir.join("frames").join(&name), f)?;
        codec::write_mask(&dir.join("masks").join(&name), m)?;
    }
    if let Some(depths) = depths {
        let ddir = dir.join("depth");
        fs::create_dir_all(&ddir).map_err(|e| Error::io(&ddir, e))?;
        for (i, d) in depths.iter().enumerate() {
            codec::write_depth(&ddir.join(codec::frame_file_name(i)), d)?;
        }
    }
    Ok(())
}
