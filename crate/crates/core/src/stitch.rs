//! Sliding-window completion of clips longer than a completer's fixed window.
//!
//! Window 0 covers frames `[0, k)`. Each later window starts `m` frames before
//! the previous one ended, so its first `m` inputs are frames already blended
//! with completed output (`o·M + v·(1 − M)`), with visible masks re-derived
//! from that output. The last window is right-aligned to end exactly at `N`.

use std::fs;
use std::ops::Range;
use std::path::PathBuf;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{Error, Result};
use crate::frame::{Frame, VideoClip};
use crate::mask::Mask;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchConfig {
    pub k: usize,
    pub m: usize,
    /// Channel values below this count as "not white" when deriving masks.
    pub mask_threshold: u8,
}

impl Default for StitchConfig {
    fn default() -> Self {
        StitchConfig {
            k: 14,
            m: 5,
            mask_threshold: 250,
        }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.m && self.m < self.k) {
            return Err(Error::Config(format!("need 1 <= m < k, got k={} m={}", self.k, self.m)));
        }
        Ok(())
    }
}

/// Anything that turns a window of frames plus visible masks into an
/// object-on-white clip of the same length and size.
pub trait Completer {
    /// `range` is the window's position in the full clip.
    fn complete(&mut self, range: Range<usize>, frames: &[Frame], masks: &[Mask]) -> Result<Vec<Frame>>;
}

impl<F> Completer for F
where
    F: FnMut(Range<usize>, &[Frame], &[Mask]) -> Result<Vec<Frame>>,
{
    fn complete(&mut self, range: Range<usize>, frames: &[Frame], masks: &[Mask]) -> Result<Vec<Frame>> {
        self(range, frames, masks)
    }
}

/// `o` where `mask` is set, `v` elsewhere.
pub fn blend(v: &Frame, o: &Frame, mask: &Mask) -> Result<Frame> {
    v.same_dims(o)?;
    if v.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected_w: v.width(),
            expected_h: v.height(),
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    let mut out = v.clone().without_alpha();
    for (x, y) in mask.iter_set() {
        out.set(x, y, o.get(x, y));
    }
    Ok(out)
}

/// Object pixels of an object-on-white frame: any channel below the threshold.
pub fn derive_mask(o: &Frame, threshold: u8) -> Mask {
    let plane: Vec<u8> = o
        .pixels()
        .chunks_exact(3)
        .map(|p| if p.iter().any(|&c| c < threshold) { 1 } else { 0 })
        .collect();
    Mask::from_plane(o.width(), o.height(), &plane, 1).expect("plane matches frame")
}

pub fn plan_windows(n: usize, cfg: &StitchConfig) -> Result<Vec<Range<usize>>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidFrameCount(0));
    }
    let mut windows = vec![0..n.min(cfg.k)];
    while windows.last().unwrap().end < n {
        let start = windows.last().unwrap().end - cfg.m;
        let end = start + cfg.k;
        windows.push(if end > n { n - cfg.k..n } else { start..end });
    }
    Ok(windows)
}

/// Runs the completer over every window and returns the full-length completed
/// object clip. Frames covered by two windows take the later window's output.
pub fn stitch(clip: &VideoClip, masks: &[Mask], completer: &mut dyn Completer, cfg: &StitchConfig) -> Result<VideoClip> {
    let n = clip.len();
    if masks.len() != n {
        return Err(Error::InvalidParameter(format!("{} masks for {n} frames", masks.len())));
    }
    let (w, h) = clip.dims();
    let windows = plan_windows(n, cfg)?;
    let source = clip.frames();
    let mut blended: Vec<Option<Frame>> = vec![None; n];
    let mut output: Vec<Option<Frame>> = vec![None; n];

    for (wi, range) in windows.into_iter().enumerate() {
        let mut frames = Vec::with_capacity(range.len());
        let mut window_masks = Vec::with_capacity(range.len());
        for i in range.clone() {
            match (&blended[i], &output[i]) {
                (Some(b), Some(o)) => {
                    frames.push(b.clone());
                    window_masks.push(derive_mask(o, cfg.mask_threshold));
                }
                _ => {
                    frames.push(source[i].clone());
                    window_masks.push(masks[i].clone());
                }
            }
        }
        let completed = completer
            .complete(range.clone(), &frames, &window_masks)
            .map_err(|e| match e {
                e @ (Error::CompleterFailed { .. } | Error::CompleterShape { .. }) => e,
                other => Error::CompleterFailed {
                    window: wi,
                    reason: other.to_string(),
                },
            })?;
        let bad = completed.iter().find(|f| f.dims() != (w, h));
        if completed.len() != range.len() || bad.is_some() {
            let (gw, gh) = bad.map(|f| f.dims()).unwrap_or((w, h));
            return Err(Error::CompleterShape {
                window: wi,
                expected: range.len(),
                got: completed.len(),
                expected_w: w,
                expected_h: h,
                got_w: gw,
                got_h: gh,
            });
        }
        for (i, o) in range.zip(completed) {
            let o = o.without_alpha();
            let m = derive_mask(&o, cfg.mask_threshold);
            blended[i] = Some(blend(&source[i], &o, &m)?);
            output[i] = Some(o);
        }
    }
    VideoClip::new(output.into_iter().map(|o| o.expect("every frame is covered")).collect(), clip.fps)
}

/// Runs an external program per window.
///
/// For each window a temp directory is prepared with `input/frames/NNNN.png`,
/// `input/masks/NNNN.png` (1-bit) and `input/window.json`
/// (`{"index", "start", "end"}`), plus an empty `output/` directory. The
/// program is invoked as `<program> <input-dir> <output-dir>` and must write
/// `output/NNNN.png` for every input frame before exiting with status 0.
pub struct CommandCompleter {
    pub program: PathBuf,
    window: usize,
}

impl CommandCompleter {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        CommandCompleter {
            program: program.into(),
            window: 0,
        }
    }

    /// Parses `cmd://<executable>`.
    pub fn from_uri(uri: &str) -> Result<Self> {
        let path = uri
            .strip_prefix("cmd://")
            .ok_or_else(|| Error::Config(format!("completer must be cmd://<executable>, got {uri:?}")))?;
        if path.is_empty() {
            return Err(Error::Config("empty completer path".into()));
        }
        Ok(CommandCompleter::new(path))
    }
}

impl Completer for CommandCompleter {
    fn complete(&mut self, range: Range<usize>, frames: &[Frame], masks: &[Mask]) -> Result<Vec<Frame>> {
        let window = self.window;
        self.window += 1;
        let fail = |reason: String| Error::CompleterFailed { window, reason };
        let tmp = tempfile::tempdir().map_err(|e| fail(e.to_string()))?;
        let input = tmp.path().join("input");
        let output = tmp.path().join("output");
        for d in [input.join("frames"), input.join("masks"), output.clone()] {
            fs::create_dir_all(&d).map_err(|e| fail(format!("{}: {e}", d.display())))?;
        }
        for (j, (f, m)) in frames.iter().zip(masks).enumerate() {
            codec::write_frame(&input.join("frames").join(codec::frame_file_name(j)), f)?;
            codec::write_mask(&input.join("masks").join(codec::frame_file_name(j)), m)?;
        }
        let meta = serde_json::json!({ "index": window, "start": range.start, "end": range.end });
        fs::write(input.join("window.json"), meta.to_string()).map_err(|e| fail(e.to_string()))?;

        let status = Command::new(&self.program)
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| fail(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(fail(format!("{} exited with {status}", self.program.display())));
        }
        (0..frames.len())
            .map(|j| codec::read_frame(&output.join(codec::frame_file_name(j))).map_err(|e| fail(e.to_string())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_examples() {
        let cfg = StitchConfig::default();
        assert_eq!(plan_windows(14, &cfg).unwrap(), vec![0..14]);
        assert_eq!(plan_windows(23, &cfg).unwrap(), vec![0..14, 9..23]);
        assert_eq!(plan_windows(30, &cfg).unwrap(), vec![0..14, 9..23, 16..30]);
        assert_eq!(plan_windows(5, &cfg).unwrap(), vec![0..5]);
        assert!(plan_windows(0, &cfg).is_err());
        assert!(plan_windows(10, &StitchConfig { k: 5, m: 5, mask_threshold: 250 }).is_err());
    }

    #[test]
    fn derive_mask_threshold() {
        let f = Frame::from_fn(4, 1, |x, _| match x {
            0 => [255, 255, 255],
            1 => [250, 250, 250],
            2 => [255, 249, 255],
            _ => [0, 0, 0],
        });
        let m = derive_mask(&f, 250);
        assert_eq!(m.iter_set().collect::<Vec<_>>(), vec![(2, 0), (3, 0)]);
        assert!(derive_mask(&Frame::filled(5, 5, [255; 3]), 250).is_empty());
    }

    #[test]
    fn blend_projections() {
        let v = Frame::from_fn(6, 6, |x, y| [x as u8, y as u8, 1]);
        let o = Frame::from_fn(6, 6, |x, y| [200, x as u8 + y as u8, 9]);
        assert_eq!(blend(&v, &o, &Mask::full(6, 6)).unwrap(), o);
        assert_eq!(blend(&v, &o, &Mask::new(6, 6)).unwrap(), v);
        assert!(blend(&v, &o, &Mask::new(5, 6)).is_err());
    }

    #[test]
    fn shape_errors_carry_window_index() {
        let clip = VideoClip::new(vec![Frame::filled(4, 4, [0; 3]); 20], 10.0).unwrap();
        let masks = vec![Mask::new(4, 4); 20];
        let mut calls = 0;
        let mut short = |_r: Range<usize>, f: &[Frame], _m: &[Mask]| -> Result<Vec<Frame>> {
            calls += 1;
            if calls == 2 { Ok(f[1..].to_vec()) } else { Ok(f.to_vec()) }
        };
        match stitch(&clip, &masks, &mut short, &StitchConfig::default()) {
            Err(Error::CompleterShape { window, .. }) => assert_eq!(window, 1),
            other => panic!("unexpected {other:?}"),
        }
        let mut failing = |r: Range<usize>, _f: &[Frame], _m: &[Mask]| -> Result<Vec<Frame>> {
            if r.start > 0 { Err(Error::InvalidParameter("boom".into())) } else { Ok(vec![Frame::filled(4, 4, [1; 3]); 14]) }
        };
        match stitch(&clip, &masks, &mut failing, &StitchConfig::default()) {
            Err(Error::CompleterFailed { window, .. }) => assert_eq!(window, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
