use crate::error::{Error, Result};
use crate::manifest::OccluderTrack;
use crate::mask::BBox;

/// Linear track between a start and an end placement.
///
/// Frame `i` sits at parameter `t = i / (n - 1)`, so frame 0 is exactly the
/// start and frame `n - 1` exactly the end.
pub fn interpolate_track_easy(
    p_st: (f64, f64),
    s_st: f64,
    p_ed: (f64, f64),
    s_ed: f64,
    n: usize,
) -> Result<OccluderTrack> {
    if n < 2 {
        return Err(Error::InvalidFrameCount(n));
    }
    let last = (n - 1) as f64;
    // (1 - t)·a + t·b hits both endpoints exactly in floating point
    let lerp = |a: f64, b: f64, t: f64| (1.0 - t) * a + t * b;
    let mut positions = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / last;
        positions.push((lerp(p_st.0, p_ed.0, t), lerp(p_st.1, p_ed.1, t)));
        scales.push(lerp(s_st, s_ed, t));
    }
    OccluderTrack::new(positions, scales)
}

/// Track locked to the object's bounding box: translation follows the box
/// center, scale follows the cube root of the larger side ratio.
pub fn track_hard(p_st: (f64, f64), s_st: f64, bboxes: &[BBox]) -> Result<OccluderTrack> {
    let first = bboxes.first().ok_or(Error::InvalidFrameCount(0))?;
    if let Some(i) = bboxes.iter().position(|b| b.width() == 0 || b.height() == 0) {
        return Err(Error::DegenerateBBox { frame: i });
    }
    if !(s_st.is_finite() && s_st > 0.0) {
        return Err(Error::InvalidParameter(format!("start scale {s_st}")));
    }
    let c_st = first.center();
    let (h_st, w_st) = (first.height() as f64, first.width() as f64);
    let mut positions = Vec::with_capacity(bboxes.len());
    let mut scales = Vec::with_capacity(bboxes.len());
    for b in bboxes {
        let c = b.center();
        positions.push((c.0 - c_st.0 + p_st.0, c.1 - c_st.1 + p_st.1));
        let ratio = (b.height() as f64 / h_st).max(b.width() as f64 / w_st);
        scales.push(ratio.cbrt() * s_st);
    }
    OccluderTrack::new(positions, scales)
}
