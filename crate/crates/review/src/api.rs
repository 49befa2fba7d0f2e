//! HTTP routes. See `docs/review-api.yaml` for the wire format.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tower_http::services::ServeDir;

use occkit_core::codec;
use occkit_core::manifest::{ClipManifest, RuleSummary, Verdict};

use crate::error::{ReviewError, Result};
use crate::store::{DecisionRequest, LogEntry, ReviewStore, Status};

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;
/// Overlay tint; tinted pixels are the rounded mean of source and tint.
pub const TINT: [u8; 3] = [255, 0, 0];

type Shared = Arc<ReviewStore>;

pub fn router(store: Shared, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/candidates", get(list_candidates))
        .route("/api/candidates/{id}", get(get_candidate))
        .route("/api/candidates/{id}/frames/{n}", get(get_frame))
        .route("/api/candidates/{id}/decision", post(post_decision))
        .route("/api/export", get(export))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Serialize)]
pub struct CandidateSummary {
    pub clip_id: String,
    pub verdict: Verdict,
    pub version: u64,
    pub frame_count: usize,
    pub occlusion_rates: Vec<f64>,
    pub checks: Vec<RuleSummary>,
    pub thumbnail_url: String,
}

#[derive(Serialize)]
struct Page {
    items: Vec<CandidateSummary>,
    /// Pass as `after` to fetch the next page; absent on the last page.
    #[serde(skip_serializing_if = "Option::is_none")]
    next: Option<String>,
}

fn summary(clip: &ClipManifest, verdict: Verdict, version: u64) -> CandidateSummary {
    CandidateSummary {
        clip_id: clip.clip_id.clone(),
        verdict,
        version,
        frame_count: clip.frame_count,
        occlusion_rates: clip.occlusion_rates.clone(),
        checks: clip.checks.clone(),
        thumbnail_url: format!("/api/candidates/{}/frames/0?overlay=mask", clip.clip_id),
    }
}

fn only_keys(q: &HashMap<String, String>, allowed: &[&str]) -> Result<()> {
    match q.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ReviewError::BadRequest(format!("unknown query parameter {k:?}"))),
        None => Ok(()),
    }
}

async fn list_candidates(State(store): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Json<impl Serialize>> {
    only_keys(&q, &["status", "limit", "after"])?;
    let status = match q.get("status") {
        None => Status::Pending,
        Some(s) => Status::parse(s).ok_or_else(|| ReviewError::BadRequest(format!("unknown status {s:?}")))?,
    };
    let limit = match q.get("limit") {
        None => DEFAULT_PAGE,
        Some(s) => match s.parse::<usize>() {
            Ok(n) if (1..=MAX_PAGE).contains(&n) => n,
            _ => return Err(ReviewError::BadRequest(format!("limit must be 1..={MAX_PAGE}, got {s:?}"))),
        },
    };
    let after = q.get("after").map(String::as_str);
    let page = store.read(|s| {
        let mut items: Vec<_> = s
            .list(status, after)
            .take(limit + 1)
            .map(|c| summary(c, s.effective_verdict(c), s.version(&c.clip_id)))
            .collect();
        let next = if items.len() > limit {
            items.truncate(limit);
            items.last().map(|i| i.clip_id.clone())
        } else {
            None
        };
        Page { items, next }
    });
    Ok(Json(page))
}

#[derive(Serialize)]
struct Detail {
    #[serde(flatten)]
    summary: CandidateSummary,
    clip: ClipManifest,
    history: Vec<LogEntry>,
}

async fn get_candidate(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<impl Serialize>> {
    store.read(|s| {
        let clip = s.clip(&id).ok_or_else(|| ReviewError::NotFound(id.clone()))?;
        let verdict = s.effective_verdict(clip);
        Ok(Json(Detail {
            summary: summary(clip, verdict, s.version(&id)),
            clip: ClipManifest {
                verdict,
                ..clip.clone()
            },
            history: s
                .history()
                .iter()
                .filter(|e| e.decision.candidate_id == id)
                .cloned()
                .collect(),
        }))
    })
}

/// Candidate directory holding `frames/` and `masks/`. Relative source dirs
/// are resolved against the manifest's directory; without one the clip is
/// looked up at `<manifest dir>/<clip id>`.
pub fn candidate_dir(manifest_dir: &Path, clip: &ClipManifest) -> PathBuf {
    match &clip.source_dir {
        Some(d) => manifest_dir.join(d),
        None => manifest_dir.join(&clip.clip_id),
    }
}

fn nth_png(dir: &Path, n: usize) -> Option<PathBuf> {
    let mut names: Vec<_> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    names.sort();
    names.into_iter().nth(n)
}

/// Blends [`TINT`] at 50% over every set mask pixel.
pub fn tint(frame: &occkit_core::Frame, mask: &occkit_core::Mask) -> occkit_core::Frame {
    let mut out = frame.clone().without_alpha();
    for (x, y) in mask.iter_set() {
        let p = out.get(x, y);
        out.set(x, y, std::array::from_fn(|c| ((p[c] as u16 + TINT[c] as u16 + 1) / 2) as u8));
    }
    out
}

fn render_frame(dir: &Path, id: &str, n: usize, overlay: bool) -> Result<Vec<u8>> {
    let not_found = || ReviewError::FrameNotFound {
        candidate_id: id.to_string(),
        frame: n,
    };
    let frame_path = nth_png(&dir.join("frames"), n).ok_or_else(not_found)?;
    let bytes = fs::read(&frame_path).map_err(|e| ReviewError::io(&frame_path, e))?;
    if !overlay {
        return Ok(bytes);
    }
    let mask_path = nth_png(&dir.join("masks"), n).ok_or_else(not_found)?;
    let mask = codec::read_mask(&mask_path)?;
    if mask.is_empty() {
        return Ok(bytes);
    }
    let frame = codec::decode_frame(&bytes).map_err(|e| e.at(&frame_path))?;
    if frame.dims() != mask.dims() {
        return Err(occkit_core::Error::DimensionMismatch {
            expected_w: frame.width(),
            expected_h: frame.height(),
            got_w: mask.width(),
            got_h: mask.height(),
        }
        .at(&mask_path)
        .into());
    }
    Ok(codec::encode_frame(&tint(&frame, &mask)))
}

async fn get_frame(
    State(store): State<Shared>,
    UrlPath((id, n)): UrlPath<(String, usize)>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response> {
    only_keys(&q, &["overlay"])?;
    let overlay = match q.get("overlay").map(String::as_str) {
        None | Some("none") => false,
        Some("mask") => true,
        Some(other) => return Err(ReviewError::BadRequest(format!("overlay must be mask or none, got {other:?}"))),
    };
    let dir = store.read(|s| {
        let clip = s.clip(&id).ok_or_else(|| ReviewError::NotFound(id.clone()))?;
        if n >= clip.frame_count {
            return Err(ReviewError::FrameNotFound {
                candidate_id: id.clone(),
                frame: n,
            });
        }
        Ok(candidate_dir(store.manifest_dir(), clip))
    })?;
    let png = tokio::task::spawn_blocking(move || render_frame(&dir, &id, n, overlay))
        .await
        .map_err(|e| ReviewError::Internal(format!("render task failed: {e}")))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Serialize)]
struct DecisionResponse {
    clip_id: String,
    verdict: Verdict,
    version: u64,
    entry: LogEntry,
}

async fn post_decision(State(store): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<impl Serialize>> {
    let req: DecisionRequest =
        serde_json::from_slice(&body).map_err(|e| ReviewError::BadRequest(format!("decision body: {e}")))?;
    let s2 = store.clone();
    let entry = tokio::task::spawn_blocking(move || s2.decide(&id, req))
        .await
        .map_err(|e| ReviewError::Internal(format!("write task failed: {e}")))??;
    let verdict = store.read(|s| {
        let clip = s.clip(&entry.decision.candidate_id).expect("decided candidate exists");
        s.effective_verdict(clip)
    });
    Ok(Json(DecisionResponse {
        clip_id: entry.decision.candidate_id.clone(),
        verdict,
        version: entry.version,
        entry,
    }))
}

async fn export(State(store): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Json<impl Serialize>> {
    only_keys(&q, &["verdict"])?;
    let verdict = match q.get("verdict").map(String::as_str) {
        None | Some("accepted") => Verdict::HumanAccept,
        Some("rejected") => Verdict::HumanReject,
        Some(other) => return Err(ReviewError::BadRequest(format!("verdict must be accepted or rejected, got {other:?}"))),
    };
    Ok(Json(store.read(|s| s.export(verdict))))
}
