//! PNG encoding for frames, masks and depth maps.
//!
//! Masks are written as 1-bit grayscale. Decoding accepts any PNG color type;
//! mask pixels are set where the (max-channel) value is at least 128.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Compression, Transformations};

use crate::error::{Error, Result};
use crate::frame::{DepthMap, Frame};
use crate::mask::Mask;

const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::Malformed {
        what: "png",
        offset: offset as u64,
        reason: reason.into(),
    }
}

/// Walk the chunk layout so truncation and framing errors carry the byte
/// offset where the file stops making sense.
pub fn check_png_structure(bytes: &[u8]) -> Result<()> {
    if bytes.len() < SIGNATURE.len() || bytes[..8] != SIGNATURE {
        return Err(malformed(0, "bad signature"));
    }
    let mut pos = 8;
    loop {
        if bytes.len() < pos + 8 {
            return Err(malformed(pos, "truncated chunk header"));
        }
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let kind = &bytes[pos + 4..pos + 8];
        if !kind.iter().all(u8::is_ascii_alphabetic) {
            return Err(malformed(pos + 4, "invalid chunk type"));
        }
        let end = pos + 12 + len;
        if bytes.len() < end {
            return Err(malformed(
                pos,
                format!("truncated {} chunk", String::from_utf8_lossy(kind)),
            ));
        }
        if kind == b"IEND" {
            return Ok(());
        }
        pos = end;
    }
}

struct Decoded {
    width: u32,
    height: u32,
    color: ColorType,
    depth: BitDepth,
    data: Vec<u8>,
}

fn decode_raw(bytes: &[u8], transforms: Transformations) -> Result<Decoded> {
    check_png_structure(bytes)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(transforms);
    let mut reader = decoder
        .read_info()
        .map_err(|e| malformed(bytes.len(), e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| malformed(8, "image too large"))?;
    let mut data = vec![0; size];
    let info = reader
        .next_frame(&mut data)
        .map_err(|e| malformed(bytes.len(), e.to_string()))?;
    data.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width,
        height: info.height,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    let d = decode_raw(bytes, Transformations::EXPAND | Transformations::STRIP_16)?;
    let n = d.width as usize * d.height as usize;
    let mut rgb = Vec::with_capacity(n * 3);
    let mut alpha = None;
    match d.color {
        ColorType::Grayscale => {
            for &g in &d.data {
                rgb.extend_from_slice(&[g, g, g]);
            }
        }
        ColorType::GrayscaleAlpha => {
            let mut a = Vec::with_capacity(n);
            for px in d.data.chunks_exact(2) {
                rgb.extend_from_slice(&[px[0], px[0], px[0]]);
                a.push(px[1]);
            }
            alpha = Some(a);
        }
        ColorType::Rgb => rgb = d.data,
        ColorType::Rgba => {
            let mut a = Vec::with_capacity(n);
            for px in d.data.chunks_exact(4) {
                rgb.extend_from_slice(&px[..3]);
                a.push(px[3]);
            }
            alpha = Some(a);
        }
        ColorType::Indexed => return Err(malformed(8, "unexpanded palette")),
    }
    match alpha {
        Some(a) => Frame::with_alpha(d.width, d.height, rgb, a),
        None => Frame::new(d.width, d.height, rgb),
    }
}

fn encode(width: u32, height: u32, color: ColorType, depth: BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(depth);
        enc.set_compression(Compression::Fast);
        // Writing into a Vec with a consistent header cannot fail.
        let mut writer = enc.write_header().expect("png header");
        writer.write_image_data(data).expect("png data");
        writer.finish().expect("png finish");
    }
    out
}

/// RGB PNG, or RGBA when the frame carries alpha.
pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    match frame.alpha() {
        None => encode(
            frame.width(),
            frame.height(),
            ColorType::Rgb,
            BitDepth::Eight,
            frame.pixels(),
        ),
        Some(a) => {
            let mut data = Vec::with_capacity(a.len() * 4);
            for (px, &alpha) in frame.pixels().chunks_exact(3).zip(a) {
                data.extend_from_slice(px);
                data.push(alpha);
            }
            encode(frame.width(), frame.height(), ColorType::Rgba, BitDepth::Eight, &data)
        }
    }
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let d = decode_raw(bytes, Transformations::EXPAND | Transformations::STRIP_16)?;
    let channels = match d.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(malformed(8, "unexpanded palette")),
    };
    let color_channels = if channels >= 3 { 3 } else { 1 };
    let plane: Vec<u8> = d
        .data
        .chunks_exact(channels)
        .map(|px| px[..color_channels].iter().copied().max().unwrap_or(0))
        .collect();
    Mask::from_plane(d.width, d.height, &plane, 128)
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let (w, h) = mask.dims();
    let stride = (w as usize).div_ceil(8);
    let mut data = vec![0u8; stride * h as usize];
    for (x, y) in mask.iter_set() {
        data[y as usize * stride + x as usize / 8] |= 0x80 >> (x % 8);
    }
    encode(w, h, ColorType::Grayscale, BitDepth::One, &data)
}

/// Grayscale PNG (8 or 16 bit) as relative depth.
pub fn decode_depth(bytes: &[u8]) -> Result<DepthMap> {
    let d = decode_raw(bytes, Transformations::EXPAND)?;
    let channels = match d.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        _ => return Err(malformed(8, "depth maps must be grayscale")),
    };
    let values: Vec<f32> = match d.depth {
        BitDepth::Sixteen => d
            .data
            .chunks_exact(2 * channels)
            .map(|px| u16::from_be_bytes([px[0], px[1]]) as f32)
            .collect(),
        _ => d.data.chunks_exact(channels).map(|px| px[0] as f32).collect(),
    };
    DepthMap::new(d.width, d.height, values)
}

/// 16-bit grayscale; values are rounded and clamped to `0..=65535`.
pub fn encode_depth(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = depth.dims();
    let mut data = Vec::with_capacity(w as usize * h as usize * 2);
    for y in 0..h {
        for x in 0..w {
            let v = depth.get(x, y).round().clamp(0.0, 65535.0) as u16;
            data.extend_from_slice(&v.to_be_bytes());
        }
    }
    encode(w, h, ColorType::Grayscale, BitDepth::Sixteen, &data)
}

/// Width and height from the PNG header without decoding pixel data.
pub fn png_dims(bytes: &[u8]) -> Result<(u32, u32)> {
    check_png_structure(bytes)?;
    let reader = png::Decoder::new(Cursor::new(bytes))
        .read_info()
        .map_err(|e| malformed(8, e.to_string()))?;
    let info = reader.info();
    Ok((info.width, info.height))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    decode_frame(&read_bytes(path)?).map_err(|e| e.at(path))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_mask(&read_bytes(path)?).map_err(|e| e.at(path))
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    decode_depth(&read_bytes(path)?).map_err(|e| e.at(path))
}

pub fn read_png_dims(path: &Path) -> Result<(u32, u32)> {
    png_dims(&read_bytes(path)?).map_err(|e| e.at(path))
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode_frame(frame)).map_err(|e| Error::io(path, e))
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    fs::write(path, encode_depth(depth)).map_err(|e| Error::io(path, e))
}

/// `NNNN.png` for a frame index.
pub fn frame_file_name(index: usize) -> String {
    format!("{index:04}.png")
}
