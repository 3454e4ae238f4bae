//! Image, depth and camera-table files.

use std::path::Path;

use roomsplat_core::render::{Camera, RenderBundle};
use roomsplat_core::Vec3;

use crate::error::{read, read_text, write, Error, Result};

pub const DEPTH_MAGIC: [u8; 4] = *b"DPTH";

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit RGB image of `[0, 1]` values, row-major.
pub fn rgb_image(width: usize, height: usize, pixels: &[Vec3]) -> image::RgbImage {
    let buf = pixels.iter().flat_map(|p| [to_u8(p.x), to_u8(p.y), to_u8(p.z)]).collect();
    image::RgbImage::from_raw(width as u32, height as u32, buf).expect("pixel count matches")
}

/// Camera-space normals remapped from `[-1, 1]` to `[0, 1]`.
pub fn normal_pixels(b: &RenderBundle) -> Vec<Vec3> {
    b.normal.iter().map(|n| (n + Vec3::repeat(1.0)) * 0.5).collect()
}

/// Depth scaled to `[0, 1]` over its finite range, near bright; misses are black.
pub fn depth_preview_pixels(b: &RenderBundle) -> Vec<Vec3> {
    let finite = b.depth.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), d| (a.min(d), c.max(d)));
    let span = (hi - lo).max(1e-9);
    b.depth.iter().map(|&d| if d.is_finite() { Vec3::repeat(1.0 - 0.8 * (d - lo) / span) } else { Vec3::zeros() }).collect()
}

pub fn encode_png(img: &image::RgbImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).map_err(|e| Error::invalid(format!("png encoding: {e}")))?;
    Ok(out.into_inner())
}

pub fn save_png(path: &Path, width: usize, height: usize, pixels: &[Vec3]) -> Result<()> {
    write(path, &encode_png(&rgb_image(width, height, pixels))?)
}

/// `DPTH | u32 width | u32 height | u32 reserved | f32 row-major`, little-endian.
/// Misses are stored as +inf.
pub fn encode_depth(width: usize, height: usize, depth: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * depth.len());
    out.extend_from_slice(&DEPTH_MAGIC);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for d in depth {
        out.extend_from_slice(&(*d as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 16 || bytes[..4] != DEPTH_MAGIC {
        return Err(Error::invalid("depth raster: bad header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (w, h) = (word(4), word(8));
    let body = &bytes[16..];
    if body.len() != 4 * w * h {
        return Err(Error::invalid(format!("depth raster: expected {} payload bytes, found {}", 4 * w * h, body.len())));
    }
    Ok((w, h, body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect()))
}

pub fn load_depth(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    decode_depth(&read(path)?)
}

/// The four per-camera outputs: RGB, semantic, normal and depth.
pub fn write_views(dir: &Path, stem: &str, b: &RenderBundle) -> Result<Vec<std::path::PathBuf>> {
    let paths = ["rgb.png", "semantic.png", "normal.png", "depth.dpth"].map(|s| dir.join(format!("{stem}_{s}")));
    save_png(&paths[0], b.width, b.height, &b.color)?;
    save_png(&paths[1], b.width, b.height, &b.semantic)?;
    save_png(&paths[2], b.width, b.height, &normal_pixels(b))?;
    write(&paths[3], &encode_depth(b.width, b.height, &b.depth))?;
    Ok(paths.to_vec())
}

/// `idx px py pz elev_rad azim_rad fov_rad W H`, one camera per line.
pub fn cameras_to_table(cams: &[Camera]) -> String {
    cams.iter()
        .enumerate()
        .map(|(i, c)| {
            let p = c.position;
            format!("{i} {} {} {} {} {} {} {} {}\n", p.x, p.y, p.z, c.elevation, c.azimuth, c.fov_y, c.width, c.height)
        })
        .collect()
}

pub fn parse_camera_table(text: &str) -> Result<Vec<Camera>> {
    let mut cams = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |what: &str| Error::invalid(format!("camera table line {}: {what}", n + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 9 {
            return Err(err(&format!("expected 9 fields, got {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| err("not a number"));
        let int = |i: usize| f[i].parse::<u32>().map_err(|_| err("width and height must be integers"));
        let cam = Camera::new(Vec3::new(num(1)?, num(2)?, num(3)?), num(4)?, num(5)?, num(6)?, int(7)?, int(8)?)
            .map_err(|e| err(&e.to_string()))?;
        cams.push(cam);
    }
    if cams.is_empty() {
        return Err(Error::invalid("camera table has no cameras"));
    }
    Ok(cams)
}

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    parse_camera_table(&read_text(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn save_cameras(path: &Path, cams: &[Camera]) -> Result<()> {
    write(path, cameras_to_table(cams).as_bytes())
}
