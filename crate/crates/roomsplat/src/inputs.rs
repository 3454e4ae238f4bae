//! Point-cloud and palette files.

use std::path::Path;

use roomsplat_core::scene::SemanticPalette;
use roomsplat_core::Vec3;

use crate::error::{read_text, Error, Result};

/// One `x y z` triple per line; blank lines and `#` comments are skipped.
pub fn parse_points(text: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| Error::invalid(format!("point cloud line {}: not a number", i + 1)))?;
        match vals[..] {
            [x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => out.push(Vec3::new(x, y, z)),
            [_, _, _] => return Err(Error::invalid(format!("point cloud line {}: non-finite coordinate", i + 1))),
            _ => return Err(Error::invalid(format!("point cloud line {}: expected 3 values, got {}", i + 1, vals.len()))),
        }
    }
    Ok(out)
}

pub fn load_points(path: &Path) -> Result<Vec<Vec3>> {
    parse_points(&read_text(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn load_palette(path: &Path) -> Result<SemanticPalette> {
    SemanticPalette::from_csv(&read_text(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Inverse of [`SemanticPalette::from_csv`].
pub fn palette_to_csv(palette: &SemanticPalette) -> String {
    palette.entries().iter().map(|(l, [r, g, b])| format!("{l},{r},{g},{b}\n")).collect()
}
