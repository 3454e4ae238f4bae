use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::Vec3;

pub type Rgb8 = [u8; 3];

const DEFAULT_TABLE: &str = include_str!("../../data/palette.csv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PaletteError {
    #[error("palette line {line}: {reason}")]
    Parse { line: usize, reason: &'static str },
    #[error("palette label {0:?} appears twice")]
    DuplicateLabel(String),
    #[error("palette color of {0:?} is already used by another label")]
    DuplicateColor(String),
}

/// Label to segmentation color table.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPalette {
    entries: Vec<(String, Rgb8)>,
}

impl SemanticPalette {
    /// Parses `label,R,G,B` lines. Blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self, PaletteError> {
        let mut entries: Vec<(String, Rgb8)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason| PaletteError::Parse { line: i + 1, reason };
            let mut parts = line.rsplitn(4, ',');
            let b = parts.next().ok_or_else(|| err("missing blue"))?;
            let g = parts.next().ok_or_else(|| err("missing green"))?;
            let r = parts.next().ok_or_else(|| err("missing red"))?;
            let label = parts.next().ok_or_else(|| err("missing label"))?.trim();
            if label.is_empty() {
                return Err(err("empty label"));
            }
            let parse = |s: &str| s.trim().parse::<u8>().map_err(|_| err("channel is not an integer in 0..=255"));
            let rgb = [parse(r)?, parse(g)?, parse(b)?];
            if entries.iter().any(|(l, _)| l == label) {
                return Err(PaletteError::DuplicateLabel(label.to_string()));
            }
            if entries.iter().any(|(_, c)| *c == rgb) {
                return Err(PaletteError::DuplicateColor(label.to_string()));
            }
            entries.push((label.to_string(), rgb));
        }
        Ok(Self { entries })
    }

    /// The bundled 40-entry indoor table.
    pub fn indoor() -> Self {
        Self::from_csv(DEFAULT_TABLE).expect("bundled palette is valid")
    }

    pub fn entries(&self) -> &[(String, Rgb8)] {
        &self.entries
    }

    pub fn get(&self, label: &str) -> Option<Rgb8> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, c)| *c)
    }

    /// Table color, or a hash-derived color that avoids every table entry.
    pub fn color(&self, label: &str) -> Rgb8 {
        if let Some(c) = self.get(label) {
            return c;
        }
        let mut salt = 0u32;
        loop {
            let mut h = Sha256::new();
            h.update(label.as_bytes());
            h.update(salt.to_le_bytes());
            let d = h.finalize();
            let c = [d[0], d[1], d[2]];
            if !self.entries.iter().any(|(_, e)| *e == c) {
                return c;
            }
            salt += 1;
        }
    }

    /// [`Self::color`] scaled to `[0, 1]`.
    pub fn color_unit(&self, label: &str) -> Vec3 {
        unit(self.color(label))
    }

    /// Label whose color is nearest to `rgb` (unit scale) among `labels`.
    pub fn nearest<'a>(&self, rgb: &Vec3, labels: &'a [String]) -> Option<&'a str> {
        labels
            .iter()
            .map(|l| (l, (self.color_unit(l) - rgb).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, _)| l.as_str())
    }
}

pub(crate) fn unit(c: Rgb8) -> Vec3 {
    Vec3::new(c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0)
}
