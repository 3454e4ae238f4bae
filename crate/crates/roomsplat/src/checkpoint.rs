//! Versioned binary scene checkpoints.
//!
//! `L2S1 | u32 version | u8 stage | layout JSON | palette CSV | field |
//! objects | sha256 of everything before it`. Integers are little-endian
//! u32, floats little-endian f64, strings and blobs u32-length-prefixed.
//! Optimizer moments are not stored; a resumed stage restarts them.

use std::path::Path;

use roomsplat_core::optim::{AppearanceParams, GeometryParams, ObjectSlot, SceneState, StageMarker, SurfelGeometry};
use roomsplat_core::render::{BackgroundField, FieldConfig};
use roomsplat_core::scene::SemanticPalette;
use roomsplat_core::{Mat3, Vec3};
use sha2::{Digest, Sha256};

use crate::error::{read, write, Error, Result};
use crate::inputs::palette_to_csv;
use crate::layout_file::{layout_to_json, parse_layout};

pub const MAGIC: [u8; 4] = *b"L2S1";
pub const VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&u32::try_from(v).expect("count fits in u32").to_le_bytes());
    }
    fn f64s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f64>) {
        for v in vals {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn vec(&mut self, v: &[f64]) {
        self.u32(v.len());
        self.f64s(v);
    }
    fn text(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(what: &str) -> Error {
    Error::invalid(format!("checkpoint: {what}"))
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(corrupt("truncated"));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn text(&mut self) -> Result<&'a str> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| corrupt("string is not UTF-8"))
    }
}

pub fn encode(state: &SceneState) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(&MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    w.u8(state.stage().code());
    w.text(&layout_to_json(state.layout()));
    w.text(&palette_to_csv(state.palette()));

    let field = &state.appearance().field;
    let c = field.config();
    for v in [c.levels, c.features, c.log2_table_size as usize, c.base_resolution as usize, c.max_resolution as usize] {
        w.u32(v);
    }
    let (lo, hi) = field.bounds();
    w.f64s([&c.init_range]);
    w.f64s(lo.iter().chain(hi.iter()));
    w.vec(field.tables());
    w.vec(field.weight());
    w.f64s(field.bias().iter());

    let (geo, app) = (state.geometry(), state.appearance());
    w.u32(state.slots().len());
    for ((slot, surfels), colors) in state.slots().iter().zip(&geo.objects).zip(&app.colors) {
        w.u32(slot.box_index);
        w.text(&slot.label);
        w.f64s(slot.semantic.iter());
        w.u32(surfels.len());
        for (s, col) in surfels.iter().zip(colors) {
            w.f64s(s.position.iter().chain(s.orientation.iter()).chain(s.scale.iter()));
            w.f64s([&s.opacity]);
            w.f64s(col.iter());
        }
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<SceneState> {
    if bytes.len() < 8 + 32 || bytes[..4] != MAGIC {
        return Err(corrupt("not an L2S1 file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("digest mismatch"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let stage = StageMarker::from_code(r.u8()?).ok_or_else(|| corrupt("unknown stage marker"))?;
    let layout = parse_layout(r.text()?)?;
    let palette = SemanticPalette::from_csv(r.text()?).map_err(|e| corrupt(&e.to_string()))?;

    let ints = [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?];
    let config = FieldConfig {
        levels: ints[0],
        features: ints[1],
        log2_table_size: ints[2] as u32,
        base_resolution: ints[3] as u32,
        max_resolution: ints[4] as u32,
        init_range: r.f64()?,
    };
    let valid = config.levels >= 1
        && config.features >= 1
        && config.log2_table_size <= 24
        && config.base_resolution >= 1
        && config.max_resolution >= config.base_resolution;
    if !valid {
        return Err(corrupt("invalid field configuration"));
    }
    let (lo, hi) = (r.vec3()?, r.vec3()?);
    let mut field = BackgroundField::new(config, lo, hi, 0);
    let (tables, weight, bias) = (r.vec()?, r.vec()?, r.vec3()?);
    field.set_params(tables, weight, bias).map_err(|e| corrupt(&e.to_string()))?;

    let n = r.u32()?;
    let (mut slots, mut geo, mut colors) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let box_index = r.u32()?;
        let label = r.text()?.to_string();
        let semantic = r.vec3()?;
        let count = r.u32()?;
        if count > body.len() {
            return Err(corrupt("truncated"));
        }
        let mut g = Vec::with_capacity(count);
        let mut c = Vec::with_capacity(count);
        for _ in 0..count {
            let position = r.vec3()?;
            let mut o = [0.0; 9];
            for v in &mut o {
                *v = r.f64()?;
            }
            let scale = roomsplat_core::nalgebra::Vector2::new(r.f64()?, r.f64()?);
            let opacity = r.f64()?;
            g.push(SurfelGeometry { position, orientation: Mat3::from_column_slice(&o), scale, opacity });
            c.push(r.vec3()?);
        }
        slots.push(ObjectSlot { box_index, label, semantic });
        geo.push(g);
        colors.push(c);
    }
    if r.pos != body.len() {
        return Err(corrupt("trailing bytes"));
    }
    SceneState::from_parts(
        layout,
        palette,
        slots,
        GeometryParams { objects: geo },
        AppearanceParams { colors, field },
        stage,
    )
    .map_err(|e| corrupt(&e.to_string()))
}

pub fn save(path: &Path, state: &SceneState) -> Result<()> {
    write(path, &encode(state))
}

pub fn load(path: &Path) -> Result<SceneState> {
    decode(&read(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}
