//! Toy denoiser training sets.
//!
//! `TDS1 | u8 stage | u32 count | count x (u32 length | SCR1 frame)`. Each
//! frame carries the clean target in its latent slot and the pair's
//! conditions; its timestep fields are zero.

use std::path::Path;

use roomsplat_core::diffusion::wire::ScoreRequest;
use roomsplat_core::diffusion::{Codec, ConditionSet, Stage, ToyPair};
use roomsplat_core::optim::images;
use roomsplat_core::render::{render_layout_solid, Camera};
use roomsplat_core::scene::{SemanticLayout, SemanticPalette};

use crate::error::{read, write, Error, Result};

pub const MAGIC: [u8; 4] = *b"TDS1";

pub fn encode(stage: Stage, pairs: &[ToyPair]) -> Result<Vec<u8>> {
    let mut out = MAGIC.to_vec();
    out.push(stage.code());
    out.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
    for p in pairs {
        let req = ScoreRequest { stage, steps: 0, t: 0, c: 0, z_t: p.target.clone(), cond: p.cond.clone() };
        let frame = req.encode().map_err(|e| Error::invalid(format!("dataset pair: {e}")))?;
        out.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        out.extend_from_slice(&frame);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(Stage, Vec<ToyPair>)> {
    let bad = |what: &str| Error::invalid(format!("toy dataset: {what}"));
    if bytes.len() < 9 || bytes[..4] != MAGIC {
        return Err(bad("not a TDS1 file"));
    }
    let stage = Stage::from_code(bytes[4]).ok_or_else(|| bad("unknown stage"))?;
    let count = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let mut pos = 9;
    let mut pairs = Vec::with_capacity(count.min(bytes.len()));
    for i in 0..count {
        let len = bytes.get(pos..pos + 4).ok_or_else(|| bad("truncated"))?;
        let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
        pos += 4;
        let frame = bytes.get(pos..pos.saturating_add(len)).ok_or_else(|| bad("truncated"))?;
        pos += len;
        let req = ScoreRequest::decode(frame).map_err(|e| bad(&format!("pair {i}: {e}")))?;
        if req.stage != stage {
            return Err(bad(&format!("pair {i}: stage differs from the header")));
        }
        pairs.push(ToyPair { target: req.z_t, cond: req.cond });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((stage, pairs))
}

pub fn save(path: &Path, stage: Stage, pairs: &[ToyPair]) -> Result<()> {
    write(path, &encode(stage, pairs)?)
}

pub fn load(path: &Path) -> Result<(Stage, Vec<ToyPair>)> {
    decode(&read(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Pairs rendered from the layout as solid boxes, targets encoded with
/// `codec`. Geometry pairs map the semantic map to normal and inverse depth;
/// appearance pairs map semantic, normal and depth to the flat coloring
/// `1 - S`.
pub fn layout_pairs(
    layout: &SemanticLayout,
    palette: &SemanticPalette,
    cams: &[Camera],
    stage: Stage,
    codec: Codec,
) -> Result<Vec<ToyPair>> {
    cams.iter()
        .map(|cam| {
            let b = render_layout_solid(layout, palette, cam);
            let (image, cond) = match stage {
                Stage::Geometry => (images::geometry_image(&b), images::geometry_conditions(&b)),
                Stage::Appearance => {
                    let cond: ConditionSet = images::appearance_conditions(&b);
                    (cond.semantic().map(|v| 1.0 - v), cond)
                }
            };
            let target = codec.encode(&image).map_err(|e| Error::invalid(format!("dataset codec: {e}")))?;
            Ok(ToyPair { target, cond })
        })
        .collect()
}
