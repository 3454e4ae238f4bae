//! Binary frames exchanged with a remote score provider.
//!
//! Request: `SCR1` | u8 stage | u8 prompt_present | u16 T | u16 t | u16 c |
//! u8 n_tensors | tensors. Response: `EPS1` | u8 status | payload. Each
//! tensor is u8 role | u8 channels | u16 height | u16 width | f32 values,
//! channel-major. Integers and floats are little-endian. A status of 0
//! carries one role-0 tensor; any other status carries an optional UTF-8
//! message as the rest of the frame.

use alloc::string::String;
use alloc::vec::Vec;

use super::{CondRole, ConditionSet, Stage, Tensor};

pub const REQUEST_MAGIC: [u8; 4] = *b"SCR1";
pub const RESPONSE_MAGIC: [u8; 4] = *b"EPS1";

/// Role byte of the noisy latent; conditions use 1..=3.
pub const ROLE_LATENT: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("frame truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after frame")]
    Trailing(usize),
    #[error("unknown stage {0}")]
    BadStage(u8),
    #[error("unknown tensor role {0}")]
    BadRole(u8),
    #[error("tensor role {0} appears twice")]
    DuplicateRole(u8),
    #[error("request has no latent tensor")]
    MissingLatent,
    #[error("request has no semantic condition")]
    MissingSemantic,
    #[error("invalid condition tensors: {0}")]
    BadCondition(String),
    #[error("response tensor has role {0}, expected 0")]
    ResponseRole(u8),
    #[error("{0} does not fit its wire field")]
    Overflow(&'static str),
}

fn role_code(role: CondRole) -> u8 {
    match role {
        CondRole::Semantic => 1,
        CondRole::Normal => 2,
        CondRole::Depth => 3,
    }
}

fn role_from_code(code: u8) -> Option<CondRole> {
    match code {
        1 => Some(CondRole::Semantic),
        2 => Some(CondRole::Normal),
        3 => Some(CondRole::Depth),
        _ => None,
    }
}

/// A decoded `SCR1` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest {
    pub stage: Stage,
    /// Schedule length T.
    pub steps: u16,
    pub t: u16,
    /// DDIM step count hint; 0 when unused.
    pub c: u16,
    pub z_t: Tensor,
    pub cond: ConditionSet,
}

/// A decoded `EPS1` frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreResponse {
    Ok(Tensor),
    Error { status: u8, message: String },
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &'static str) -> Result<T, WireError> {
    T::try_from(v).map_err(|_| WireError::Overflow(what))
}

fn put_tensor(out: &mut Vec<u8>, role: u8, t: &Tensor) -> Result<(), WireError> {
    let (c, h, w) = t.shape();
    out.push(role);
    out.push(narrow::<u8>(c, "channel count")?);
    out.extend_from_slice(&narrow::<u16>(h, "height")?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>(w, "width")?.to_le_bytes());
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(())
}

impl ScoreRequest {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(16 + 4 * self.z_t.len() * 3);
        out.extend_from_slice(&REQUEST_MAGIC);
        out.push(self.stage.code());
        out.push(self.cond.prompt_present() as u8);
        out.extend_from_slice(&self.steps.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.c.to_le_bytes());
        let conds: Vec<(u8, &Tensor)> =
            CondRole::ALL.iter().filter_map(|&r| self.cond.get(r).map(|t| (role_code(r), t))).collect();
        out.push(narrow::<u8>(conds.len() + 1, "tensor count")?);
        put_tensor(&mut out, ROLE_LATENT, &self.z_t)?;
        for (role, t) in conds {
            put_tensor(&mut out, role, t)?;
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader { bytes, pos: 0 };
        r.magic(REQUEST_MAGIC)?;
        let stage_code = r.u8()?;
        let stage = Stage::from_code(stage_code).ok_or(WireError::BadStage(stage_code))?;
        let prompt = r.u8()? != 0;
        let steps = r.u16()?;
        let t = r.u16()?;
        let c = r.u16()?;
        let n = r.u8()?;
        let mut latent = None;
        let mut conds: [Option<Tensor>; 3] = [None, None, None];
        for _ in 0..n {
            let (role, tensor) = r.tensor()?;
            let slot = match role {
                ROLE_LATENT => &mut latent,
                _ => {
                    let cr = role_from_code(role).ok_or(WireError::BadRole(role))?;
                    &mut conds[(role_code(cr) - 1) as usize]
                }
            };
            if slot.is_some() {
                return Err(WireError::DuplicateRole(role));
            }
            *slot = Some(tensor);
        }
        r.finish()?;
        let z_t = latent.ok_or(WireError::MissingLatent)?;
        let [s, nrm, d] = conds;
        let semantic = s.ok_or(WireError::MissingSemantic)?;
        let cond = ConditionSet::new(semantic, nrm, d, prompt).map_err(|e| WireError::BadCondition(alloc::format!("{e}")))?;
        Ok(Self { stage, steps, t, c, z_t, cond })
    }
}

impl ScoreResponse {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        out.extend_from_slice(&RESPONSE_MAGIC);
        match self {
            ScoreResponse::Ok(t) => {
                out.push(0);
                put_tensor(&mut out, ROLE_LATENT, t)?;
            }
            ScoreResponse::Error { status, message } => {
                out.push(if *status == 0 { 1 } else { *status });
                out.extend_from_slice(message.as_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader { bytes, pos: 0 };
        r.magic(RESPONSE_MAGIC)?;
        let status = r.u8()?;
        if status != 0 {
            let message = String::from_utf8_lossy(&bytes[r.pos..]).into_owned();
            return Ok(ScoreResponse::Error { status, message });
        }
        let (role, t) = r.tensor()?;
        if role != ROLE_LATENT {
            return Err(WireError::ResponseRole(role));
        }
        r.finish()?;
        Ok(ScoreResponse::Ok(t))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(WireError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn magic(&mut self, want: [u8; 4]) -> Result<(), WireError> {
        let b = self.take(4)?;
        let got = [b[0], b[1], b[2], b[3]];
        if got == want {
            Ok(())
        } else {
            Err(WireError::BadMagic(got))
        }
    }

    fn tensor(&mut self) -> Result<(u8, Tensor), WireError> {
        let role = self.u8()?;
        let c = self.u8()? as usize;
        let h = self.u16()? as usize;
        let w = self.u16()? as usize;
        let n = c * h * w;
        let raw = self.take(n * 4)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        let t = Tensor::from_vec(c, h, w, data).expect("payload length matches header");
        Ok((role, t))
    }

    fn finish(&self) -> Result<(), WireError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(WireError::Trailing(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> ScoreRequest {
        let sem = Tensor::from_fn(3, 2, 2, |c, y, x| (c + y + x) as f64 * 0.25);
        let depth = Tensor::filled(1, 2, 2, 0.5);
        ScoreRequest {
            stage: Stage::Geometry,
            steps: 1000,
            t: 500,
            c: 0,
            z_t: Tensor::from_fn(6, 2, 2, |c, y, x| c as f64 - (y * 2 + x) as f64 * 0.5),
            cond: ConditionSet::new(sem, None, Some(depth), true).unwrap(),
        }
    }

    #[test]
    fn request_roundtrips() {
        let req = request();
        let bytes = req.encode().unwrap();
        assert_eq!(&bytes[..4], b"SCR1");
        assert_eq!(bytes[4..13], [0, 1, 0xe8, 0x03, 0xf4, 0x01, 0, 0, 3]);
        assert_eq!(ScoreRequest::decode(&bytes).unwrap(), req);
    }

    #[test]
    fn response_roundtrips_and_carries_errors() {
        let ok = ScoreResponse::Ok(Tensor::from_fn(3, 1, 2, |c, _, x| (c * 2 + x) as f64));
        assert_eq!(ScoreResponse::decode(&ok.encode().unwrap()).unwrap(), ok);
        let err = ScoreResponse::Error { status: 2, message: "shape".into() };
        assert_eq!(ScoreResponse::decode(&err.encode().unwrap()).unwrap(), err);
    }

    #[test]
    fn malformed_frames_are_rejected() {
        let bytes = request().encode().unwrap();
        assert!(matches!(ScoreRequest::decode(&bytes[..bytes.len() - 1]), Err(WireError::Truncated(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(ScoreRequest::decode(&extra), Err(WireError::Trailing(1)));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(ScoreRequest::decode(&magic), Err(WireError::BadMagic(_))));
        let mut stage = bytes;
        stage[4] = 7;
        assert_eq!(ScoreRequest::decode(&stage), Err(WireError::BadStage(7)));
        let resp = [b'E', b'P', b'S', b'1', 0, 1, 3, 1, 0, 1, 0];
        assert!(matches!(ScoreResponse::decode(&resp), Err(WireError::Truncated(_))));
    }

    #[test]
    fn oversized_dimensions_do_not_encode() {
        let mut req = request();
        req.z_t = Tensor::zeros(300, 1, 1);
        assert_eq!(req.encode(), Err(WireError::Overflow("channel count")));
    }
}
