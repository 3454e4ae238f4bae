use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use rand::Rng as _;

use super::FieldGrad;
use crate::{seeded_rng, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    pub levels: usize,
    /// Features per table entry.
    pub features: usize,
    pub log2_table_size: u32,
    pub base_resolution: u32,
    pub max_resolution: u32,
    /// Tables start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { levels: 8, features: 2, log2_table_size: 14, base_resolution: 4, max_resolution: 128, init_range: 1e-4 }
    }
}

/// Multiresolution hashed feature grid over an axis-aligned box with a
/// linear RGB decoder and a clamp to `[0, 1]`.
///
/// Coarse levels whose full grid fits in the table are indexed densely;
/// finer levels use the usual xor-of-primes spatial hash.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundField {
    config: FieldConfig,
    lo: Vec3,
    hi: Vec3,
    resolutions: Vec<u32>,
    /// `levels x table_size x features`.
    tables: Vec<f64>,
    /// `3 x (levels * features)`, row-major.
    weight: Vec<f64>,
    bias: Vec3,
}

/// Corner indices and trilinear weights of one lookup.
#[derive(Debug, Clone)]
pub(crate) struct Encoding {
    /// Offsets into `tables` of the first feature of each corner, per level.
    pub slots: Vec<[usize; 8]>,
    pub weights: Vec<[f64; 8]>,
    pub features: Vec<f64>,
}

impl BackgroundField {
    /// A field covering `[lo, hi]`. Tables are seeded uniformly in the
    /// init range; decoder weights uniformly in `±1/sqrt(levels*features)`;
    /// the bias is mid-gray.
    pub fn new(config: FieldConfig, lo: Vec3, hi: Vec3, seed: u64) -> Self {
        assert!(config.levels >= 1 && config.features >= 1, "field needs at least one level and feature");
        assert!(config.base_resolution >= 1 && config.max_resolution >= config.base_resolution);
        let growth = if config.levels > 1 {
            ((config.max_resolution as f64 / config.base_resolution as f64).ln() / (config.levels - 1) as f64).exp()
        } else {
            1.0
        };
        let resolutions = (0..config.levels)
            .map(|l| ((config.base_resolution as f64) * growth.powi(l as i32) + 1e-9).floor() as u32)
            .collect();
        let mut rng = seeded_rng(seed, 0xF1E1D);
        let table_len = config.levels << config.log2_table_size;
        let tables = (0..table_len * config.features)
            .map(|_| rng.random_range(-config.init_range..=config.init_range))
            .collect();
        let width = config.levels * config.features;
        let bound = 1.0 / (width as f64).sqrt();
        let weight = (0..3 * width).map(|_| rng.random_range(-bound..=bound)).collect();
        Self { config, lo, hi, resolutions, tables, weight, bias: Vec3::repeat(0.5) }
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.lo, self.hi)
    }

    pub fn resolutions(&self) -> &[u32] {
        &self.resolutions
    }

    pub fn tables(&self) -> &[f64] {
        &self.tables
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &Vec3 {
        &self.bias
    }

    /// Mutable views of tables, decoder weight and bias.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64], &mut Vec3) {
        (&mut self.tables, &mut self.weight, &mut self.bias)
    }

    /// Replaces all learnable values. Lengths must match.
    pub fn set_params(&mut self, tables: Vec<f64>, weight: Vec<f64>, bias: Vec3) -> Result<(), super::RenderError> {
        if tables.len() != self.tables.len() || weight.len() != self.weight.len() {
            return Err(super::RenderError::ParamMismatch);
        }
        self.tables = tables;
        self.weight = weight;
        self.bias = bias;
        Ok(())
    }

    pub fn zero_grad(&self) -> FieldGrad {
        FieldGrad { tables: vec![0.0; self.tables.len()], weight: vec![0.0; self.weight.len()], bias: Vec3::zeros() }
    }

    fn table_size(&self) -> usize {
        1 << self.config.log2_table_size
    }

    pub(crate) fn encode(&self, x: &Vec3) -> Encoding {
        let f = self.config.features;
        let ts = self.table_size();
        let ext = self.hi - self.lo;
        let unit = Vec3::from_fn(|i, _| {
            let e = ext[i];
            if e > 0.0 { ((x[i] - self.lo[i]) / e).clamp(0.0, 1.0) } else { 0.0 }
        });
        let mut slots = Vec::with_capacity(self.config.levels);
        let mut weights = Vec::with_capacity(self.config.levels);
        let mut features = vec![0.0; self.config.levels * f];
        for (l, &res) in self.resolutions.iter().enumerate() {
            let side = res as u64 + 1;
            let dense = side * side * side <= ts as u64;
            let mut base = [0u32; 3];
            let mut frac = [0.0; 3];
            for a in 0..3 {
                let g = unit[a] * res as f64;
                let b = (g.floor() as u32).min(res - 1);
                base[a] = b;
                frac[a] = g - b as f64;
            }
            let mut s = [0usize; 8];
            let mut w = [0.0; 8];
            for c in 0..8 {
                let o = [(c & 1) as u32, ((c >> 1) & 1) as u32, ((c >> 2) & 1) as u32];
                let (i, j, k) = (base[0] + o[0], base[1] + o[1], base[2] + o[2]);
                let idx = if dense {
                    (i as u64 + side * (j as u64 + side * k as u64)) as usize
                } else {
                    (i ^ j.wrapping_mul(2_654_435_761) ^ k.wrapping_mul(805_459_861)) as usize & (ts - 1)
                };
                s[c] = (l * ts + idx) * f;
                w[c] = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
                for q in 0..f {
                    features[l * f + q] += w[c] * self.tables[s[c] + q];
                }
            }
            slots.push(s);
            weights.push(w);
        }
        Encoding { slots, weights, features }
    }

    /// Decoder output before the clamp.
    pub(crate) fn decode_raw(&self, features: &[f64]) -> Vec3 {
        let n = features.len();
        Vec3::from_fn(|r, _| self.bias[r] + (0..n).map(|k| self.weight[r * n + k] * features[k]).sum::<f64>())
    }

    /// RGB at a world point.
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        self.decode_raw(&self.encode(x).features).map(|v| v.clamp(0.0, 1.0))
    }

    /// Accumulates the gradient of `g . eval(x)` into `tables` (as sparse
    /// `(offset, value)` pairs) and the dense decoder buffers.
    pub(crate) fn backprop(
        &self,
        enc: &Encoding,
        g: &Vec3,
        tables: &mut impl FnMut(usize, f64),
        weight: &mut [f64],
        bias: &mut Vec3,
    ) {
        let raw = self.decode_raw(&enc.features);
        let gy = Vec3::from_fn(|r, _| if raw[r] > 0.0 && raw[r] < 1.0 { g[r] } else { 0.0 });
        if gy == Vec3::zeros() {
            return;
        }
        *bias += gy;
        let n = enc.features.len();
        for r in 0..3 {
            for k in 0..n {
                weight[r * n + k] += gy[r] * enc.features[k];
            }
        }
        let f = self.config.features;
        for (l, (s, w)) in enc.slots.iter().zip(&enc.weights).enumerate() {
            for q in 0..f {
                let k = l * f + q;
                let gf = gy[0] * self.weight[k] + gy[1] * self.weight[n + k] + gy[2] * self.weight[2 * n + k];
                for c in 0..8 {
                    tables(s[c] + q, w[c] * gf);
                }
            }
        }
    }
}
