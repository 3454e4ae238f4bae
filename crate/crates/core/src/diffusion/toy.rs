//! Small trainable conditional denoiser.
//!
//! The backbone is a two-scale per-pixel network: a full-resolution hidden
//! layer fed by the noisy latent and timestep features, and a half-resolution
//! layer over 2x2 block means of the first. Each condition image has its own
//! linear encoder per scale whose features are added to the backbone's
//! pre-activations, so switching an encoder off is exactly the same as
//! feeding the backbone alone. The network predicts the clean latent x̂0 and
//! reports ε̂ through the schedule.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::provider::check_timestep;
use super::{add_noise, Codec, CondRole, ConditionSet, NoiseSchedule, ProviderError, ScoreProvider, Stage, Tensor};
use crate::optim::Adam;
use crate::seeded_rng;

const TIME_FEATURES: usize = 4;

/// One training example: a clean latent and the conditions it was drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPair {
    pub target: Tensor,
    pub cond: ConditionSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub hidden: usize,
    pub steps: usize,
    pub lr: f64,
    /// Training timesteps are uniform over `[lo·T, hi·T]`.
    pub t_range: (f64, f64),
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { hidden: 32, steps: 2000, lr: 5e-3, t_range: (0.02, 0.98), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    c: usize,
    f: usize,
    a0: usize,
    b0: usize,
    a1: usize,
    b1: usize,
    // Per role: (scale 0, scale 1) offsets.
    enc: [(usize, usize); 3],
    o0: usize,
    o1: usize,
    bo: usize,
    len: usize,
}

impl Layout {
    fn new(c: usize, f: usize) -> Self {
        let din = c + TIME_FEATURES;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let a0 = take(f * din);
        let b0 = take(f);
        let a1 = take(f * f);
        let b1 = take(f);
        let mut enc = [(0, 0); 3];
        for (i, r) in CondRole::ALL.iter().enumerate() {
            enc[i] = (take(f * r.channels()), take(f * r.channels()));
        }
        let o0 = take(c * f);
        let o1 = take(c * f);
        let bo = take(c);
        Self { c, f, a0, b0, a1, b1, enc, o0, o1, bo, len: at }
    }

    fn din(&self) -> usize {
        self.c + TIME_FEATURES
    }
}

fn role_index(role: CondRole) -> usize {
    match role {
        CondRole::Semantic => 0,
        CondRole::Normal => 1,
        CondRole::Depth => 2,
    }
}

struct Cache {
    x_in: Vec<f64>,
    conds: [Option<Tensor>; 3],
    pooled: [Option<Vec<f64>>; 3],
    pre0: Vec<f64>,
    h0: Vec<f64>,
    m: Vec<f64>,
    pre1: Vec<f64>,
    h1: Vec<f64>,
    counts: Vec<f64>,
    lw: usize,
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyReport {
    /// Per-step minibatch loss.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDenoiser {
    stage: Stage,
    schedule: NoiseSchedule,
    codec: Codec,
    layout: Layout,
    params: Vec<f64>,
    enabled: [bool; 3],
}

impl ToyDenoiser {
    /// Randomly initialized network for latents of `stage`.
    pub fn new(stage: Stage, schedule: NoiseSchedule, codec: Codec, hidden: usize, seed: u64) -> Self {
        let layout = Layout::new(stage.latent_channels(), hidden);
        let mut rng = seeded_rng(seed, 0x70f);
        let mut params = vec![0.0; layout.len];
        let mut fill = |params: &mut [f64], off: usize, n: usize, fan_in: usize| {
            let s = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[off..off + n] {
                let g: f64 = StandardNormal.sample(&mut rng);
                *p = s * g;
            }
        };
        let f = hidden;
        fill(&mut params, layout.a0, f * layout.din(), layout.din());
        fill(&mut params, layout.a1, f * f, f);
        for (i, r) in CondRole::ALL.iter().enumerate() {
            fill(&mut params, layout.enc[i].0, f * r.channels(), r.channels());
            fill(&mut params, layout.enc[i].1, f * r.channels(), r.channels());
        }
        fill(&mut params, layout.o0, layout.c * f, 2 * f);
        fill(&mut params, layout.o1, layout.c * f, 2 * f);
        Self { stage, schedule, codec, layout, params, enabled: [true; 3] }
    }

    /// Fits the network to `data` by Adam on the noise-prediction loss
    /// `E‖ε − ε̂(z_t; t, cond)‖²`.
    pub fn train(
        stage: Stage,
        schedule: NoiseSchedule,
        codec: Codec,
        data: &[ToyPair],
        config: &ToyConfig,
    ) -> Result<(Self, ToyReport), ProviderError> {
        if data.is_empty() {
            return Err(ProviderError::EmptyDataset);
        }
        let mut net = Self::new(stage, schedule, codec, config.hidden, config.seed);
        let enc: Vec<[Option<Tensor>; 3]> = data.iter().map(|p| net.encode_conds(&p.cond, &p.target)).collect::<Result<_, _>>()?;
        let (lo, hi) = net.schedule.range(config.t_range.0, config.t_range.1);
        let mut rng = seeded_rng(config.seed, 0x70e);
        let mut adam = Adam::new(net.params.len());
        let mut grad = vec![0.0; net.params.len()];
        let mut losses = Vec::with_capacity(config.steps);
        for _ in 0..config.steps {
            let i = rng.random_range(0..data.len());
            let t = rng.random_range(lo..=hi);
            let target = &data[i].target;
            let eps = Tensor::from_fn(target.channels(), target.height(), target.width(), |_, _, _| StandardNormal.sample(&mut rng));
            grad.iter_mut().for_each(|g| *g = 0.0);
            losses.push(net.loss_and_grad(target, &enc[i], t, &eps, Some(&mut grad)));
            adam.step(&mut net.params, &grad, config.lr);
        }
        Ok((net, ToyReport { losses }))
    }

    /// Mean noise-prediction loss over `draws` fixed (pair, t, ε) samples,
    /// drawn from `seed` over the default training range.
    pub fn denoising_loss(&self, data: &[ToyPair], draws: usize, seed: u64) -> Result<f64, ProviderError> {
        if data.is_empty() {
            return Err(ProviderError::EmptyDataset);
        }
        let (lo, hi) = self.schedule.range(0.02, 0.98);
        let mut rng = seeded_rng(seed, 0x70d);
        let mut total = 0.0;
        for _ in 0..draws {
            let i = rng.random_range(0..data.len());
            let t = rng.random_range(lo..=hi);
            let target = &data[i].target;
            let eps = Tensor::from_fn(target.channels(), target.height(), target.width(), |_, _, _| StandardNormal.sample(&mut rng));
            let enc = self.encode_conds(&data[i].cond, target)?;
            total += self.loss_and_grad(target, &enc, t, &eps, None);
        }
        Ok(total / draws as f64)
    }

    /// Zeroes both scales of one condition encoder.
    pub fn zero_encoder(&mut self, role: CondRole) {
        let (s0, s1) = self.layout.enc[role_index(role)];
        let n = self.layout.f * role.channels();
        self.params[s0..s0 + n].iter_mut().for_each(|p| *p = 0.0);
        self.params[s1..s1 + n].iter_mut().for_each(|p| *p = 0.0);
    }

    /// Disconnects (or reconnects) one condition encoder.
    pub fn set_encoder_enabled(&mut self, role: CondRole, on: bool) {
        self.enabled[role_index(role)] = on;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// x̂0 prediction with the condition encoders currently enabled.
    pub fn predict_x0(&self, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        self.check(z_t, t)?;
        let enc = self.encode_conds(cond, z_t)?;
        Ok(self.forward(z_t, t, &enc).0)
    }

    /// x̂0 prediction of the backbone alone, with every encoder disconnected.
    pub fn backbone_x0(&self, z_t: &Tensor, t: usize) -> Result<Tensor, ProviderError> {
        self.check(z_t, t)?;
        Ok(self.forward(z_t, t, &[None, None, None]).0)
    }

    fn check(&self, z_t: &Tensor, t: usize) -> Result<(), ProviderError> {
        check_timestep(&self.schedule, t)?;
        if z_t.channels() != self.layout.c {
            let (_, h, w) = z_t.shape();
            return Err(ProviderError::Shape { what: "latent", expected: (self.layout.c, h, w), actual: z_t.shape() });
        }
        Ok(())
    }

    fn encode_conds(&self, cond: &ConditionSet, latent: &Tensor) -> Result<[Option<Tensor>; 3], ProviderError> {
        let mut out: [Option<Tensor>; 3] = [None, None, None];
        for role in CondRole::ALL {
            let i = role_index(role);
            if !self.enabled[i] {
                continue;
            }
            if let Some(img) = cond.get(role) {
                let lat = self.codec.encode(img)?;
                if (lat.height(), lat.width()) != (latent.height(), latent.width()) {
                    return Err(ProviderError::Shape {
                        what: "encoded condition",
                        expected: (role.channels(), latent.height(), latent.width()),
                        actual: lat.shape(),
                    });
                }
                out[i] = Some(lat);
            }
        }
        Ok(out)
    }

    fn time_features(&self, t: usize) -> [f64; TIME_FEATURES] {
        let a = self.schedule.alpha_bar(t);
        let tau = t as f64 / self.schedule.steps() as f64;
        let (s, c) = (core::f64::consts::PI * tau).sin_cos();
        [a.sqrt(), (1.0 - a).sqrt(), s, c]
    }

    fn forward(&self, z: &Tensor, t: usize, conds: &[Option<Tensor>; 3]) -> (Tensor, Cache) {
        let l = &self.layout;
        let (c, h, w) = z.shape();
        let (f, din) = (l.f, l.din());
        let p = &self.params;
        let n = h * w;
        let (lh, lw) = (h.div_ceil(2), w.div_ceil(2));
        let q = lh * lw;
        let tf = self.time_features(t);

        let mut x_in = vec![0.0; n * din];
        for y in 0..h {
            for x in 0..w {
                let row = &mut x_in[(y * w + x) * din..(y * w + x + 1) * din];
                for ch in 0..c {
                    row[ch] = z.at(ch, y, x);
                }
                row[c..].copy_from_slice(&tf);
            }
        }

        let mut pre0 = vec![0.0; n * f];
        for px in 0..n {
            let xi = &x_in[px * din..(px + 1) * din];
            for o in 0..f {
                let wrow = &p[l.a0 + o * din..l.a0 + (o + 1) * din];
                pre0[px * f + o] = wrow.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + p[l.b0 + o];
            }
        }
        for (ri, role) in CondRole::ALL.iter().enumerate() {
            let Some(ct) = &conds[ri] else { continue };
            let k = role.channels();
            let e = l.enc[ri].0;
            for y in 0..h {
                for x in 0..w {
                    let px = y * w + x;
                    for o in 0..f {
                        let mut s = 0.0;
                        for i in 0..k {
                            s += p[e + o * k + i] * ct.at(i, y, x);
                        }
                        pre0[px * f + o] += s;
                    }
                }
            }
        }
        let h0: Vec<f64> = pre0.iter().map(|&v| relu(v)).collect();

        let mut m = vec![0.0; q * f];
        let mut counts = vec![0.0; q];
        for y in 0..h {
            for x in 0..w {
                let b = (y / 2) * lw + x / 2;
                counts[b] += 1.0;
                for o in 0..f {
                    m[b * f + o] += h0[(y * w + x) * f + o];
                }
            }
        }
        for b in 0..q {
            for o in 0..f {
                m[b * f + o] /= counts[b];
            }
        }
        let mut pooled: [Option<Vec<f64>>; 3] = [None, None, None];
        for (ri, role) in CondRole::ALL.iter().enumerate() {
            let Some(ct) = &conds[ri] else { continue };
            let k = role.channels();
            let mut pc = vec![0.0; q * k];
            for y in 0..h {
                for x in 0..w {
                    let b = (y / 2) * lw + x / 2;
                    for i in 0..k {
                        pc[b * k + i] += ct.at(i, y, x);
                    }
                }
            }
            for b in 0..q {
                for i in 0..k {
                    pc[b * k + i] /= counts[b];
                }
            }
            pooled[ri] = Some(pc);
        }
        let mut pre1 = vec![0.0; q * f];
        for b in 0..q {
            let mb = &m[b * f..(b + 1) * f];
            for o in 0..f {
                let wrow = &p[l.a1 + o * f..l.a1 + (o + 1) * f];
                pre1[b * f + o] = wrow.iter().zip(mb).map(|(a, b)| a * b).sum::<f64>() + p[l.b1 + o];
            }
        }
        for (ri, role) in CondRole::ALL.iter().enumerate() {
            let Some(pc) = &pooled[ri] else { continue };
            let k = role.channels();
            let e = l.enc[ri].1;
            for b in 0..q {
                for o in 0..f {
                    let mut s = 0.0;
                    for i in 0..k {
                        s += p[e + o * k + i] * pc[b * k + i];
                    }
                    pre1[b * f + o] += s;
                }
            }
        }
        let h1: Vec<f64> = pre1.iter().map(|&v| relu(v)).collect();

        let mut out = Tensor::zeros(c, h, w);
        for y in 0..h {
            for x in 0..w {
                let px = y * w + x;
                let b = (y / 2) * lw + x / 2;
                for ch in 0..c {
                    let r0 = &p[l.o0 + ch * f..l.o0 + (ch + 1) * f];
                    let r1 = &p[l.o1 + ch * f..l.o1 + (ch + 1) * f];
                    let s0: f64 = r0.iter().zip(&h0[px * f..(px + 1) * f]).map(|(a, b)| a * b).sum();
                    let s1: f64 = r1.iter().zip(&h1[b * f..(b + 1) * f]).map(|(a, b)| a * b).sum();
                    *out.at_mut(ch, y, x) = s0 + s1 + p[l.bo + ch];
                }
            }
        }
        let cache = Cache { x_in, conds: conds.clone(), pooled, pre0, h0, m, pre1, h1, counts, lw };
        (out, cache)
    }

    /// Noise-prediction loss at one draw; accumulates its parameter gradient
    /// into `grad` when given.
    fn loss_and_grad(&self, target: &Tensor, conds: &[Option<Tensor>; 3], t: usize, eps: &Tensor, grad: Option<&mut Vec<f64>>) -> f64 {
        let s = &self.schedule;
        let z = add_noise(s, target, t, eps);
        let (x0, cache) = self.forward(&z, t, conds);
        let a = s.alpha_bar(t);
        let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
        let nn = z.len() as f64;
        let mut loss = 0.0;
        let mut dx0 = Tensor::zeros(z.channels(), z.height(), z.width());
        for i in 0..z.len() {
            let e_hat = (z.data()[i] - sa * x0.data()[i]) / sn;
            let r = e_hat - eps.data()[i];
            loss += r * r;
            dx0.data_mut()[i] = 2.0 * r / nn * (-sa / sn);
        }
        if let Some(g) = grad {
            self.backward(&dx0, &cache, g);
        }
        loss / nn
    }

    fn backward(&self, dout: &Tensor, cache: &Cache, g: &mut [f64]) {
        let l = &self.layout;
        let p = &self.params;
        let (c, h, w) = dout.shape();
        let (f, din) = (l.f, l.din());
        let lw = cache.lw;
        let q = cache.counts.len();
        let mut dh0 = vec![0.0; h * w * f];
        let mut dh1 = vec![0.0; q * f];
        for y in 0..h {
            for x in 0..w {
                let px = y * w + x;
                let b = (y / 2) * lw + x / 2;
                for ch in 0..c {
                    let d = dout.at(ch, y, x);
                    if d == 0.0 {
                        continue;
                    }
                    g[l.bo + ch] += d;
                    for o in 0..f {
                        g[l.o0 + ch * f + o] += d * cache.h0[px * f + o];
                        g[l.o1 + ch * f + o] += d * cache.h1[b * f + o];
                        dh0[px * f + o] += d * p[l.o0 + ch * f + o];
                        dh1[b * f + o] += d * p[l.o1 + ch * f + o];
                    }
                }
            }
        }
        let dpre1: Vec<f64> = dh1.iter().zip(&cache.pre1).map(|(&d, &v)| if v > 0.0 { d } else { 0.0 }).collect();
        let mut dm = vec![0.0; q * f];
        for b in 0..q {
            for o in 0..f {
                let d = dpre1[b * f + o];
                if d == 0.0 {
                    continue;
                }
                g[l.b1 + o] += d;
                for i in 0..f {
                    g[l.a1 + o * f + i] += d * cache.m[b * f + i];
                    dm[b * f + i] += d * p[l.a1 + o * f + i];
                }
            }
        }
        for (ri, role) in CondRole::ALL.iter().enumerate() {
            let Some(pc) = &cache.pooled[ri] else { continue };
            let k = role.channels();
            let e = l.enc[ri].1;
            for b in 0..q {
                for o in 0..f {
                    let d = dpre1[b * f + o];
                    for i in 0..k {
                        g[e + o * k + i] += d * pc[b * k + i];
                    }
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                let px = y * w + x;
                let b = (y / 2) * lw + x / 2;
                for o in 0..f {
                    dh0[px * f + o] += dm[b * f + o] / cache.counts[b];
                }
            }
        }
        for px in 0..h * w {
            for o in 0..f {
                if cache.pre0[px * f + o] <= 0.0 {
                    continue;
                }
                let d = dh0[px * f + o];
                g[l.b0 + o] += d;
                for i in 0..din {
                    g[l.a0 + o * din + i] += d * cache.x_in[px * din + i];
                }
            }
        }
        for (ri, role) in CondRole::ALL.iter().enumerate() {
            let Some(ct) = &cache.conds[ri] else { continue };
            let k = role.channels();
            let e = l.enc[ri].0;
            for y in 0..h {
                for x in 0..w {
                    let px = y * w + x;
                    for o in 0..f {
                        if cache.pre0[px * f + o] <= 0.0 {
                            continue;
                        }
                        let d = dh0[px * f + o];
                        for i in 0..k {
                            g[e + o * k + i] += d * ct.at(i, y, x);
                        }
                    }
                }
            }
        }
    }
}

impl ScoreProvider for ToyDenoiser {
    fn supports(&self, stage: Stage) -> bool {
        stage == self.stage
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn codec(&self) -> Codec {
        self.codec
    }

    fn predict(&self, stage: Stage, z_t: &Tensor, t: usize, cond: &ConditionSet) -> Result<Tensor, ProviderError> {
        if stage != self.stage {
            return Err(ProviderError::UnsupportedStage(stage));
        }
        let x0 = self.predict_x0(z_t, t, cond)?;
        let a = self.schedule.alpha_bar(t);
        let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
        Ok(z_t.zip(&x0, |z, x| (z - sa * x) / sn))
    }
}
