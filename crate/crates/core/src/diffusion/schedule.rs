use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

/// Per-step noise variances are clipped to this.
pub const BETA_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// Betas spaced linearly between the endpoints, given for T = 1000 and
    /// rescaled by 1000/T for other lengths.
    LinearBeta { beta_start: f64, beta_end: f64 },
    /// Squared-cosine cumulative schedule with offset `s`.
    Cosine { s: f64 },
}

impl ScheduleKind {
    pub const LINEAR: Self = Self::LinearBeta { beta_start: 1e-4, beta_end: 2e-2 };
    pub const COSINE: Self = Self::Cosine { s: 0.008 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule needs at least 2 timesteps, got {0}")]
    TooShort(usize),
    #[error("timestep {t} outside 0..={max}")]
    OutOfRange { t: usize, max: usize },
    #[error("weighting sequence must have T + 1 non-negative finite entries")]
    BadWeights,
    #[error("schedule parameters produce a non-decreasing alpha-bar")]
    NotMonotone,
}

/// Cumulative signal retention ᾱ over timesteps `0..=T` plus the two
/// distillation weightings. Index 0 is the clean sample (ᾱ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    alpha_bar: Vec<f64>,
    omega: Vec<f64>,
    lambda: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds ᾱ for `steps` timesteps with ω(t) = 1 − ᾱ_t and λ(t) = 1.
    pub fn new(steps: usize, kind: ScheduleKind) -> Result<Self, ScheduleError> {
        if steps < 2 {
            return Err(ScheduleError::TooShort(steps));
        }
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        match kind {
            ScheduleKind::LinearBeta { beta_start, beta_end } => {
                let k = 1000.0 / steps as f64;
                let mut acc = 1.0;
                for i in 0..steps {
                    let f = i as f64 / (steps - 1) as f64;
                    let beta = (k * (beta_start + f * (beta_end - beta_start))).min(BETA_MAX);
                    acc *= 1.0 - beta;
                    alpha_bar.push(acc);
                }
            }
            ScheduleKind::Cosine { s } => {
                let f = |t: usize| {
                    let x = (t as f64 / steps as f64 + s) / (1.0 + s) * core::f64::consts::FRAC_PI_2;
                    x.cos() * x.cos()
                };
                let mut acc = 1.0;
                for t in 1..=steps {
                    let beta = (1.0 - f(t) / f(t - 1)).clamp(0.0, BETA_MAX);
                    acc *= 1.0 - beta;
                    alpha_bar.push(acc);
                }
            }
        }
        if alpha_bar.windows(2).any(|w| !(w[1] < w[0])) || alpha_bar[steps] <= 0.0 {
            return Err(ScheduleError::NotMonotone);
        }
        let omega = alpha_bar.iter().map(|a| 1.0 - a).collect();
        let lambda = alpha_bar.iter().map(|_| 1.0).collect();
        Ok(Self { kind, alpha_bar, omega, lambda })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Number of noising steps T.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    /// ᾱ_t. Panics if `t > T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn omega(&self, t: usize) -> f64 {
        self.omega[t]
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.lambda[t]
    }

    /// √(ᾱ_t / (1 − ᾱ_t)), the scale mapping a sample offset to a noise offset.
    pub fn snr_sqrt(&self, t: usize) -> f64 {
        let a = self.alpha_bar[t];
        (a / (1.0 - a)).sqrt()
    }

    pub fn check(&self, t: usize) -> Result<(), ScheduleError> {
        if t <= self.steps() {
            Ok(())
        } else {
            Err(ScheduleError::OutOfRange { t, max: self.steps() })
        }
    }

    /// Replaces ω. `w` is indexed by timestep and has T + 1 entries.
    pub fn with_omega(mut self, w: Vec<f64>) -> Result<Self, ScheduleError> {
        Self::check_weights(&w, self.alpha_bar.len())?;
        self.omega = w;
        Ok(self)
    }

    /// Replaces λ. `w` is indexed by timestep and has T + 1 entries.
    pub fn with_lambda(mut self, w: Vec<f64>) -> Result<Self, ScheduleError> {
        Self::check_weights(&w, self.alpha_bar.len())?;
        self.lambda = w;
        Ok(self)
    }

    fn check_weights(w: &[f64], n: usize) -> Result<(), ScheduleError> {
        if w.len() == n && w.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(ScheduleError::BadWeights)
        }
    }

    /// Integer timesteps in `[lo·T, hi·T]`, clamped to `1..=T`.
    pub fn range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let n = self.steps() as f64;
        let a = ((lo * n).ceil() as usize).clamp(1, self.steps());
        let b = ((hi * n).floor() as usize).clamp(a, self.steps());
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_monotonicity() {
        for kind in [ScheduleKind::LINEAR, ScheduleKind::COSINE] {
            let s = NoiseSchedule::new(1000, kind).unwrap();
            assert!(s.alpha_bar(1) > 0.99, "{kind:?}");
            assert!(s.alpha_bar(1000) < 0.01 && s.alpha_bar(1000) > 0.0, "{kind:?}");
            assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
            assert!((0..=1000).all(|t| s.omega(t) >= 0.0 && s.lambda(t) == 1.0));
        }
    }

    #[test]
    fn linear_midpoint_matches_direct_product() {
        let s = NoiseSchedule::new(1000, ScheduleKind::LINEAR).unwrap();
        // Independent oracle: product of (1 - beta_i) with the betas written
        // out as an arithmetic progression, accumulated in log space.
        let log: f64 = (0..500).map(|i| (1.0 - (1e-4 + (2e-2 - 1e-4) * i as f64 / 999.0)).ln()).sum();
        assert!((s.alpha_bar(500) - log.exp()).abs() < 1e-12);
    }

    #[test]
    fn short_schedules_are_rejected_or_clipped() {
        assert_eq!(NoiseSchedule::new(1, ScheduleKind::LINEAR), Err(ScheduleError::TooShort(1)));
        let s = NoiseSchedule::new(2, ScheduleKind::LINEAR).unwrap();
        assert!(s.alpha_bar(2) > 0.0 && s.alpha_bar(2) < 0.01);
        let c = NoiseSchedule::new(4, ScheduleKind::COSINE).unwrap();
        assert!(c.alpha_bar(4) > 0.0);
    }

    #[test]
    fn weight_overrides_are_validated() {
        let s = NoiseSchedule::new(10, ScheduleKind::LINEAR).unwrap();
        assert_eq!(s.clone().with_omega(alloc::vec![1.0; 10]), Err(ScheduleError::BadWeights));
        let s = s.with_lambda(alloc::vec![2.0; 11]).unwrap();
        assert_eq!(s.lambda(3), 2.0);
    }

    #[test]
    fn timestep_range_is_clamped() {
        let s = NoiseSchedule::new(1000, ScheduleKind::LINEAR).unwrap();
        assert_eq!(s.range(0.02, 0.98), (20, 980));
        assert_eq!(s.range(0.0, 2.0), (1, 1000));
    }
}
