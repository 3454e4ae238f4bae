use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent under std, trait-provided without it
use num_traits::Float;

/// Adam with bias correction over one flat parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Completed steps.
    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    /// Restores state saved from [`Adam::moments`] and [`Adam::steps`].
    pub fn restore(&mut self, m: Vec<f64>, v: Vec<f64>, t: u32) -> bool {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return false;
        }
        (self.m, self.v, self.t) = (m, v, t);
        true
    }

    /// Writes the update for `grads` into `delta` (to be added to the
    /// parameters) and advances the moments.
    pub fn delta(&mut self, grads: &[f64], lr: f64, delta: &mut [f64]) {
        assert_eq!(grads.len(), self.m.len(), "gradient length");
        assert_eq!(delta.len(), self.m.len(), "delta length");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            delta[i] = -lr * mh / (vh.sqrt() + self.eps);
        }
    }

    /// In-place update `params += delta(grads)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        let mut d = vec![0.0; params.len()];
        self.delta(grads, lr, &mut d);
        for (p, d) in params.iter_mut().zip(d) {
            *p += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut a = Adam::new(3);
        let mut p = [1.0, 1.0, 1.0];
        a.step(&mut p, &[2.0, -0.001, 0.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-8 && (p[1] - 1.1).abs() < 1e-5);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut a = Adam::new(2);
        let mut p = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0), 4.0 * (p[1] + 0.5)];
            a.step(&mut p, &g, 0.01);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3);
    }
}
