//! NAdam: Adam with Nesterov momentum. Follows the published update rule
//! with the 0.96-power momentum decay schedule and bias correction through
//! the running product of momentum coefficients.

use crate::model::ParamStore;

#[derive(Debug, Clone)]
pub struct NAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    mu_product: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum_decay: f64,
}

impl NAdam {
    pub fn new(n_params: usize) -> Self {
        NAdam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            mu_product: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum_decay: 0.004,
        }
    }

    fn mu(&self, t: u64) -> f64 {
        self.beta1 * (1.0 - 0.5 * 0.96f64.powf(t as f64 * self.momentum_decay))
    }

    /// One update over the whole flat parameter buffer using its gradients.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        assert_eq!(store.values.len(), self.m.len(), "optimizer/model size");
        self.t += 1;
        let mu_t = self.mu(self.t);
        let mu_next = self.mu(self.t + 1);
        self.mu_product *= mu_t;
        let mu_product_next = self.mu_product * mu_next;
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..self.m.len() {
            let g = store.grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = mu_next * self.m[i] / (1.0 - mu_product_next)
                + (1.0 - mu_t) * g / (1.0 - self.mu_product);
            let v_hat = self.v[i] / bc2;
            store.values[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: Vec<f64>) -> ParamStore {
        let n = values.len();
        let mut s = ParamStore::zeros(n);
        s.values = values;
        s
    }

    #[test]
    fn first_two_steps_match_hand_computed_recurrence() {
        let mut opt = NAdam::new(1);
        let mut s = store_with(vec![1.0]);
        let lr = 0.1;
        let (b1, b2, eps, psi) = (0.9, 0.999, 1e-8, 0.004);
        let mu = |t: f64| b1 * (1.0 - 0.5 * 0.96f64.powf(t * psi));

        // Two reference steps with constant gradient 1.
        let mut theta = 1.0;
        let (mut m, mut v, mut mp) = (0.0, 0.0, 1.0);
        for t in 1..=2u32 {
            let g = 1.0;
            let mu_t = mu(t as f64);
            let mu_n = mu(t as f64 + 1.0);
            mp *= mu_t;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = mu_n * m / (1.0 - mp * mu_n) + (1.0 - mu_t) * g / (1.0 - mp);
            let v_hat = v / (1.0 - b2.powi(t as i32));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }

        for _ in 0..2 {
            s.grads[0] = 1.0;
            opt.step(&mut s, lr);
        }
        assert!((s.values[0] - theta).abs() < 1e-14, "{} vs {theta}", s.values[0]);
    }

    #[test]
    fn first_step_size_is_near_lr_for_unit_gradient() {
        let mut opt = NAdam::new(1);
        let mut s = store_with(vec![0.0]);
        s.grads[0] = 1.0;
        opt.step(&mut s, 1e-3);
        let delta = s.values[0].abs();
        assert!(delta > 5e-4 && delta < 5e-3, "step {delta}");
    }

    #[test]
    fn converges_on_a_quadratic_bowl() {
        let mut opt = NAdam::new(2);
        let mut s = store_with(vec![4.0, -3.0]);
        let target = [3.0, 1.0];
        for _ in 0..4000 {
            for i in 0..2 {
                s.grads[i] = s.values[i] - target[i];
            }
            opt.step(&mut s, 0.01);
        }
        for i in 0..2 {
            assert!((s.values[i] - target[i]).abs() < 1e-3, "param {i}: {}", s.values[i]);
        }
    }

    #[test]
    fn steps_are_deterministic() {
        let run = || {
            let mut opt = NAdam::new(3);
            let mut s = store_with(vec![0.5, -0.2, 0.9]);
            for k in 0..50 {
                for i in 0..3 {
                    s.grads[i] = (k as f64 * 0.1 + i as f64).sin();
                }
                opt.step(&mut s, 3e-4);
            }
            s.values
        };
        assert_eq!(run(), run());
    }
}
