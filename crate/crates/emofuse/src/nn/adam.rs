//! Adam optimizer over a [`ParamStore`].

use indexmap::IndexMap;

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter plus the shared step counter.
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    first: IndexMap<String, Vec<f64>>,
    second: IndexMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            first: IndexMap::new(),
            second: IndexMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over every `(name, gradient)` pair. The step counter is
    /// incremented before bias correction. Non-finite gradients abort.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[(String, Vec<f64>)]) -> Result<()> {
        for (name, g) in grads {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!("non-finite gradient for parameter {name}")));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.cfg.beta1.powi(t);
        let c2 = 1.0 - self.cfg.beta2.powi(t);
        for (name, g) in grads {
            let entry = store
                .get_mut(name)
                .unwrap_or_else(|| panic!("gradient for unknown parameter {name}"));
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            assert_eq!(m.len(), g.len(), "adam state shape drift for {name}");
            for i in 0..g.len() {
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g[i];
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                entry.data[i] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let mut store = ParamStore::new(0);
        store.insert("w", vec![3], vec![1.0, -2.0, 3.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.0));
        adam.step(&mut store, &[("w".into(), vec![10.0, -5.0, 1.0])])
            .unwrap();
        assert_eq!(store.get("w").unwrap().data, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // After bias correction the first update is lr * g/(|g| + eps').
        let mut store = ParamStore::new(0);
        store.insert("w", vec![2], vec![0.0, 0.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.01));
        adam.step(&mut store, &[("w".into(), vec![3.0, -0.5])]).unwrap();
        let data = &store.get("w").unwrap().data;
        assert!((data[0] + 0.01).abs() < 1e-6);
        assert!((data[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn two_steps_match_hand_trace() {
        // Hand-stepped Adam on f(x) = x^2/2 (gradient = x) from x0 = 1.
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let mut x = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=2 {
            let g = x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            x -= lr * m_hat / (v_hat.sqrt() + eps);
            expected.push(x);
        }

        let mut store = ParamStore::new(0);
        store.insert("x", vec![1], vec![1.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(lr));
        for want in expected {
            let g = store.get("x").unwrap().data[0];
            adam.step(&mut store, &[("x".into(), vec![g])]).unwrap();
            let got = store.get("x").unwrap().data[0];
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut store = ParamStore::new(0);
        store.insert("w", vec![1], vec![0.0]);
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let err = adam
            .step(&mut store, &[("w".into(), vec![f64::NAN])])
            .unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }
}
