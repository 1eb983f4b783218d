use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, slot: usize) -> Option<&Tensor> {
        self.m.get(slot)
    }

    pub fn second_moment(&self, slot: usize) -> Option<&Tensor> {
        self.v.get(slot)
    }

    /// One update. `grads[i]` belongs to parameter slot `i`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Argument(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (slot, g) in grads.iter().enumerate() {
            let p = params.tensor(slot);
            if g.shape() != p.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(Error::Optimizer {
                    param: params.name(slot).to_string(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        for (slot, g) in grads.iter().enumerate() {
            let m = self.m[slot].data_mut();
            let v = self.v[slot].data_mut();
            let p = params.tensor_mut(slot).data_mut();
            for i in 0..g.numel() {
                let gi = g.data()[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(values: Vec<f64>) -> ParamSet {
        let mut p = ParamSet::new();
        let n = values.len();
        p.insert("w", Tensor::matrix(1, n, values).unwrap()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut params = one_param(vec![1.0, -2.0]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params, &[Tensor::matrix(1, 2, vec![0.5, -0.5]).unwrap()]).unwrap();
        let before = params.clone();
        let m_before = adam.first_moment(0).unwrap().clone();
        adam.step(&mut params, &[Tensor::zeros(&[1, 2])]).unwrap();
        let m_after = adam.first_moment(0).unwrap();
        for (a, b) in m_after.data().iter().zip(m_before.data()) {
            assert!((a - 0.9 * b).abs() < 1e-15);
        }
        // moments decay but the bias-corrected first moment is still non-zero,
        // so only a fresh optimizer is guaranteed to stay put
        let mut fresh = Adam::new(AdamConfig::default());
        let mut still = before.clone();
        fresh.step(&mut still, &[Tensor::zeros(&[1, 2])]).unwrap();
        assert_eq!(still, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = one_param(vec![0.0, 0.0, 0.0]);
        let mut adam = Adam::new(AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        });
        adam.step(&mut params, &[Tensor::matrix(1, 3, vec![3.0, -0.2, 1e-3]).unwrap()]).unwrap();
        let d = params.tensor(0).data();
        assert!((d[0] + 0.01).abs() < 1e-8);
        assert!((d[1] - 0.01).abs() < 1e-8);
        assert!((d[2] + 0.01).abs() < 1e-7);
    }

    #[test]
    fn descends_convex_quadratic() {
        let mut params = one_param(vec![3.0, -4.0]);
        let loss = |p: &ParamSet| p.tensor(0).data().iter().map(|x| x * x).sum::<f64>();
        let mut adam = Adam::new(AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        });
        let start = loss(&params);
        for _ in 0..2 {
            let g = params.tensor(0).map(|x| 2.0 * x);
            adam.step(&mut params, &[g]).unwrap();
        }
        assert!(loss(&params) < start);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut params = one_param(vec![1.0]);
        let mut adam = Adam::new(AdamConfig::default());
        let err = adam
            .step(&mut params, &[Tensor::matrix(1, 1, vec![f64::NAN]).unwrap()])
            .unwrap_err();
        assert!(matches!(err, Error::Optimizer { ref param } if param == "w"));
    }
}
