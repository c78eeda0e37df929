use alloc::vec;
use alloc::vec::Vec;

use crate::config::{OptimizerKind, OptimizerSpec};

const ADAM_BETA2: f64 = 0.999;

/// Hyperparameters in the form the update rules consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRule {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl From<&OptimizerSpec> for UpdateRule {
    fn from(s: &OptimizerSpec) -> Self {
        Self {
            kind: s.kind,
            learning_rate: s.learning_rate,
            momentum: s.momentum.unwrap_or(0.0),
            decay: s.decay.unwrap_or(0.9),
            epsilon: s.epsilon.unwrap_or(1e-7),
        }
    }
}

/// Per-parameter optimizer state.
///
/// * sgd: `v <- mu v + g; theta <- theta - lr v`
/// * adagrad: `G <- G + g^2; theta <- theta - lr g / (sqrt(G) + eps)`
/// * rmsprop: `G <- rho G + (1 - rho) g^2; v <- mu v + g / (sqrt(G) + eps); theta <- theta - lr v`
/// * adam: bias-corrected first/second moments, `beta1 = momentum`, `beta2 = 0.999`
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub rule: UpdateRule,
    pub step: u64,
    /// Velocity (sgd, rmsprop) or first moment (adam).
    pub velocity: Vec<f64>,
    /// Squared-gradient accumulator.
    pub accum: Vec<f64>,
}

impl OptimizerState {
    pub fn new(rule: UpdateRule, len: usize) -> Self {
        Self {
            rule,
            step: 0,
            velocity: vec![0.0; len],
            accum: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        let r = self.rule;
        let lr = r.learning_rate;
        match r.kind {
            OptimizerKind::Sgd => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
                    *v = r.momentum * *v + g;
                    *p -= lr * *v;
                }
            }
            OptimizerKind::Adagrad => {
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accum) {
                    *acc += g * g;
                    let denom = libm::sqrt(*acc) + r.epsilon;
                    if denom > 0.0 {
                        *p -= lr * g / denom;
                    }
                }
            }
            OptimizerKind::Rmsprop => {
                for (((p, g), acc), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.accum)
                    .zip(&mut self.velocity)
                {
                    *acc = r.decay * *acc + (1.0 - r.decay) * g * g;
                    let denom = libm::sqrt(*acc) + r.epsilon;
                    let scaled = if denom > 0.0 { g / denom } else { 0.0 };
                    *v = r.momentum * *v + scaled;
                    *p -= lr * *v;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - libm::pow(r.momentum, t as f64);
                let c2 = 1.0 - libm::pow(ADAM_BETA2, t as f64);
                for (((p, g), m), s) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.velocity)
                    .zip(&mut self.accum)
                {
                    *m = r.momentum * *m + (1.0 - r.momentum) * g;
                    *s = ADAM_BETA2 * *s + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = if c1 > 0.0 { *m / c1 } else { *m };
                    let s_hat = *s / c2;
                    *p -= lr * m_hat / (libm::sqrt(s_hat) + r.epsilon);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(kind: OptimizerKind, lr: f64, momentum: f64, decay: f64, eps: f64) -> UpdateRule {
        UpdateRule { kind, learning_rate: lr, momentum, decay, epsilon: eps }
    }

    #[test]
    fn adagrad_first_step() {
        let mut st = OptimizerState::new(rule(OptimizerKind::Adagrad, 0.1, 0.0, 0.9, 0.0), 1);
        let mut theta = [1.0];
        st.step(&mut theta, &[3.0]);
        assert!((theta[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_converges_to_lr_steps() {
        // With g = 1 the accumulator follows G_t = 1 - 0.9^t.
        let mut st = OptimizerState::new(rule(OptimizerKind::Rmsprop, 0.01, 0.0, 0.9, 1e-12), 1);
        let mut theta = [0.0];
        let mut prev = 0.0;
        let mut delta = 0.0;
        for t in 1..=200 {
            st.step(&mut theta, &[1.0]);
            let expected_acc = 1.0 - libm::pow(0.9, t as f64);
            assert!((st.accum[0] - expected_acc).abs() < 1e-12);
            delta = theta[0] - prev;
            prev = theta[0];
        }
        assert!((st.accum[0] - 1.0).abs() < 1e-9);
        assert!((delta + 0.01).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_noop() {
        for kind in OptimizerKind::ALL {
            let mut st = OptimizerState::new(rule(kind, 0.1, 0.0, 0.9, 1e-7), 2);
            let mut theta = [0.25, -4.0];
            for _ in 0..5 {
                st.step(&mut theta, &[0.0, 0.0]);
            }
            assert_eq!(theta, [0.25, -4.0], "{kind:?}");
        }
    }

    #[test]
    fn sgd_momentum() {
        let mut st = OptimizerState::new(rule(OptimizerKind::Sgd, 0.5, 0.5, 0.9, 0.0), 1);
        let mut theta = [0.0];
        st.step(&mut theta, &[1.0]); // v = 1, theta = -0.5
        st.step(&mut theta, &[1.0]); // v = 1.5, theta = -1.25
        assert!((theta[0] + 1.25).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        let mut st = OptimizerState::new(rule(OptimizerKind::Adam, 0.01, 0.9, 0.9, 1e-12), 2);
        let mut theta = [0.0, 0.0];
        st.step(&mut theta, &[5.0, -0.1]);
        assert!((theta[0] + 0.01).abs() < 1e-9);
        assert!((theta[1] - 0.01).abs() < 1e-9);
    }
}
