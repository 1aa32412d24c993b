use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.001,
        }
    }
}

/// Per-parameter moments plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    /// Zero moments shaped like `params`.
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<Tensor<T>> = params
            .into_iter()
            .map(|p| Tensor::from_parts(p.shape().to_vec(), vec![T::zero(); p.len()]))
            .collect();
        let second = first.clone();
        AdamState {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }

    /// One bias-corrected update of every parameter in place.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::shape(
                "adam_step",
                &[self.first.len()],
                &[params.len(), grads.len()],
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::shape("adam_step", p.shape(), g.shape()));
            }
        }

        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let correction1 = T::lit(1.0 - c.beta1.powi(self.step as i32));
        let correction2 = T::lit(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps, decay) = (
            T::lit(c.learning_rate),
            T::lit(c.epsilon),
            T::lit(c.weight_decay),
        );

        for (idx, param) in params.iter_mut().enumerate() {
            let g = grads[idx].data();
            let m = self.first[idx].data_mut();
            let v = self.second[idx].data_mut();
            for (k, theta) in param.data_mut().iter_mut().enumerate() {
                let grad = g[k] + decay * *theta;
                m[k] = b1 * m[k] + (T::one() - b1) * grad;
                v[k] = b2 * v[k] + (T::one() - b2) * grad * grad;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_decay(lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            weight_decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Tensor::<f64>::from_f64(1, 3, &[1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::from_f64(1, 3, &[0.3, -7.0, 1e-3]).unwrap();
        let mut state = AdamState::new(no_decay(0.005), [&p]);
        state.step(&mut [&mut p], &[g]).unwrap();
        let expected = [1.0 - 0.005, -2.0 + 0.005, 0.5 - 0.005];
        for (a, b) in p.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Tensor::<f32>::from_f64(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let before = p.clone();
        let mut state = AdamState::new(no_decay(0.1), [&p]);
        for _ in 0..5 {
            state.step(&mut [&mut p], &[Tensor::zeros(2, 2)]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn minimises_a_parabola() {
        // Scalar recurrence on f(θ) = θ², gradient 2θ.
        let mut p = Tensor::<f64>::scalar(1.0);
        let mut state = AdamState::new(no_decay(0.005), [&p]);
        let mut last = 1.0f64;
        for _ in 0..100 {
            let g = Tensor::scalar(2.0 * p.data()[0]);
            state.step(&mut [&mut p], &[g]).unwrap();
            let now = p.data()[0].abs();
            assert!(now < last);
            last = now;
        }
        assert!(last < 0.6);
    }

    #[test]
    fn weight_decay_is_added_to_gradient() {
        // With g = 0 and λ > 0 the first step still moves against sign(θ).
        let mut p = Tensor::<f64>::scalar(2.0);
        let mut state = AdamState::new(AdamConfig::default(), [&p]);
        state.step(&mut [&mut p], &[Tensor::scalar(0.0)]).unwrap();
        assert!((p.data()[0] - (2.0 - 0.005)).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Tensor::<f64>::zeros(2, 2);
        let mut state = AdamState::new(AdamConfig::default(), [&p]);
        assert!(state.step(&mut [&mut p], &[Tensor::zeros(1, 4)]).is_err());
        assert!(state.step(&mut [&mut p], &[]).is_err());
        assert_eq!(state.step_count(), 0);
    }
}
