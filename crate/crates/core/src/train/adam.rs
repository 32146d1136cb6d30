use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::train::TrainConfig;

/// Adam with bias correction and L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(param_count: usize, config: &TrainConfig) -> Self {
        AdamState {
            m: vec![T::zero(); param_count],
            v: vec![T::zero(); param_count],
            t: 0,
            lr: config.initial_lr,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            weight_decay: config.weight_decay,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[T] {
        &self.m
    }

    pub fn second_moment(&self) -> &[T] {
        &self.v
    }

    /// One update of `params` given raw gradients `grads`.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Argument(format!(
                "optimizer tracks {} parameters, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let correct1 = T::of(1.0 - self.beta1.powi(t));
        let correct2 = T::of(1.0 - self.beta2.powi(t));
        let (lr, eps, wd) = (T::of(self.lr), T::of(self.epsilon), T::of(self.weight_decay));

        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let g = g + wd * *p;
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(lr: f64, wd: f64) -> TrainConfig {
        TrainConfig {
            initial_lr: lr,
            weight_decay: wd,
            ..Default::default()
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = AdamState::<f64>::new(3, &config(1e-3, 0.0));
        let mut p = vec![0.5, -1.0, 2.0];
        for _ in 0..5 {
            s.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert!(s.second_moment().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let lr = 1e-3;
        let mut s = AdamState::<f64>::new(1, &config(lr, 0.0));
        let mut p = vec![0.25];
        s.step(&mut p, &[1.0]).unwrap();
        // m_hat = 1, v_hat = 1 after bias correction
        let expected = 0.25 - lr * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!(((0.25 - p[0]) - lr).abs() < 1e-6);
    }

    #[test]
    fn hand_evaluated_second_step() {
        let (lr, b1, b2, eps): (f64, f64, f64, f64) = (0.01, 0.9, 0.999, 1e-8);
        let mut s = AdamState::<f64>::new(1, &config(lr, 0.0));
        let mut p = vec![1.0];
        s.step(&mut p, &[2.0]).unwrap();
        s.step(&mut p, &[-1.0]).unwrap();
        let (m1, v1) = ((1.0 - b1) * 2.0, (1.0 - b2) * 4.0);
        let p1 = 1.0 - lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let (m2, v2) = (b1 * m1 + (1.0 - b1) * -1.0, b2 * v1 + (1.0 - b2) * 1.0);
        let p2 = p1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_enters_the_gradient() {
        let mut s = AdamState::<f64>::new(1, &config(1e-3, 0.5));
        let mut p = vec![2.0];
        // raw gradient -1 cancels the decay term 0.5 * 2
        s.step(&mut p, &[-1.0]).unwrap();
        assert_eq!(p[0], 2.0);
    }

    #[test]
    fn nonzero_gradient_always_moves() {
        let mut s = AdamState::<f32>::new(2, &config(1e-4, 0.0));
        let mut p = vec![1.0f32, 1.0];
        s.step(&mut p, &[1e-3, 0.0]).unwrap();
        assert!(p[0] < 1.0);
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn length_mismatch() {
        let mut s = AdamState::<f64>::new(2, &config(1e-3, 0.0));
        assert!(s.step(&mut [0.0], &[0.0]).is_err());
    }
}
