use crate::error::{Result, TensorError};
use crate::real::Real;

/// Stochastic gradient descent with momentum and L2 weight decay:
/// `v <- momentum * v + grad + weight_decay * param; param <- param - lr * v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Sgd {
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }
}

impl Sgd {
    pub fn step<T: Real>(&self, lr: f64, params: &mut [T], grads: &[T], velocity: &mut [T]) -> Result<()> {
        if params.len() != grads.len() || params.len() != velocity.len() {
            return Err(TensorError::shape(
                "sgd_update",
                format!(
                    "params {}, grads {}, velocity {}",
                    params.len(),
                    grads.len(),
                    velocity.len()
                ),
            ));
        }
        let lr = T::from_f64(lr);
        let mu = T::from_f64(self.momentum);
        let wd = T::from_f64(self.weight_decay);
        for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
            *v = mu * *v + g + wd * *p;
            *p -= lr * *v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_leaves_params() {
        let mut p = vec![1.0f64, -2.0];
        let mut v = vec![0.0; 2];
        Sgd::default().step(0.0, &mut p, &[3.0, 4.0], &mut v).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn plain_sgd_is_exact() {
        let sgd = Sgd {
            momentum: 0.0,
            weight_decay: 0.0,
        };
        let mut p = vec![1.0f64];
        let mut v = vec![0.0];
        sgd.step(0.25, &mut p, &[2.0], &mut v).unwrap();
        assert_eq!(p, vec![0.5]);
    }

    #[test]
    fn momentum_two_steps() {
        let sgd = Sgd {
            momentum: 0.9,
            weight_decay: 0.0,
        };
        let mut p = vec![1.0f64];
        let mut v = vec![0.0];
        sgd.step(0.1, &mut p, &[1.0], &mut v).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
        sgd.step(0.1, &mut p, &[1.0], &mut v).unwrap();
        assert!((p[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn misaligned_buffers_rejected() {
        let mut p = vec![1.0f32; 2];
        let mut v = vec![0.0; 2];
        assert!(Sgd::default().step(0.1, &mut p, &[1.0], &mut v).is_err());
    }
}
