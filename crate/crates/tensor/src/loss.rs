use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

/// Label value for pixels that contribute neither loss nor gradient.
pub const IGNORE_LABEL: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Sum over contributing pixels.
    Sum,
    /// Mean over contributing pixels (zero when none contribute).
    #[default]
    Mean,
}

/// Two-way softmax cross-entropy per pixel.
///
/// `labels` is an `n x h x w` map over `{0, 1, IGNORE_LABEL}` aligned with the
/// spatial layout of `logits` (`n x 2 x h x w`). Returns the reduced loss and
/// its gradient with respect to the logits.
pub fn softmax_xent<T: Real>(logits: &Tensor<T>, labels: &[u8], reduction: Reduction) -> Result<(T, Tensor<T>)> {
    const OP: &str = "softmax_xent";
    let s = logits.shape();
    if s.c != 2 {
        return Err(TensorError::shape(OP, format!("logits {s} must have 2 channels")));
    }
    if labels.len() != s.n * s.plane() {
        return Err(TensorError::shape(
            OP,
            format!("{} labels for logits {s} (need {})", labels.len(), s.n * s.plane()),
        ));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1 && l != IGNORE_LABEL) {
        return Err(TensorError::arg(OP, format!("label {bad} outside {{0, 1, 255}}")));
    }

    let plane = s.plane();
    let mut grad = Tensor::zeros(s);
    let mut total = T::ZERO;
    let mut count = 0usize;
    let ld = logits.data();
    let gd = grad.data_mut();
    for n in 0..s.n {
        let b = n * 2 * plane;
        for i in 0..plane {
            let label = labels[n * plane + i];
            if label == IGNORE_LABEL {
                continue;
            }
            let (z0, z1) = (ld[b + i], ld[b + plane + i]);
            let m = z0.max(z1);
            let e0 = (z0 - m).exp();
            let e1 = (z1 - m).exp();
            let sum = e0 + e1;
            let lse = m + sum.ln();
            let (p0, p1) = (e0 / sum, e1 / sum);
            if label == 0 {
                total += lse - z0;
                gd[b + i] = p0 - T::ONE;
                gd[b + plane + i] = p1;
            } else {
                total += lse - z1;
                gd[b + i] = p0;
                gd[b + plane + i] = p1 - T::ONE;
            }
            count += 1;
        }
    }
    if reduction == Reduction::Mean && count > 0 {
        let scale = T::ONE / T::from_f64(count as f64);
        total *= scale;
        gd.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn uniform_logits_cost_ln2_per_pixel() {
        let z = Tensor::<f64>::zeros(Shape::new(1, 2, 3, 3));
        let labels = [0, 1, 0, 1, 1, 1, 0, 0, 1];
        let (sum, _) = softmax_xent(&z, &labels, Reduction::Sum).unwrap();
        assert!((sum - 9.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let (mean, _) = softmax_xent(&z, &labels, Reduction::Mean).unwrap();
        assert!((mean - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn all_ignored_is_zero() {
        let z = Tensor::from_fn(Shape::new(2, 2, 2, 2), |i| i as f64);
        let (loss, g) = softmax_xent(&z, &[IGNORE_LABEL; 8], Reduction::Mean).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_label() {
        let z = Tensor::<f32>::zeros(Shape::new(1, 2, 1, 2));
        assert!(softmax_xent(&z, &[0, 7], Reduction::Sum).is_err());
        assert!(softmax_xent(&z, &[0], Reduction::Sum).is_err());
    }

    #[test]
    fn saturated_logits_stay_finite() {
        let z = Tensor::from_vec(Shape::new(1, 2, 1, 2), vec![-500.0f32, 500.0, 500.0, -500.0]).unwrap();
        let (loss, g) = softmax_xent(&z, &[1, 1], Reduction::Sum).unwrap();
        assert!(loss.is_finite() && g.all_finite());
    }
}
