use rand::Rng;

use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Passes `out_grad` where the forward input was strictly positive. The
/// subgradient at exactly zero is zero.
pub fn relu_backward<T: Real>(input: &Tensor<T>, out_grad: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != out_grad.shape() {
        return Err(TensorError::shape(
            "relu_backward",
            format!("input {} vs out_grad {}", input.shape(), out_grad.shape()),
        ));
    }
    let mut g = out_grad.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if x <= T::ZERO {
            *gv = T::ZERO;
        }
    }
    Ok(g)
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (`0` or `1 / (1 - rate)`); in eval mode the mask is all ones.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    train_mode: bool,
    rng: &mut R,
) -> Result<(Tensor<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(TensorError::arg("dropout", format!("rate {rate} outside [0, 1)")));
    }
    if !train_mode || rate == 0.0 {
        return Ok((input.clone(), vec![T::ONE; input.len()]));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..input.len())
        .map(|_| if rng.gen::<f64>() < rate { T::ZERO } else { keep })
        .collect();
    let mut out = input.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((out, mask))
}

pub fn dropout_backward<T: Real>(mask: &[T], out_grad: &Tensor<T>) -> Result<Tensor<T>> {
    if mask.len() != out_grad.len() {
        return Err(TensorError::shape(
            "dropout_backward",
            format!("mask has {} values, out_grad {}", mask.len(), out_grad.len()),
        ));
    }
    let mut g = out_grad.clone();
    for (v, &m) in g.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    Ok(g)
}
