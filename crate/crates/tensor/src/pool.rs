use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Flat input index of the winning element for every pooled output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_shape: Shape,
    pub argmax: Vec<usize>,
}

/// Ceil-mode pooled size: `ceil((size + 2 pad - kernel) / stride) + 1`, minus
/// one if the last window would start inside the trailing padding.
pub fn pool_output_size(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || pad >= kernel {
        return None;
    }
    let padded = size + 2 * pad;
    if padded < kernel || size == 0 {
        return None;
    }
    let mut out = (padded - kernel).div_ceil(stride) + 1;
    if (out - 1) * stride >= size + pad {
        out -= 1;
    }
    Some(out)
}

fn check(input: Shape, kernel: usize, stride: usize, pad: usize) -> Result<(usize, usize)> {
    const OP: &str = "maxpool";
    if pad >= kernel {
        return Err(TensorError::arg(
            OP,
            format!("pad {pad} >= kernel {kernel} leaves windows entirely in padding"),
        ));
    }
    let oh = pool_output_size(input.h, kernel, stride, pad);
    let ow = pool_output_size(input.w, kernel, stride, pad);
    match (oh, ow) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(TensorError::arg(
            OP,
            format!(
                "kernel {kernel}, stride {stride}, pad {pad} invalid for {}x{} input",
                input.h, input.w
            ),
        )),
    }
}

/// Max pooling with `-inf` padding. Ties go to the lowest flat index.
pub fn maxpool<T: Real>(
    input: &Tensor<T>,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, PoolIndices)> {
    let s = input.shape();
    let (oh, ow) = check(s, kernel, stride, pad)?;
    let out_shape = Shape::new(s.n, s.c, oh, ow);
    let mut out = Tensor::zeros(out_shape);
    let mut argmax = Vec::with_capacity(out_shape.len());
    let data = input.data();
    let span = |o: usize, limit: usize| {
        let start = (o * stride) as isize - pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + kernel as isize) as usize).min(limit);
        lo..hi
    };
    let outd = out.data_mut();
    let mut oi = 0;
    for plane in 0..s.n * s.c {
        let base = plane * s.plane();
        for oy in 0..oh {
            let rows = span(oy, s.h);
            for ox in 0..ow {
                let cols = span(ox, s.w);
                let mut best = T::NEG_INFINITY;
                let mut best_i = usize::MAX;
                for y in rows.clone() {
                    for x in cols.clone() {
                        let i = base + y * s.w + x;
                        if best_i == usize::MAX || data[i] > best {
                            best = data[i];
                            best_i = i;
                        }
                    }
                }
                if best_i == usize::MAX {
                    return Err(TensorError::arg(
                        "maxpool",
                        format!("window ({oy}, {ox}) lies entirely in padding"),
                    ));
                }
                outd[oi] = best;
                argmax.push(best_i);
                oi += 1;
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            input_shape: s,
            argmax,
        },
    ))
}

/// Routes each output gradient to its recorded argmax position.
pub fn maxpool_backward<T: Real>(indices: &PoolIndices, out_grad: &Tensor<T>) -> Result<Tensor<T>> {
    if out_grad.len() != indices.argmax.len() {
        return Err(TensorError::shape(
            "maxpool_backward",
            format!(
                "out_grad has {} values, forward produced {}",
                out_grad.len(),
                indices.argmax.len()
            ),
        ));
    }
    let mut grad = Tensor::zeros(indices.input_shape);
    let gd = grad.data_mut();
    for (&i, &g) in indices.argmax.iter().zip(out_grad.data()) {
        gd[i] += g;
    }
    Ok(grad)
}
