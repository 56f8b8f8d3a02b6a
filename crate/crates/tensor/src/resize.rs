use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Interpolation taps along one axis with a corner-aligned grid: output sample
/// `o` reads input position `o * (in - 1) / (out - 1)`.
fn taps<T: Real>(input: usize, output: usize) -> Vec<(usize, usize, T)> {
    (0..output)
        .map(|o| {
            if output == 1 || input == 1 {
                return (0, 0, T::ZERO);
            }
            let num = o * (input - 1);
            let den = output - 1;
            let i0 = num / den;
            let frac = T::from_f64((num % den) as f64 / den as f64);
            (i0, (i0 + 1).min(input - 1), frac)
        })
        .collect()
}

fn check(out_h: usize, out_w: usize) -> Result<()> {
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::arg(
            "bilinear_resize",
            format!("target {out_h}x{out_w} must be at least 1x1"),
        ));
    }
    Ok(())
}

/// Bilinear resampling of every plane to `out_h x out_w`.
pub fn bilinear_resize<T: Real>(input: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    check(out_h, out_w)?;
    let s = input.shape();
    if s.h == 0 || s.w == 0 {
        return Err(TensorError::arg("bilinear_resize", "input plane is empty"));
    }
    let ty = taps::<T>(s.h, out_h);
    let tx = taps::<T>(s.w, out_w);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, out_h, out_w));
    let od = out.data_mut();
    let mut oi = 0;
    for p in 0..s.n * s.c {
        let src = &input.data()[p * s.plane()..(p + 1) * s.plane()];
        for &(y0, y1, fy) in &ty {
            let r0 = &src[y0 * s.w..(y0 + 1) * s.w];
            let r1 = &src[y1 * s.w..(y1 + 1) * s.w];
            for &(x0, x1, fx) in &tx {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
                od[oi] = top + (bot - top) * fy;
                oi += 1;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`bilinear_resize`] for an input of shape `input_shape`.
pub fn bilinear_resize_backward<T: Real>(input_shape: Shape, out_grad: &Tensor<T>) -> Result<Tensor<T>> {
    let os = out_grad.shape();
    check(os.h, os.w)?;
    if (os.n, os.c) != (input_shape.n, input_shape.c) {
        return Err(TensorError::shape(
            "bilinear_resize_backward",
            format!("out_grad {os} does not match input {input_shape}"),
        ));
    }
    let s = input_shape;
    let ty = taps::<T>(s.h, os.h);
    let tx = taps::<T>(s.w, os.w);
    let mut grad = Tensor::zeros(s);
    let mut oi = 0;
    let og = out_grad.data();
    for p in 0..s.n * s.c {
        let dst = &mut grad.data_mut()[p * s.plane()..(p + 1) * s.plane()];
        for &(y0, y1, fy) in &ty {
            for &(x0, x1, fx) in &tx {
                let g = og[oi];
                oi += 1;
                let gt = g * (T::ONE - fy);
                let gb = g * fy;
                dst[y0 * s.w + x0] += gt * (T::ONE - fx);
                dst[y0 * s.w + x1] += gt * fx;
                dst[y1 * s.w + x0] += gb * (T::ONE - fx);
                dst[y1 * s.w + x1] += gb * fx;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let x = Tensor::from_fn(Shape::new(1, 2, 5, 7), |i| (i as f64).sin());
        assert_eq!(bilinear_resize(&x, 5, 7).unwrap(), x);
    }

    #[test]
    fn constant_stays_constant() {
        let x = Tensor::full(Shape::new(1, 1, 41, 41), 0.3725f32);
        let y = bilinear_resize(&x, 321, 321).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.3725));
    }

    #[test]
    fn middle_column_is_midpoint() {
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let y = bilinear_resize(&x, 2, 3).unwrap();
        assert_eq!(y.data(), &[0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn zero_target_rejected() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 2, 2));
        assert!(bilinear_resize(&x, 0, 3).is_err());
    }

    #[test]
    fn single_pixel_broadcasts() {
        let x = Tensor::full(Shape::new(1, 1, 1, 1), 2.0f64);
        let y = bilinear_resize(&x, 3, 4).unwrap();
        assert!(y.data().iter().all(|&v| v == 2.0));
    }
}
