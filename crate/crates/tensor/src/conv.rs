use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Weights `(out_c, in_c, k, k)`, per-output-channel bias and geometry of a
/// square 2-D convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
    pub stride: usize,
    pub pad: usize,
    pub dilation: usize,
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads<T = f32> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn new(weights: Tensor<T>, bias: Vec<T>, stride: usize, pad: usize, dilation: usize) -> Self {
        ConvParams {
            weights,
            bias,
            stride,
            pad,
            dilation,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    /// Spatial extent covered by the dilated kernel.
    pub fn extent(&self) -> usize {
        (self.kernel() - 1) * self.dilation + 1
    }

    /// Shape produced by [`conv2d`] for the given input, after validation.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        const OP: &str = "conv2d";
        let ws = self.weights.shape();
        if ws.h != ws.w || ws.h == 0 {
            return Err(TensorError::shape(OP, format!("kernel must be square, got {ws}")));
        }
        if self.stride == 0 || self.dilation == 0 {
            return Err(TensorError::arg(
                OP,
                format!("stride {} and dilation {} must be positive", self.stride, self.dilation),
            ));
        }
        if input.c != ws.c {
            return Err(TensorError::shape(
                OP,
                format!("input has {} channels, weights {ws} expect {}", input.c, ws.c),
            ));
        }
        if self.bias.len() != ws.n {
            return Err(TensorError::shape(
                OP,
                format!("bias has {} entries for {} output channels", self.bias.len(), ws.n),
            ));
        }
        let oh = conv_output_size(input.h, self.extent(), self.stride, self.pad).ok_or_else(|| {
            TensorError::shape(
                OP,
                format!(
                    "kernel extent {} exceeds padded input height {}",
                    self.extent(),
                    input.h + 2 * self.pad
                ),
            )
        })?;
        let ow = conv_output_size(input.w, self.extent(), self.stride, self.pad).ok_or_else(|| {
            TensorError::shape(
                OP,
                format!(
                    "kernel extent {} exceeds padded input width {}",
                    self.extent(),
                    input.w + 2 * self.pad
                ),
            )
        })?;
        Ok(Shape::new(input.n, ws.n, oh, ow))
    }
}

/// `floor((size + 2 pad - extent) / stride) + 1`, or `None` when the kernel
/// does not fit.
pub fn conv_output_size(size: usize, extent: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    if extent > padded || stride == 0 {
        return None;
    }
    Some((padded - extent) / stride + 1)
}

struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
    dilation: usize,
}

impl Geometry {
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    fn rows(&self) -> usize {
        self.cin * self.k * self.k
    }

    /// Source coordinate for output position `o` and kernel tap `t`.
    #[inline]
    fn src(&self, o: usize, t: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + t * self.dilation) as isize - self.pad as isize;
        if pos >= 0 && (pos as usize) < limit {
            Some(pos as usize)
        } else {
            None
        }
    }

    fn im2col<T: Real>(&self, input: &[T], col: &mut [T]) {
        let ohw = self.oh * self.ow;
        for c in 0..self.cin {
            let plane = &input[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let dst = &mut col[row * ohw..(row + 1) * ohw];
                    for oy in 0..self.oh {
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        match self.src(oy, ky, self.h) {
                            None => line.iter_mut().for_each(|v| *v = T::ZERO),
                            Some(iy) => {
                                let src_row = &plane[iy * self.w..(iy + 1) * self.w];
                                for (ox, v) in line.iter_mut().enumerate() {
                                    *v = match self.src(ox, kx, self.w) {
                                        Some(ix) => src_row[ix],
                                        None => T::ZERO,
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Real>(&self, col: &[T], input_grad: &mut [T]) {
        let ohw = self.oh * self.ow;
        for c in 0..self.cin {
            let plane = &mut input_grad[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let src = &col[row * ohw..(row + 1) * ohw];
                    for oy in 0..self.oh {
                        let Some(iy) = self.src(oy, ky, self.h) else {
                            continue;
                        };
                        for ox in 0..self.ow {
                            if let Some(ix) = self.src(ox, kx, self.w) {
                                plane[iy * self.w + ix] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn geometry<T: Real>(input: Shape, p: &ConvParams<T>) -> Result<(Geometry, Shape)> {
    let out = p.output_shape(input)?;
    Ok((
        Geometry {
            cin: input.c,
            h: input.h,
            w: input.w,
            k: p.kernel(),
            oh: out.h,
            ow: out.w,
            stride: p.stride,
            pad: p.pad,
            dilation: p.dilation,
        },
        out,
    ))
}

/// Dilated 2-D cross-correlation plus bias.
pub fn conv2d<T: Real>(input: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let (g, out_shape) = geometry(input.shape(), p)?;
    let cout = out_shape.c;
    let ohw = g.oh * g.ow;
    let rows = g.rows();
    let mut out = Tensor::zeros(out_shape);
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::ZERO; rows * ohw]
    };
    let item_out = out_shape.item();
    for n in 0..out_shape.n {
        let x = input.item(n);
        let dst = &mut out.data_mut()[n * item_out..(n + 1) * item_out];
        for (co, chunk) in dst.chunks_exact_mut(ohw).enumerate() {
            chunk.iter_mut().for_each(|v| *v = p.bias[co]);
        }
        let cols: &[T] = if g.is_pointwise() {
            x
        } else {
            g.im2col(x, &mut col);
            &col
        };
        T::gemm(cout, rows, ohw, T::ONE, p.weights.data(), false, cols, false, T::ONE, dst);
    }
    Ok(out)
}

/// Adjoint of [`conv2d`]. Set `need_input_grad` to false for first layers whose
/// input gradient is never consumed.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
    out_grad: &Tensor<T>,
    need_input_grad: bool,
) -> Result<ConvGrads<T>> {
    let (g, out_shape) = geometry(input.shape(), p)?;
    if out_grad.shape() != out_shape {
        return Err(TensorError::shape(
            "conv2d_backward",
            format!("out_grad is {}, forward output is {out_shape}", out_grad.shape()),
        ));
    }
    let cout = out_shape.c;
    let ohw = g.oh * g.ow;
    let rows = g.rows();
    let mut weight_grad = Tensor::zeros(p.weights.shape());
    let mut bias_grad = vec![T::ZERO; cout];
    let mut input_grad = need_input_grad.then(|| Tensor::zeros(input.shape()));
    let mut col = vec![T::ZERO; if g.is_pointwise() { 0 } else { rows * ohw }];
    let mut col_grad = vec![T::ZERO; rows * ohw];
    let item_in = input.shape().item();

    for n in 0..out_shape.n {
        let go = out_grad.item(n);
        for (co, chunk) in go.chunks_exact(ohw).enumerate() {
            bias_grad[co] += chunk.iter().copied().sum::<T>();
        }
        let x = input.item(n);
        let cols: &[T] = if g.is_pointwise() {
            x
        } else {
            g.im2col(x, &mut col);
            &col
        };
        T::gemm(cout, ohw, rows, T::ONE, go, false, cols, true, T::ONE, weight_grad.data_mut());

        if let Some(ig) = input_grad.as_mut() {
            let dst = &mut ig.data_mut()[n * item_in..(n + 1) * item_in];
            if g.is_pointwise() {
                T::gemm(rows, cout, ohw, T::ONE, p.weights.data(), true, go, false, T::ZERO, dst);
            } else {
                T::gemm(rows, cout, ohw, T::ONE, p.weights.data(), true, go, false, T::ZERO, &mut col_grad);
                g.col2im(&col_grad, dst);
            }
        }
    }
    Ok(ConvGrads {
        input: input_grad,
        weights: weight_grad,
        bias: bias_grad,
    })
}
