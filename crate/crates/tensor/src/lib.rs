//! Minimal dense-tensor numerical core.
//!
//! Every layer kind used by the objectness network has a forward kernel and a
//! hand-written adjoint here. Kernels are generic over [`Real`] so that the same
//! code runs in single precision for training and in double precision for
//! finite-difference gradient checks.

mod activation;
mod conv;
mod error;
pub mod gradcheck;
mod loss;
mod optim;
mod pool;
mod real;
mod resize;
mod tensor;

pub use activation::{dropout, dropout_backward, relu, relu_backward};
pub use conv::{conv2d, conv2d_backward, conv_output_size, ConvGrads, ConvParams};
pub use error::{Result, TensorError};
pub use loss::{softmax_xent, Reduction, IGNORE_LABEL};
pub use optim::Sgd;
pub use pool::{maxpool, maxpool_backward, pool_output_size, PoolIndices};
pub use real::Real;
pub use resize::{bilinear_resize, bilinear_resize_backward};
pub use tensor::{Shape, Tensor};
