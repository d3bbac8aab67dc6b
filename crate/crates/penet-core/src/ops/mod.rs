//! Forward kernels and their analytic backward (vector-Jacobian) passes.
//!
//! Every operator is a pure function: same inputs, same bits out. All
//! reductions run in a fixed order with f64 accumulators.

mod activation;
mod conv;
mod gaussian;
mod pool;
mod resize;
mod sobel;

pub use activation::{
    leaky_relu, leaky_relu_vjp, softmax_spatial, softmax_spatial_vjp, LEAKY_RELU_SLOPE,
};
pub use conv::{conv2d, conv2d_vjp, ConvParams};
pub use gaussian::{gaussian_downsample, gaussian_downsample_vjp, BINOMIAL_5};
pub use pool::{adaptive_avg_pool, adaptive_avg_pool_vjp};
pub use resize::{bilinear_resize, bilinear_resize_vjp};
pub use sobel::{
    depthwise_sobel, sobel_h, sobel_h_vjp, sobel_w, sobel_w_vjp, SOBEL_H, SOBEL_W,
};
