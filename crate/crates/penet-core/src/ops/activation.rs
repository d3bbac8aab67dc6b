//! Leaky ReLU and the per-channel spatial softmax.

use crate::tensor::{Scalar, Tensor};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// Elementwise `x if x >= 0 else 0.01 * x`.
pub fn leaky_relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let slope = T::from_f64(LEAKY_RELU_SLOPE);
    x.map(|v| if v >= T::zero() { v } else { slope * v })
}

/// Input cotangent of [`leaky_relu`]; the slope at exactly zero is 1.
pub fn leaky_relu_vjp<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let slope = T::from_f64(LEAKY_RELU_SLOPE);
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v >= T::zero() { g } else { slope * g })
        .collect();
    Tensor::new(x.channels(), x.height(), x.width(), data).expect("shape preserved")
}

/// Softmax over the spatial positions of each channel, shifted by the
/// channel max for stability. Every channel of the result sums to 1.
pub fn softmax_spatial<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = x.dims();
    let plane = h * w;
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let src = x.channel(ch);
        let mut max = f64::NEG_INFINITY;
        for &v in src {
            max = max.max(v.as_f64());
        }
        let mut exps = vec![0.0f64; plane];
        let mut sum = 0.0f64;
        for (e, &v) in exps.iter_mut().zip(src) {
            *e = (v.as_f64() - max).exp();
            sum += *e;
        }
        let dst = &mut out.data_mut()[ch * plane..(ch + 1) * plane];
        for (d, e) in dst.iter_mut().zip(&exps) {
            *d = T::from_f64(e / sum);
        }
    }
    out
}

/// Input cotangent of [`softmax_spatial`], computed from the forward output:
/// `dx = y * (g - <g, y>)` per channel.
pub fn softmax_spatial_vjp<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = y.dims();
    let plane = h * w;
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        let yv = y.channel(ch);
        let gv = grad_out.channel(ch);
        let mut dot = 0.0f64;
        for (a, b) in yv.iter().zip(gv) {
            dot += a.as_f64() * b.as_f64();
        }
        let dst = &mut out.data_mut()[ch * plane..(ch + 1) * plane];
        for ((d, &a), &b) in dst.iter_mut().zip(yv).zip(gv) {
            *d = T::from_f64(a.as_f64() * (b.as_f64() - dot));
        }
    }
    out
}
