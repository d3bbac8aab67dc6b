//! Bilinear resize with half-pixel centers.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Source coordinate and interpolation weight for one output index:
/// `(i0, i1, frac)` where the sample is `v[i0] + frac * (v[i1] - v[i0])`.
#[inline]
fn sample_axis(dst: usize, out: usize, extent: usize) -> (usize, usize, f64) {
    let scale = extent as f64 / out as f64;
    let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (extent - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(extent - 1);
    (i0, i1, src - i0 as f64)
}

/// Resizes every channel to `out_h x out_w` by bilinear interpolation with
/// half-pixel-center sampling: source = (dst + 0.5) * scale - 0.5, clamped
/// to the valid range. Resizing to the input dims reproduces the input
/// exactly, and constants are preserved exactly.
pub fn bilinear_resize<T: Scalar>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    if out_h < 1 || out_w < 1 {
        return Err(Error::InvalidResizeTarget { out_h, out_w });
    }
    let (c, h, w) = x.dims();
    let mut out = Tensor::zeros(c, out_h, out_w);
    for ch in 0..c {
        for oy in 0..out_h {
            let (y0, y1, fy) = sample_axis(oy, out_h, h);
            for ox in 0..out_w {
                let (x0, x1, fx) = sample_axis(ox, out_w, w);
                let v00 = x.get(ch, y0, x0).as_f64();
                let v01 = x.get(ch, y0, x1).as_f64();
                let v10 = x.get(ch, y1, x0).as_f64();
                let v11 = x.get(ch, y1, x1).as_f64();
                // Lerp form: exact for constants and for zero fractions.
                let top = v00 + fx * (v01 - v00);
                let bot = v10 + fx * (v11 - v10);
                out.set(ch, oy, ox, T::from_f64(top + fy * (bot - top)));
            }
        }
    }
    Ok(out)
}

/// Input cotangent of [`bilinear_resize`]: scatters each output gradient to
/// its four source corners with the interpolation weights.
pub fn bilinear_resize_vjp<T: Scalar>(
    in_dims: (usize, usize, usize),
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let (c, h, w) = in_dims;
    let (_, out_h, out_w) = grad_out.dims();
    let mut grad = vec![0.0f64; c * h * w];
    for ch in 0..c {
        for oy in 0..out_h {
            let (y0, y1, fy) = sample_axis(oy, out_h, h);
            for ox in 0..out_w {
                let (x0, x1, fx) = sample_axis(ox, out_w, w);
                let g = grad_out.get(ch, oy, ox).as_f64();
                grad[(ch * h + y0) * w + x0] += g * (1.0 - fx) * (1.0 - fy);
                grad[(ch * h + y0) * w + x1] += g * fx * (1.0 - fy);
                grad[(ch * h + y1) * w + x0] += g * (1.0 - fx) * fy;
                grad[(ch * h + y1) * w + x1] += g * fx * fy;
            }
        }
    }
    Tensor::new(c, h, w, grad.into_iter().map(T::from_f64).collect()).expect("shape preserved")
}
