//! 5x5 binomial blur plus 2x decimation, the pyramid's downsampling step.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Normalized 1-D binomial tap weights; the 2-D kernel is their outer
/// product and sums to exactly 1.
pub const BINOMIAL_5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Reflects an out-of-range index back into `[0, n)` without repeating the
/// edge sample (`-1 -> 1`, `n -> n - 2`), folding as often as needed.
#[inline]
fn reflect_idx(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Blurs each channel with the 5x5 binomial kernel under reflect padding,
/// then keeps the even-indexed rows and columns. Output dims are
/// `(ceil(h/2), ceil(w/2))`; constants are preserved exactly.
pub fn gaussian_downsample<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.dims();
    if h < 2 || w < 2 {
        return Err(Error::DegenerateDims {
            height: h,
            width: w,
        });
    }
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Tensor::zeros(c, oh, ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for (u, &ku) in BINOMIAL_5.iter().enumerate() {
                    let yy = reflect_idx(2 * oy as isize + u as isize - 2, h);
                    for (v, &kv) in BINOMIAL_5.iter().enumerate() {
                        let xx = reflect_idx(2 * ox as isize + v as isize - 2, w);
                        acc += ku * kv * x.get(ch, yy, xx).as_f64();
                    }
                }
                out.set(ch, oy, ox, T::from_f64(acc));
            }
        }
    }
    Ok(out)
}

/// Input cotangent of [`gaussian_downsample`]: scatters each coarse gradient
/// through the same taps and reflect folds the forward pass read.
pub fn gaussian_downsample_vjp<T: Scalar>(
    in_dims: (usize, usize, usize),
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let (c, h, w) = in_dims;
    let (_, oh, ow) = grad_out.dims();
    let mut grad = vec![0.0f64; c * h * w];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = grad_out.get(ch, oy, ox).as_f64();
                for (u, &ku) in BINOMIAL_5.iter().enumerate() {
                    let yy = reflect_idx(2 * oy as isize + u as isize - 2, h);
                    for (v, &kv) in BINOMIAL_5.iter().enumerate() {
                        let xx = reflect_idx(2 * ox as isize + v as isize - 2, w);
                        grad[(ch * h + yy) * w + xx] += ku * kv * g;
                    }
                }
            }
        }
    }
    Tensor::new(c, h, w, grad.into_iter().map(T::from_f64).collect()).expect("shape preserved")
}
