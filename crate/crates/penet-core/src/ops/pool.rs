//! Adaptive average pooling to a square output size.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[inline]
fn bin_range(index: usize, out: usize, extent: usize) -> (usize, usize) {
    // [floor(i*n/s), ceil((i+1)*n/s))
    let lo = index * extent / out;
    let hi = ((index + 1) * extent).div_ceil(out);
    (lo, hi)
}

/// Averages each channel over an `size x size` grid of bins. Bin `(i, j)`
/// covers rows `[floor(i*h/s), ceil((i+1)*h/s))` and the analogous columns,
/// so bins may overlap or repeat cells when `s` does not divide the extent.
pub fn adaptive_avg_pool<T: Scalar>(x: &Tensor<T>, size: usize) -> Result<Tensor<T>> {
    if size < 1 {
        return Err(Error::InvalidPoolSize);
    }
    let (c, h, w) = x.dims();
    let mut out = Tensor::zeros(c, size, size);
    for ch in 0..c {
        for i in 0..size {
            let (y0, y1) = bin_range(i, size, h);
            for j in 0..size {
                let (x0, x1) = bin_range(j, size, w);
                let mut acc = 0.0f64;
                for y in y0..y1 {
                    for xx in x0..x1 {
                        acc += x.get(ch, y, xx).as_f64();
                    }
                }
                let area = ((y1 - y0) * (x1 - x0)) as f64;
                out.set(ch, i, j, T::from_f64(acc / area));
            }
        }
    }
    Ok(out)
}

/// Input cotangent of [`adaptive_avg_pool`]: each bin's gradient is spread
/// uniformly over the cells it averaged.
pub fn adaptive_avg_pool_vjp<T: Scalar>(
    in_dims: (usize, usize, usize),
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let (c, h, w) = in_dims;
    let size = grad_out.height();
    let mut grad = vec![0.0f64; c * h * w];
    for ch in 0..c {
        for i in 0..size {
            let (y0, y1) = bin_range(i, size, h);
            for j in 0..size {
                let (x0, x1) = bin_range(j, size, w);
                let area = ((y1 - y0) * (x1 - x0)) as f64;
                let g = grad_out.get(ch, i, j).as_f64() / area;
                for y in y0..y1 {
                    for xx in x0..x1 {
                        grad[(ch * h + y) * w + xx] += g;
                    }
                }
            }
        }
    }
    Tensor::new(c, h, w, grad.into_iter().map(T::from_f64).collect()).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_one_is_global_mean() {
        let x = Tensor::from_fn(2, 3, 3, |c, y, xx| (c * 9 + y * 3 + xx) as f64);
        let y = adaptive_avg_pool(&x, 1).unwrap();
        assert_eq!(y.dims(), (2, 1, 1));
        assert!((y.get(0, 0, 0) - 4.0).abs() < 1e-12);
        assert!((y.get(1, 0, 0) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn four_by_four_to_two_by_two() {
        // Values 1..16 row-major: each 2x2 bin averages its four cells.
        let x = Tensor::from_fn(1, 4, 4, |_, y, xx| (y * 4 + xx) as f64 + 1.0);
        let y = adaptive_avg_pool(&x, 2).unwrap();
        assert_eq!(y.data(), &[3.5, 5.5, 11.5, 13.5]);
    }

    #[test]
    fn identity_when_size_equals_extent() {
        let x = Tensor::from_fn(1, 3, 3, |_, y, xx| (y * 3 + xx) as f32 * 0.3 - 1.0);
        let y = adaptive_avg_pool(&x, 3).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn size_larger_than_extent_repeats_cells() {
        let x = Tensor::new(1, 2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let y = adaptive_avg_pool(&x, 3).unwrap();
        assert_eq!(y.dims(), (1, 3, 3));
        // Middle bin covers all four cells.
        assert!((y.get(0, 1, 1) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_size() {
        let x = Tensor::<f32>::zeros(1, 2, 2);
        assert_eq!(adaptive_avg_pool(&x, 0).unwrap_err(), Error::InvalidPoolSize);
    }

    #[test]
    fn pool_then_resize_preserves_a_constant_exactly() {
        let c = 0.637f32;
        let x = Tensor::filled(2, 7, 9, c);
        for size in [1, 2, 3, 6] {
            let pooled = adaptive_avg_pool(&x, size).unwrap();
            let back = crate::ops::bilinear_resize(&pooled, 7, 9).unwrap();
            assert!(back.data().iter().all(|&v| v == c), "size {size}");
        }
    }
}
