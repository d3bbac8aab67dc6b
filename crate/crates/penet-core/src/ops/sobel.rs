//! Fixed depthwise Sobel derivative filters.
//!
//! The kernels are constants and never trained. Borders use replicate
//! padding so that a constant input produces an exactly zero response
//! everywhere, including the edges.

use crate::tensor::{Scalar, Tensor};

/// Vertical-gradient kernel (responds to intensity change down the rows).
pub const SOBEL_H: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Horizontal-gradient kernel: the transpose of [`SOBEL_H`].
pub const SOBEL_W: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn depthwise3x3<T: Scalar>(x: &Tensor<T>, kernel: &[[f64; 3]; 3]) -> Tensor<T> {
    let (c, h, w) = x.dims();
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0f64;
                for (u, row) in kernel.iter().enumerate() {
                    let yy = clamp_idx(i as isize + u as isize - 1, h);
                    for (v, &k) in row.iter().enumerate() {
                        let xx = clamp_idx(j as isize + v as isize - 1, w);
                        acc += k * x.get(ch, yy, xx).as_f64();
                    }
                }
                out.set(ch, i, j, T::from_f64(acc));
            }
        }
    }
    out
}

fn depthwise3x3_vjp<T: Scalar>(grad_out: &Tensor<T>, kernel: &[[f64; 3]; 3]) -> Tensor<T> {
    let (c, h, w) = grad_out.dims();
    let mut grad = vec![0.0f64; grad_out.len()];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let g = grad_out.get(ch, i, j).as_f64();
                for (u, row) in kernel.iter().enumerate() {
                    let yy = clamp_idx(i as isize + u as isize - 1, h);
                    for (v, &k) in row.iter().enumerate() {
                        let xx = clamp_idx(j as isize + v as isize - 1, w);
                        grad[(ch * h + yy) * w + xx] += k * g;
                    }
                }
            }
        }
    }
    Tensor::new(c, h, w, grad.into_iter().map(T::from_f64).collect()).expect("shape preserved")
}

/// Per-channel vertical Sobel response.
pub fn sobel_h<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    depthwise3x3(x, &SOBEL_H)
}

/// Per-channel horizontal Sobel response.
pub fn sobel_w<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    depthwise3x3(x, &SOBEL_W)
}

/// Both Sobel responses, `(sobel_h(x), sobel_w(x))`.
pub fn depthwise_sobel<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    (sobel_h(x), sobel_w(x))
}

/// Input cotangent of [`sobel_h`].
pub fn sobel_h_vjp<T: Scalar>(grad_out: &Tensor<T>) -> Tensor<T> {
    depthwise3x3_vjp(grad_out, &SOBEL_H)
}

/// Input cotangent of [`sobel_w`].
pub fn sobel_w_vjp<T: Scalar>(grad_out: &Tensor<T>) -> Tensor<T> {
    depthwise3x3_vjp(grad_out, &SOBEL_W)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_gives_exact_zero_everywhere() {
        let x = Tensor::filled(2, 5, 7, 0.37f32);
        let (sh, sw) = depthwise_sobel(&x);
        assert!(sh.data().iter().all(|&v| v == 0.0));
        assert!(sw.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_ramp_responses() {
        // x[0, r, c] = r: interior vertical gradient is -4(r-1) + 4(r+1) = 8,
        // and the horizontal response vanishes.
        let x = Tensor::from_fn(1, 5, 5, |_, r, _| r as f32);
        let (sh, sw) = depthwise_sobel(&x);
        for r in 1..4 {
            for c in 1..4 {
                assert_eq!(sh.get(0, r, c), 8.0);
                assert_eq!(sw.get(0, r, c), 0.0);
            }
        }
    }

    #[test]
    fn matches_bruteforce_replicate_pad_convolution() {
        let mut rng = crate::rng::SplitMix64::new(3);
        let x = Tensor::from_fn(2, 6, 5, |_, _, _| rng.next_in(-1.0, 1.0));
        let (sh, _) = depthwise_sobel(&x);

        // Brute force: materialize the replicate-padded plane, then filter.
        let (c, h, w) = x.dims();
        for ch in 0..c {
            let mut padded = vec![0.0f64; (h + 2) * (w + 2)];
            for y in 0..h + 2 {
                for xx in 0..w + 2 {
                    let sy = clamp_idx(y as isize - 1, h);
                    let sx = clamp_idx(xx as isize - 1, w);
                    padded[y * (w + 2) + xx] = x.get(ch, sy, sx);
                }
            }
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for u in 0..3 {
                        for v in 0..3 {
                            acc += SOBEL_H[u][v] * padded[(i + u) * (w + 2) + (j + v)];
                        }
                    }
                    assert!((acc - sh.get(ch, i, j)).abs() < 1e-12);
                }
            }
        }
    }
}
