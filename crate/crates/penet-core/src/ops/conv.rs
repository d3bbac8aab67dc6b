//! 2-D convolution (cross-correlation) with zero padding and stride 1.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Learned convolution parameters: `weights[out][in][k][k]` flat, plus one
/// bias per output channel. Kernel size is 1 or 3.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if kernel != 1 && kernel != 3 {
            return Err(Error::UnsupportedKernel(kernel));
        }
        let expect = out_channels * in_channels * kernel * kernel;
        if weights.len() != expect || bias.len() != out_channels {
            return Err(Error::DataLength {
                len: weights.len(),
                channels: out_channels,
                height: in_channels,
                width: kernel * kernel,
            });
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Result<Self> {
        Self::new(
            out_channels,
            in_channels,
            kernel,
            vec![T::zero(); out_channels * in_channels * kernel * kernel],
            vec![T::zero(); out_channels],
        )
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    /// Weight tensor shape `[out, in, k, k]`.
    pub fn weight_shape(&self) -> Vec<usize> {
        vec![
            self.out_channels,
            self.in_channels,
            self.kernel,
            self.kernel,
        ]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    #[inline]
    fn weight(&self, o: usize, c: usize, u: usize, v: usize) -> T {
        self.weights[((o * self.in_channels + c) * self.kernel + u) * self.kernel + v]
    }
}

/// Cross-correlates `x` with `p`, zero padding of `(k - 1) / 2`, stride 1.
/// Output keeps the spatial dims of `x` and has `p.out_channels()` channels.
///
/// The summation runs input-channel outer, kernel row, kernel column inner,
/// accumulating in f64, so results are bit-reproducible.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    if x.channels() != p.in_channels {
        return Err(Error::ChannelMismatch {
            expected: p.in_channels,
            got: x.channels(),
        });
    }
    let (h, w) = (x.height(), x.width());
    let k = p.kernel;
    let pad = (k - 1) / 2;
    let mut out = Tensor::zeros(p.out_channels, h, w);
    for o in 0..p.out_channels {
        for i in 0..h {
            for j in 0..w {
                let mut acc = p.bias[o].as_f64();
                for c in 0..p.in_channels {
                    for u in 0..k {
                        let yy = i + u;
                        if yy < pad || yy >= h + pad {
                            continue;
                        }
                        for v in 0..k {
                            let xx = j + v;
                            if xx < pad || xx >= w + pad {
                                continue;
                            }
                            acc += p.weight(o, c, u, v).as_f64()
                                * x.get(c, yy - pad, xx - pad).as_f64();
                        }
                    }
                }
                out.set(o, i, j, T::from_f64(acc));
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of [`conv2d`]: given the output cotangent, returns
/// the input cotangent plus flat weight and bias gradients.
#[allow(clippy::needless_range_loop)]
pub fn conv2d_vjp<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    if grad_out.dims() != (p.out_channels, x.height(), x.width()) {
        return Err(Error::ShapeMismatch {
            expected: (p.out_channels, x.height(), x.width()),
            got: grad_out.dims(),
        });
    }
    let (h, w) = (x.height(), x.width());
    let k = p.kernel;
    let pad = (k - 1) / 2;

    let mut grad_x = vec![0.0f64; x.len()];
    let mut grad_w = vec![0.0f64; p.weights.len()];
    let mut grad_b = vec![0.0f64; p.bias.len()];

    for o in 0..p.out_channels {
        for i in 0..h {
            for j in 0..w {
                let g = grad_out.get(o, i, j).as_f64();
                grad_b[o] += g;
                for c in 0..p.in_channels {
                    for u in 0..k {
                        let yy = i + u;
                        if yy < pad || yy >= h + pad {
                            continue;
                        }
                        for v in 0..k {
                            let xx = j + v;
                            if xx < pad || xx >= w + pad {
                                continue;
                            }
                            let src = (c * h + (yy - pad)) * w + (xx - pad);
                            let widx = ((o * p.in_channels + c) * k + u) * k + v;
                            grad_w[widx] += g * x.data()[src].as_f64();
                            grad_x[src] += g * p.weights[widx].as_f64();
                        }
                    }
                }
            }
        }
    }

    let gx = Tensor::new(
        x.channels(),
        h,
        w,
        grad_x.into_iter().map(T::from_f64).collect(),
    )?;
    let gw = grad_w.into_iter().map(T::from_f64).collect();
    let gb = grad_b.into_iter().map(T::from_f64).collect();
    Ok((gx, gw, gb))
}

// The accumulators above mix `f64` with `T::to_f64()` per element; for
// `grad_w`/`grad_x` the input values are fetched as T then widened, which is
// exact for both instantiations.

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_output() {
        let x = Tensor::from_fn(3, 4, 5, |c, y, x| (c + y * x) as f32 * 0.1 - 0.4);
        let p = ConvParams::<f32>::zeros(2, 3, 3).unwrap();
        let y = conv2d(&x, &p).unwrap();
        assert_eq!(y.dims(), (2, 4, 5));
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_1x1_kernel_passes_input_through() {
        let x = Tensor::from_fn(3, 3, 3, |c, y, x| (c * 9 + y * 3 + x) as f32 * 0.5);
        let mut w = vec![0.0f32; 9];
        for o in 0..3 {
            w[o * 3 + o] = 1.0;
        }
        let p = ConvParams::new(3, 3, 1, w, vec![0.0; 3]).unwrap();
        let y = conv2d(&x, &p).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_3x3_kernel_counts_neighbors() {
        // 1x3x3 of ones against a 3x3 ones kernel: center sees all 9 taps,
        // edge centers 6, corners 4.
        let x = Tensor::filled(1, 3, 3, 1.0f32);
        let p = ConvParams::new(1, 1, 3, vec![1.0; 9], vec![0.0]).unwrap();
        let y = conv2d(&x, &p).unwrap();
        let expect = [4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::<f32>::zeros(2, 3, 3);
        let p = ConvParams::<f32>::zeros(1, 3, 3).unwrap();
        assert_eq!(
            conv2d(&x, &p).unwrap_err(),
            Error::ChannelMismatch {
                expected: 3,
                got: 2
            }
        );
    }

    #[test]
    fn rejects_unsupported_kernel() {
        assert_eq!(
            ConvParams::<f32>::zeros(1, 1, 5).unwrap_err(),
            Error::UnsupportedKernel(5)
        );
    }

    #[test]
    fn linearity_in_input() {
        // conv2d(a*x + b*y, p0) == a*conv2d(x, p0) + b*conv2d(y, p0) for zero bias.
        let mut rng = crate::rng::SplitMix64::new(11);
        let x = Tensor::from_fn(2, 4, 4, |_, _, _| rng.next_in(-1.0, 1.0) as f32);
        let y = Tensor::from_fn(2, 4, 4, |_, _, _| rng.next_in(-1.0, 1.0) as f32);
        let w: Vec<f32> = (0..3 * 2 * 9).map(|_| rng.next_in(-1.0, 1.0) as f32).collect();
        let p = ConvParams::new(3, 2, 3, w, vec![0.0; 3]).unwrap();

        let (a, b) = (2.5f32, -0.75f32);
        let lhs = conv2d(
            &crate::tensor::add(&crate::tensor::scale(&x, a), &crate::tensor::scale(&y, b))
                .unwrap(),
            &p,
        )
        .unwrap();
        let rhs = crate::tensor::add(
            &crate::tensor::scale(&conv2d(&x, &p).unwrap(), a),
            &crate::tensor::scale(&conv2d(&y, &p).unwrap(), b),
        )
        .unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - r).abs() <= 1e-5 * r.abs().max(1.0), "{l} vs {r}");
        }
    }
}
