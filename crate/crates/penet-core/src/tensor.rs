//! Dense 3-D tensors in channel-height-width layout.
//!
//! A [`Tensor`] is a flat buffer indexed as `(c * height + y) * width + x`.
//! Production paths run on `f32`; gradient verification instantiates the
//! same code at `f64`.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Element type for all kernels: `f32` or `f64`.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + DivAssign + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense single-image tensor, channel-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::DataLength {
                len: data.len(),
                channels,
                height,
                width,
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Builds a tensor from an element function of `(channel, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// One channel plane as a flat `height * width` slice.
    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors unless `other` has identical dims.
    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(())
    }
}

/// Elementwise sum. Shapes must match.
pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.check_same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x + y)
        .collect();
    Tensor::new(a.channels(), a.height(), a.width(), data)
}

/// Elementwise difference. Shapes must match.
pub fn sub<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.check_same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x - y)
        .collect();
    Tensor::new(a.channels(), a.height(), a.width(), data)
}

/// Elementwise (Hadamard) product. Shapes must match.
pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.check_same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x * y)
        .collect();
    Tensor::new(a.channels(), a.height(), a.width(), data)
}

/// Multiplies every element by `k`.
pub fn scale<T: Scalar>(a: &Tensor<T>, k: T) -> Tensor<T> {
    a.map(|v| v * k)
}

/// Splits a tensor along the channel axis. Group sizes must sum to the
/// channel count.
pub fn channel_split<T: Scalar>(x: &Tensor<T>, group_sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
    let total: usize = group_sizes.iter().sum();
    if total != x.channels() {
        return Err(Error::GroupSizeMismatch {
            expected: x.channels(),
            got: total,
        });
    }
    let plane = x.height() * x.width();
    let mut parts = Vec::with_capacity(group_sizes.len());
    let mut start = 0;
    for &g in group_sizes {
        let data = x.data()[start * plane..(start + g) * plane].to_vec();
        parts.push(Tensor::new(g, x.height(), x.width(), data)?);
        start += g;
    }
    Ok(parts)
}

/// Concatenates tensors along the channel axis; exact inverse of
/// [`channel_split`]. All parts must share spatial dims.
pub fn channel_concat<T: Scalar>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or(Error::GroupSizeMismatch {
        expected: 0,
        got: 0,
    })?;
    let (h, w) = (first.height(), first.width());
    let mut channels = 0;
    let mut data = Vec::new();
    for p in parts {
        if (p.height(), p.width()) != (h, w) {
            return Err(Error::ShapeMismatch {
                expected: (p.channels(), h, w),
                got: p.dims(),
            });
        }
        channels += p.channels();
        data.extend_from_slice(p.data());
    }
    Tensor::new(channels, h, w, data)
}
