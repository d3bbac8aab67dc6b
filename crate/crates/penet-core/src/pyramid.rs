//! Laplacian pyramid: four-component decomposition and exact reconstruction.
//!
//! The Gaussian chain halves height and width per level (rounding up). Each
//! difference component stores exactly the detail the downsample discards,
//! so reconstruction against the recorded level dims inverts decomposition
//! up to floating-point rounding, odd sizes included.

use crate::error::{Error, Result};
use crate::ops::{bilinear_resize, gaussian_downsample};
use crate::tensor::{add, sub, Scalar, Tensor};

/// Number of pyramid components: three difference levels plus the base.
pub const PYRAMID_LEVELS: usize = 4;

/// Minimum spatial extent for a full decomposition.
pub const MIN_IMAGE_SIDE: usize = 1 << (PYRAMID_LEVELS - 1);

/// Three difference components (finest first), the coarsest Gaussian level,
/// and the recorded dims of every Gaussian level.
#[derive(Clone, Debug)]
pub struct LaplacianPyramid<T> {
    pub diffs: Vec<Tensor<T>>,
    pub base: Tensor<T>,
    pub level_dims: Vec<(usize, usize)>,
}

impl<T: Scalar> LaplacianPyramid<T> {
    /// All four components finest-first: `L1, L2, L3, base`.
    pub fn components(&self) -> Vec<&Tensor<T>> {
        self.diffs.iter().chain(std::iter::once(&self.base)).collect()
    }
}

/// Splits a 3-channel image into three Laplacian differences plus the
/// coarsest Gaussian base. Requires both sides to be at least
/// [`MIN_IMAGE_SIDE`].
pub fn decompose<T: Scalar>(image: &Tensor<T>) -> Result<LaplacianPyramid<T>> {
    if image.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            got: image.channels(),
        });
    }
    if image.height() < MIN_IMAGE_SIDE || image.width() < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            height: image.height(),
            width: image.width(),
            min: MIN_IMAGE_SIDE,
        });
    }

    let mut gaussians = vec![image.clone()];
    for _ in 1..PYRAMID_LEVELS {
        let next = gaussian_downsample(gaussians.last().expect("non-empty"))?;
        gaussians.push(next);
    }

    let level_dims = gaussians.iter().map(|g| (g.height(), g.width())).collect();
    let mut diffs = Vec::with_capacity(PYRAMID_LEVELS - 1);
    for i in 0..PYRAMID_LEVELS - 1 {
        let fine = &gaussians[i];
        let up = bilinear_resize(&gaussians[i + 1], fine.height(), fine.width())?;
        diffs.push(sub(fine, &up)?);
    }

    Ok(LaplacianPyramid {
        diffs,
        base: gaussians.pop().expect("non-empty"),
        level_dims,
    })
}

/// Inverts [`decompose`]: upsamples from the base and adds each difference
/// back in, targeting the recorded level dims.
pub fn reconstruct<T: Scalar>(pyr: &LaplacianPyramid<T>) -> Result<Tensor<T>> {
    if pyr.diffs.len() != PYRAMID_LEVELS - 1 || pyr.level_dims.len() != PYRAMID_LEVELS {
        return Err(Error::PyramidLevelDims {
            level: pyr.diffs.len(),
            expected: (3, PYRAMID_LEVELS - 1, PYRAMID_LEVELS),
            got: (3, pyr.diffs.len(), pyr.level_dims.len()),
        });
    }
    let base_dims = pyr.level_dims[PYRAMID_LEVELS - 1];
    if (pyr.base.height(), pyr.base.width()) != base_dims {
        return Err(Error::PyramidLevelDims {
            level: PYRAMID_LEVELS - 1,
            expected: (pyr.base.channels(), base_dims.0, base_dims.1),
            got: pyr.base.dims(),
        });
    }
    for (i, diff) in pyr.diffs.iter().enumerate() {
        let (h, w) = pyr.level_dims[i];
        if (diff.height(), diff.width()) != (h, w) {
            return Err(Error::PyramidLevelDims {
                level: i,
                expected: (diff.channels(), h, w),
                got: diff.dims(),
            });
        }
    }

    let mut current = pyr.base.clone();
    for i in (0..PYRAMID_LEVELS - 1).rev() {
        let (h, w) = pyr.level_dims[i];
        let up = bilinear_resize(&current, h, w)?;
        current = add(&pyr.diffs[i], &up)?;
    }
    Ok(current)
}
