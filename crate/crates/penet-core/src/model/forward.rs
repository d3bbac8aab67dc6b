//! Enhancement network forward passes.
//!
//! Each building block exists twice: a `*_on` variant that records onto a
//! [`Tape`] (for training and gradient verification) and a pure variant
//! that allocates nothing beyond its transient tensors (for inference on
//! full-size images). Both run the same kernels in the same order, so their
//! outputs are bit-identical; a test pins that equivalence.

use crate::error::{Error, Result};
use crate::ops;
use crate::pyramid::{self, PYRAMID_LEVELS};
use crate::tape::{NodeId, Tape};
use crate::tensor::{self, Scalar, Tensor};

use super::params::{
    ContextBranchParams, EdgeBranchParams, LefParams, LevelParams, PENetParams,
    ResidualBlockParams, LEF_GROUPS, LEF_POOL_SIZES,
};

/// Completed taped forward pass of the full network.
pub struct TapedForward<T> {
    pub tape: Tape<T>,
    pub input: NodeId,
    /// Pre-clamp reconstruction.
    pub output: NodeId,
}

// ---------------------------------------------------------------------------
// Taped builders
// ---------------------------------------------------------------------------

pub fn residual_block_on<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    p: &ResidualBlockParams<T>,
    scope: &str,
) -> Result<NodeId> {
    let a = tape.conv2d(x, &p.conv_a, &format!("{scope}.conv_a"))?;
    let a = tape.leaky_relu(a);
    let b = tape.conv2d(a, &p.conv_b, &format!("{scope}.conv_b"))?;
    let shortcut = match &p.proj {
        Some(proj) => tape.conv2d(x, proj, &format!("{scope}.proj"))?,
        None => x,
    };
    let sum = tape.add(b, shortcut)?;
    Ok(tape.leaky_relu(sum))
}

pub fn context_branch_on<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    p: &ContextBranchParams<T>,
    scope: &str,
) -> Result<NodeId> {
    let t = residual_block_on(tape, x, &p.rb1, &format!("{scope}.rb1"))?;
    let attn = tape.conv2d(t, &p.f2, &format!("{scope}.f2"))?;
    let attn = tape.softmax_spatial(attn);
    let modulated = tape.mul(attn, t)?;
    let corr = tape.conv2d(modulated, &p.f1, &format!("{scope}.f1"))?;
    let corr = tape.leaky_relu(corr);
    let u = tape.add(t, corr)?;
    residual_block_on(tape, u, &p.rb2, &format!("{scope}.rb2"))
}

pub fn edge_branch_on<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    p: &EdgeBranchParams<T>,
    scope: &str,
) -> Result<NodeId> {
    let sh = tape.sobel_h(x);
    let sw = tape.sobel_w(x);
    let grad_sum = tape.add(sh, sw)?;
    let refined = tape.conv2d(grad_sum, &p.f3, &format!("{scope}.f3"))?;
    tape.add(refined, x)
}

pub fn lef_on<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    p: &LefParams<T>,
    scope: &str,
) -> Result<NodeId> {
    let (h, w) = (tape.value(x).height(), tape.value(x).width());
    let features = tape.conv2d(x, &p.conv_in, &format!("{scope}.conv_in"))?;
    let groups = tape.channel_split(features, &LEF_GROUPS)?;
    let mut filtered = Vec::with_capacity(groups.len());
    for (&group, &size) in groups.iter().zip(LEF_POOL_SIZES.iter()) {
        let pooled = tape.adaptive_avg_pool(group, size)?;
        filtered.push(tape.bilinear_resize(pooled, h, w)?);
    }
    let merged = tape.channel_concat(&filtered)?;
    tape.conv2d(merged, &p.conv_out, &format!("{scope}.conv_out"))
}

/// One pyramid component through the three parallel branches, fused as
/// residual corrections on the component itself.
pub fn enhance_component_on<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    p: &LevelParams<T>,
    scope: &str,
) -> Result<NodeId> {
    let cb = context_branch_on(tape, x, &p.cb, &format!("{scope}.cb"))?;
    let eb = edge_branch_on(tape, x, &p.eb, &format!("{scope}.eb"))?;
    let lef = lef_on(tape, x, &p.lef, &format!("{scope}.lef"))?;
    let acc = tape.add(x, cb)?;
    let acc = tape.add(acc, eb)?;
    tape.add(acc, lef)
}

/// Full network on the tape: decompose, enhance each component with its own
/// level parameters, reconstruct. The recorded output is pre-clamp.
pub fn penet_forward_taped<T: Scalar>(
    image: &Tensor<T>,
    params: &PENetParams<T>,
) -> Result<TapedForward<T>> {
    validate_input(image)?;
    let mut tape = Tape::new();
    let input = tape.leaf(image.clone());

    let mut gaussians = vec![input];
    for _ in 1..PYRAMID_LEVELS {
        let next = tape.gaussian_downsample(*gaussians.last().expect("non-empty"))?;
        gaussians.push(next);
    }
    let dims: Vec<(usize, usize)> = gaussians
        .iter()
        .map(|&g| (tape.value(g).height(), tape.value(g).width()))
        .collect();

    let mut components = Vec::with_capacity(PYRAMID_LEVELS);
    for i in 0..PYRAMID_LEVELS - 1 {
        let up = tape.bilinear_resize(gaussians[i + 1], dims[i].0, dims[i].1)?;
        components.push(tape.sub(gaussians[i], up)?);
    }
    components.push(gaussians[PYRAMID_LEVELS - 1]);

    let mut enhanced = Vec::with_capacity(PYRAMID_LEVELS);
    for (i, (&component, level)) in components.iter().zip(&params.levels).enumerate() {
        enhanced.push(enhance_component_on(
            &mut tape,
            component,
            level,
            &format!("level{i}"),
        )?);
    }

    let mut current = enhanced[PYRAMID_LEVELS - 1];
    for i in (0..PYRAMID_LEVELS - 1).rev() {
        let up = tape.bilinear_resize(current, dims[i].0, dims[i].1)?;
        current = tape.add(enhanced[i], up)?;
    }

    Ok(TapedForward {
        tape,
        input,
        output: current,
    })
}

// ---------------------------------------------------------------------------
// Pure forwards
// ---------------------------------------------------------------------------

pub fn residual_block<T: Scalar>(x: &Tensor<T>, p: &ResidualBlockParams<T>) -> Result<Tensor<T>> {
    let a = ops::leaky_relu(&ops::conv2d(x, &p.conv_a)?);
    let b = ops::conv2d(&a, &p.conv_b)?;
    let shortcut = match &p.proj {
        Some(proj) => ops::conv2d(x, proj)?,
        None => x.clone(),
    };
    Ok(ops::leaky_relu(&tensor::add(&b, &shortcut)?))
}

pub fn context_branch<T: Scalar>(x: &Tensor<T>, p: &ContextBranchParams<T>) -> Result<Tensor<T>> {
    let t = residual_block(x, &p.rb1)?;
    let attn = ops::softmax_spatial(&ops::conv2d(&t, &p.f2)?);
    let modulated = tensor::mul(&attn, &t)?;
    let corr = ops::leaky_relu(&ops::conv2d(&modulated, &p.f1)?);
    let u = tensor::add(&t, &corr)?;
    residual_block(&u, &p.rb2)
}

pub fn edge_branch<T: Scalar>(x: &Tensor<T>, p: &EdgeBranchParams<T>) -> Result<Tensor<T>> {
    let (sh, sw) = ops::depthwise_sobel(x);
    let refined = ops::conv2d(&tensor::add(&sh, &sw)?, &p.f3)?;
    tensor::add(&refined, x)
}

pub fn lef<T: Scalar>(x: &Tensor<T>, p: &LefParams<T>) -> Result<Tensor<T>> {
    let (h, w) = (x.height(), x.width());
    let features = ops::conv2d(x, &p.conv_in)?;
    let groups = tensor::channel_split(&features, &LEF_GROUPS)?;
    let mut filtered = Vec::with_capacity(groups.len());
    for (group, &size) in groups.iter().zip(LEF_POOL_SIZES.iter()) {
        let pooled = ops::adaptive_avg_pool(group, size)?;
        filtered.push(ops::bilinear_resize(&pooled, h, w)?);
    }
    let merged = tensor::channel_concat(&filtered)?;
    ops::conv2d(&merged, &p.conv_out)
}

pub fn enhance_component<T: Scalar>(x: &Tensor<T>, p: &LevelParams<T>) -> Result<Tensor<T>> {
    let cb = context_branch(x, &p.cb)?;
    let eb = edge_branch(x, &p.eb)?;
    let lef_out = lef(x, &p.lef)?;
    let acc = tensor::add(x, &cb)?;
    let acc = tensor::add(&acc, &eb)?;
    tensor::add(&acc, &lef_out)
}

fn validate_input<T: Scalar>(image: &Tensor<T>) -> Result<()> {
    if image.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            got: image.channels(),
        });
    }
    if image.height() < pyramid::MIN_IMAGE_SIDE || image.width() < pyramid::MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            height: image.height(),
            width: image.width(),
            min: pyramid::MIN_IMAGE_SIDE,
        });
    }
    Ok(())
}

/// Full network without the final clamp.
pub fn penet_forward_preclamp<T: Scalar>(
    image: &Tensor<T>,
    params: &PENetParams<T>,
) -> Result<Tensor<T>> {
    validate_input(image)?;
    let pyr = pyramid::decompose(image)?;
    let mut enhanced_pyr = pyramid::LaplacianPyramid {
        diffs: Vec::with_capacity(PYRAMID_LEVELS - 1),
        base: Tensor::zeros(0, 0, 0),
        level_dims: pyr.level_dims.clone(),
    };
    for (i, diff) in pyr.diffs.iter().enumerate() {
        enhanced_pyr
            .diffs
            .push(enhance_component(diff, &params.levels[i])?);
    }
    enhanced_pyr.base = enhance_component(&pyr.base, &params.levels[PYRAMID_LEVELS - 1])?;
    pyramid::reconstruct(&enhanced_pyr)
}

/// Enhances an image: decompose, per-component enhancement, reconstruct,
/// clamp to `[0, 1]`.
pub fn penet_forward<T: Scalar>(image: &Tensor<T>, params: &PENetParams<T>) -> Result<Tensor<T>> {
    let raw = penet_forward_preclamp(image, params)?;
    Ok(raw.map(|v| v.max(T::zero()).min(T::one())))
}
