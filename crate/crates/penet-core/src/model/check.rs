//! Finite-difference verification of the full network gradient.
//!
//! A full coordinate sweep over all 126k parameters would take hours, so
//! the sweep samples a deterministic subset: per named tensor, the
//! coordinates carrying the largest analytic gradients (tiny gradients sit
//! beneath finite-difference resolution), plus the strongest input pixels.
//! The analytic gradient itself is always the complete vector from one
//! tape replay; only the numeric evaluations are sampled.

use crate::error::Result;
use crate::gradcheck::{
    grad_check_subset, top_coords_per_range, GradCheckReport, GRADCHECK_EPS,
};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;
use crate::weights::{init_params, InitScheme};

use super::forward::{penet_forward_preclamp, penet_forward_taped};
use super::params::PENetParams;

/// Side length of the random input used by the full-model check.
pub const CHECK_IMAGE_SIDE: usize = 8;

/// Finite-difference coordinates sampled per named tensor.
const COORDS_PER_TENSOR: usize = 2;

/// Finite-difference coordinates sampled from the input image.
const INPUT_COORDS: usize = 8;

/// Gradients smaller than this are beneath what central differences of a
/// sum over hundreds of outputs can resolve at 64-bit precision.
const MIN_CHECKABLE_GRAD: f64 = 1e-3;

/// Checks the analytic gradient of `L = sum(penet_preclamp(input))` with
/// respect to both parameters and input against central differences at
/// 64-bit precision. Returns the worst relative error and the name of the
/// coordinate that attained it.
pub fn full_model_grad_check(seed: u64) -> Result<(GradCheckReport, String)> {
    let mut rng = SplitMix64::new(seed);
    let params = init_params::<f64>(seed, InitScheme::Random);
    let input = Tensor::from_fn(3, CHECK_IMAGE_SIDE, CHECK_IMAGE_SIDE, |_, _, _| {
        rng.next_in(0.05, 0.95)
    });

    // Analytic gradient via one taped forward and one reverse replay.
    let run = penet_forward_taped(&input, &params)?;
    let out_dims = run.tape.value(run.output).dims();
    let ones = Tensor::filled(out_dims.0, out_dims.1, out_dims.2, 1.0f64);
    let grads = run.tape.vjp(run.output, &ones)?;

    let mut analytic = Vec::with_capacity(params.num_scalars() + input.len());
    let mut ranges = Vec::new();
    for id in run.tape.param_ids() {
        ranges.push((analytic.len(), run.tape.param_len(id)));
        analytic.extend_from_slice(grads.param(id));
    }
    let num_params = analytic.len();
    let input_grad = grads.node(run.input).expect("input reaches the output");
    analytic.extend_from_slice(input_grad.data());

    // theta = [parameters; input pixels], matching the analytic layout.
    let mut theta = params.flatten_f64();
    debug_assert_eq!(theta.len(), num_params);
    theta.extend_from_slice(input.data());

    let mut coords =
        top_coords_per_range(&analytic, &ranges, COORDS_PER_TENSOR, MIN_CHECKABLE_GRAD);
    coords.extend(top_coords_per_range(
        &analytic,
        &[(num_params, input.len())],
        INPUT_COORDS,
        MIN_CHECKABLE_GRAD,
    ));

    let (in_c, in_h, in_w) = input.dims();
    let eval = |theta: &[f64]| -> Result<f64> {
        let mut p = PENetParams::<f64>::zeros()?;
        p.assign_flat_f64(&theta[..num_params]);
        let img = Tensor::new(in_c, in_h, in_w, theta[num_params..].to_vec())?;
        let out = penet_forward_preclamp(&img, &p)?;
        Ok(out.data().iter().sum())
    };

    let report = grad_check_subset(eval, &theta, &analytic, &coords, GRADCHECK_EPS)?;
    let worst = describe_coordinate(&params, num_params, report.worst_index);
    Ok((report, worst))
}

/// One model block under gradient verification: `build` records it on a
/// tape registering its parameters under canonical names, `pure` evaluates
/// the same block without a tape. Coordinates are sampled from every tensor
/// whose canonical name starts with `prefix`, plus the strongest input
/// pixels.
pub struct BlockCheck<'a> {
    pub seed: u64,
    pub input_dims: (usize, usize, usize),
    pub prefix: &'a str,
    pub coords_per_tensor: usize,
}

impl BlockCheck<'_> {
    pub fn run<B, P>(&self, build: B, pure: P) -> Result<GradCheckReport>
    where
        B: Fn(&mut crate::tape::Tape<f64>, crate::tape::NodeId, &PENetParams<f64>) -> Result<crate::tape::NodeId>,
        P: Fn(&Tensor<f64>, &PENetParams<f64>) -> Result<Tensor<f64>>,
    {
        use crate::gradcheck::{random_probe_tensor, random_seed_tensor};

        let mut rng = SplitMix64::new(self.seed);
        let params = init_params::<f64>(self.seed, InitScheme::Random);
        let x = random_probe_tensor(&mut rng, self.input_dims);

        let mut tape = crate::tape::Tape::new();
        let xid = tape.leaf(x.clone());
        let out = build(&mut tape, xid, &params)?;
        let s = random_seed_tensor(&mut rng, tape.value(out).dims());
        let grads = tape.vjp(out, &s)?;

        // Canonical layout: tensors the block does not touch keep zero
        // gradient and are never sampled.
        let mut offsets = std::collections::HashMap::new();
        let mut ranges = Vec::new();
        let mut cursor = 0usize;
        params.visit_convs(|name, conv| {
            for (suffix, len) in [("weight", conv.weights().len()), ("bias", conv.bias().len())] {
                let full = format!("{name}.{suffix}");
                offsets.insert(full.clone(), (cursor, len));
                if full.starts_with(self.prefix) {
                    ranges.push((cursor, len));
                }
                cursor += len;
            }
        });
        let num_params = cursor;

        let mut analytic = vec![0.0f64; num_params + x.len()];
        for id in tape.param_ids() {
            let (start, len) = offsets[tape.param_name(id)];
            analytic[start..start + len].copy_from_slice(grads.param(id));
        }
        analytic[num_params..].copy_from_slice(grads.node(xid).expect("input used").data());

        let mut theta = params.flatten_f64();
        theta.extend_from_slice(x.data());

        let mut coords = top_coords_per_range(
            &analytic,
            &ranges,
            self.coords_per_tensor,
            MIN_CHECKABLE_GRAD,
        );
        coords.extend(top_coords_per_range(
            &analytic,
            &[(num_params, x.len())],
            INPUT_COORDS,
            MIN_CHECKABLE_GRAD,
        ));

        let dims = self.input_dims;
        let eval = |t: &[f64]| -> Result<f64> {
            let mut p = PENetParams::<f64>::zeros()?;
            p.assign_flat_f64(&t[..num_params]);
            let tx = Tensor::new(dims.0, dims.1, dims.2, t[num_params..].to_vec())?;
            let y = pure(&tx, &p)?;
            Ok(y.data().iter().zip(s.data()).map(|(a, b)| a * b).sum())
        };
        grad_check_subset(eval, &theta, &analytic, &coords, GRADCHECK_EPS)
    }
}

/// Maps a flat coordinate back to `tensor_name[offset]` or `input[offset]`.
fn describe_coordinate(params: &PENetParams<f64>, num_params: usize, index: usize) -> String {
    if index >= num_params {
        return format!("input[{}]", index - num_params);
    }
    let mut cursor = 0;
    let mut found = String::from("?");
    params.visit_convs(|name, conv| {
        let wlen = conv.weights().len();
        if index >= cursor && index < cursor + wlen {
            found = format!("{name}.weight[{}]", index - cursor);
        }
        cursor += wlen;
        let blen = conv.bias().len();
        if index >= cursor && index < cursor + blen {
            found = format!("{name}.bias[{}]", index - cursor);
        }
        cursor += blen;
    });
    found
}
