//! Central finite-difference gradient verification.
//!
//! The numeric side evaluates `f` alone and never touches the tape, so it
//! stays an independent oracle for the analytic backward passes.
//!
//! Leaky ReLU makes the network piecewise linear: a coordinate whose
//! difference stencil straddles a kink has no central-difference derivative
//! to compare against, so the subset checker detects such coordinates (the
//! forward and backward one-sided slopes disagree) and skips them. The
//! analytic gradient at those points is still well defined and is covered
//! by the dense elementary-operator sweeps, which sample away from kinks.

use crate::error::{Error, Result};

/// Default perturbation used throughout the gradient suite.
pub const GRADCHECK_EPS: f64 = 1e-5;

/// Pass threshold for every gradient check in the suite.
pub const GRADCHECK_TOL: f64 = 1e-4;

/// Outcome of a gradient check over one parameter vector.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest relative error over all checked coordinates.
    pub max_rel_err: f64,
    /// Coordinate index attaining `max_rel_err`.
    pub worst_index: usize,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_pair: (f64, f64),
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because the stencil straddled a kink.
    pub skipped: usize,
}

impl GradCheckReport {
    fn new() -> Self {
        Self {
            max_rel_err: 0.0,
            worst_index: 0,
            worst_pair: (0.0, 0.0),
            checked: 0,
            skipped: 0,
        }
    }

    fn record(&mut self, index: usize, analytic: f64, numeric: f64) {
        let rel = relative_error(analytic, numeric);
        self.checked += 1;
        if rel > self.max_rel_err {
            self.max_rel_err = rel;
            self.worst_index = index;
            self.worst_pair = (analytic, numeric);
        }
    }
}

/// Relative error with the guarded denominator `max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central difference `(f(t + eps e_i) - f(t - eps e_i)) / (2 eps)` for one
/// coordinate, restoring `theta` afterwards.
pub fn central_diff<F>(f: &mut F, theta: &mut [f64], index: usize, eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let saved = theta[index];
    theta[index] = saved + eps;
    let plus = f(theta)?;
    theta[index] = saved - eps;
    let minus = f(theta)?;
    theta[index] = saved;
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::NonFinite(format!("f(theta) near coordinate {index}")));
    }
    Ok((plus - minus) / (2.0 * eps))
}

/// Compares the supplied analytic gradient against central differences of
/// `f` over every coordinate of `theta` and reports the worst relative
/// error. `f` must be the scalar function whose gradient `analytic` claims
/// to be.
#[allow(clippy::needless_range_loop)]
pub fn grad_check<F>(
    mut f: F,
    theta: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    assert_eq!(
        theta.len(),
        analytic.len(),
        "analytic gradient length must match theta"
    );
    let mut work = theta.to_vec();
    let mut report = GradCheckReport::new();
    for i in 0..work.len() {
        let numeric = central_diff(&mut f, &mut work, i, eps)?;
        report.record(i, analytic[i], numeric);
    }
    Ok(report)
}

/// As [`grad_check`], but only sweeps the listed coordinate subset, and
/// skips coordinates whose stencil straddles a kink. Used where a full
/// sweep is too expensive; the analytic gradient still covers every
/// coordinate, only the finite-difference evaluations are sampled.
pub fn grad_check_subset<F>(
    mut f: F,
    theta: &[f64],
    analytic: &[f64],
    coords: &[usize],
    eps: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    assert_eq!(theta.len(), analytic.len());
    let mut work = theta.to_vec();
    let base = f(&work)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("f(theta) at the base point".into()));
    }
    let mut report = GradCheckReport::new();
    for &i in coords {
        let saved = work[i];
        work[i] = saved + eps;
        let plus = f(&work)?;
        work[i] = saved - eps;
        let minus = f(&work)?;
        work[i] = saved;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("f(theta) near coordinate {i}")));
        }

        // One-sided slopes: they disagree beyond noise exactly when a kink
        // sits inside the stencil, where no central difference exists.
        let fwd = (plus - base) / eps;
        let bwd = (base - minus) / eps;
        let scale = fwd.abs().max(bwd.abs()).max(analytic[i].abs());
        if (fwd - bwd).abs() > (2e-4 * scale).max(1e-7) {
            report.skipped += 1;
            continue;
        }

        let numeric = (plus - minus) / (2.0 * eps);
        report.record(i, analytic[i], numeric);
    }
    Ok(report)
}

/// Picks, for each `(start, len)` range, up to `per_range` coordinates with
/// the largest absolute analytic gradient, ignoring entries below `g_min`
/// (they are beneath finite-difference resolution). Deterministic.
pub fn top_coords_per_range(
    analytic: &[f64],
    ranges: &[(usize, usize)],
    per_range: usize,
    g_min: f64,
) -> Vec<usize> {
    let mut coords = Vec::new();
    for &(start, len) in ranges {
        let mut idx: Vec<usize> = (start..start + len)
            .filter(|&i| analytic[i].abs() >= g_min)
            .collect();
        idx.sort_by(|&a, &b| {
            analytic[b]
                .abs()
                .partial_cmp(&analytic[a].abs())
                .expect("finite gradients")
                .then(a.cmp(&b))
        });
        coords.extend(idx.into_iter().take(per_range));
    }
    coords
}

/// Random values bounded away from zero so no activation kink sits within
/// a finite-difference step of the sample.
pub fn random_probe_tensor(
    rng: &mut crate::rng::SplitMix64,
    dims: (usize, usize, usize),
) -> crate::tensor::Tensor<f64> {
    crate::tensor::Tensor::from_fn(dims.0, dims.1, dims.2, |_, _, _| {
        let mag = rng.next_in(0.05, 1.0);
        if rng.next_f64() < 0.5 {
            -mag
        } else {
            mag
        }
    })
}

/// Positive cotangent seed; keeps projected gradients away from zero.
pub fn random_seed_tensor(
    rng: &mut crate::rng::SplitMix64,
    dims: (usize, usize, usize),
) -> crate::tensor::Tensor<f64> {
    crate::tensor::Tensor::from_fn(dims.0, dims.1, dims.2, |_, _, _| rng.next_in(0.5, 1.5))
}

/// Sweeps every input coordinate of a single-input operator: the analytic
/// gradient comes from the tape, the numeric one from central differences
/// of the pure forward (an independent code path).
pub fn op_input_grad_check<B, P>(seed: u64, dims: (usize, usize, usize), build: B, pure: P) -> Result<GradCheckReport>
where
    B: Fn(&mut crate::tape::Tape<f64>, crate::tape::NodeId) -> Result<crate::tape::NodeId>,
    P: Fn(&crate::tensor::Tensor<f64>) -> Result<crate::tensor::Tensor<f64>>,
{
    use crate::tensor::Tensor;
    let mut rng = crate::rng::SplitMix64::new(seed);
    let x = random_probe_tensor(&mut rng, dims);

    let mut tape = crate::tape::Tape::new();
    let xid = tape.leaf(x.clone());
    let out = build(&mut tape, xid)?;
    let s = random_seed_tensor(&mut rng, tape.value(out).dims());
    let grads = tape.vjp(out, &s)?;
    let analytic = grads
        .node(xid)
        .expect("input reaches the output")
        .data()
        .to_vec();

    let (c, h, w) = dims;
    let eval = |theta: &[f64]| -> Result<f64> {
        let t = Tensor::new(c, h, w, theta.to_vec())?;
        let y = pure(&t)?;
        Ok(y.data().iter().zip(s.data()).map(|(a, b)| a * b).sum())
    };
    grad_check(eval, x.data(), &analytic, GRADCHECK_EPS)
}

/// Sweeps input, weights and bias of a stand-alone convolution.
pub fn conv_grad_check(
    seed: u64,
    out_c: usize,
    in_c: usize,
    k: usize,
    dims: (usize, usize, usize),
) -> Result<GradCheckReport> {
    use crate::ops::{conv2d, ConvParams};
    use crate::tensor::Tensor;

    let mut rng = crate::rng::SplitMix64::new(seed);
    let x = random_probe_tensor(&mut rng, dims);
    let nw = out_c * in_c * k * k;
    let weights: Vec<f64> = (0..nw).map(|_| rng.next_in(-0.5, 0.5)).collect();
    let bias: Vec<f64> = (0..out_c).map(|_| rng.next_in(-0.5, 0.5)).collect();
    let p = ConvParams::new(out_c, in_c, k, weights.clone(), bias.clone())?;

    let mut tape = crate::tape::Tape::new();
    let xid = tape.leaf(x.clone());
    let out = tape.conv2d(xid, &p, "conv")?;
    let s = random_seed_tensor(&mut rng, tape.value(out).dims());
    let grads = tape.vjp(out, &s)?;

    let ids: Vec<_> = tape.param_ids().collect();
    let mut analytic = grads.node(xid).expect("input used").data().to_vec();
    analytic.extend_from_slice(grads.param(ids[0]));
    analytic.extend_from_slice(grads.param(ids[1]));

    let n = x.len();
    let mut theta = x.data().to_vec();
    theta.extend_from_slice(&weights);
    theta.extend_from_slice(&bias);
    let eval = |t: &[f64]| -> Result<f64> {
        let tx = Tensor::new(dims.0, dims.1, dims.2, t[..n].to_vec())?;
        let tp = ConvParams::new(out_c, in_c, k, t[n..n + nw].to_vec(), t[n + nw..].to_vec())?;
        let y = conv2d(&tx, &tp)?;
        Ok(y.data().iter().zip(s.data()).map(|(a, b)| a * b).sum())
    };
    grad_check(eval, &theta, &analytic, GRADCHECK_EPS)
}
