//! Desk-scale training demo: SGD on a synthetic brightening task.
//!
//! Each step draws a fresh random 3x16x16 target in `[0, 1]`, darkens it by
//! 0.5, and minimizes the mean squared error between the pre-clamp network
//! output on the dark image and the target. The error is averaged per
//! pixel (the squared RGB distance, summed over channels). The pair stream
//! is a seeded SplitMix64, so runs are bit-reproducible.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{self, Scalar, Tensor};

use super::forward::penet_forward_taped;
use super::params::PENetParams;

/// Side length of the synthetic training images.
pub const TRAIN_IMAGE_SIDE: usize = 16;

/// Brightness factor applied to targets to produce the dark inputs.
pub const DARKEN_FACTOR: f64 = 0.5;

/// Runs `steps` SGD updates and returns the loss history: one entry per
/// step plus a final evaluation after the last update (`steps + 1` entries
/// in total, so `steps = 0` yields exactly the initial loss).
pub fn train_demo<T: Scalar>(
    params: &mut PENetParams<T>,
    steps: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    let mut losses = Vec::with_capacity(steps + 1);

    for step in 0..=steps {
        let target = Tensor::from_fn(3, TRAIN_IMAGE_SIDE, TRAIN_IMAGE_SIDE, |_, _, _| {
            T::from_f64(rng.next_f64())
        });
        let dark = tensor::scale(&target, T::from_f64(DARKEN_FACTOR));

        let run = penet_forward_taped(&dark, params)?;
        let output = run.tape.value(run.output);

        let pixels = (TRAIN_IMAGE_SIDE * TRAIN_IMAGE_SIDE) as f64;
        let mut loss = 0.0f64;
        for (o, t) in output.data().iter().zip(target.data()) {
            let d = o.as_f64() - t.as_f64();
            loss += d * d;
        }
        loss /= pixels;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at step {step}")));
        }
        losses.push(loss);
        if step == steps {
            break;
        }

        // d(mse)/d(output) = 2 (output - target) / pixel_count
        let seed_grad = Tensor::from_fn(3, TRAIN_IMAGE_SIDE, TRAIN_IMAGE_SIDE, |c, y, x| {
            T::from_f64(
                2.0 * (output.get(c, y, x).as_f64() - target.get(c, y, x).as_f64()) / pixels,
            )
        });
        let grads = run.tape.vjp(run.output, &seed_grad)?;

        // Tape registration order matches the canonical parameter walk.
        let mut ids = run.tape.param_ids();
        let lr_t = T::from_f64(lr);
        params.visit_convs_mut(|name, conv| {
            let wid = ids.next().expect("weight grad present");
            let bid = ids.next().expect("bias grad present");
            debug_assert_eq!(run.tape.param_name(wid), format!("{name}.weight"));
            for (w, g) in conv.weights_mut().iter_mut().zip(grads.param(wid)) {
                *w -= lr_t * *g;
            }
            for (b, g) in conv.bias_mut().iter_mut().zip(grads.param(bid)) {
                *b -= lr_t * *g;
            }
        });
    }

    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{init_params, InitScheme};

    #[test]
    fn zero_steps_reports_only_the_initial_loss() {
        let mut params = init_params::<f32>(1, InitScheme::Random);
        let losses = train_demo(&mut params, 0, 0.01, 42).unwrap();
        assert_eq!(losses.len(), 1);
        assert!(losses[0].is_finite());
    }

    #[test]
    fn identical_seeds_give_identical_histories() {
        let mut a = init_params::<f32>(2, InitScheme::Random);
        let mut b = init_params::<f32>(2, InitScheme::Random);
        let la = train_demo(&mut a, 5, 0.01, 9).unwrap();
        let lb = train_demo(&mut b, 5, 0.01, 9).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_loss_aborts_with_a_diagnostic() {
        let mut params = init_params::<f32>(3, InitScheme::Random);
        params.levels[0].cb.f1.weights_mut()[0] = f32::NAN;
        match train_demo(&mut params, 5, 0.01, 1).unwrap_err() {
            crate::error::Error::NonFinite(what) => assert!(what.contains("step 0"), "{what}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn a_few_steps_reduce_the_loss() {
        let mut params = init_params::<f32>(42, InitScheme::Random);
        let losses = train_demo(&mut params, 25, 0.01, 42).unwrap();
        assert_eq!(losses.len(), 26);
        assert!(losses.iter().all(|l| l.is_finite()));
        assert!(
            losses.last().unwrap() < &losses[0],
            "loss should drop: {:?} -> {:?}",
            losses[0],
            losses.last().unwrap()
        );
    }
}
