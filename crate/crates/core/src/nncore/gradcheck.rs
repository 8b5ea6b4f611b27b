//! Analytic gradients against central finite differences.

use super::mlp::{Gradients, Mlp, Tape};
use crate::error::Result;

/// Worst disagreement between analytic and numerical gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// `|analytic - numeric| / max(|analytic|, |numeric|, floor)`, maximized
    /// over every weight and bias.
    pub max_relative_error: f64,
    pub parameters: usize,
}

fn param_mut(model: &mut Mlp<f64>, layer: usize, bias: bool, k: usize) -> &mut f64 {
    let l = &mut model.layers_mut()[layer];
    if bias {
        &mut l.biases[k]
    } else {
        &mut l.weights[k]
    }
}

/// Compares [`Mlp::backward_batch`] with `(J(p + h) - J(p - h)) / 2h` of the
/// regularized objective for every parameter of `model`.
pub fn gradient_check(
    model: &Mlp<f64>,
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
    l2: f64,
    step: f64,
    floor: f64,
) -> Result<GradientCheck> {
    let mut tape = Tape::new();
    let mut grads = Gradients::zeros_like(model);
    model.forward_traced(inputs, batch, &mut tape)?;
    model.backward_batch(inputs, targets, l2, &mut tape, &mut grads)?;

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut parameters = 0;
    for (li, (gw, gb)) in grads.layers.iter().enumerate() {
        for (is_bias, analytic) in [(false, gw), (true, gb)] {
            for (k, &a) in analytic.iter().enumerate() {
                let mut shifted = |delta: f64| -> Result<f64> {
                    let saved = *param_mut(&mut probe, li, is_bias, k);
                    *param_mut(&mut probe, li, is_bias, k) = saved + delta;
                    let j = probe.objective(inputs, targets, batch, l2);
                    *param_mut(&mut probe, li, is_bias, k) = saved;
                    j
                };
                let numeric = (shifted(step)? - shifted(-step)?) / (2.0 * step);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
                worst = worst.max(err);
                parameters += 1;
            }
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst,
        parameters,
    })
}
