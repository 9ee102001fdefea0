// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use rand::Rng;

use super::network::Network;
use super::train::loss_and_gradient;
use crate::error::{CpdError, Result};
use crate::rng::rng_from_seed;

/// Denominator floor in the relative error.
pub const REL_FLOOR: f64 = 1e-4;

/// Smallest nudge applied to inputs sitting near a ReLU kink.
pub const KINK_NUDGE: f64 = 1e-6;

const MAX_NUDGES: usize = 40;

/// Smallest `|pre-activation|` over all hidden units and columns.
fn closest_kink(net: &Network, inputs: &DMatrix<f64>) -> f64 {
    let layers = net.layers();
    let mut a = inputs.clone();
    let mut closest = f64::INFINITY;
    for layer in &layers[..layers.len() - 1] {
        let mut z = &layer.weights * &a;
        for mut col in z.column_iter_mut() {
            col -= &layer.bias;
        }
        closest = z.iter().fold(closest, |c, v| c.min(v.abs()));
        z.apply(|v| *v = v.max(0.0));
        a = z;
    }
    closest
}

/// Moves inputs off ReLU kinks: while some hidden pre-activation lies within
/// `margin` of zero, add a seeded perturbation starting at [`KINK_NUDGE`] and
/// doubling.
fn nudge_off_kinks(net: &Network, inputs: &DMatrix<f64>, margin: f64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(0x6b69_6e6b);
    let mut x = inputs.clone();
    let mut size = KINK_NUDGE;
    for _ in 0..MAX_NUDGES {
        if closest_kink(net, &x) > margin {
            break;
        }
        x = inputs.map(|v| v + size * rng.random_range(-1.0..=1.0));
        size *= 2.0;
    }
    x
}

/// Max over every parameter of `|g − ĝ| / max(|g|, |ĝ|, floor)`, with `ĝ` the
/// central difference at step `h`.
pub fn grad_check(net: &Network, inputs: &DMatrix<f64>, labels: &[usize], h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(CpdError::param(format!("finite-difference step must lie in (0, 1e-3], got {h}")));
    }
    let max_in = inputs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let x = nudge_off_kinks(net, inputs, 100.0 * h * max_in);
    let (_, grad) = loss_and_gradient(net, &x, labels)?;

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (l, g_layer) in grad.layers.iter().enumerate() {
        let analytic: Vec<f64> = g_layer.params().copied().collect();
        for (k, &a) in analytic.iter().enumerate() {
            let original = *probe.layers_mut()[l].params_mut().nth(k).expect("parameter index");
            let mut eval = |value: f64| -> Result<f64> {
                *probe.layers_mut()[l].params_mut().nth(k).expect("parameter index") = value;
                Ok(loss_and_gradient(&probe, &x, labels)?.0)
            };
            let up = eval(original + h)?;
            let down = eval(original - h)?;
            eval(original)?;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
