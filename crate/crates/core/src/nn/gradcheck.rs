//! Central-finite-difference gradient oracle.
//!
//! Test support: evaluates the loss as a black box (forward passes only), so
//! it stays independent of the backprop path it is used to check. Lives in
//! the library so unit tests, property tests and the acceptance suite share
//! one implementation.

use super::{MlpGrads, MlpParams};

/// Central difference of `loss_of` w.r.t. every parameter entry.
pub fn finite_diff_grads<F>(p: &MlpParams, mut loss_of: F, h: f64) -> MlpGrads
where
    F: FnMut(&MlpParams) -> f64,
{
    let mut fd = MlpGrads::zeros_like(p);
    for l in 0..p.layers.len() {
        for idx in 0..p.layers[l].weights.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.layers[l].weights.as_slice_mut().unwrap()[idx] += h;
            minus.layers[l].weights.as_slice_mut().unwrap()[idx] -= h;
            fd.layers[l].0.as_slice_mut().unwrap()[idx] =
                (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
        }
        for idx in 0..p.layers[l].bias.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.layers[l].bias[idx] += h;
            minus.layers[l].bias[idx] -= h;
            fd.layers[l].1[idx] = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
        }
    }
    fd
}

/// Worst relative disagreement between two gradient blocks. Entries are
/// compared relative to the finite-difference magnitude with a 1e-3 floor so
/// near-zero components do not blow up the ratio.
pub fn max_rel_error(analytic: &MlpGrads, fd: &MlpGrads) -> f64 {
    let mut worst: f64 = 0.0;
    for ((aw, ab), (fw, fb)) in analytic.layers.iter().zip(&fd.layers) {
        for (&a, &f) in aw.iter().zip(fw.iter()).chain(ab.iter().zip(fb.iter())) {
            let err = (a - f).abs() / f.abs().max(1e-3);
            worst = worst.max(err);
        }
    }
    worst
}
