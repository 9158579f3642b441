//! Loss functions and their parameter gradients.
//!
//! Each entry point runs one cached forward pass and one backward pass. The
//! generic [`with_output_grad`] hook is how callers with bespoke objectives
//! (InfoNCE, the IRM penalty) plug into the same backprop machinery.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

use super::{MlpGrads, MlpParams};

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^z) - y z`.
#[inline]
fn bce_term(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy on logits; the network must emit one column.
pub fn bce_with_logits(
    p: &MlpParams,
    x: ArrayView2<f64>,
    targets: &Array1<f64>,
) -> Result<(f64, MlpGrads)> {
    if p.output_dim() != 1 {
        return Err(Error::Shape(format!(
            "bce needs a 1-column network, got {}",
            p.output_dim()
        )));
    }
    if targets.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            x.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptySelection("bce on an empty batch".into()));
    }
    let cache = p.forward_cached(x)?;
    let logits = cache.output();
    let n = x.nrows() as f64;
    let mut loss = 0.0;
    let mut output_grad = Array2::zeros(logits.dim());
    for (i, (&z, &y)) in logits.iter().zip(targets.iter()).enumerate() {
        loss += bce_term(z, y);
        output_grad[[i, 0]] = (sigmoid(z) - y) / n;
    }
    loss /= n;
    if !loss.is_finite() {
        return Err(Error::Numerical("bce loss is non-finite".into()));
    }
    Ok((loss, p.backward(&cache, &output_grad)))
}

/// Mean squared error over all output entries.
pub fn mse(p: &MlpParams, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, MlpGrads)> {
    if x.nrows() == 0 {
        return Err(Error::EmptySelection("mse on an empty batch".into()));
    }
    let cache = p.forward_cached(x)?;
    let out = cache.output();
    if out.dim() != targets.dim() {
        return Err(Error::Shape(format!(
            "mse target shape {:?} vs output {:?}",
            targets.dim(),
            out.dim()
        )));
    }
    let m = (out.len()) as f64;
    let resid = out - &targets;
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / m;
    if !loss.is_finite() {
        return Err(Error::Numerical("mse loss is non-finite".into()));
    }
    let output_grad = resid.mapv(|r| 2.0 * r / m);
    Ok((loss, p.backward(&cache, &output_grad)))
}

/// Backprop hook for custom objectives: `f` receives the network output and
/// returns the loss plus `d loss / d output`.
pub fn with_output_grad<F>(p: &MlpParams, x: ArrayView2<f64>, f: F) -> Result<(f64, MlpGrads)>
where
    F: FnOnce(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
{
    let cache = p.forward_cached(x)?;
    let (loss, output_grad) = f(cache.output())?;
    if !loss.is_finite() {
        return Err(Error::Numerical("hook loss is non-finite".into()));
    }
    if output_grad.dim() != cache.output().dim() {
        return Err(Error::Shape(format!(
            "hook output grad shape {:?} vs output {:?}",
            output_grad.dim(),
            cache.output().dim()
        )));
    }
    Ok((loss, p.backward(&cache, &output_grad)))
}

/// Mean BCE of `scale * logits` against targets: the scalar dummy-classifier
/// risk used by the IRM penalty and its finite-difference oracle.
pub fn scaled_logit_risk(logits: &Array2<f64>, targets: &Array1<f64>, scale: f64) -> f64 {
    let n = logits.nrows() as f64;
    logits
        .iter()
        .zip(targets.iter())
        .map(|(&z, &y)| bce_term(scale * z, y))
        .sum::<f64>()
        / n
}

/// Per-row mean so batches of different sizes compare.
pub fn mean_rowwise(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("non-empty batch")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{finite_diff_grads, max_rel_error};
    use crate::nn::{Activation, DenseLayer};
    use crate::rng::RngHandle;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};

    fn random_net(seed: u64) -> MlpParams {
        MlpParams::random(
            &[4, 6, 1],
            &[Activation::ReLU, Activation::Identity],
            &RngHandle::new(seed),
        )
    }

    #[test]
    fn mse_zero_at_target() {
        let p = MlpParams {
            layers: vec![DenseLayer {
                weights: Array2::eye(2),
                bias: Array1::zeros(2),
                activation: Activation::Identity,
            }],
        };
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let (loss, grads) = mse(&p, x.view(), x.view()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.layers[0].0.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn bce_symmetric_logit() {
        // A zero network emits logit 0; BCE against target 1 is ln 2.
        let mut p = random_net(0);
        for layer in &mut p.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let x = array![[0.3, -0.1, 1.0, 0.4]];
        let (loss, _) = bce_with_logits(&p, x.view(), &array![1.0]).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut seed_rng = RngHandle::new(77).rng();
        for trial in 0..20 {
            let p = random_net(1000 + trial);
            let mut r = RngHandle::new(trial).split("data").rng();
            let x = Array2::from_shape_fn((5, 4), |_| r.random::<f64>() * 2.0 - 1.0);
            let y: Array1<f64> =
                (0..5).map(|_| f64::from(seed_rng.random::<bool>())).collect();
            let (_, analytic) = bce_with_logits(&p, x.view(), &y).unwrap();
            let fd = finite_diff_grads(
                &p,
                |q| {
                    let out = q.forward(x.view()).unwrap();
                    let n = out.nrows() as f64;
                    out.iter().zip(y.iter()).map(|(&z, &t)| bce_term(z, t)).sum::<f64>() / n
                },
                1e-5,
            );
            let err = max_rel_error(&analytic, &fd);
            assert!(err < 1e-4, "trial {trial}: max rel err {err}");
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        use rand::Rng;
        for trial in 0..20 {
            let p = MlpParams::random(
                &[3, 5, 2],
                &[Activation::ReLU, Activation::Identity],
                &RngHandle::new(2000 + trial),
            );
            let mut r = RngHandle::new(trial).split("mse-data").rng();
            let x = Array2::from_shape_fn((4, 3), |_| r.random::<f64>() * 2.0 - 1.0);
            let t = Array2::from_shape_fn((4, 2), |_| r.random::<f64>() * 2.0 - 1.0);
            let (_, analytic) = mse(&p, x.view(), t.view()).unwrap();
            let fd = finite_diff_grads(
                &p,
                |q| {
                    let out = q.forward(x.view()).unwrap();
                    let resid = &out - &t;
                    resid.iter().map(|v| v * v).sum::<f64>() / out.len() as f64
                },
                1e-5,
            );
            let err = max_rel_error(&analytic, &fd);
            assert!(err < 1e-4, "trial {trial}: max rel err {err}");
        }
    }
}
