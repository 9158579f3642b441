//! Bias-corrected Adam.

use ndarray::{Array1, Array2};

use super::{MlpGrads, MlpParams};

/// Optimizer moments plus hyperparameters. Moments start at zero and the
/// step counter drives bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    first_moment: Vec<(Array2<f64>, Array1<f64>)>,
    second_moment: Vec<(Array2<f64>, Array1<f64>)>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(p: &MlpParams, lr: f64) -> Self {
        let zeros = || {
            p.layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
                .collect::<Vec<_>>()
        };
        AdamState {
            first_moment: zeros(),
            second_moment: zeros(),
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update. `weight_decay` adds `wd * w` to the weight gradients
    /// (classic L2, not decoupled); biases are never decayed.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpGrads, weight_decay: f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (l, layer) in params.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[l];
            let (mw, mb) = &mut self.first_moment[l];
            let (vw, vb) = &mut self.second_moment[l];
            for (((w, &g0), m), v) in layer
                .weights
                .iter_mut()
                .zip(gw.iter())
                .zip(mw.iter_mut())
                .zip(vw.iter_mut())
            {
                let g = g0 + weight_decay * *w;
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            for (((b, &g), m), v) in layer
                .bias
                .iter_mut()
                .zip(gb.iter())
                .zip(mb.iter_mut())
                .zip(vb.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *b -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn scalar_net(w: f64) -> MlpParams {
        MlpParams {
            layers: vec![DenseLayer {
                weights: array![[w]],
                bias: array![0.0],
                activation: Activation::Identity,
            }],
        }
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = scalar_net(0.7);
        let g = MlpGrads::zeros_like(&p);
        let mut st = AdamState::new(&p, 0.1);
        st.step(&mut p, &g, 0.0);
        assert_eq!(p.layers[0].weights[[0, 0]], 0.7);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = v_hat = 1 after one unit-gradient step, so the update is
        // -lr / (1 + eps).
        let mut p = scalar_net(0.0);
        let g = MlpGrads {
            layers: vec![(array![[1.0]], array![0.0])],
        };
        let mut st = AdamState::new(&p, 0.1);
        st.step(&mut p, &g, 0.0);
        assert_abs_diff_eq!(p.layers[0].weights[[0, 0]], -0.1, epsilon = 1e-8);
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let mut p = scalar_net(0.3);
            let mut st = AdamState::new(&p, 0.05);
            for k in 0..25 {
                let g = MlpGrads {
                    layers: vec![(array![[(k as f64 * 0.37).sin()]], array![0.1])],
                };
                st.step(&mut p, &g, 1e-4);
            }
            (p.layers[0].weights[[0, 0]], p.layers[0].bias[0])
        };
        assert_eq!(run(), run());
    }
}
