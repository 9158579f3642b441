//! MLP autoencoder trained with Adam on reconstruction MSE. The encoder half
//! defines the embedding used for cross-env distance tables.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::rng::RngHandle;

use super::{
    mse, shuffled_batches, take_rows, Activation, AdamState, MlpParams,
};

/// Shared training hyperparameters for every gradient-trained model in the
/// crate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, batch_size: 64, lr: 1e-3, weight_decay: 0.0, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config(format!("epochs must be >= 1, got {}", self.epochs)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be >= 2, got {}",
                self.batch_size
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

pub struct AeOutcome {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    /// Mean reconstruction MSE per epoch, in order.
    pub epoch_losses: Vec<f64>,
}

/// Default architecture: one hidden ReLU layer of 64 on each side, identity
/// latent and output so embeddings and reconstructions are unclipped.
pub fn train_autoencoder(x: ArrayView2<f64>, cfg: &TrainConfig, d_latent: usize) -> Result<AeOutcome> {
    train_autoencoder_arch(x, cfg, d_latent, &[64], Activation::ReLU)
}

/// Autoencoder with configurable mirrored hidden stack. `hidden` lists the
/// encoder's hidden widths; the decoder mirrors them. Hidden layers use
/// `hidden_activation`; the latent and reconstruction layers are identity.
pub fn train_autoencoder_arch(
    x: ArrayView2<f64>,
    cfg: &TrainConfig,
    d_latent: usize,
    hidden: &[usize],
    hidden_activation: Activation,
) -> Result<AeOutcome> {
    cfg.validate()?;
    if d_latent == 0 {
        return Err(Error::Config("d_latent must be positive".into()));
    }
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptySelection("autoencoder needs training rows".into()));
    }
    let d_x = x.ncols();

    let mut dims = vec![d_x];
    let mut acts = Vec::new();
    for &h in hidden {
        dims.push(h);
        acts.push(hidden_activation);
    }
    dims.push(d_latent);
    acts.push(Activation::Identity);
    let n_encoder_layers = acts.len();
    for &h in hidden.iter().rev() {
        dims.push(h);
        acts.push(hidden_activation);
    }
    dims.push(d_x);
    acts.push(Activation::Identity);

    let root = RngHandle::new(cfg.seed).split("autoencoder");
    let mut params = MlpParams::random(&dims, &acts, &root.split("init"));
    let mut opt = AdamState::new(&params, cfg.lr);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batches = shuffled_batches(n, cfg.batch_size, &root.split(&format!("epoch-{epoch}")));
        let mut loss_sum = 0.0;
        let mut rows = 0usize;
        for idx in batches {
            let xb = take_rows(x, &idx);
            let (loss, grads) = mse(&params, xb.view(), xb.view())?;
            opt.step(&mut params, &grads, cfg.weight_decay);
            loss_sum += loss * idx.len() as f64;
            rows += idx.len();
        }
        let mean = loss_sum / rows as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical(format!("autoencoder diverged at epoch {epoch}")));
        }
        epoch_losses.push(mean);
    }
    params.check_finite()?;
    let (encoder, decoder) = params.split_at(n_encoder_layers);
    Ok(AeOutcome { encoder, decoder, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn rejects_zero_epochs() {
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let x = Array2::zeros((8, 3));
        assert!(matches!(
            train_autoencoder(x.view(), &cfg, 2),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn linear_ae_recovers_rank_one_data() {
        // Points on a 1-D line embedded in 4-D; a linear AE with latent 1
        // can reconstruct them essentially exactly.
        let direction = [0.5, -0.25, 1.0, 0.33];
        let x = Array2::from_shape_fn((64, 4), |(i, j)| {
            let t: f64 = (i as f64 / 8.0) - 4.0;
            t * direction[j]
        });
        let cfg = TrainConfig { epochs: 400, batch_size: 16, lr: 5e-3, ..TrainConfig::default() };
        let out = train_autoencoder_arch(x.view(), &cfg, 1, &[], Activation::Identity).unwrap();
        let last = *out.epoch_losses.last().unwrap();
        assert!(last < 1e-4, "final reconstruction mse {last}");
        assert_eq!(out.encoder.output_dim(), 1);
        assert_eq!(out.decoder.output_dim(), 4);
    }

    #[test]
    fn loss_improves_on_random_blob() {
        let mut r = crate::rng::RngHandle::new(6).split("blob").rng();
        let x = Array2::from_shape_fn((128, 8), |_| r.random::<f64>() * 2.0 - 1.0);
        let cfg = TrainConfig { epochs: 30, batch_size: 32, lr: 2e-3, ..TrainConfig::default() };
        let out = train_autoencoder(x.view(), &cfg, 3).unwrap();
        assert!(out.epoch_losses.last().unwrap() < out.epoch_losses.first().unwrap());
    }

    #[test]
    fn training_is_seed_reproducible() {
        let mut r = crate::rng::RngHandle::new(7).split("repro").rng();
        let x = Array2::from_shape_fn((40, 5), |_| r.random::<f64>());
        let cfg = TrainConfig { epochs: 5, batch_size: 8, ..TrainConfig::default() };
        let a = train_autoencoder(x.view(), &cfg, 2).unwrap();
        let b = train_autoencoder(x.view(), &cfg, 2).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }
}
