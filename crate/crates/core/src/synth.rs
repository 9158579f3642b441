//! Synthetic multi-environment scenario generator.
//!
//! Observations mix a Content latent (which carries the class, including the
//! anomaly class) and a Style latent (environment-specific, task-irrelevant)
//! through a shared orthonormal basis:
//!
//! `x = W_C (mu_c + eps_C) + W_S (style_mean + spurious_shift_c + style_scale * eps_S) + eta`
//!
//! Four train/test regimes are covered: A (everything in-distribution),
//! B (test Style shifted), C (test adds an unseen Content class), and
//! D (both). Anomalies are realized as the third Content prototype, i.e. a
//! class unseen at training time. The spurious term shifts each normal
//! class's Style mean in (mostly) opposite directions, so a shortcut learner
//! can separate the pretext classes through Style inside the training
//! environments.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ContentLabel, EnvDataset, Sample, Split};
use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// Train/test distribution-shift regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    A,
    B,
    C,
    D,
}

impl Regime {
    /// Test split contains the unseen Content class.
    pub fn has_anomalies(self) -> bool {
        matches!(self, Regime::C | Regime::D)
    }

    /// Test environments draw fresh Style parameters.
    pub fn style_shifted(self) -> bool {
        matches!(self, Regime::B | Regime::D)
    }

    pub fn token(self) -> &'static str {
        match self {
            Regime::A => "A",
            Regime::B => "B",
            Regime::C => "C",
            Regime::D => "D",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Regime::A),
            "B" | "b" => Ok(Regime::B),
            "C" | "c" => Ok(Regime::C),
            "D" | "d" => Ok(Regime::D),
            other => Err(Error::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

/// Full description of one synthetic scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub regime: Regime,
    pub n_train_envs: usize,
    pub n_test_envs: usize,
    pub samples_per_env: usize,
    /// Fraction of anomalous rows per test env; ignored (forced to 0) in
    /// regimes A and B.
    pub anomaly_fraction_test: f64,
    pub d_content: usize,
    pub d_style: usize,
    pub d_x: usize,
    /// Minimum L2 gap between a test env's style mean and every train style
    /// mean, in regimes B and D.
    pub style_shift_scale: f64,
    /// Magnitude of the content-conditional Style shift (rho).
    pub spurious_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The default benchmark scenario: regime D at a size where detectors are
    /// meaningful but a full grid still runs in seconds.
    pub fn paper_mirror() -> Self {
        ScenarioConfig {
            regime: Regime::D,
            n_train_envs: 6,
            n_test_envs: 3,
            samples_per_env: 200,
            anomaly_fraction_test: 0.25,
            d_content: 4,
            d_style: 8,
            d_x: 32,
            style_shift_scale: 4.0,
            spurious_strength: 3.0,
            noise_sigma: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_content == 0 {
            return Err(Error::Config("d_content must be positive".into()));
        }
        if self.d_x < self.d_content + self.d_style {
            return Err(Error::Config(format!(
                "d_x ({}) must be >= d_content + d_style ({})",
                self.d_x,
                self.d_content + self.d_style
            )));
        }
        if self.n_train_envs == 0 || self.n_test_envs == 0 {
            return Err(Error::Config("need at least one train and one test env".into()));
        }
        if self.samples_per_env < 4 {
            return Err(Error::Config(
                "samples_per_env must be >= 4 so every train env holds 2 of each normal class"
                    .into(),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be > 0, got {}",
                self.noise_sigma
            )));
        }
        if self.spurious_strength < 0.0 || self.style_shift_scale < 0.0 {
            return Err(Error::Config("spurious_strength and style_shift_scale must be >= 0".into()));
        }
        if self.regime.has_anomalies() {
            if !(self.anomaly_fraction_test > 0.0 && self.anomaly_fraction_test < 1.0) {
                return Err(Error::Config(format!(
                    "regime {} needs anomaly_fraction_test in (0,1), got {}",
                    self.regime.token(),
                    self.anomaly_fraction_test
                )));
            }
            if self.anomalies_per_test_env() == 0 {
                return Err(Error::Config(
                    "anomaly_fraction_test rounds to zero anomalies per test env".into(),
                ));
            }
            if self.anomalies_per_test_env() >= self.samples_per_env {
                return Err(Error::Config(
                    "anomaly_fraction_test leaves no normal test samples".into(),
                ));
            }
        }
        Ok(())
    }

    /// Anomaly fraction after the regime rule (A/B force 0).
    pub fn effective_anomaly_fraction(&self) -> f64 {
        if self.regime.has_anomalies() {
            self.anomaly_fraction_test
        } else {
            0.0
        }
    }

    fn anomalies_per_test_env(&self) -> usize {
        (self.effective_anomaly_fraction() * self.samples_per_env as f64).round() as usize
    }

    /// Canonical `key value` listing; config files, manifests and the
    /// fingerprint all derive from it.
    pub fn canonical_kv(&self) -> Vec<(String, String)> {
        vec![
            ("regime".into(), self.regime.token().into()),
            ("n_train_envs".into(), self.n_train_envs.to_string()),
            ("n_test_envs".into(), self.n_test_envs.to_string()),
            ("samples_per_env".into(), self.samples_per_env.to_string()),
            ("anomaly_fraction_test".into(), self.anomaly_fraction_test.to_string()),
            ("d_content".into(), self.d_content.to_string()),
            ("d_style".into(), self.d_style.to_string()),
            ("d_x".into(), self.d_x.to_string()),
            ("style_shift_scale".into(), self.style_shift_scale.to_string()),
            ("spurious_strength".into(), self.spurious_strength.to_string()),
            ("noise_sigma".into(), self.noise_sigma.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }

    /// Short stable content hash of the scenario.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical_kv() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-environment Style distribution parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvParams {
    pub env_id: usize,
    pub style_mean: Array1<f64>,
    pub style_scale: Array1<f64>,
    /// Content-conditional Style shift, indexed Normal0 / Normal1 / Anomaly.
    pub spurious_shift: [Array1<f64>; 3],
}

/// Shared mixing structure: orthonormal Content/Style bases, the three
/// Content prototypes, and the global axis train-env spurious directions
/// cluster around.
#[derive(Clone, Debug)]
pub struct MixingModel {
    /// d_x x d_content.
    pub w_content: Array2<f64>,
    /// d_x x d_style.
    pub w_style: Array2<f64>,
    pub content_prototypes: [Array1<f64>; 3],
    /// Unit vector in Style space; empty when d_style == 0.
    pub spurious_axis: Array1<f64>,
}

/// How strongly train-env spurious directions align with the shared axis.
/// High enough that pooled training sees a consistent shortcut, low enough
/// that the per-env direction visibly varies.
const SPURIOUS_ALIGNMENT: f64 = 0.75;
/// Log-std of the per-coordinate style scale draw.
const STYLE_SCALE_LOG_STD: f64 = 0.3;
const GAP_RETRIES: usize = 64;

fn standard_normal_vec(r: &mut impl Rng, n: usize) -> Array1<f64> {
    let normal = StandardNormal;
    Array1::from_iter((0..n).map(|_| {
        let z: f64 = normal.sample(r);
        z
    }))
}

fn normalize_or(v: Array1<f64>, fallback_index: usize) -> Array1<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        let mut e = Array1::zeros(v.len());
        if !e.is_empty() {
            e[fallback_index % e.len()] = 1.0;
        }
        e
    } else {
        v / norm
    }
}

/// Draw an orthonormal basis for the joint Content+Style subspace and the
/// Content prototypes. Deterministic in `(cfg, rng)`.
pub fn build_mixing_model(cfg: &ScenarioConfig, rng: &RngHandle) -> Result<MixingModel> {
    if cfg.d_x < cfg.d_content + cfg.d_style {
        return Err(Error::Config(format!(
            "d_x ({}) must be >= d_content + d_style ({})",
            cfg.d_x,
            cfg.d_content + cfg.d_style
        )));
    }
    let total = cfg.d_content + cfg.d_style;
    let mut r = rng.split("basis").rng();
    // Modified Gram-Schmidt with one re-orthogonalization pass keeps
    // Q^T Q - I at the 1e-15 level for these sizes.
    let mut columns: Vec<Array1<f64>> = Vec::with_capacity(total);
    while columns.len() < total {
        let mut v = standard_normal_vec(&mut r, cfg.d_x);
        for _ in 0..2 {
            for q in &columns {
                let proj = v.dot(q);
                v.zip_mut_with(q, |vi, &qi| *vi -= proj * qi);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // essentially dependent draw; take a fresh one
        }
        columns.push(v / norm);
    }
    let mut w_content = Array2::zeros((cfg.d_x, cfg.d_content));
    for (j, col) in columns[..cfg.d_content].iter().enumerate() {
        w_content.column_mut(j).assign(col);
    }
    let mut w_style = Array2::zeros((cfg.d_x, cfg.d_style));
    for (j, col) in columns[cfg.d_content..].iter().enumerate() {
        w_style.column_mut(j).assign(col);
    }

    let mut proto_rng = rng.split("prototypes").rng();
    let prototypes = loop {
        let p0 = standard_normal_vec(&mut proto_rng, cfg.d_content);
        let p1 = standard_normal_vec(&mut proto_rng, cfg.d_content);
        let p2 = standard_normal_vec(&mut proto_rng, cfg.d_content);
        let d01 = (&p0 - &p1).mapv(|x| x * x).sum().sqrt();
        let d02 = (&p0 - &p2).mapv(|x| x * x).sum().sqrt();
        let d12 = (&p1 - &p2).mapv(|x| x * x).sum().sqrt();
        let min = d01.min(d02).min(d12);
        if min < 1e-9 {
            continue; // coincident draw; retry
        }
        // Enforce pairwise distance >= 2 by rescaling the whole triangle.
        let scale = if min < 2.0 { 2.0 / min } else { 1.0 };
        break [p0 * scale, p1 * scale, p2 * scale];
    };

    let spurious_axis = if cfg.d_style == 0 {
        Array1::zeros(0)
    } else {
        normalize_or(
            standard_normal_vec(&mut rng.split("spurious-axis").rng(), cfg.d_style),
            0,
        )
    };

    Ok(MixingModel {
        w_content,
        w_style,
        content_prototypes: prototypes,
        spurious_axis,
    })
}

fn train_env_params(
    cfg: &ScenarioConfig,
    mix: &MixingModel,
    env_id: usize,
    rng: &RngHandle,
) -> EnvParams {
    let mut r = rng.rng();
    let style_mean = standard_normal_vec(&mut r, cfg.d_style);
    let style_scale = standard_normal_vec(&mut r, cfg.d_style)
        .mapv(|z| (STYLE_SCALE_LOG_STD * z).exp());
    let jitter = standard_normal_vec(&mut r, cfg.d_style);
    let direction = if cfg.d_style == 0 {
        Array1::zeros(0)
    } else {
        normalize_or(
            SPURIOUS_ALIGNMENT * &mix.spurious_axis
                + (1.0 - SPURIOUS_ALIGNMENT) * normalize_or(jitter, 1),
            0,
        )
    };
    let rho = cfg.spurious_strength;
    EnvParams {
        env_id,
        style_mean,
        style_scale,
        spurious_shift: [
            rho * &direction,
            -rho * &direction,
            Array1::zeros(cfg.d_style),
        ],
    }
}

/// Draw (or copy) one environment's Style parameters.
///
/// Regimes A and C reuse train parameters for test envs; B and D draw fresh
/// ones whose style mean keeps an L2 gap of at least `style_shift_scale` to
/// every train style mean (rejection sampling with a guaranteed radial
/// fallback). A zero `style_shift_scale` also copies, which is what makes a
/// D run with no shift consume exactly the draws of the corresponding C run.
pub fn sample_env_params(
    cfg: &ScenarioConfig,
    mix: &MixingModel,
    env_id: usize,
    is_test: bool,
    train_params: &[EnvParams],
    rng: &RngHandle,
) -> EnvParams {
    if !is_test {
        return train_env_params(cfg, mix, env_id, rng);
    }
    let copy_from_train = !cfg.regime.style_shifted() || cfg.style_shift_scale == 0.0;
    if copy_from_train {
        let src = &train_params[(env_id - cfg.n_train_envs) % train_params.len()];
        return EnvParams { env_id, ..src.clone() };
    }
    let mut r = rng.rng();
    let gap = cfg.style_shift_scale;
    let spread = gap + 2.0;
    let min_gap_to_train = |mean: &Array1<f64>| {
        train_params
            .iter()
            .map(|p| (&p.style_mean - mean).mapv(|x| x * x).sum().sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let mut candidate = standard_normal_vec(&mut r, cfg.d_style) * spread;
    for _ in 0..GAP_RETRIES {
        if min_gap_to_train(&candidate) >= gap {
            break;
        }
        candidate = standard_normal_vec(&mut r, cfg.d_style) * spread;
    }
    if min_gap_to_train(&candidate) < gap {
        // Radial fallback: step out from the train centroid past the farthest
        // train mean, which guarantees the gap to every one of them.
        let mut centroid = Array1::zeros(cfg.d_style);
        for p in train_params {
            centroid += &p.style_mean;
        }
        centroid /= train_params.len() as f64;
        let radius = train_params
            .iter()
            .map(|p| (&p.style_mean - &centroid).mapv(|x| x * x).sum().sqrt())
            .fold(0.0, f64::max);
        let u = normalize_or(candidate - &centroid, 0);
        candidate = &centroid + &(u * (radius + gap + 1e-9));
    }
    let style_scale = standard_normal_vec(&mut r, cfg.d_style)
        .mapv(|z| (STYLE_SCALE_LOG_STD * z).exp());
    // Fresh, unaligned spurious direction: the train-time shortcut does not
    // transfer to unseen environments.
    let direction = normalize_or(standard_normal_vec(&mut r, cfg.d_style), 0);
    let rho = cfg.spurious_strength;
    EnvParams {
        env_id,
        style_mean: candidate,
        style_scale,
        spurious_shift: [
            rho * &direction,
            -rho * &direction,
            Array1::zeros(cfg.d_style),
        ],
    }
}

/// A generated scenario with its latent structure, for diagnostics and tests.
pub struct Scenario {
    pub dataset: EnvDataset,
    pub mixing: MixingModel,
    pub train_params: Vec<EnvParams>,
    pub test_params: Vec<EnvParams>,
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<EnvDataset> {
    Ok(generate_scenario_full(cfg)?.dataset)
}

pub fn generate_scenario_full(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let root = RngHandle::new(cfg.seed).split("synthgen");
    let mixing = build_mixing_model(cfg, &root.split("mixing"))?;

    let train_params: Vec<EnvParams> = (0..cfg.n_train_envs)
        .map(|i| {
            sample_env_params(cfg, &mixing, i, false, &[], &root.split(&format!("env-params-train-{i}")))
        })
        .collect();
    let test_params: Vec<EnvParams> = (0..cfg.n_test_envs)
        .map(|i| {
            let env_id = cfg.n_train_envs + i;
            sample_env_params(
                cfg,
                &mixing,
                env_id,
                true,
                &train_params,
                &root.split(&format!("env-params-test-{i}")),
            )
        })
        .collect();

    let mut samples = Vec::with_capacity((cfg.n_train_envs + cfg.n_test_envs) * cfg.samples_per_env);
    for params in &train_params {
        gen_env_samples(cfg, &mixing, params, Split::Train, &root, &mut samples);
    }
    for params in &test_params {
        gen_env_samples(cfg, &mixing, params, Split::Test, &root, &mut samples);
    }

    let dataset = EnvDataset {
        samples,
        d_x: cfg.d_x,
        train_envs: (0..cfg.n_train_envs).collect(),
        test_envs: (cfg.n_train_envs..cfg.n_train_envs + cfg.n_test_envs).collect(),
    };
    dataset.validate()?;
    Ok(Scenario { dataset, mixing, train_params, test_params })
}

fn gen_env_samples(
    cfg: &ScenarioConfig,
    mix: &MixingModel,
    params: &EnvParams,
    split: Split,
    root: &RngHandle,
    out: &mut Vec<Sample>,
) {
    let mut r = root.split(&format!("env-data-{}", params.env_id)).rng();
    let n = cfg.samples_per_env;

    // Class sequence first, then feature draws, so a post-hoc class fix-up
    // never changes how many random values each sample consumes.
    let mut classes: Vec<ContentLabel> = Vec::with_capacity(n);
    if split == Split::Test && cfg.regime.has_anomalies() {
        let n_anom = (cfg.anomaly_fraction_test * n as f64).round() as usize;
        for _ in 0..(n - n_anom) {
            classes.push(if r.random::<bool>() {
                ContentLabel::Normal1
            } else {
                ContentLabel::Normal0
            });
        }
        classes.extend(std::iter::repeat_n(ContentLabel::Anomaly, n_anom));
        // Mix anomaly positions into the env.
        use rand::seq::SliceRandom;
        classes.shuffle(&mut r);
    } else {
        for _ in 0..n {
            classes.push(if r.random::<bool>() {
                ContentLabel::Normal1
            } else {
                ContentLabel::Normal0
            });
        }
        if split == Split::Train {
            ensure_two_of_each_normal(&mut classes);
        }
    }

    for &content_label in &classes {
        let class_idx = match content_label {
            ContentLabel::Normal0 => 0,
            ContentLabel::Normal1 => 1,
            ContentLabel::Anomaly => 2,
        };
        let eps_content = standard_normal_vec(&mut r, cfg.d_content);
        let eps_style = standard_normal_vec(&mut r, cfg.d_style);
        let noise = standard_normal_vec(&mut r, cfg.d_x) * cfg.noise_sigma;

        let content = &mix.content_prototypes[class_idx] + &eps_content;
        let style = &params.style_mean
            + &params.spurious_shift[class_idx]
            + &(&params.style_scale * &eps_style);

        let mut x = mix.w_content.dot(&content) + noise;
        if cfg.d_style > 0 {
            x += &mix.w_style.dot(&style);
        }
        out.push(Sample {
            features: x.to_vec(),
            env_id: params.env_id,
            content_label,
            split,
        });
    }
}

/// Flip the tail of the majority class if a normal class has fewer than two
/// draws. Touches labels only, never the random stream.
fn ensure_two_of_each_normal(classes: &mut [ContentLabel]) {
    for (short, long) in [
        (ContentLabel::Normal0, ContentLabel::Normal1),
        (ContentLabel::Normal1, ContentLabel::Normal0),
    ] {
        loop {
            let n_short = classes.iter().filter(|&&c| c == short).count();
            if n_short >= 2 {
                break;
            }
            let pos = classes
                .iter()
                .rposition(|&c| c == long)
                .expect("samples_per_env >= 4 guarantees a donor");
            classes[pos] = short;
        }
    }
}
