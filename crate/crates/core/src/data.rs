//! Shared data model: samples, environment-labeled datasets, split views,
//! embedding matrices, and the on-disk dataset format.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Content class of a sample. The two normal classes define the binary
/// pretext task; `Anomaly` appears only in test splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ContentLabel {
    Normal0,
    Normal1,
    Anomaly,
}

impl ContentLabel {
    /// Anomaly-detection label: 1 = anomalous, 0 = normal. Fixed globally so
    /// detectors and ROC-AUC share one orientation.
    pub fn anomaly_label(self) -> u8 {
        match self {
            ContentLabel::Anomaly => 1,
            _ => 0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ContentLabel::Normal0 => "normal0",
            ContentLabel::Normal1 => "normal1",
            ContentLabel::Anomaly => "anomaly",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "normal0" => Ok(ContentLabel::Normal0),
            "normal1" => Ok(ContentLabel::Normal1),
            "anomaly" => Ok(ContentLabel::Anomaly),
            other => Err(Error::Parse(format!("unknown content label {other:?}"))),
        }
    }
}

impl fmt::Display for ContentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn token(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One observation: a feature vector tagged with environment, content class
/// and split membership.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub env_id: usize,
    pub content_label: ContentLabel,
    pub split: Split,
}

/// A multi-environment dataset. Immutable after construction; `validate`
/// checks every structural invariant and is called by the generator and the
/// loader.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvDataset {
    pub samples: Vec<Sample>,
    pub d_x: usize,
    pub train_envs: BTreeSet<usize>,
    pub test_envs: BTreeSet<usize>,
}

impl EnvDataset {
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.d_x {
                return Err(Error::Shape(format!(
                    "sample {i} has {} features, dataset d_x is {}",
                    s.features.len(),
                    self.d_x
                )));
            }
            if !self.train_envs.contains(&s.env_id) && !self.test_envs.contains(&s.env_id) {
                return Err(Error::Config(format!(
                    "sample {i} has undeclared env id {}",
                    s.env_id
                )));
            }
            if s.split == Split::Train {
                if s.content_label == ContentLabel::Anomaly {
                    return Err(Error::Config(format!("train sample {i} is labeled anomaly")));
                }
                if self.test_envs.contains(&s.env_id) {
                    return Err(Error::Config(format!(
                        "train sample {i} sits in test env {}",
                        s.env_id
                    )));
                }
            }
        }
        // Each train env needs enough of both normal classes for pairing,
        // pretext labeling and per-env batching to be well defined.
        for &env in &self.train_envs {
            let mut n0 = 0usize;
            let mut n1 = 0usize;
            for s in self.samples.iter().filter(|s| s.split == Split::Train && s.env_id == env) {
                match s.content_label {
                    ContentLabel::Normal0 => n0 += 1,
                    ContentLabel::Normal1 => n1 += 1,
                    ContentLabel::Anomaly => {}
                }
            }
            if n0 < 2 || n1 < 2 {
                return Err(Error::Config(format!(
                    "train env {env} has {n0}x normal0 / {n1}x normal1 samples; need >= 2 of each"
                )));
            }
        }
        Ok(())
    }

    /// Materialize one split (optionally restricted to a set of envs) as a
    /// feature matrix plus anomaly labels and env ids, in original sample
    /// order. Pure function of `(self, split, envs)`.
    pub fn view(&self, split: Split, envs: Option<&BTreeSet<usize>>) -> Result<DatasetView> {
        if let Some(requested) = envs {
            let declared: BTreeSet<usize> =
                self.train_envs.union(&self.test_envs).copied().collect();
            if let Some(bad) = requested.iter().find(|e| !declared.contains(e)) {
                return Err(Error::Config(format!("requested env {bad} is not declared")));
            }
        }
        let idx: Vec<usize> = self
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                s.split == split && envs.is_none_or(|set| set.contains(&s.env_id))
            })
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::EmptySelection(format!(
                "no samples in split {split} for the requested envs"
            )));
        }
        let mut features = Array2::zeros((idx.len(), self.d_x));
        let mut labels = Vec::with_capacity(idx.len());
        let mut env_ids = Vec::with_capacity(idx.len());
        for (row, &i) in idx.iter().enumerate() {
            let s = &self.samples[i];
            features
                .row_mut(row)
                .iter_mut()
                .zip(&s.features)
                .for_each(|(dst, &v)| *dst = v);
            labels.push(s.content_label.anomaly_label());
            env_ids.push(s.env_id);
        }
        Ok(DatasetView {
            features,
            anomaly_labels: labels,
            env_ids,
            content_labels: idx.iter().map(|&i| self.samples[i].content_label).collect(),
        })
    }
}

/// Dense view of one split: rows follow the dataset's sample order.
#[derive(Clone, Debug)]
pub struct DatasetView {
    pub features: Array2<f64>,
    /// 1 = anomaly, 0 = normal.
    pub anomaly_labels: Vec<u8>,
    pub env_ids: Vec<usize>,
    pub content_labels: Vec<ContentLabel>,
}

impl DatasetView {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn anomaly_labels_f64(&self) -> Array1<f64> {
        self.anomaly_labels.iter().map(|&l| f64::from(l)).collect()
    }
}

/// Row-per-sample embedding matrix; entries are checked finite on
/// construction and row order matches the source view.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some((r, _)) = values
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numerical(format!("embedding row {r} is non-finite")));
        }
        Ok(EmbeddingMatrix { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Header metadata carried by the on-disk dataset format but not by
/// `EnvDataset` itself (generation provenance, manifest references).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetMeta {
    pub regime: String,
    pub seed: u64,
    /// Extra `key value` header lines, preserved verbatim and in order.
    pub extra: Vec<(String, String)>,
}

/// Floats are printed with 17 significant digits so that parsing them back
/// reproduces the exact f64 bit pattern.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

const DATASET_MAGIC: &str = "envshift-dataset v1";

/// Write the dataset in the plain-text exchange format: a fixed header
/// (d_x, regime, seed, train_envs, test_envs, extras, sample count) followed
/// by one line per sample: `env_id split content_label f_1 .. f_dx`.
pub fn write_dataset<W: Write>(ds: &EnvDataset, meta: &DatasetMeta, mut w: W) -> Result<()> {
    writeln!(w, "{DATASET_MAGIC}")?;
    writeln!(w, "d_x {}", ds.d_x)?;
    writeln!(w, "regime {}", meta.regime)?;
    writeln!(w, "seed {}", meta.seed)?;
    let join = |set: &BTreeSet<usize>| {
        set.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ")
    };
    writeln!(w, "train_envs {}", join(&ds.train_envs))?;
    writeln!(w, "test_envs {}", join(&ds.test_envs))?;
    for (k, v) in &meta.extra {
        writeln!(w, "{k} {v}")?;
    }
    writeln!(w, "samples {}", ds.samples.len())?;
    let mut line = String::new();
    for s in &ds.samples {
        line.clear();
        line.push_str(&format!("{} {} {}", s.env_id, s.split, s.content_label));
        for &f in &s.features {
            line.push(' ');
            line.push_str(&format_f64(f));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<(EnvDataset, DatasetMeta)> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of dataset file".into()))?
            .map_err(Error::Io)
    };
    let magic = next()?;
    if magic != DATASET_MAGIC {
        return Err(Error::Parse(format!("bad magic line {magic:?}")));
    }
    let field = |line: &str, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| Error::Parse(format!("expected `{key} ...`, got {line:?}")))
    };
    let d_x: usize = field(&next()?, "d_x")?
        .parse()
        .map_err(|e| Error::Parse(format!("d_x: {e}")))?;
    let regime = field(&next()?, "regime")?;
    let seed: u64 = field(&next()?, "seed")?
        .parse()
        .map_err(|e| Error::Parse(format!("seed: {e}")))?;
    let parse_envs = |s: String| -> Result<BTreeSet<usize>> {
        s.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("env id: {e}"))))
            .collect()
    };
    let train_envs = parse_envs(field(&next()?, "train_envs")?)?;
    let test_envs = parse_envs(field(&next()?, "test_envs")?)?;
    // Anything between the env sets and the sample count is free-form
    // metadata; keep it so a rewrite is byte-identical.
    let mut extra = Vec::new();
    let n_samples: usize = loop {
        let line = next()?;
        if let Some(rest) = line.strip_prefix("samples ") {
            break rest
                .parse()
                .map_err(|e| Error::Parse(format!("sample count: {e}")))?;
        }
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| Error::Parse(format!("malformed header line {line:?}")))?;
        extra.push((k.to_string(), v.to_string()));
    };
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let line = next()?;
        let mut tok = line.split_whitespace();
        let mut take = |what: &str| -> Result<&str> {
            tok.next()
                .ok_or_else(|| Error::Parse(format!("sample {i}: missing {what}")))
        };
        let env_id: usize = take("env id")?
            .parse()
            .map_err(|e| Error::Parse(format!("sample {i} env id: {e}")))?;
        let split = Split::from_token(take("split")?)?;
        let content_label = ContentLabel::from_token(take("content label")?)?;
        let features: Vec<f64> = tok
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("sample {i} feature: {e}")))
            })
            .collect::<Result<_>>()?;
        if features.len() != d_x {
            return Err(Error::Parse(format!(
                "sample {i} has {} features, header says {d_x}",
                features.len()
            )));
        }
        samples.push(Sample { features, env_id, content_label, split });
    }
    let ds = EnvDataset { samples, d_x, train_envs, test_envs };
    ds.validate()?;
    Ok((ds, DatasetMeta { regime, seed, extra }))
}
