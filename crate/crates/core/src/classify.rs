//! Multinomial logistic regression over feature vectors and the
//! two-branch (L-STF + L-LTF) score fusion.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ExtractorKind, FeatureVector};
use crate::seed::rng_from_seed;
use crate::Real;

/// Version tag written into serialised models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub label_smoothing: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Share of each class held out for model selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch: 64,
            learning_rate: 1e-3,
            l2: 0.1,
            label_smoothing: 0.1,
            seed: 0,
            optimizer: Optimizer::Adam,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: String| Err(ClassifyError::InvalidConfig(m));
        if self.epochs == 0 || self.batch == 0 {
            return bad("epochs and batch must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 {} must be non-negative", self.l2));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return bad(format!("label smoothing {} outside [0, 0.5)", self.label_smoothing));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.validation_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("training needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("sample {index}: dimension {got}, expected {expected}")]
    DimMismatch { index: usize, expected: usize, got: usize },
    #[error("sample {0} has no label")]
    MissingLabel(usize),
    #[error("sample {index} is {got}, expected {expected}")]
    MixedExtractors {
        index: usize,
        expected: ExtractorKind,
        got: ExtractorKind,
    },
    #[error("sample {0} has non-finite values")]
    NonFinite(usize),
    #[error("no samples")]
    Empty,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("fused models disagree on their class lists")]
    ClassMismatch,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Trained classifier. Inputs are standardised with the stored per-feature
/// mean and scale before the affine map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel<T> {
    pub format_version: u32,
    pub trained_on: ExtractorKind,
    pub classes: Vec<String>,
    pub dim: usize,
    /// `classes.len()` rows of `dim` weights.
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
    pub feature_mean: Vec<T>,
    pub feature_scale: Vec<T>,
    pub config: TrainConfig,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
}

impl<T: Real> SoftmaxModel<T> {
    /// Zero parameters and identity standardisation.
    pub fn zeros(trained_on: ExtractorKind, classes: Vec<String>, dim: usize) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            trained_on,
            weights: vec![vec![T::zero(); dim]; classes.len()],
            bias: vec![T::zero(); classes.len()],
            classes,
            dim,
            feature_mean: vec![T::zero(); dim],
            feature_scale: vec![T::one(); dim],
            config: TrainConfig::default(),
            best_epoch: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: &str| Err(ClassifyError::InvalidModel(m.into()));
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifyError::InvalidModel(format!(
                "format version {} (supported: {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.classes.is_empty() {
            return bad("no classes");
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.classes.iter().all(|c| seen.insert(c)) {
            return bad("duplicate class labels");
        }
        let c = self.classes.len();
        if self.weights.len() != c || self.bias.len() != c || self.weights.iter().any(|r| r.len() != self.dim) {
            return bad("parameter shapes do not match classes x dim");
        }
        if self.feature_mean.len() != self.dim || self.feature_scale.len() != self.dim {
            return bad("standardisation vectors do not match dim");
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !self.weights.iter().all(|r| finite(r)) || !finite(&self.bias) || !finite(&self.feature_mean) {
            return bad("non-finite parameters");
        }
        if !self.feature_scale.iter().all(|s| s.is_finite() && *s > T::zero()) {
            return bad("feature scales must be positive");
        }
        Ok(())
    }

    fn standardize(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (*v - *m) / *s)
            .collect()
    }

    fn logits(&self, z: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(z).map(|(a, x)| *a * *x).sum::<T>() + *b)
            .collect()
    }
}

fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|l| (*l - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Class probabilities for one raw (unstandardised) feature.
pub fn predict_scores<T: Real>(model: &SoftmaxModel<T>, x: &[T]) -> Result<Vec<T>, ClassifyError> {
    if x.len() != model.dim {
        return Err(ClassifyError::DimMismatch {
            index: 0,
            expected: model.dim,
            got: x.len(),
        });
    }
    Ok(softmax(&model.logits(&model.standardize(x))))
}

/// Index of the largest score; the first one wins ties.
pub fn argmax<T: Real>(scores: &[T]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |best, (i, &s)| if s > best.1 { (i, s) } else { best })
        .0
}

pub fn predict<'m, T: Real>(model: &'m SoftmaxModel<T>, x: &[T]) -> Result<&'m str, ClassifyError> {
    let p = predict_scores(model, x)?;
    Ok(&model.classes[argmax(&p)])
}

/// Sum of the two branches' probabilities, then argmax (first class wins
/// ties).
pub fn fuse_and_classify<'m, T: Real>(
    models: (&'m SoftmaxModel<T>, &SoftmaxModel<T>),
    features: (&[T], &[T]),
) -> Result<&'m str, ClassifyError> {
    if models.0.classes != models.1.classes {
        return Err(ClassifyError::ClassMismatch);
    }
    let a = predict_scores(models.0, features.0)?;
    let b = predict_scores(models.1, features.1)?;
    let sum: Vec<T> = a.iter().zip(&b).map(|(x, y)| *x + *y).collect();
    Ok(&models.0.classes[argmax(&sum)])
}

/// Fraction of `samples` whose `device_hint` matches the prediction.
pub fn evaluate<T: Real>(model: &SoftmaxModel<T>, samples: &[FeatureVector<T>]) -> Result<f64, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let mut correct = 0usize;
    for (i, s) in samples.iter().enumerate() {
        let label = s.device_hint.as_deref().ok_or(ClassifyError::MissingLabel(i))?;
        let p = predict(model, &s.values).map_err(|e| reindex(e, i))?;
        correct += usize::from(p == label);
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Fused accuracy over paired L-STF / L-LTF samples.
pub fn evaluate_fused<T: Real>(
    models: (&SoftmaxModel<T>, &SoftmaxModel<T>),
    samples: &[(FeatureVector<T>, FeatureVector<T>)],
) -> Result<f64, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let mut correct = 0usize;
    for (i, (a, b)) in samples.iter().enumerate() {
        let label = a.device_hint.as_deref().ok_or(ClassifyError::MissingLabel(i))?;
        let p = fuse_and_classify(models, (&a.values, &b.values)).map_err(|e| reindex(e, i))?;
        correct += usize::from(p == label);
    }
    Ok(correct as f64 / samples.len() as f64)
}

fn reindex(e: ClassifyError, index: usize) -> ClassifyError {
    match e {
        ClassifyError::DimMismatch { expected, got, .. } => ClassifyError::DimMismatch { index, expected, got },
        other => other,
    }
}

/// Gradient of [`objective`] with respect to weights and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

/// Mean label-smoothed cross-entropy over `(x, class)` pairs plus
/// `l2 / 2 * |W|^2` (bias unregularised), and its gradient. Inputs are
/// standardised with the model's stored statistics.
pub fn objective<T: Real>(
    model: &SoftmaxModel<T>,
    data: &[(Vec<T>, usize)],
    l2: f64,
    smoothing: f64,
) -> (T, Gradient<T>) {
    let idx: Vec<usize> = (0..data.len()).collect();
    let z: Vec<Vec<T>> = data.iter().map(|(x, _)| model.standardize(x)).collect();
    let y: Vec<usize> = data.iter().map(|(_, c)| *c).collect();
    objective_std(model, &z, &y, &idx, T::lit(l2), T::lit(smoothing))
}

fn objective_std<T: Real>(
    model: &SoftmaxModel<T>,
    z: &[Vec<T>],
    y: &[usize],
    batch: &[usize],
    l2: T,
    smoothing: T,
) -> (T, Gradient<T>) {
    let c = model.classes.len();
    let mut gw = vec![vec![T::zero(); model.dim]; c];
    let mut gb = vec![T::zero(); c];
    let mut loss = T::zero();
    let inv_b = T::one() / T::lit(batch.len().max(1) as f64);
    let off = smoothing / T::lit(c as f64);
    let on = T::one() - smoothing + off;
    for &i in batch {
        let logits = model.logits(&z[i]);
        let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + logits.iter().map(|l| (*l - m).exp()).sum::<T>().ln();
        for k in 0..c {
            let q = if k == y[i] { on } else { off };
            let p = (logits[k] - lse).exp();
            loss = loss - q * (logits[k] - lse) * inv_b;
            let d = (p - q) * inv_b;
            gb[k] = gb[k] + d;
            for (g, x) in gw[k].iter_mut().zip(&z[i]) {
                *g = *g + d * *x;
            }
        }
    }
    let mut reg = T::zero();
    for (gr, wr) in gw.iter_mut().zip(&model.weights) {
        for (g, w) in gr.iter_mut().zip(wr) {
            *g = *g + l2 * *w;
            reg = reg + *w * *w;
        }
    }
    loss = loss + l2 * reg / T::lit(2.0);
    (loss, Gradient { weights: gw, bias: gb })
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Full regularised objective over the training split.
    pub train_loss: f64,
    /// Smoothed cross-entropy over the held-out split, if there is one.
    pub validation_loss: Option<f64>,
}

struct Adam<T> {
    m_w: Vec<Vec<T>>,
    v_w: Vec<Vec<T>>,
    m_b: Vec<T>,
    v_b: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(c: usize, d: usize) -> Self {
        Self {
            m_w: vec![vec![T::zero(); d]; c],
            v_w: vec![vec![T::zero(); d]; c],
            m_b: vec![T::zero(); c],
            v_b: vec![T::zero(); c],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut SoftmaxModel<T>, g: &Gradient<T>, lr: T) {
        self.t += 1;
        let (b1, b2, eps) = (T::lit(Self::B1), T::lit(Self::B2), T::lit(Self::EPS));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let upd = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for k in 0..model.weights.len() {
            for j in 0..model.dim {
                upd(&mut model.weights[k][j], &mut self.m_w[k][j], &mut self.v_w[k][j], g.weights[k][j]);
            }
            upd(&mut model.bias[k], &mut self.m_b[k], &mut self.v_b[k], g.bias[k]);
        }
    }
}

fn sgd_step<T: Real>(model: &mut SoftmaxModel<T>, g: &Gradient<T>, lr: T) {
    for (wr, gr) in model.weights.iter_mut().zip(&g.weights) {
        for (w, d) in wr.iter_mut().zip(gr) {
            *w = *w - lr * *d;
        }
    }
    for (b, d) in model.bias.iter_mut().zip(&g.bias) {
        *b = *b - lr * *d;
    }
}

/// Checks labels, dimensions and extractor tags; returns the class list in
/// sorted order and each sample's class index.
fn index_samples<T: Real>(samples: &[FeatureVector<T>]) -> Result<(Vec<String>, Vec<usize>), ClassifyError> {
    let first = samples.first().ok_or(ClassifyError::Empty)?;
    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        if s.extractor != first.extractor {
            return Err(ClassifyError::MixedExtractors {
                index: i,
                expected: first.extractor,
                got: s.extractor,
            });
        }
        if s.values.len() != first.values.len() {
            return Err(ClassifyError::DimMismatch {
                index: i,
                expected: first.values.len(),
                got: s.values.len(),
            });
        }
        if !s.values.iter().all(|v| v.is_finite()) {
            return Err(ClassifyError::NonFinite(i));
        }
        classes.insert(s.device_hint.as_deref().ok_or(ClassifyError::MissingLabel(i))?, 0);
    }
    if classes.len() < 2 {
        return Err(ClassifyError::TooFewClasses(classes.len()));
    }
    for (i, v) in classes.values_mut().enumerate() {
        *v = i;
    }
    let labels = samples
        .iter()
        .map(|s| classes[s.device_hint.as_deref().unwrap_or_default()])
        .collect();
    Ok((classes.keys().map(|k| k.to_string()).collect(), labels))
}

/// Stratified split: `round(fraction * n_c)` samples of each class go to
/// validation, always leaving at least one in training.
fn stratified_split(labels: &[usize], classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_val = ((fraction * idx.len() as f64).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub fn train<T: Real>(samples: &[FeatureVector<T>], cfg: &TrainConfig) -> Result<SoftmaxModel<T>, ClassifyError> {
    train_with_history(samples, cfg).map(|(m, _)| m)
}

/// Trains and also returns the per-epoch losses. The kept parameters are
/// those of the epoch with the lowest validation loss (training loss when
/// the validation split is empty).
pub fn train_with_history<T: Real>(
    samples: &[FeatureVector<T>],
    cfg: &TrainConfig,
) -> Result<(SoftmaxModel<T>, Vec<EpochStats>), ClassifyError> {
    cfg.validate()?;
    let (classes, labels) = index_samples(samples)?;
    let dim = samples[0].values.len();
    let (train_idx, val_idx) = stratified_split(&labels, classes.len(), cfg.validation_fraction, cfg.seed);

    let mut model = SoftmaxModel::zeros(samples[0].extractor, classes, dim);
    model.config = cfg.clone();
    // standardisation statistics from the training split only
    let n = T::lit(train_idx.len() as f64);
    for j in 0..dim {
        let mean = train_idx.iter().map(|&i| samples[i].values[j]).sum::<T>() / n;
        let var = train_idx
            .iter()
            .map(|&i| (samples[i].values[j] - mean).powi(2))
            .sum::<T>()
            / n;
        let sd = var.sqrt();
        model.feature_mean[j] = mean;
        model.feature_scale[j] = if sd > T::lit(1e-12) { sd } else { T::one() };
    }
    let z: Vec<Vec<T>> = samples.iter().map(|s| model.standardize(&s.values)).collect();

    let (l2, smoothing, lr) = (T::lit(cfg.l2), T::lit(cfg.label_smoothing), T::lit(cfg.learning_rate));
    let mut rng = rng_from_seed(cfg.seed ^ 0x5EED_0F_7EA1);
    let mut adam = Adam::new(model.classes.len(), dim);
    let mut order = train_idx.clone();
    let mut best: Option<(T, SoftmaxModel<T>)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let (_, g) = objective_std(&model, &z, &labels, batch, l2, smoothing);
            match cfg.optimizer {
                Optimizer::Adam => adam.step(&mut model, &g, lr),
                Optimizer::Sgd => sgd_step(&mut model, &g, lr),
            }
        }
        let (train_loss, _) = objective_std(&model, &z, &labels, &train_idx, l2, smoothing);
        let val_loss = (!val_idx.is_empty()).then(|| objective_std(&model, &z, &labels, &val_idx, T::zero(), smoothing).0);
        history.push(EpochStats {
            epoch,
            train_loss: train_loss.to_f64_lossy(),
            validation_loss: val_loss.map(|v| v.to_f64_lossy()),
        });
        let score = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            model.best_epoch = epoch;
            best = Some((score, model.clone()));
        }
    }
    let model = best.map(|(_, m)| m).unwrap_or(model);
    Ok((model, history))
}
