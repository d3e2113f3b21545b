//! Small feed-forward scorer over embedding features.
//!
//! `score = 10 * sigmoid(w2 . relu(W1 x + b1) + b2)`, trained with the L1
//! score loss `lambda_score * |score - target|` by mini-batch gradient
//! descent. An epoch that raises the full training-set loss is rolled back
//! and the step size halved, so logged epoch losses never increase. Also
//! hosts the reward-feedback loss arithmetic.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{clip_image_sim, cosine, dino_image_sim};
use crate::store::Embeddings;
use crate::types::{ScoredRecord, Source, SyntheticSample};

pub const SCORE_MAX: f64 = 10.0;
pub const DEFAULT_LAMBDA_SCORE: f64 = 10.0;
pub const DEFAULT_LAMBDA_REWARD: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// `[CLIP-D, CLIP-I, DINO-I]`
    SimsOnly,
    /// The three similarities followed by the image shift and the prompt shift.
    SimsPlusDiffs,
}

impl FeatureMode {
    pub fn feature_dim(self, clip_dim: usize) -> usize {
        match self {
            FeatureMode::SimsOnly => 3,
            FeatureMode::SimsPlusDiffs => 3 + 2 * clip_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub feature_mode: FeatureMode,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lambda_score: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            feature_mode: FeatureMode::SimsOnly,
            hidden_width: 32,
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 200,
            seed: 0,
            lambda_score: DEFAULT_LAMBDA_SCORE,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lambda_score > 0.0) {
            return Err(Error::Config("lambda_score must be positive".into()));
        }
        Ok(())
    }
}

/// Embedding keys a feature vector is computed from.
#[derive(Debug, Clone, Copy)]
pub struct FeatureRefs<'a> {
    pub input: &'a str,
    pub output: &'a str,
    pub ground_truth: &'a str,
    pub source_prompt: Option<&'a str>,
    pub target_prompt: Option<&'a str>,
}

impl<'a> From<&'a SyntheticSample> for FeatureRefs<'a> {
    fn from(s: &'a SyntheticSample) -> Self {
        Self {
            input: &s.input_key,
            output: &s.candidate_key,
            ground_truth: &s.gt_key,
            source_prompt: Some(&s.input_prompt_key),
            target_prompt: Some(&s.target_prompt_key),
        }
    }
}

impl<'a> TryFrom<&'a ScoredRecord> for FeatureRefs<'a> {
    type Error = Error;

    fn try_from(r: &'a ScoredRecord) -> Result<Self> {
        let ground_truth = r
            .gt_key
            .as_deref()
            .ok_or_else(|| Error::InvalidRecord(format!("record `{}` has no gt_key", r.record_id)))?;
        Ok(Self {
            input: &r.input_key,
            output: &r.output_key,
            ground_truth,
            source_prompt: r.input_prompt_key.as_deref(),
            target_prompt: r.target_prompt_key.as_deref(),
        })
    }
}

/// Without prompt keys the prompt shift is the zero vector, which makes
/// CLIP-D zero.
pub fn featurize(refs: FeatureRefs<'_>, emb: &Embeddings, mode: FeatureMode) -> Result<Vec<f64>> {
    let input = emb.clip(refs.input)?.to_f64();
    let output = emb.clip(refs.output)?.to_f64();
    let gt = emb.clip(refs.ground_truth)?.to_f64();
    let text_shift: Vec<f64> = match (refs.source_prompt, refs.target_prompt) {
        (Some(src), Some(tgt)) => {
            let (src, tgt) = (emb.clip(src)?.to_f64(), emb.clip(tgt)?.to_f64());
            if src.len() != tgt.len() {
                return Err(Error::DimensionMismatch {
                    expected: src.len(),
                    actual: tgt.len(),
                });
            }
            tgt.iter().zip(&src).map(|(t, s)| t - s).collect()
        }
        _ => vec![0.0; input.len()],
    };
    if output.len() != input.len() {
        return Err(Error::DimensionMismatch {
            expected: input.len(),
            actual: output.len(),
        });
    }
    let image_shift: Vec<f64> = output.iter().zip(&input).map(|(o, i)| o - i).collect();
    let clip_d = cosine(&image_shift, &text_shift)?;
    let clip_i = clip_image_sim(&output, &gt)?;
    let dino_i = dino_image_sim(emb.dino(refs.output)?.values(), emb.dino(refs.ground_truth)?.values())?;
    let mut features = vec![clip_d, clip_i, dino_i];
    if mode == FeatureMode::SimsPlusDiffs {
        features.extend(image_shift);
        features.extend(text_shift);
    }
    Ok(features)
}

/// Single-hidden-layer parameters. `w1` is row-major, one row per hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    pub feature_dim: usize,
    pub hidden_width: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ProbeParams {
    pub fn zeros(feature_dim: usize, hidden_width: usize) -> Self {
        Self {
            feature_dim,
            hidden_width,
            w1: vec![0.0; feature_dim * hidden_width],
            b1: vec![0.0; hidden_width],
            w2: vec![0.0; hidden_width],
            b2: 0.0,
        }
    }

    /// Every weight and bias drawn from uniform(-0.1, 0.1).
    pub fn init(feature_dim: usize, hidden_width: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(feature_dim, hidden_width);
        for v in p.values_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        p
    }

    pub fn num_values(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }

    fn axpy(&mut self, alpha: f64, other: &ProbeParams) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += alpha * b;
        }
    }

    /// Text format: a JSON header line, then `hidden_width` rows of W1, then
    /// one row each for b1, w2 and b2. Numbers carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{{\"feature_dim\":{},\"hidden_width\":{}}}\n",
            self.feature_dim, self.hidden_width
        );
        let mut row = |vals: &[f64]| {
            let cells: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        };
        for r in self.w1.chunks(self.feature_dim) {
            row(r);
        }
        row(&self.b1);
        row(&self.w2);
        row(&[self.b2]);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            feature_dim: usize,
            hidden_width: usize,
        }
        let mut lines = text.lines();
        let header: Header = serde_json::from_str(lines.next().unwrap_or_default())
            .map_err(|e| Error::Format(format!("probe params header: {e}")))?;
        if header.feature_dim == 0 || header.hidden_width == 0 {
            return Err(Error::Format("probe params header has a zero size".into()));
        }
        let mut parse_row = |expected: usize, what: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("probe params truncated before {what}")))?;
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("{what}: `{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != expected {
                return Err(Error::Format(format!("{what}: expected {expected} values, got {}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("{what}: non-finite value")));
            }
            Ok(row)
        };
        let mut w1 = Vec::with_capacity(header.feature_dim * header.hidden_width);
        for i in 0..header.hidden_width {
            w1.extend(parse_row(header.feature_dim, &format!("W1 row {i}"))?);
        }
        let b1 = parse_row(header.hidden_width, "b1")?;
        let w2 = parse_row(header.hidden_width, "w2")?;
        let b2 = parse_row(1, "b2")?[0];
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Format("trailing data after probe params".into()));
        }
        Ok(Self {
            feature_dim: header.feature_dim,
            hidden_width: header.hidden_width,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    sig: f64,
    score: f64,
}

fn activations(params: &ProbeParams, x: &[f64]) -> Result<Activations> {
    if x.len() != params.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: params.feature_dim,
            actual: x.len(),
        });
    }
    let pre: Vec<f64> = params
        .w1
        .chunks(params.feature_dim)
        .zip(&params.b1)
        .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect();
    let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
    let out = hidden.iter().zip(&params.w2).map(|(h, w)| h * w).sum::<f64>() + params.b2;
    if !out.is_finite() {
        return Err(Error::Numerical(format!("non-finite output pre-activation {out}")));
    }
    let sig = sigmoid(out);
    Ok(Activations {
        pre,
        hidden,
        sig,
        score: SCORE_MAX * sig,
    })
}

/// Predicted score on [0, 10].
pub fn forward(params: &ProbeParams, x: &[f64]) -> Result<f64> {
    Ok(activations(params, x)?.score)
}

pub fn score_loss(predicted: f64, target: f64, lambda_score: f64) -> f64 {
    lambda_score * (predicted - target).abs()
}

/// Exact gradient of `score_loss(forward(params, x), target)`. The
/// subgradient of `|.|` at zero is taken as 0, as is the relu derivative at 0.
pub fn backward(params: &ProbeParams, x: &[f64], target: f64, lambda_score: f64) -> Result<ProbeParams> {
    let act = activations(params, x)?;
    let mut grad = ProbeParams::zeros(params.feature_dim, params.hidden_width);
    let diff = act.score - target;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        return Ok(grad);
    };
    let d_out = lambda_score * sign * SCORE_MAX * act.sig * (1.0 - act.sig);
    grad.b2 = d_out;
    for j in 0..params.hidden_width {
        grad.w2[j] = d_out * act.hidden[j];
        if act.pre[j] > 0.0 {
            let d_pre = d_out * params.w2[j];
            grad.b1[j] = d_pre;
            let row = &mut grad.w1[j * params.feature_dim..(j + 1) * params.feature_dim];
            for (g, v) in row.iter_mut().zip(x) {
                *g = d_pre * v;
            }
        }
    }
    if grad.values().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok(grad)
}

/// Mean score loss over a dataset.
pub fn mean_loss(params: &ProbeParams, features: &[Vec<f64>], targets: &[f64], lambda_score: f64) -> Result<f64> {
    let mut total = 0.0;
    for (x, &t) in features.iter().zip(targets) {
        total += score_loss(forward(params, x)?, t, lambda_score);
    }
    Ok(total / features.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean loss over the mini-batches seen during the epoch.
    pub batch_loss: f64,
    /// Mean loss over the full training set for the parameters kept after the epoch.
    pub train_loss: f64,
    /// Step size for the next epoch.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub n_train: usize,
    pub feature_dim: usize,
}

/// Gradient descent on pre-computed features. Targets are on [0, 10].
pub fn train_on_features(features: &[Vec<f64>], targets: &[f64], config: &ProbeConfig) -> Result<(ProbeParams, TrainingLog)> {
    config.validate()?;
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: targets.len(),
        });
    }
    let Some(first) = features.first() else {
        return Err(Error::DegenerateData("no training examples".into()));
    };
    let feature_dim = first.len();
    if let Some(bad) = features.iter().find(|f| f.len() != feature_dim) {
        return Err(Error::DimensionMismatch {
            expected: feature_dim,
            actual: bad.len(),
        });
    }
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(Error::DegenerateData(format!(
            "all {} targets equal {}",
            targets.len(),
            targets[0]
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ProbeParams::init(feature_dim, config.hidden_width, &mut rng);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut log = TrainingLog {
        epochs: Vec::with_capacity(config.epochs),
        n_train: features.len(),
        feature_dim,
    };
    let mut learning_rate = config.learning_rate;
    let mut best_loss = mean_loss(&params, features, targets, config.lambda_score)?;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = 0.0;
        let mut next = params.clone();
        for batch in order.chunks(config.batch_size) {
            let mut grad = ProbeParams::zeros(feature_dim, config.hidden_width);
            for &i in batch {
                batch_losses += score_loss(forward(&next, &features[i])?, targets[i], config.lambda_score);
                grad.axpy(1.0, &backward(&next, &features[i], targets[i], config.lambda_score)?);
            }
            next.axpy(-learning_rate / batch.len() as f64, &grad);
        }
        let loss = mean_loss(&next, features, targets, config.lambda_score)?;
        // an epoch that raises the full-set loss is undone and the step halved
        if loss <= best_loss {
            params = next;
            best_loss = loss;
        } else {
            learning_rate *= 0.5;
        }
        log.epochs.push(EpochLog {
            epoch,
            batch_loss: batch_losses / features.len() as f64,
            train_loss: best_loss,
            learning_rate,
        });
    }
    Ok((params, log))
}

/// Features and `[0, 10]` targets for every labeled record.
pub fn training_set(records: &[ScoredRecord], emb: &Embeddings, mode: FeatureMode) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for r in records {
        let Some(score) = r.score.filter(|_| r.source != Source::Excluded) else {
            continue;
        };
        features.push(featurize(FeatureRefs::try_from(r)?, emb, mode)?);
        targets.push(score * SCORE_MAX);
    }
    Ok((features, targets))
}

pub fn train(records: &[ScoredRecord], emb: &Embeddings, config: &ProbeConfig) -> Result<(ProbeParams, TrainingLog)> {
    let (features, targets) = training_set(records, emb, config.feature_mode)?;
    train_on_features(&features, &targets, config)
}

/// Gap to the maximum score.
pub fn reward_loss(score_0_10: f64) -> f64 {
    SCORE_MAX - score_0_10
}

pub fn total_reward_loss(l_pre: f64, score_0_10: f64, lambda_reward: f64) -> f64 {
    l_pre + lambda_reward * reward_loss(score_0_10)
}
