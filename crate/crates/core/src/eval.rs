//! Benchmark protocols: per-method rank correlation with Fisher averaging,
//! inter-rater upper bound, tie-aware pairwise accuracy and leaderboards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_score, Scale};
use crate::error::{Error, Result};
use crate::types::RankedModel;

/// Correlations are clamped to `±(1 - FISHER_CLAMP)` before `atanh`.
pub const FISHER_CLAMP: f64 = 1e-7;

fn default_scale() -> Scale {
    Scale::UNIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSample {
    pub id: String,
    pub method: String,
    pub human_scores: Vec<f64>,
    #[serde(default = "default_scale")]
    pub human_scale: Scale,
    /// Evaluator score on [0, 10].
    pub model_score: f64,
}

impl PointwiseSample {
    pub fn validate(&self) -> Result<()> {
        if self.human_scores.is_empty() {
            return Err(Error::InvalidRecord(format!("sample `{}` has no human scores", self.id)));
        }
        if let Some(&s) = self.human_scores.iter().find(|&&s| !self.human_scale.contains(s)) {
            return Err(Error::Range {
                value: s,
                lo: self.human_scale.lo,
                hi: self.human_scale.hi,
            });
        }
        if !self.model_score.is_finite() {
            return Err(Error::InvalidRecord(format!("sample `{}` has a non-finite model score", self.id)));
        }
        Ok(())
    }

    /// Mean rater score mapped onto [0, 10].
    pub fn human_mean_scaled(&self) -> Result<f64> {
        let mean = self.human_scores.iter().sum::<f64>() / self.human_scores.len() as f64;
        normalize_score(mean.clamp(self.human_scale.lo, self.human_scale.hi), self.human_scale, Scale::TEN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preference {
    A,
    B,
    #[serde(rename = "tie")]
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSample {
    pub id: String,
    pub score_a: f64,
    pub score_b: f64,
    pub human_label: Preference,
}

/// Fractional ranks (1-based); tied values share the mean of their span.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation with fractional-rank tie handling. A constant input
/// makes the coefficient undefined rather than zero.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Undefined(format!("spearman over {} points", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("spearman input contains a non-finite value".into()));
    }
    pearson(&fractional_ranks(xs), &fractional_ranks(ys))
        .ok_or_else(|| Error::Undefined("spearman of a constant input".into()))
}

/// Average of correlations in Fisher z space.
pub fn fisher_average(rs: &[f64]) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::EmptyInput("no correlations to average".into()));
    }
    if let Some(&r) = rs.iter().find(|r| !(r.abs() <= 1.0)) {
        return Err(Error::Range {
            value: r,
            lo: -1.0,
            hi: 1.0,
        });
    }
    let lim = 1.0 - FISHER_CLAMP;
    let mean_z = rs.iter().map(|r| r.clamp(-lim, lim).atanh()).sum::<f64>() / rs.len() as f64;
    Ok(mean_z.tanh())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub per_method_spearman: BTreeMap<String, f64>,
    /// Methods whose correlation is undefined (constant scores or a single sample).
    pub undefined_methods: Vec<String>,
    pub fisher_average: f64,
    pub n_samples: usize,
}

fn group_by_method(samples: &[PointwiseSample]) -> BTreeMap<&str, Vec<&PointwiseSample>> {
    let mut groups: BTreeMap<&str, Vec<&PointwiseSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.method.as_str()).or_default().push(s);
    }
    groups
}

/// Per-method Spearman between the evaluator and the mean human score,
/// Fisher-averaged across methods with a defined correlation.
pub fn pointwise_eval(samples: &[PointwiseSample]) -> Result<PointwiseReport> {
    for s in samples {
        s.validate()?;
    }
    let groups = group_by_method(samples);
    if !groups.values().any(|g| g.len() >= 2) {
        return Err(Error::EmptyInput("no method has at least two samples".into()));
    }
    let mut per_method = BTreeMap::new();
    let mut undefined = Vec::new();
    for (method, group) in groups {
        let model: Vec<f64> = group.iter().map(|s| s.model_score).collect();
        let human = group
            .iter()
            .map(|s| s.human_mean_scaled())
            .collect::<Result<Vec<_>>>()?;
        match spearman(&model, &human) {
            Ok(rho) => {
                per_method.insert(method.to_string(), rho);
            }
            Err(Error::Undefined(_)) => undefined.push(method.to_string()),
            Err(e) => return Err(e),
        }
    }
    let rhos: Vec<f64> = per_method.values().copied().collect();
    let fisher = fisher_average(&rhos).map_err(|_| {
        Error::Undefined("every method has an undefined correlation".into())
    })?;
    Ok(PointwiseReport {
        per_method_spearman: per_method,
        undefined_methods: undefined,
        fisher_average: fisher,
        n_samples: samples.len(),
    })
}

/// Inter-rater upper bound: for every unordered rater pair and method, the
/// Spearman between the two raters; Fisher-averaged over all defined
/// (pair, method) correlations.
pub fn human_to_human(samples: &[PointwiseSample]) -> Result<f64> {
    let max_raters = samples.iter().map(|s| s.human_scores.len()).max().unwrap_or(0);
    if max_raters < 2 {
        return Err(Error::EmptyInput("fewer than two raters".into()));
    }
    let groups = group_by_method(samples);
    let mut rhos = Vec::new();
    for r1 in 0..max_raters {
        for r2 in r1 + 1..max_raters {
            for group in groups.values() {
                let (a, b): (Vec<f64>, Vec<f64>) = group
                    .iter()
                    .filter(|s| s.human_scores.len() > r2)
                    .map(|s| (s.human_scores[r1], s.human_scores[r2]))
                    .unzip();
                match spearman(&a, &b) {
                    Ok(rho) => rhos.push(rho),
                    Err(Error::Undefined(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    fisher_average(&rhos).map_err(|_| Error::Undefined("no defined inter-rater correlation".into()))
}

pub fn pairwise_predict(score_a: f64, score_b: f64, epsilon: f64) -> Preference {
    if score_a - score_b > epsilon {
        Preference::A
    } else if score_b - score_a > epsilon {
        Preference::B
    } else {
        Preference::Tie
    }
}

pub fn pairwise_eval(samples: &[PairwiseSample], epsilon: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no pairwise samples".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Config(format!("tie epsilon {epsilon} must be non-negative")));
    }
    let correct = samples
        .iter()
        .filter(|s| pairwise_predict(s.score_a, s.score_b, epsilon) == s.human_label)
        .count();
    Ok(correct as f64 / samples.len() as f64)
}

/// Descending by score; equal scores ordered by method name.
pub fn rank_models(avg_scores: &BTreeMap<String, f64>) -> Result<Vec<RankedModel>> {
    if avg_scores.is_empty() {
        return Err(Error::EmptyInput("no models to rank".into()));
    }
    let mut entries: Vec<(&String, f64)> = avg_scores.iter().map(|(m, &s)| (m, s)).collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, (method, score))| RankedModel {
            method: method.clone(),
            score,
            rank: i + 1,
        })
        .collect())
}

/// Spearman correlation between the positions two rankings give to their
/// common methods.
pub fn compare_rankings(r1: &[RankedModel], r2: &[RankedModel]) -> Result<f64> {
    let pos2: BTreeMap<&str, usize> = r2.iter().map(|m| (m.method.as_str(), m.rank)).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = r1
        .iter()
        .filter_map(|m| pos2.get(m.method.as_str()).map(|&p| (m.rank as f64, p as f64)))
        .unzip();
    if a.len() < 2 {
        return Err(Error::EmptyInput(format!("rankings share {} method(s)", a.len())));
    }
    spearman(&a, &b)
}
