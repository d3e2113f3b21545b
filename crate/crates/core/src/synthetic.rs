//! Score assignment for candidates produced by editing methods.
//!
//! Each sample is labeled by the first matching rule:
//!
//! | # | condition                                                       | label    |
//! |---|-----------------------------------------------------------------|----------|
//! | 1 | role is ground truth                                            | 1.0      |
//! | 2 | role is input copy                                              | 0.0      |
//! | 3 | method in the negative bucket                                   | 0.0      |
//! | 4 | CLIP-D(input -> candidate) <= 0                                 | 0.0      |
//! | 5 | CLIP-I(candidate, gt) <= tau_clip_i and DINO-I <= tau_dino_i    | 0.0      |
//! | 6 | method in the positive bucket and CLIP-D < tau_clip_d           | 0.5      |
//! | 7 | method in the positive bucket and CLIP-D >= tau_clip_d          | 1.0      |
//! | 8 | anything else                                                   | excluded |

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{clip_directional, clip_image_sim, dino_image_sim, percentile};
use crate::store::Embeddings;
use crate::types::{Method, Role, ScoredRecord, Source, SyntheticSample, Thresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerConfig {
    pub negative_methods: BTreeSet<Method>,
    pub positive_methods: BTreeSet<Method>,
    pub tau_clip_d: f64,
    pub threshold_percentile: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self {
            negative_methods: [Method::DiffEdit, Method::Pix2PixZero, Method::SDEdit, Method::Text2LIVE]
                .into_iter()
                .collect(),
            positive_methods: [Method::MagicBrush, Method::AURORA].into_iter().collect(),
            tau_clip_d: 0.2,
            threshold_percentile: 5.0,
        }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.negative_methods.intersection(&self.positive_methods).next() {
            return Err(Error::Config(format!("method {m} is in both buckets")));
        }
        if !(-1.0..=1.0).contains(&self.tau_clip_d) {
            return Err(Error::Config(format!("tau_clip_d {} outside [-1, 1]", self.tau_clip_d)));
        }
        if !(self.threshold_percentile > 0.0 && self.threshold_percentile < 100.0) {
            return Err(Error::Config(format!(
                "threshold percentile {} outside (0, 100)",
                self.threshold_percentile
            )));
        }
        Ok(())
    }
}

/// Which rule produced a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    GroundTruth = 1,
    InputCopy = 2,
    NegativeMethod = 3,
    WrongDirection = 4,
    VisuallyFar = 5,
    PartialEdit = 6,
    SuccessfulEdit = 7,
    Unlabeled = 8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdStats {
    pub thresholds: Thresholds,
    pub percentile: f64,
    pub n_pairs: usize,
}

/// CLIP-I and DINO-I between each distinct (input, ground truth) pair.
/// Pairs whose embeddings cannot be resolved are skipped when `skip_missing`.
fn pair_similarities(samples: &[SyntheticSample], emb: &Embeddings, skip_missing: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut seen = HashSet::new();
    let (mut clip, mut dino) = (Vec::new(), Vec::new());
    for s in samples {
        if !seen.insert((s.input_key.as_str(), s.gt_key.as_str())) {
            continue;
        }
        let sims = (|| -> Result<(f64, f64)> {
            let c = clip_image_sim(emb.clip(&s.input_key)?.values(), emb.clip(&s.gt_key)?.values())?;
            let d = dino_image_sim(emb.dino(&s.input_key)?.values(), emb.dino(&s.gt_key)?.values())?;
            Ok((c, d))
        })();
        match sims {
            Ok((c, d)) => {
                clip.push(c);
                dino.push(d);
            }
            Err(Error::MissingEmbedding(_)) if skip_missing => {}
            Err(e) => return Err(e),
        }
    }
    Ok((clip, dino))
}

fn thresholds_from(clip: &[f64], dino: &[f64], config: &LabelerConfig) -> Result<ThresholdStats> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("no resolvable (input, ground truth) pairs".into()));
    }
    let p = config.threshold_percentile;
    Ok(ThresholdStats {
        thresholds: Thresholds::new(percentile(clip, p)?, percentile(dino, p)?, config.tau_clip_d)?,
        percentile: p,
        n_pairs: clip.len(),
    })
}

/// Percentile thresholds over the CLIP-I / DINO-I similarity of every
/// distinct (input, ground truth) pair in the manifest.
pub fn compute_thresholds(samples: &[SyntheticSample], emb: &Embeddings, config: &LabelerConfig) -> Result<ThresholdStats> {
    config.validate()?;
    let (clip, dino) = pair_similarities(samples, emb, false)?;
    thresholds_from(&clip, &dino, config)
}

pub fn classify(sample: &SyntheticSample, thresholds: &Thresholds, emb: &Embeddings, config: &LabelerConfig) -> Result<Rule> {
    match sample.role {
        Role::GroundTruth => return Ok(Rule::GroundTruth),
        Role::InputCopy => return Ok(Rule::InputCopy),
        Role::Candidate => {}
    }
    if config.negative_methods.contains(&sample.method) {
        return Ok(Rule::NegativeMethod);
    }

    let input = emb.clip(&sample.input_key)?.values();
    let candidate = emb.clip(&sample.candidate_key)?.values();
    let src = emb.clip(&sample.input_prompt_key)?.values();
    let tgt = emb.clip(&sample.target_prompt_key)?.values();
    let clip_d = clip_directional(input, candidate, src, tgt)?;
    if clip_d <= 0.0 {
        return Ok(Rule::WrongDirection);
    }

    let gt = emb.clip(&sample.gt_key)?.values();
    let clip_i = clip_image_sim(candidate, gt)?;
    let dino_i = dino_image_sim(emb.dino(&sample.candidate_key)?.values(), emb.dino(&sample.gt_key)?.values())?;
    if clip_i <= thresholds.tau_clip_i && dino_i <= thresholds.tau_dino_i {
        return Ok(Rule::VisuallyFar);
    }

    if config.positive_methods.contains(&sample.method) {
        return Ok(if clip_d < thresholds.tau_clip_d {
            Rule::PartialEdit
        } else {
            Rule::SuccessfulEdit
        });
    }
    Ok(Rule::Unlabeled)
}

impl Rule {
    pub fn label(self) -> (Option<f64>, Source) {
        match self {
            Rule::GroundTruth => (Some(1.0), Source::GroundTruth),
            Rule::InputCopy => (Some(0.0), Source::InputCopy),
            Rule::NegativeMethod | Rule::WrongDirection | Rule::VisuallyFar => (Some(0.0), Source::Synthetic),
            Rule::PartialEdit => (Some(0.5), Source::Synthetic),
            Rule::SuccessfulEdit => (Some(1.0), Source::Synthetic),
            Rule::Unlabeled => (None, Source::Excluded),
        }
    }
}

pub fn assign_synthetic_score(
    sample: &SyntheticSample,
    thresholds: &Thresholds,
    emb: &Embeddings,
    config: &LabelerConfig,
) -> Result<ScoredRecord> {
    let (score, source) = classify(sample, thresholds, emb, config)?.label();
    Ok(ScoredRecord {
        record_id: sample.sample_id.clone(),
        input_key: sample.input_key.clone(),
        output_key: sample.candidate_key.clone(),
        gt_key: Some(sample.gt_key.clone()),
        input_prompt_key: Some(sample.input_prompt_key.clone()),
        target_prompt_key: Some(sample.target_prompt_key.clone()),
        method: Some(sample.method),
        instruction: sample.instruction.clone(),
        score,
        source,
        question: None,
        answer: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleError {
    pub index: usize,
    pub sample_id: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub thresholds: ThresholdStats,
    /// Manifest order, failed samples omitted.
    pub records: Vec<ScoredRecord>,
    pub errors: Vec<SampleError>,
}

/// Computes thresholds once and labels every sample in parallel on the
/// current rayon pool. Output order follows the manifest. In strict mode
/// the first per-sample error aborts the batch.
pub fn label_dataset(samples: &[SyntheticSample], emb: &Embeddings, config: &LabelerConfig, strict: bool) -> Result<LabeledDataset> {
    config.validate()?;
    if samples.is_empty() {
        return Ok(LabeledDataset {
            thresholds: ThresholdStats {
                thresholds: Thresholds::new(0.0, 0.0, config.tau_clip_d)?,
                percentile: config.threshold_percentile,
                n_pairs: 0,
            },
            records: Vec::new(),
            errors: Vec::new(),
        });
    }
    let (clip, dino) = pair_similarities(samples, emb, !strict)?;
    let stats = thresholds_from(&clip, &dino, config)?;
    let results: Vec<Result<ScoredRecord>> = samples
        .par_iter()
        .map(|s| assign_synthetic_score(s, &stats.thresholds, emb, config))
        .collect();

    let mut records = Vec::with_capacity(samples.len());
    let mut errors = Vec::new();
    for (index, (sample, result)) in samples.iter().zip(results).enumerate() {
        match result {
            Ok(r) => records.push(r),
            Err(e) if strict => return Err(e),
            Err(e) => errors.push(SampleError {
                index,
                sample_id: sample.sample_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok(LabeledDataset {
        thresholds: stats,
        records,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::EmbeddingStore;
    use crate::types::EmbeddingVector;

    fn ev(key: &str, v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(key, v.to_vec()).unwrap()
    }

    fn sample(id: &str, method: Method, role: Role, candidate: &str) -> SyntheticSample {
        SyntheticSample {
            sample_id: id.into(),
            instruction: "add a hat".into(),
            input_prompt: "a man".into(),
            target_prompt: "a man wearing a hat".into(),
            method,
            role,
            input_key: "in".into(),
            gt_key: "gt".into(),
            candidate_key: candidate.into(),
            input_prompt_key: "po".into(),
            target_prompt_key: "pe".into(),
        }
    }

    /// Text shift is +y; input at x, gt at x+y. Candidates placed so CLIP-D
    /// takes a chosen value c: candidate = input + (0, c, sqrt(1-c^2), 0).
    fn fixture(extra: &[(&str, [f32; 4], [f32; 3])]) -> Embeddings {
        let mut clip = EmbeddingStore::new(4).unwrap();
        let mut dino = EmbeddingStore::new(3).unwrap();
        for (k, v) in [
            ("in", [1.0, 0.0, 0.0, 0.0]),
            ("gt", [1.0, 1.0, 0.0, 0.0]),
            ("po", [1.0, 0.0, 0.0, 1.0]),
            ("pe", [1.0, 1.0, 0.0, 1.0]),
        ] {
            clip.insert(ev(k, &v)).unwrap();
        }
        dino.insert(ev("in", &[1.0, 0.0, 0.0])).unwrap();
        dino.insert(ev("gt", &[1.0, 1.0, 0.0])).unwrap();
        for (k, c, d) in extra {
            clip.insert(ev(k, c)).unwrap();
            dino.insert(ev(k, d)).unwrap();
        }
        Embeddings::new(clip, dino)
    }

    fn planted(c: f32) -> [f32; 4] {
        [1.0, c, (1.0 - c * c).sqrt(), 0.0]
    }

    #[test]
    fn role_rules_do_not_touch_embeddings() {
        let emb = fixture(&[]);
        let t = Thresholds::new(0.5, 0.5, 0.2).unwrap();
        let cfg = LabelerConfig::default();
        let r = assign_synthetic_score(&sample("g", Method::GroundTruth, Role::GroundTruth, "gt"), &t, &emb, &cfg).unwrap();
        assert_eq!((r.score, r.source), (Some(1.0), Source::GroundTruth));
        let r = assign_synthetic_score(&sample("i", Method::InputCopy, Role::InputCopy, "in"), &t, &emb, &cfg).unwrap();
        assert_eq!((r.score, r.source), (Some(0.0), Source::InputCopy));
        // negative bucket never resolves the candidate
        let r = assign_synthetic_score(&sample("s", Method::SDEdit, Role::Candidate, "nowhere"), &t, &emb, &cfg).unwrap();
        assert_eq!((r.score, r.source), (Some(0.0), Source::Synthetic));
    }

    #[test]
    fn planted_partial_edit() {
        let emb = fixture(&[("mb", planted(0.15), [1.0, 1.0, 0.0])]);
        let cfg = LabelerConfig::default();
        let stats = compute_thresholds(&[sample("m", Method::MagicBrush, Role::Candidate, "mb")], &emb, &cfg).unwrap();
        let d = clip_directional(
            emb.clip("in").unwrap().values(),
            emb.clip("mb").unwrap().values(),
            emb.clip("po").unwrap().values(),
            emb.clip("pe").unwrap().values(),
        )
        .unwrap();
        assert!((d - 0.15).abs() < 1e-6, "{d}");
        let s = sample("m", Method::MagicBrush, Role::Candidate, "mb");
        assert_eq!(classify(&s, &stats.thresholds, &emb, &cfg).unwrap(), Rule::PartialEdit);
        assert_eq!(assign_synthetic_score(&s, &stats.thresholds, &emb, &cfg).unwrap().score, Some(0.5));
    }

    #[test]
    fn thresholds_constant_and_evenly_spaced() {
        // every pair at CLIP-I 0.9: gt = (0.9, sqrt(1-0.81)) against input (1, 0)
        let mut clip = EmbeddingStore::new(2).unwrap();
        let mut dino = EmbeddingStore::new(2).unwrap();
        let mut samples = Vec::new();
        let g = (1.0f64 - 0.81).sqrt();
        for i in 0..10 {
            let (ik, gk) = (format!("in{i}"), format!("gt{i}"));
            clip.insert(ev(&ik, &[1.0, 0.0])).unwrap();
            clip.insert(ev(&gk, &[0.9, g as f32])).unwrap();
            dino.insert(ev(&ik, &[1.0, 0.0])).unwrap();
            dino.insert(ev(&gk, &[1.0, 0.0])).unwrap();
            let mut s = sample(&format!("s{i}"), Method::Other, Role::Candidate, &gk);
            s.input_key = ik;
            s.gt_key = gk;
            samples.push(s);
        }
        let emb = Embeddings::new(clip, dino);
        let stats = compute_thresholds(&samples, &emb, &LabelerConfig::default()).unwrap();
        let expected = clip_image_sim(&[1.0f32, 0.0], &[0.9f32, g as f32]).unwrap();
        assert_eq!(stats.thresholds.tau_clip_i, expected);
        assert!((stats.thresholds.tau_clip_i - 0.9).abs() < 1e-6);
        assert_eq!(stats.thresholds.tau_dino_i, 1.0);
        assert_eq!(stats.n_pairs, 10);

        // 50 evenly spaced sims 0.50..0.99 at p=5 -> third smallest
        let sims: Vec<f64> = (0..50).map(|i| 0.50 + 0.01 * i as f64).collect();
        let stats = thresholds_from(&sims, &sims, &LabelerConfig::default()).unwrap();
        assert_eq!(stats.thresholds.tau_clip_i, sims[2]);
    }

    #[test]
    fn thresholds_deduplicate_pairs() {
        let emb = fixture(&[("a", planted(0.3), [0.0, 1.0, 0.0]), ("b", planted(0.4), [0.0, 1.0, 0.0])]);
        let samples = vec![
            sample("1", Method::MagicBrush, Role::Candidate, "a"),
            sample("2", Method::AURORA, Role::Candidate, "b"),
            sample("3", Method::GroundTruth, Role::GroundTruth, "gt"),
        ];
        let stats = compute_thresholds(&samples, &emb, &LabelerConfig::default()).unwrap();
        assert_eq!(stats.n_pairs, 1);
        assert!((stats.thresholds.tau_clip_i - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn empty_pairs_is_an_error() {
        let emb = fixture(&[]);
        assert!(matches!(
            compute_thresholds(&[], &emb, &LabelerConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn missing_embedding_is_reported_not_fatal() {
        let emb = fixture(&[("a", planted(0.5), [1.0, 1.0, 0.0])]);
        let samples = vec![
            sample("ok", Method::MagicBrush, Role::Candidate, "a"),
            sample("bad", Method::AURORA, Role::Candidate, "ghost"),
            sample("gt", Method::GroundTruth, Role::GroundTruth, "gt"),
        ];
        let cfg = LabelerConfig::default();
        let out = label_dataset(&samples, &emb, &cfg, false).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].sample_id, "bad");
        assert!(out.errors[0].message.contains("ghost"));
        assert!(matches!(
            label_dataset(&samples, &emb, &cfg, true),
            Err(Error::MissingEmbedding(k)) if k == "ghost"
        ));
    }

    #[test]
    fn empty_manifest_labels_nothing() {
        let out = label_dataset(&[], &fixture(&[]), &LabelerConfig::default(), true).unwrap();
        assert!(out.records.is_empty() && out.errors.is_empty());
    }

    #[test]
    fn overlapping_buckets_rejected() {
        let mut cfg = LabelerConfig::default();
        cfg.positive_methods.insert(Method::SDEdit);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn positive_scaling_leaves_labels_unchanged() {
        let cands: Vec<(String, [f32; 4], [f32; 3])> = [-0.4f32, 0.05, 0.15, 0.3, 0.9]
            .iter()
            .enumerate()
            .map(|(i, &c)| (format!("c{i}"), planted(c), [0.2 * i as f32, 1.0, 0.5]))
            .collect();
        let extra: Vec<_> = cands.iter().map(|(k, c, d)| (k.as_str(), *c, *d)).collect();
        let emb = fixture(&extra);
        let methods = [Method::MagicBrush, Method::AURORA, Method::CycleDiffusion, Method::MagicBrush, Method::Other];
        let samples: Vec<_> = cands
            .iter()
            .zip(methods)
            .map(|((k, _, _), m)| sample(k, m, Role::Candidate, k))
            .collect();
        let cfg = LabelerConfig::default();
        let base = label_dataset(&samples, &emb, &cfg, true).unwrap();

        let scale = |s: &EmbeddingStore, f: f32| {
            EmbeddingStore::from_vectors(
                s.dim(),
                s.iter()
                    .map(|v| ev(v.key(), &v.values().iter().map(|x| x * f).collect::<Vec<_>>())),
            )
            .unwrap()
        };
        let scaled = Embeddings::new(scale(emb.clip_store(), 3.0), scale(emb.dino_store(), 0.5));
        let again = label_dataset(&samples, &scaled, &cfg, true).unwrap();
        let labels = |d: &LabeledDataset| d.records.iter().map(|r| (r.score, r.source)).collect::<Vec<_>>();
        assert_eq!(labels(&base), labels(&again));
    }
}
