//! Domain types shared by every pipeline stage.
//!
//! Nothing here holds pixels. Images and prompts are referenced by embedding
//! key; vectors live in an [`EmbeddingStore`](crate::store::EmbeddingStore).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-dimension embedding keyed by an opaque string id.
///
/// Values are kept at storage precision (32-bit) and unnormalized; every
/// similarity routine widens to `f64` and normalizes internally.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    key: String,
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(key: impl Into<String>, values: Vec<f32>) -> Result<Self> {
        let key = key.into();
        if values.is_empty() {
            return Err(Error::InvalidRecord(format!("embedding `{key}` has dim 0")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!(
                "embedding `{key}` has non-finite value at index {i}"
            )));
        }
        Ok(Self { key, values })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Editing method that produced a candidate output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    CycleDiffusion,
    DiffEdit,
    #[serde(rename = "Prompt-to-Prompt")]
    PromptToPrompt,
    #[serde(rename = "Pix2Pix-Zero")]
    Pix2PixZero,
    SDEdit,
    Text2LIVE,
    InstructPix2Pix,
    MagicBrush,
    AURORA,
    GroundTruth,
    InputCopy,
    Other,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::CycleDiffusion,
        Method::DiffEdit,
        Method::PromptToPrompt,
        Method::Pix2PixZero,
        Method::SDEdit,
        Method::Text2LIVE,
        Method::InstructPix2Pix,
        Method::MagicBrush,
        Method::AURORA,
        Method::GroundTruth,
        Method::InputCopy,
        Method::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::CycleDiffusion => "CycleDiffusion",
            Method::DiffEdit => "DiffEdit",
            Method::PromptToPrompt => "Prompt-to-Prompt",
            Method::Pix2PixZero => "Pix2Pix-Zero",
            Method::SDEdit => "SDEdit",
            Method::Text2LIVE => "Text2LIVE",
            Method::InstructPix2Pix => "InstructPix2Pix",
            Method::MagicBrush => "MagicBrush",
            Method::AURORA => "AURORA",
            Method::GroundTruth => "GroundTruth",
            Method::InputCopy => "InputCopy",
            Method::Other => "Other",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Candidate,
    GroundTruth,
    InputCopy,
}

/// One manifest row produced by running an editing method on a dataset sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub sample_id: String,
    pub instruction: String,
    pub input_prompt: String,
    pub target_prompt: String,
    pub method: Method,
    pub role: Role,
    /// I^o
    pub input_key: String,
    /// I^e
    pub gt_key: String,
    /// Candidate output being labeled.
    pub candidate_key: String,
    pub input_prompt_key: String,
    pub target_prompt_key: String,
}

impl SyntheticSample {
    pub fn validate(&self) -> Result<()> {
        match self.role {
            Role::GroundTruth if self.candidate_key != self.gt_key => Err(Error::InvalidRecord(
                format!(
                    "sample `{}`: ground_truth role requires candidate_key == gt_key",
                    self.sample_id
                ),
            )),
            Role::InputCopy if self.candidate_key != self.input_key => Err(Error::InvalidRecord(
                format!(
                    "sample `{}`: input_copy role requires candidate_key == input_key",
                    self.sample_id
                ),
            )),
            _ => Ok(()),
        }
    }
}

/// `[I_0, p_1, I_1, ..., p_l, I_l]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSequence {
    pub sequence_id: String,
    pub image_keys: Vec<String>,
    pub instructions: Vec<String>,
}

impl EditSequence {
    pub fn new(
        sequence_id: impl Into<String>,
        image_keys: Vec<String>,
        instructions: Vec<String>,
    ) -> Result<Self> {
        let seq = Self {
            sequence_id: sequence_id.into(),
            image_keys,
            instructions,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instructions.is_empty() {
            return Err(Error::InvalidSequence {
                id: self.sequence_id.clone(),
                reason: "sequence needs at least one edit turn".into(),
            });
        }
        if self.image_keys.len() != self.instructions.len() + 1 {
            return Err(Error::InvalidSequence {
                id: self.sequence_id.clone(),
                reason: format!(
                    "{} images for {} instructions",
                    self.image_keys.len(),
                    self.instructions.len()
                ),
            });
        }
        Ok(())
    }

    /// Number of edit turns `l`.
    pub fn turns(&self) -> usize {
        self.instructions.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_clip_i: f64,
    pub tau_dino_i: f64,
    pub tau_clip_d: f64,
}

impl Thresholds {
    pub fn new(tau_clip_i: f64, tau_dino_i: f64, tau_clip_d: f64) -> Result<Self> {
        for v in [tau_clip_i, tau_dino_i, tau_clip_d] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    value: v,
                    lo: -1.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self {
            tau_clip_i,
            tau_dino_i,
            tau_clip_d,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Synthetic,
    Multiturn,
    GroundTruth,
    InputCopy,
    Excluded,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Synthetic => "synthetic",
            Source::Multiturn => "multiturn",
            Source::GroundTruth => "ground_truth",
            Source::InputCopy => "input_copy",
            Source::Excluded => "excluded",
        }
    }
}

/// A labeled example. `score` is absent exactly when `source` is
/// [`Source::Excluded`]. `question`/`answer` are filled in by the dataset
/// builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record_id: String,
    pub input_key: String,
    pub output_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_prompt_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_prompt_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub instruction: String,
    pub score: Option<f64>,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

impl ScoredRecord {
    pub fn validate(&self) -> Result<()> {
        match (self.source, self.score) {
            (Source::Excluded, None) => {}
            (Source::Excluded, Some(_)) => {
                return Err(Error::InvalidRecord(format!(
                    "record `{}` is excluded but carries a score",
                    self.record_id
                )))
            }
            (_, None) => {
                return Err(Error::InvalidRecord(format!(
                    "record `{}` has no score",
                    self.record_id
                )))
            }
            (_, Some(s)) if !(0.0..=1.0).contains(&s) => {
                return Err(Error::Range {
                    value: s,
                    lo: 0.0,
                    hi: 1.0,
                })
            }
            _ => {}
        }
        if let Some(q) = &self.question {
            if !q.contains(&self.instruction) {
                return Err(Error::InvalidRecord(format!(
                    "record `{}`: question does not contain its instruction",
                    self.record_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub method: String,
    pub score: f64,
    pub rank: usize,
}

/// Benchmark results. Fields not produced by a given protocol stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_method_spearman: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined_methods: Vec<String>,
    pub fisher_average: Option<f64>,
    pub human_to_human: Option<f64>,
    pub pairwise_accuracy: Option<f64>,
    pub ranking: Vec<RankedModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking_agreement: Option<f64>,
}
