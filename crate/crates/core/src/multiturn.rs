//! Labels from multi-turn edit sequences.
//!
//! For a sequence of `l` turns, picking `I_j1` as input and `I_j2` as the
//! ground truth makes every image `I_k` of the sequence a candidate:
//! earlier-or-equal images failed the edit, intermediate ones are partial
//! in proportion to the instructions applied, and later ones over-edited.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EditSequence, ScoredRecord, Source};

pub const INSTRUCTION_SEPARATOR: &str = ", then ";
pub const OVER_EDIT_SCORE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TurnPair {
    pub j1: usize,
    pub j2: usize,
}

impl TurnPair {
    pub fn new(j1: usize, j2: usize, turns: usize) -> Result<Self> {
        if j1 >= j2 || j2 > turns {
            return Err(Error::InvalidIndices { l: turns, j1, j2, k: 0 });
        }
        Ok(Self { j1, j2 })
    }
}

/// Score of image `k` against input `j1` and ground truth `j2` in a sequence
/// of `l` turns.
pub fn assign_multiturn_score(l: usize, j1: usize, j2: usize, k: usize) -> Result<f64> {
    if l < 1 || j1 >= j2 || j2 > l || k > l {
        return Err(Error::InvalidIndices { l, j1, j2, k });
    }
    Ok(if k <= j1 {
        0.0
    } else if k <= j2 {
        (k - j1) as f64 / (j2 - j1) as f64
    } else {
        OVER_EDIT_SCORE
    })
}

pub fn all_pairs(turns: usize) -> Vec<TurnPair> {
    (0..turns)
        .flat_map(|j1| (j1 + 1..=turns).map(move |j2| TurnPair { j1, j2 }))
        .collect()
}

/// Uniform sample without replacement from all `(j1, j2)` pairs, sorted.
/// Returns every pair when `count` covers the population.
pub fn sample_pairs(sequence: &EditSequence, count: usize, seed: u64) -> Result<Vec<TurnPair>> {
    sequence.validate()?;
    if count == 0 {
        return Err(Error::Config("pair count must be at least 1".into()));
    }
    let mut pairs = all_pairs(sequence.turns());
    if count < pairs.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairs.shuffle(&mut rng);
        pairs.truncate(count);
        pairs.sort();
    }
    Ok(pairs)
}

pub fn joined_instruction(sequence: &EditSequence, pair: TurnPair) -> String {
    sequence.instructions[pair.j1..pair.j2].join(INSTRUCTION_SEPARATOR)
}

/// One record per image `I_0..=I_l`.
pub fn expand_pair(sequence: &EditSequence, pair: TurnPair) -> Result<Vec<ScoredRecord>> {
    sequence.validate()?;
    let l = sequence.turns();
    TurnPair::new(pair.j1, pair.j2, l)?;
    let instruction = joined_instruction(sequence, pair);
    let input_key = &sequence.image_keys[pair.j1];
    let gt_key = &sequence.image_keys[pair.j2];
    sequence
        .image_keys
        .iter()
        .enumerate()
        .map(|(k, output_key)| {
            Ok(ScoredRecord {
                record_id: format!("{}:{}-{}:{}", sequence.sequence_id, pair.j1, pair.j2, k),
                input_key: input_key.clone(),
                output_key: output_key.clone(),
                gt_key: Some(gt_key.clone()),
                input_prompt_key: None,
                target_prompt_key: None,
                method: None,
                instruction: instruction.clone(),
                score: Some(assign_multiturn_score(l, pair.j1, pair.j2, k)?),
                source: Source::Multiturn,
                question: None,
                answer: None,
            })
        })
        .collect()
}
