//! Training-text rendering: question/answer templates, score scales and
//! reward-conditioned prompts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ScoredRecord, Source};

pub const INSTRUCTION_PLACEHOLDER: &str = "[INSTRUCTION]";
pub const SCORE_PLACEHOLDER: &str = "[SCORE]";

pub const DEFAULT_QUESTIONS: [&str; 4] = [
    "Can you rate how successful the edit instruction [INSTRUCTION] has been executed from the first image to the second image with a score from 0 to 10?",
    "Please rate how successful the edit instruction [INSTRUCTION] has been executed from the first image to the second image with a score from 0 to 10.",
    "How successful the edit instruction [INSTRUCTION] has been executed from the first image to the second image? Please respond with a score from 0 to 10.",
    "How successful the edit instruction [INSTRUCTION] has been executed from the first image to the second image? Please output a score from 0 to 10.",
];

pub const DEFAULT_ANSWERS: [&str; 5] = [
    "It is [SCORE].",
    "Sure, [SCORE]",
    "Sure, it is [SCORE]",
    "Sure, the score is [SCORE]",
    "[SCORE]",
];

/// A closed score interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub lo: f64,
    pub hi: f64,
}

impl Scale {
    pub const UNIT: Scale = Scale { lo: 0.0, hi: 1.0 };
    pub const TEN: Scale = Scale { lo: 0.0, hi: 10.0 };
    pub const FIVE: Scale = Scale { lo: 1.0, hi: 5.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid scale [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }
}

/// Affine map of `s` from one scale onto another.
pub fn normalize_score(s: f64, from: Scale, to: Scale) -> Result<f64> {
    if !from.contains(s) {
        return Err(Error::Range {
            value: s,
            lo: from.lo,
            hi: from.hi,
        });
    }
    Ok(to.lo + (s - from.lo) * (to.hi - to.lo) / (from.hi - from.lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    questions: Vec<String>,
    answers: Vec<String>,
}

impl Default for TemplateBank {
    fn default() -> Self {
        Self {
            questions: DEFAULT_QUESTIONS.iter().map(|s| s.to_string()).collect(),
            answers: DEFAULT_ANSWERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TemplateBank {
    pub fn new(questions: Vec<String>, answers: Vec<String>) -> Result<Self> {
        let bank = Self { questions, answers };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.questions.is_empty() || self.answers.is_empty() {
            return Err(Error::Config("template bank needs at least one question and one answer".into()));
        }
        if let Some(q) = self.questions.iter().find(|q| !q.contains(INSTRUCTION_PLACEHOLDER)) {
            return Err(Error::Config(format!("question template lacks {INSTRUCTION_PLACEHOLDER}: {q}")));
        }
        if let Some(a) = self.answers.iter().find(|a| !a.contains(SCORE_PLACEHOLDER)) {
            return Err(Error::Config(format!("answer template lacks {SCORE_PLACEHOLDER}: {a}")));
        }
        Ok(())
    }

    /// Loads a JSON `{"questions": [...], "answers": [...]}` override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bank: TemplateBank = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: source.line(),
            source,
        })?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }
}

pub fn render_question<R: Rng + ?Sized>(instruction: &str, bank: &TemplateBank, rng: &mut R) -> Result<String> {
    if instruction.is_empty() {
        return Err(Error::InvalidRecord("empty instruction".into()));
    }
    let template = &bank.questions[rng.gen_range(0..bank.questions.len())];
    Ok(template.replace(INSTRUCTION_PLACEHOLDER, &format!("\"{instruction}\"")))
}

pub fn render_answer<R: Rng + ?Sized>(score_0_10: f64, bank: &TemplateBank, rng: &mut R) -> Result<String> {
    if !Scale::TEN.contains(score_0_10) {
        return Err(Error::Range {
            value: score_0_10,
            lo: 0.0,
            hi: 10.0,
        });
    }
    let template = &bank.answers[rng.gen_range(0..bank.answers.len())];
    Ok(template.replace(SCORE_PLACEHOLDER, &format!("{score_0_10:.2}")))
}

/// Appends the quality condition, with the score mapped to an integer 1-5
/// (half-up).
pub fn reward_prompt(instruction: &str, score_0_1: f64) -> Result<String> {
    let quality = normalize_score(score_0_1, Scale::UNIT, Scale::FIVE)?;
    let n = (quality + 0.5).floor() as u8;
    Ok(format!("{instruction} The image quality is {n} out of five"))
}

/// One line of the training file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLine {
    pub record_id: String,
    pub input_ref: String,
    pub output_ref: String,
    pub instruction: String,
    pub score: f64,
    pub source: Source,
    pub question: String,
    pub answer: String,
}

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildSummary {
    pub written: usize,
    pub skipped_excluded: usize,
    pub per_source: BTreeMap<String, usize>,
    /// Ten equal-width bins over [0, 1]; 1.0 falls in the last bin.
    pub histogram: Vec<usize>,
}

fn bin_of(score: f64) -> usize {
    ((score * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
}

/// Renders every labeled record; excluded records are counted and skipped.
pub fn render_training_lines<R: Rng + ?Sized>(
    records: &[ScoredRecord],
    bank: &TemplateBank,
    rng: &mut R,
) -> Result<(Vec<TrainingLine>, BuildSummary)> {
    bank.validate()?;
    let mut summary = BuildSummary {
        histogram: vec![0; HISTOGRAM_BINS],
        ..Default::default()
    };
    let mut lines = Vec::with_capacity(records.len());
    for r in records {
        r.validate()?;
        let Some(score) = r.score.filter(|_| r.source != Source::Excluded) else {
            summary.skipped_excluded += 1;
            continue;
        };
        let question = render_question(&r.instruction, bank, rng)?;
        let answer = render_answer(normalize_score(score, Scale::UNIT, Scale::TEN)?, bank, rng)?;
        *summary.per_source.entry(r.source.as_str().to_string()).or_default() += 1;
        summary.histogram[bin_of(score)] += 1;
        summary.written += 1;
        lines.push(TrainingLine {
            record_id: r.record_id.clone(),
            input_ref: r.input_key.clone(),
            output_ref: r.output_key.clone(),
            instruction: r.instruction.clone(),
            score,
            source: r.source,
            question,
            answer,
        });
    }
    Ok((lines, summary))
}

pub fn build_training_file<R: Rng + ?Sized>(
    records: &[ScoredRecord],
    bank: &TemplateBank,
    rng: &mut R,
    out: impl AsRef<Path>,
) -> Result<BuildSummary> {
    let out = out.as_ref();
    let (lines, summary) = render_training_lines(records, bank, rng)?;
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(file);
    for line in &lines {
        serde_json::to_writer(&mut w, line).map_err(|e| Error::io(out, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(out, e))?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// An rng whose first `gen_range` draw lands on index 0.
    fn rng_hitting_first_template(n: usize) -> ChaCha8Rng {
        (0u64..)
            .map(ChaCha8Rng::seed_from_u64)
            .find(|r| r.clone().gen_range(0..n) == 0)
            .unwrap()
    }

    fn record(id: &str, score: Option<f64>, source: Source) -> ScoredRecord {
        ScoredRecord {
            record_id: id.into(),
            input_key: "in".into(),
            output_key: "out".into(),
            gt_key: None,
            input_prompt_key: None,
            target_prompt_key: None,
            method: None,
            instruction: "make the sky red".into(),
            score,
            source,
            question: None,
            answer: None,
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_score(0.5, Scale::UNIT, Scale::TEN).unwrap(), 5.0);
        assert_eq!(normalize_score(1.0, Scale::UNIT, Scale::FIVE).unwrap(), 5.0);
        assert_eq!(normalize_score(1.0, Scale::new(0.0, 2.0).unwrap(), Scale::TEN).unwrap(), 5.0);
        assert!(matches!(normalize_score(1.1, Scale::UNIT, Scale::TEN), Err(Error::Range { .. })));
        assert!(Scale::new(1.0, 1.0).is_err());
    }

    #[test]
    fn first_question_template() {
        let bank = TemplateBank::default();
        let mut rng = rng_hitting_first_template(bank.questions().len());
        assert_eq!(
            render_question("add a hat", &bank, &mut rng).unwrap(),
            "Can you rate how successful the edit instruction \"add a hat\" has been executed from the first image to the second image with a score from 0 to 10?"
        );
        assert!(render_question("", &bank, &mut rng).is_err());
    }

    #[test]
    fn answers_use_two_decimals() {
        let bank = TemplateBank::new(vec!["[INSTRUCTION]".into()], vec!["Sure, the score is [SCORE]".into()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(render_answer(6.0913, &bank, &mut rng).unwrap(), "Sure, the score is 6.09");
        assert_eq!(render_answer(10.0, &bank, &mut rng).unwrap(), "Sure, the score is 10.00");
        assert!(render_answer(10.5, &bank, &mut rng).is_err());
    }

    #[test]
    fn template_frequencies_are_uniform() {
        let bank = TemplateBank::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut q_hits = [0usize; 4];
        let mut a_hits = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            let q = render_question("x", &bank, &mut rng).unwrap();
            let qi = bank.questions().iter().position(|t| t.replace("[INSTRUCTION]", "\"x\"") == q).unwrap();
            q_hits[qi] += 1;
            let a = render_answer(3.0, &bank, &mut rng).unwrap();
            let ai = bank.answers().iter().position(|t| t.replace("[SCORE]", "3.00") == a).unwrap();
            a_hits[ai] += 1;
        }
        for h in q_hits {
            assert!((h as f64 / draws as f64 - 0.25).abs() <= 0.02, "{q_hits:?}");
        }
        for h in a_hits {
            assert!((h as f64 / draws as f64 - 0.2).abs() <= 0.02, "{a_hits:?}");
        }
    }

    #[test]
    fn bank_validation() {
        assert!(matches!(TemplateBank::new(vec![], vec!["[SCORE]".into()]), Err(Error::Config(_))));
        assert!(matches!(TemplateBank::new(vec!["rate it".into()], vec!["[SCORE]".into()]), Err(Error::Config(_))));
        assert!(matches!(TemplateBank::new(vec!["[INSTRUCTION]".into()], vec!["ok".into()]), Err(Error::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bank.json");
        std::fs::write(&p, r#"{"questions": [], "answers": []}"#).unwrap();
        assert!(matches!(TemplateBank::load(&p), Err(Error::Config(_))));
    }

    #[test]
    fn reward_prompts() {
        assert_eq!(reward_prompt("make sky red", 1.0).unwrap(), "make sky red The image quality is 5 out of five");
        assert_eq!(reward_prompt("x", 0.0).unwrap(), "x The image quality is 1 out of five");
        assert_eq!(reward_prompt("x", 0.5).unwrap(), "x The image quality is 3 out of five");
        // 1 + 4 * 0.625 = 3.5 rounds up
        assert_eq!(reward_prompt("x", 0.625).unwrap(), "x The image quality is 4 out of five");
        assert!(reward_prompt("x", 1.2).is_err());
    }

    #[test]
    fn build_counts_and_determinism() {
        let records = vec![
            record("a", Some(0.0), Source::InputCopy),
            record("b", Some(0.5), Source::Synthetic),
            record("c", None, Source::Excluded),
            record("d", Some(1.0), Source::GroundTruth),
        ];
        let bank = TemplateBank::default();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.jsonl"), dir.path().join("2.jsonl"));
        let s1 = build_training_file(&records, &bank, &mut ChaCha8Rng::seed_from_u64(5), &p1).unwrap();
        build_training_file(&records, &bank, &mut ChaCha8Rng::seed_from_u64(5), &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(s1.written, 3);
        assert_eq!(s1.skipped_excluded, 1);
        assert_eq!(s1.histogram.iter().sum::<usize>(), 3);
        assert_eq!(s1.histogram[0], 1);
        assert_eq!(s1.histogram[5], 1);
        assert_eq!(s1.histogram[9], 1);
        let text = std::fs::read_to_string(&p1).unwrap();
        assert_eq!(text.lines().count(), 3);
        let line: TrainingLine = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert_eq!(line.record_id, "b");
        assert!(line.answer.contains("5.00"));
        assert!(line.question.contains("\"make the sky red\""));
    }

    proptest! {
        #[test]
        fn normalize_inverts_and_preserves_order(
            a in 0.0f64..1.0, b in 0.0f64..1.0,
            lo in -50.0f64..50.0, width in 0.1f64..100.0,
        ) {
            let to = Scale::new(lo, lo + width).unwrap();
            let fa = normalize_score(a, Scale::UNIT, to).unwrap();
            let back = normalize_score(fa.clamp(to.lo, to.hi), to, Scale::UNIT).unwrap();
            prop_assert!((back - a).abs() <= 1e-12);
            let fb = normalize_score(b, Scale::UNIT, to).unwrap();
            if a < b { prop_assert!(fa <= fb); }
        }

        #[test]
        fn questions_contain_instruction(instruction in "[a-zA-Z ,']{1,40}", seed in any::<u64>()) {
            let q = render_question(&instruction, &TemplateBank::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(q.contains(&instruction));
        }
    }
}
