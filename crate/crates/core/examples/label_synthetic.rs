//! Labels a hand-built manifest of edits to one image and prints the rule
//! that fired for each candidate.

use adiee::synthetic::{classify, label_dataset, LabelerConfig};
use adiee::{EmbeddingStore, EmbeddingVector, Embeddings, Method, Role, SyntheticSample};

fn store(dim: usize, vectors: &[(&str, Vec<f32>)]) -> adiee::Result<EmbeddingStore> {
    EmbeddingStore::from_vectors(
        dim,
        vectors
            .iter()
            .map(|(k, v)| EmbeddingVector::new(*k, v.clone()))
            .collect::<adiee::Result<Vec<_>>>()?,
    )
}

/// Candidate whose image shift has cosine `c` with the prompt shift.
fn planted(c: f32) -> Vec<f32> {
    vec![1.0, c, (1.0 - c * c).sqrt(), 0.0]
}

fn main() -> adiee::Result<()> {
    let clip = store(
        4,
        &[
            ("in", vec![1.0, 0.0, 0.0, 0.0]),
            ("gt", vec![1.0, 1.0, 0.0, 0.0]),
            ("src", vec![1.0, 0.0, 0.0, 1.0]),
            ("tgt", vec![1.0, 1.0, 0.0, 1.0]),
            ("magicbrush", planted(0.15)),
            ("aurora", planted(0.6)),
            ("ip2p", vec![1.0, 0.1, 5.0, 0.0]),
            ("cycle", vec![1.0, 0.8, 0.0, 0.0]),
            ("sdedit", vec![1.0, 0.9, 0.0, 0.0]),
        ],
    )?;
    let dino = store(
        3,
        &[
            ("in", vec![1.0, 0.0, 0.0]),
            ("gt", vec![1.0, 1.0, 0.0]),
            ("magicbrush", vec![1.0, 1.0, 0.0]),
            ("aurora", vec![1.0, 0.9, 0.0]),
            ("ip2p", vec![0.0, 0.0, 1.0]),
            ("cycle", vec![1.0, 1.0, 0.1]),
            ("sdedit", vec![1.0, 1.0, 0.0]),
        ],
    )?;
    let emb = Embeddings::new(clip, dino);

    let sample = |id: &str, method, role, candidate: &str| SyntheticSample {
        sample_id: id.into(),
        instruction: "put a party hat on the dog".into(),
        input_prompt: "a dog on a lawn".into(),
        target_prompt: "a dog wearing a party hat on a lawn".into(),
        method,
        role,
        input_key: "in".into(),
        gt_key: "gt".into(),
        candidate_key: candidate.into(),
        input_prompt_key: "src".into(),
        target_prompt_key: "tgt".into(),
    };
    let samples = vec![
        sample("ground-truth", Method::GroundTruth, Role::GroundTruth, "gt"),
        sample("unchanged", Method::InputCopy, Role::InputCopy, "in"),
        sample("sdedit", Method::SDEdit, Role::Candidate, "sdedit"),
        sample("magicbrush", Method::MagicBrush, Role::Candidate, "magicbrush"),
        sample("aurora", Method::AURORA, Role::Candidate, "aurora"),
        sample("ip2p", Method::InstructPix2Pix, Role::Candidate, "ip2p"),
        sample("cycle", Method::CycleDiffusion, Role::Candidate, "cycle"),
    ];

    let config = LabelerConfig::default();
    let labeled = label_dataset(&samples, &emb, &config, true)?;
    let t = labeled.thresholds.thresholds;
    println!(
        "thresholds: clip_i {:.4}  dino_i {:.4}  clip_d {}",
        t.tau_clip_i, t.tau_dino_i, t.tau_clip_d
    );
    println!("{:<14} {:<18} {:<16} {:>6}", "sample", "method", "rule", "score");
    for (s, r) in samples.iter().zip(&labeled.records) {
        let rule = classify(s, &t, &emb, &config)?;
        let score = r.score.map_or("-".to_string(), |v| v.to_string());
        println!("{:<14} {:<18} {:<16} {:>6}", s.sample_id, s.method.as_str(), format!("{rule:?}"), score);
    }
    Ok(())
}
