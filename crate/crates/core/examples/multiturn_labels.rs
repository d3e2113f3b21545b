//! Expands a four-turn edit sequence into scored records for every
//! (input, ground truth) pair.

use adiee::multiturn::{all_pairs, expand_pair, sample_pairs};
use adiee::EditSequence;

fn main() -> adiee::Result<()> {
    let seq = EditSequence::new(
        "kitchen",
        (0..=4).map(|k| format!("kitchen/{k}.png")).collect(),
        vec![
            "paint the walls blue".into(),
            "add a plant on the counter".into(),
            "turn on the lights".into(),
            "remove the chair".into(),
        ],
    )?;

    for pair in all_pairs(seq.turns()) {
        let records = expand_pair(&seq, pair)?;
        let scores: Vec<String> = records.iter().map(|r| format!("{:.2}", r.score.unwrap_or(0.0))).collect();
        println!("j1={} j2={}  [{}]  \"{}\"", pair.j1, pair.j2, scores.join(" "), records[0].instruction);
    }

    let picked = sample_pairs(&seq, 3, 42)?;
    println!("\nthree pairs drawn with seed 42: {picked:?}");
    Ok(())
}
