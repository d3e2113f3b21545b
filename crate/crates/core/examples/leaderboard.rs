//! Ranks editing models by average evaluator score and compares the result
//! with an arena-style reference ranking.

use std::collections::BTreeMap;

use adiee::eval::{compare_rankings, rank_models};
use adiee::RankedModel;

fn main() -> adiee::Result<()> {
    let rows = [
        ("MagicBrush", 6.15, 1),
        ("CosXL Edit", 5.74, 4),
        ("UltraEdit", 4.63, 2),
        ("InstructPix2Pix", 4.18, 5),
        ("Plug-and-Play", 3.70, 6),
        ("InfEdit", 3.40, 3),
        ("CycleDiffusion", 3.20, 8),
        ("Prompt-to-Prompt", 3.00, 7),
        ("SDEdit", 1.41, 9),
        ("pix2pix-zero", 0.71, 10),
    ];
    let averages: BTreeMap<String, f64> = rows.iter().map(|&(m, s, _)| (m.to_string(), s)).collect();
    let ours = rank_models(&averages)?;
    let arena: Vec<RankedModel> = rows
        .iter()
        .map(|&(m, s, r)| RankedModel {
            method: m.into(),
            score: s,
            rank: r,
        })
        .collect();

    println!("{:>4}  {:<18} {:>6} {:>7}", "rank", "model", "score", "arena");
    for m in &ours {
        let a = arena.iter().find(|r| r.method == m.method).map_or(0, |r| r.rank);
        println!("{:>4}  {:<18} {:>6.2} {:>7}", m.rank, m.method, m.score, a);
    }
    println!("rank agreement (Spearman): {:.4}", compare_rankings(&ours, &arena)?);
    Ok(())
}
