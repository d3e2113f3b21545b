//! Point-wise and pair-wise evaluation of a simulated evaluator against
//! simulated human ratings.

use adiee::dataset::Scale;
use adiee::eval::{human_to_human, pairwise_eval, pointwise_eval, PairwiseSample, PointwiseSample, Preference};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> adiee::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let methods = ["MagicBrush", "InstructPix2Pix", "SDEdit"];
    let mut pointwise = Vec::new();
    for i in 0..150 {
        let quality: f64 = rng.gen_range(0.0..1.0);
        let human_scores = (0..3)
            .map(|_| ((quality + rng.gen_range(-0.25..0.25)).clamp(0.0, 1.0) * 2.0).round() / 2.0)
            .collect();
        pointwise.push(PointwiseSample {
            id: format!("s{i}"),
            method: methods[i % 3].into(),
            human_scores,
            human_scale: Scale::UNIT,
            model_score: (10.0 * quality + rng.gen_range(-2.5..2.5)).clamp(0.0, 10.0),
        });
    }
    let report = pointwise_eval(&pointwise)?;
    for (m, rho) in &report.per_method_spearman {
        println!("{m:<16} spearman {rho:.4}");
    }
    println!("fisher average   {:.4}", report.fisher_average);
    println!("human-to-human   {:.4}", human_to_human(&pointwise)?);

    let mut pairs = Vec::new();
    for i in 0..300 {
        let (qa, qb): (f64, f64) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
        let human_label = if (qa - qb).abs() < 1.0 {
            Preference::Tie
        } else if qa > qb {
            Preference::A
        } else {
            Preference::B
        };
        pairs.push(PairwiseSample {
            id: format!("p{i}"),
            score_a: qa + rng.gen_range(-1.0..1.0),
            score_b: qb + rng.gen_range(-1.0..1.0),
            human_label,
        });
    }
    for eps in [0.0, 0.5, 1.0, 2.0] {
        println!("pairwise accuracy, tie band {eps}: {:.4}", pairwise_eval(&pairs, eps)?);
    }
    Ok(())
}
