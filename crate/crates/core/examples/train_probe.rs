//! Trains the probe scorer on 1,500 items whose label is a clamped CLIP-D
//! and reports held-out rank correlation.

use adiee::eval::spearman;
use adiee::probe::{forward, train_on_features, ProbeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> adiee::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // [CLIP-D, CLIP-I, DINO-I] drawn directly; the target depends on CLIP-D only
    let mut item = || {
        let clip_d: f64 = rng.gen_range(-0.1..1.0);
        let x = vec![clip_d, rng.gen_range(0.3..1.0), rng.gen_range(0.2..1.0)];
        (x, 10.0 * clip_d.clamp(0.0, 1.0))
    };
    let (train_x, train_y): (Vec<_>, Vec<_>) = (0..1200).map(|_| item()).unzip();
    let (test_x, test_y): (Vec<_>, Vec<_>) = (0..300).map(|_| item()).unzip();

    let config = ProbeConfig {
        epochs: 60,
        ..ProbeConfig::default()
    };
    let (params, log) = train_on_features(&train_x, &train_y, &config)?;
    for e in log.epochs.iter().step_by(10) {
        println!("epoch {:>3}  loss {:.4}  step {:.1e}", e.epoch, e.train_loss, e.learning_rate);
    }
    let predicted = test_x.iter().map(|x| forward(&params, x)).collect::<adiee::Result<Vec<_>>>()?;
    println!("held-out spearman {:.4}", spearman(&predicted, &test_y)?);
    println!("\n{}", params.to_text().lines().next().unwrap_or_default());
    Ok(())
}
