//! Reward conditioning prompts and reward-feedback loss arithmetic.

use adiee::dataset::reward_prompt;
use adiee::probe::{reward_loss, total_reward_loss, DEFAULT_LAMBDA_REWARD};

fn main() -> adiee::Result<()> {
    for s in [0.0, 0.3, 0.62, 0.875, 1.0] {
        println!("score {s:<5} -> {}", reward_prompt("make it snow", s)?);
    }
    println!();
    for s in [10.0, 6.43, 0.0] {
        println!(
            "scorer {s:>5}: reward loss {:.4}, with diffusion loss 0.5 -> {:.4}",
            reward_loss(s),
            total_reward_loss(0.5, s, DEFAULT_LAMBDA_REWARD)
        );
    }
    Ok(())
}
