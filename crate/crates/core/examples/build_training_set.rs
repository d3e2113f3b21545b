//! Renders labeled records into question/answer training lines.

use adiee::dataset::{render_training_lines, TemplateBank};
use adiee::seed;
use adiee::{ScoredRecord, Source};

fn record(id: &str, instruction: &str, score: Option<f64>, source: Source) -> ScoredRecord {
    ScoredRecord {
        record_id: id.into(),
        input_key: format!("{id}/in.png"),
        output_key: format!("{id}/out.png"),
        gt_key: None,
        input_prompt_key: None,
        target_prompt_key: None,
        method: None,
        instruction: instruction.into(),
        score,
        source,
        question: None,
        answer: None,
    }
}

fn main() -> adiee::Result<()> {
    let records = vec![
        record("a", "make the sky stormy", Some(1.0), Source::Synthetic),
        record("b", "add a red scarf", Some(0.5), Source::Synthetic),
        record("c", "replace the car with a bike, then make it night", Some(2.0 / 3.0), Source::Multiturn),
        record("d", "remove the lamp", Some(0.0), Source::InputCopy),
        record("e", "turn the cat orange", None, Source::Excluded),
    ];
    let mut rng = seed::rng(7, "build");
    let (lines, summary) = render_training_lines(&records, &TemplateBank::default(), &mut rng)?;
    for l in &lines {
        println!("[{}] Q: {}\n    A: {}", l.record_id, l.question, l.answer);
    }
    println!(
        "\nwritten {}, skipped {}, per source {:?}",
        summary.written, summary.skipped_excluded, summary.per_source
    );
    println!("histogram: {:?}", summary.histogram);
    Ok(())
}
