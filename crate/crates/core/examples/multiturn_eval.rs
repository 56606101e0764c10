//! Builds both-order dialogues for question pairs and scores simulated answers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenpress::eval::{build_pairs, turn_counts, MultiTurnRecord, QuestionPair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let questions: Vec<QuestionPair> = (0..50)
        .map(|i| QuestionPair::new(format!("img{i:03}"), "What color is the car?", "How many people are visible?"))
        .collect();
    let tasks = build_pairs(&questions)?;
    println!("{} question pairs -> {} dialogues", questions.len(), tasks.len());

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let records: Vec<MultiTurnRecord> = tasks
        .iter()
        .map(|t| {
            let q1 = rng.random_bool(0.7);
            MultiTurnRecord {
                image_id: t.image_id.clone(),
                order: t.order,
                q1_correct: q1,
                q2_correct: rng.random_bool(if q1 { 0.6 } else { 0.3 }),
            }
        })
        .collect();
    let (original, swapped, all) = turn_counts(&records);
    for (label, c) in [("original", original), ("swapped", swapped), ("all", all)] {
        println!(
            "{label:<9} first correct {:>3}/{:<3} both correct {:>3}  conditional accuracy {}",
            c.first_correct,
            c.records,
            c.both_correct,
            c.accuracy()
        );
    }
    Ok(())
}
