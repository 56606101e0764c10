//! Greedy max-min diverse selection compared with exhaustive search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenpress::oracle::{divprune_exhaustive, min_pairwise_distance};
use tokenpress::spatial::{divprune_select, Budget, DivDistance};
use tokenpress::TokenSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{:>3} {:>2} {:>10} {:>10} {:>7}  kept", "n", "k", "greedy", "optimum", "ratio");
    for _ in 0..8 {
        let n = rng.random_range(5..=8);
        let k = rng.random_range(2..=4);
        let vectors: Vec<Vec<f32>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let tokens = TokenSet::from_vectors(&vectors)?;
        for distance in [DivDistance::Cosine, DivDistance::Euclidean] {
            let plan = divprune_select(&tokens, Budget::Count(k), distance)?;
            let greedy = min_pairwise_distance(&tokens, &plan.kept, distance);
            let best = divprune_exhaustive(&tokens, k, distance).expect("2 <= k <= n");
            println!(
                "{n:>3} {k:>2} {greedy:>10.4} {:>10.4} {:>7.3}  {:?} ({distance:?})",
                best.objective,
                greedy / best.objective,
                plan.kept
            );
        }
    }
    Ok(())
}
