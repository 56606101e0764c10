//! Migrating activation outliers into the weights before W8A8 simulation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenpress::quant::{activation_absmax, apply_smoothing, simulate_w8a8, smooth_scales};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut x = DMatrix::from_fn(128, 32, |_, _| rng.random_range(-1.0..1.0));
    for channel in [3, 17] {
        x.column_mut(channel).scale_mut(60.0);
    }
    let w = DMatrix::from_fn(32, 16, |_, _| rng.random_range(-1.0..1.0));
    let exact = &x * &w;
    let rel = |y: &DMatrix<f64>| (y - &exact).norm() / exact.norm();

    println!("no smoothing:  relative error {:.5}", rel(&simulate_w8a8(&x, &w, None)?));
    for alpha in [0.25, 0.5, 0.75] {
        let s = smooth_scales(&activation_absmax(&x), &w, alpha)?;
        let (xs, ws) = apply_smoothing(&x, &w, &s)?;
        let identity = rel(&(&xs * &ws));
        println!(
            "alpha {alpha:.2}:   relative error {:.5} (smoothing identity error {identity:.1e})",
            rel(&simulate_w8a8(&x, &w, Some(alpha))?)
        );
    }
    Ok(())
}
