//! Round-to-nearest and GPTQ on one Gaussian layer at several granularities.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tokenpress::quant::{gptq_quantize, quant_eval, quantize_rtn, Granularity, QuantScope, QuantSpec};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = gaussian(&mut rng, 64, 32);
    let mixing = gaussian(&mut rng, 64, 64);
    let x = gaussian(&mut rng, 256, 64) * mixing;

    println!("{:<12} {:>4} {:>12} {:>12}", "granularity", "bits", "rtn mse", "gptq mse");
    for bits in [4, 8] {
        for granularity in [Granularity::PerTensor, Granularity::PerChannel, Granularity::Group(16)] {
            let spec = QuantSpec {
                bits,
                granularity,
                symmetric: true,
                scope: QuantScope::WeightOnly,
            };
            let rtn = quant_eval(&w, &quantize_rtn(&w, &spec)?.dequantize(), &x)?;
            let gptq = quant_eval(&w, &gptq_quantize(&w, &x, &spec)?.dequantize(), &x)?;
            println!(
                "{:<12} {bits:>4} {:>12.6} {:>12.6}",
                format!("{granularity:?}"),
                rtn.output_mse,
                gptq.output_mse
            );
        }
    }
    Ok(())
}
