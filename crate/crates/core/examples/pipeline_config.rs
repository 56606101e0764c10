//! Runs the sample pipeline config and writes its reports to a temporary directory.

use std::path::Path;

use tokenpress::pipeline::{load_config, rates_report, run, write_outputs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/pipeline.toml");
    let config = load_config(&path)?;
    let report = run(&config)?;
    print!("{}", rates_report(&report).to_csv()?);

    let out = std::env::temp_dir().join("tokenpress-example-run");
    let written = write_outputs(&config, &report, &out)?;
    println!("wrote {} into {}", written.join(", "), out.display());
    Ok(())
}
