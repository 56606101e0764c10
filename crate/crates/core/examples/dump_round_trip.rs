//! Writes a synthetic video dump to disk and reads it back.

use tokenpress::dump::{inspect_dump, read_dump, write_dump};
use tokenpress::pipeline::{synthetic_input, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        frames: 4,
        rows: 6,
        cols: 6,
        dim: 32,
        text_queries: 3,
        ..SyntheticSpec::default()
    };
    let (tokens, bundle) = synthetic_input(&spec, 7)?;
    let path = std::env::temp_dir().join("tokenpress-example.tokd");
    write_dump(&path, &tokens, Some(&bundle))?;

    let header = inspect_dump(&path)?;
    println!("{}: {header:?}", path.display());
    println!("file size {} bytes", std::fs::metadata(&path)?.len());

    let (back, back_bundle) = read_dump(&path)?;
    assert_eq!(back, tokens);
    assert_eq!(back_bundle, Some(bundle));
    println!("read back {} tokens of dim {} across {} frames", back.len(), back.dim(), back.frames());
    std::fs::remove_file(&path)?;
    Ok(())
}
