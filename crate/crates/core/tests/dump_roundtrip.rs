use tokenpress::dump::{
    decode_dump, decode_matrix, decode_weight_dump, encode_dump, encode_matrix, encode_weight_dump, inspect_dump,
    read_dump, write_dump, MatrixBlob, HEADER_LEN, MAGIC,
};
use tokenpress::pipeline::{synthetic_input, SyntheticSpec};
use tokenpress::DumpError;

fn video() -> SyntheticSpec {
    SyntheticSpec {
        frames: 3,
        rows: 4,
        cols: 5,
        dim: 6,
        text_queries: 2,
        ..SyntheticSpec::default()
    }
}

#[test]
fn file_round_trip_preserves_tokens_and_attention() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.tokd");
    let (tokens, bundle) = synthetic_input(&video(), 5).unwrap();
    write_dump(&path, &tokens, Some(&bundle)).unwrap();
    let (back, back_bundle) = read_dump(&path).unwrap();
    assert_eq!(back, tokens);
    assert_eq!(back_bundle.as_ref(), Some(&bundle));
    let header = inspect_dump(&path).unwrap();
    assert_eq!((header.frames, header.grid_h, header.grid_w, header.dim), (3, 4, 5, 6));
}

#[test]
fn corruption_is_detected() {
    let (tokens, bundle) = synthetic_input(&video(), 6).unwrap();
    let bytes = encode_dump(&tokens, Some(&bundle)).unwrap();

    let mut flipped = bytes.clone();
    flipped[HEADER_LEN + 3] ^= 0x40;
    assert!(matches!(decode_dump(&flipped), Err(DumpError::ChecksumMismatch { .. })));

    assert!(matches!(decode_dump(&bytes[..bytes.len() - 2]), Err(DumpError::Truncated { .. })));

    let mut magic = bytes.clone();
    magic[..4].copy_from_slice(b"NOPE");
    assert!(matches!(decode_dump(&magic), Err(DumpError::BadMagic(_))));
    assert_eq!(&bytes[..4], &MAGIC);

    let mut trailing = bytes;
    trailing.push(0);
    assert!(matches!(decode_dump(&trailing), Err(DumpError::TrailingBytes(1))));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(read_dump("/nonexistent/x.tokd"), Err(DumpError::Io { .. })));
}

#[test]
fn matrices_round_trip_in_both_layouts() {
    let m = MatrixBlob {
        rows: 3,
        cols: 4,
        values: (0..12).map(|i| i as f32 * 0.25 - 1.0).collect(),
    };
    assert_eq!(decode_matrix(&encode_matrix(&m).unwrap()).unwrap(), m);
    assert_eq!(decode_weight_dump(&encode_weight_dump(&m).unwrap()).unwrap(), m);
    let (tokens, _) = synthetic_input(&SyntheticSpec::default(), 1).unwrap();
    let plain = encode_dump(&tokens, None).unwrap();
    assert!(matches!(decode_weight_dump(&plain), Err(DumpError::NotAWeightBlob)));
}
