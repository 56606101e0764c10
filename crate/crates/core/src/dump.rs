//! `TOKD` tensor dumps and plain matrix files.
//!
//! Dump layout, all little-endian:
//!
//! ```text
//! "TOKD" | u32 version=1 | u32 dim | u32 frames | u32 grid_h | u32 grid_w | u32 n_text | u8 flags
//! payload: f32 tokens (n x dim) [, f32 cls (n)] [, f32 text attention (n_text x n)]
//! u32 CRC32 of payload
//! ```
//!
//! Flag bit 0 marks the [CLS] vector, bit 1 the text attention and bit 2 a
//! weight blob, in which case the token block holds a `(frames*grid_h*grid_w) x dim`
//! weight matrix and no attention follows.
//!
//! Matrix files carry a 16-byte header (`u64 rows`, `u64 cols`) followed by
//! row-major binary32 values.

use std::fs;
use std::path::Path;

use crate::error::DumpError;
use crate::tokens::{AttentionBundle, TextAttention, TokenSet};

pub const MAGIC: [u8; 4] = *b"TOKD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 29;

pub const FLAG_CLS: u8 = 1 << 0;
pub const FLAG_TEXT: u8 = 1 << 1;
pub const FLAG_WEIGHT: u8 = 1 << 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub version: u32,
    pub dim: u32,
    pub frames: u32,
    pub grid_h: u32,
    pub grid_w: u32,
    pub n_text: u32,
    pub flags: u8,
}

impl DumpHeader {
    pub fn n_tokens(&self) -> usize {
        self.frames as usize * self.grid_h as usize * self.grid_w as usize
    }

    pub fn has_cls(&self) -> bool {
        self.flags & FLAG_CLS != 0
    }

    pub fn has_text(&self) -> bool {
        self.flags & FLAG_TEXT != 0
    }

    pub fn is_weight_blob(&self) -> bool {
        self.flags & FLAG_WEIGHT != 0
    }

    /// Number of f32 values in the payload.
    pub fn payload_values(&self) -> usize {
        let n = self.n_tokens();
        let mut total = n * self.dim as usize;
        if !self.is_weight_blob() {
            if self.has_cls() {
                total += n;
            }
            if self.has_text() {
                total += self.n_text as usize * n;
            }
        }
        total
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        for v in [self.version, self.dim, self.frames, self.grid_h, self.grid_w, self.n_text] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.flags);
    }

    /// Parses the fixed header and checks magic and version.
    pub fn decode(bytes: &[u8]) -> Result<Self, DumpError> {
        if bytes.len() < HEADER_LEN {
            return Err(DumpError::Truncated {
                needed: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(DumpError::BadMagic(magic));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let header = Self {
            version: word(0),
            dim: word(1),
            frames: word(2),
            grid_h: word(3),
            grid_w: word(4),
            n_text: word(5),
            flags: bytes[28],
        };
        if header.version != VERSION {
            return Err(DumpError::VersionMismatch(header.version));
        }
        Ok(header)
    }
}

fn push_values(out: &mut Vec<u8>, values: &[f32], offset: usize) -> Result<(), DumpError> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(DumpError::NonFiniteValue(offset + i));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn finish(mut out: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&out[HEADER_LEN..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Serialises a full token set and optional attention evidence.
pub fn encode_dump(tokens: &TokenSet, bundle: Option<&AttentionBundle>) -> Result<Vec<u8>, DumpError> {
    let grid = tokens.grid().ok_or(DumpError::IncompleteLayout)?;
    if !tokens.is_complete() {
        return Err(DumpError::IncompleteLayout);
    }
    let empty = AttentionBundle::empty();
    let bundle = bundle.unwrap_or(&empty);
    bundle.check_against(tokens)?;

    let mut flags = 0u8;
    if bundle.cls_to_patch().is_some() {
        flags |= FLAG_CLS;
    }
    let n_text = match bundle.text_to_visual() {
        Some(t) => {
            flags |= FLAG_TEXT;
            t.n_text as u32
        }
        None => 0,
    };
    let header = DumpHeader {
        version: VERSION,
        dim: tokens.dim() as u32,
        frames: tokens.frames() as u32,
        grid_h: grid.rows as u32,
        grid_w: grid.cols as u32,
        n_text,
        flags,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_values() * 4 + 4);
    header.encode(&mut out);
    push_values(&mut out, tokens.data(), 0)?;
    let mut offset = tokens.data().len();
    if let Some(cls) = bundle.cls_to_patch() {
        push_values(&mut out, cls, offset)?;
        offset += cls.len();
    }
    if let Some(text) = bundle.text_to_visual() {
        push_values(&mut out, &text.values, offset)?;
    }
    Ok(finish(out))
}

fn payload_floats(bytes: &[u8], header: &DumpHeader) -> Result<Vec<f32>, DumpError> {
    let n_values = header.payload_values();
    let needed = HEADER_LEN + n_values * 4 + 4;
    if bytes.len() < needed {
        return Err(DumpError::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(DumpError::TrailingBytes(bytes.len() - needed));
    }
    let payload = &bytes[HEADER_LEN..needed - 4];
    let stored = u32::from_le_bytes(bytes[needed - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(DumpError::ChecksumMismatch { stored, computed });
    }
    payload
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if v.is_finite() {
                Ok(v)
            } else {
                Err(DumpError::NonFiniteValue(i))
            }
        })
        .collect()
}

/// Parses a dump produced by [`encode_dump`] (or the exporter).
pub fn decode_dump(bytes: &[u8]) -> Result<(TokenSet, Option<AttentionBundle>), DumpError> {
    let header = DumpHeader::decode(bytes)?;
    let mut values = payload_floats(bytes, &header)?;
    let n = header.n_tokens();
    let token_len = n * header.dim as usize;

    let rest = values.split_off(token_len);
    let tokens = TokenSet::from_grid(
        values,
        header.dim as usize,
        header.frames as usize,
        header.grid_h as usize,
        header.grid_w as usize,
    )?;
    if header.is_weight_blob() || !(header.has_cls() || header.has_text()) {
        return Ok((tokens, None));
    }

    let mut rest = rest.into_iter();
    let cls = header.has_cls().then(|| rest.by_ref().take(n).collect::<Vec<_>>());
    let text = header.has_text().then(|| TextAttention {
        n_text: header.n_text as usize,
        n_tokens: n,
        values: rest.collect(),
    });
    let bundle = AttentionBundle::new(cls, text, 0)?;
    Ok((tokens, Some(bundle)))
}

pub fn write_dump(
    path: impl AsRef<Path>,
    tokens: &TokenSet,
    bundle: Option<&AttentionBundle>,
) -> Result<(), DumpError> {
    let path = path.as_ref();
    let bytes = encode_dump(tokens, bundle)?;
    fs::write(path, bytes).map_err(|source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<(TokenSet, Option<AttentionBundle>), DumpError> {
    decode_dump(&read_bytes(path.as_ref())?)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, DumpError> {
    fs::read(path).map_err(|source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Header and validation summary of a dump file, without building a token set.
pub fn inspect_dump(path: impl AsRef<Path>) -> Result<DumpHeader, DumpError> {
    let bytes = read_bytes(path.as_ref())?;
    let header = DumpHeader::decode(&bytes)?;
    payload_floats(&bytes, &header)?;
    Ok(header)
}

/// A dense row-major f32 matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBlob {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

pub fn encode_weight_dump(m: &MatrixBlob) -> Result<Vec<u8>, DumpError> {
    let header = DumpHeader {
        version: VERSION,
        dim: m.cols as u32,
        frames: 1,
        grid_h: m.rows as u32,
        grid_w: 1,
        n_text: 0,
        flags: FLAG_WEIGHT,
    };
    if m.values.len() != m.rows * m.cols {
        return Err(crate::error::ModelError::ShapeMismatch {
            expected: m.rows * m.cols,
            actual: m.values.len(),
        }
        .into());
    }
    let mut out = Vec::with_capacity(HEADER_LEN + m.values.len() * 4 + 4);
    header.encode(&mut out);
    push_values(&mut out, &m.values, 0)?;
    Ok(finish(out))
}

pub fn decode_weight_dump(bytes: &[u8]) -> Result<MatrixBlob, DumpError> {
    let header = DumpHeader::decode(bytes)?;
    if !header.is_weight_blob() {
        return Err(DumpError::NotAWeightBlob);
    }
    let values = payload_floats(bytes, &header)?;
    Ok(MatrixBlob {
        rows: header.n_tokens(),
        cols: header.dim as usize,
        values,
    })
}

pub fn encode_matrix(m: &MatrixBlob) -> Result<Vec<u8>, DumpError> {
    let mut out = Vec::with_capacity(16 + m.values.len() * 4);
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    push_values(&mut out, &m.values, 0)?;
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<MatrixBlob, DumpError> {
    if bytes.len() < 16 {
        return Err(DumpError::Truncated {
            needed: 16,
            found: bytes.len(),
        });
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let needed = 16 + rows * cols * 4;
    if bytes.len() != needed {
        return Err(DumpError::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if v.is_finite() {
                Ok(v)
            } else {
                Err(DumpError::NonFiniteValue(i))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(MatrixBlob { rows, cols, values })
}

/// Reads a weight matrix from either a `TOKD` weight blob or a plain matrix file.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<MatrixBlob, DumpError> {
    let bytes = read_bytes(path.as_ref())?;
    if bytes.starts_with(&MAGIC) {
        decode_weight_dump(&bytes)
    } else {
        decode_matrix(&bytes)
    }
}

pub fn write_matrix(path: impl AsRef<Path>, m: &MatrixBlob) -> Result<(), DumpError> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(m)?).map_err(|source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    })
}
