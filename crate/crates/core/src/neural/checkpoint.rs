//! Binary parameter container.
//!
//! Layout (little endian): magic, format version, config JSON, vocabulary
//! tokens, SHA-256 of the vocabulary, then named `f32` tensors with dims.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::train::{GridEncoder, Trained};
use super::{ModelConfig, ModelParams, Tensor};
use crate::error::{Error, Result};
use crate::penman::Vocab;

pub const MAGIC: &[u8; 8] = b"AMRSYNCK";
pub const VERSION: u32 = 1;

/// SHA-256 over the newline-joined vocabulary tokens.
pub fn vocab_hash(vocab: &Vocab) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in vocab.tokens() {
        h.update(t.as_bytes());
        h.update(b"\n");
    }
    h.finalize().into()
}

fn put_u32<W: Write>(w: &mut W, x: u32) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_bytes<W: Write>(w: &mut W, b: &[u8]) -> Result<()> {
    put_u32(w, b.len() as u32)?;
    Ok(w.write_all(b)?)
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_bytes<R: Read>(r: &mut R, limit: usize) -> Result<Vec<u8>> {
    let n = get_u32(r)? as usize;
    if n > limit {
        return Err(bad(format!("field length {n} exceeds {limit}")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn get_string<R: Read>(r: &mut R) -> Result<String> {
    String::from_utf8(get_bytes(r, 1 << 20)?).map_err(|e| bad(e.to_string()))
}

fn bad(msg: String) -> Error {
    Error::Data { line: 0, message: format!("checkpoint: {msg}") }
}

pub fn write_checkpoint<W: Write>(model: &Trained, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_bytes(&mut w, &serde_json::to_vec(&model.params.cfg)?)?;
    let tokens = model.encoder.vocab.tokens();
    put_u32(&mut w, tokens.len() as u32)?;
    for t in tokens {
        put_bytes(&mut w, t.as_bytes())?;
    }
    w.write_all(&vocab_hash(&model.encoder.vocab))?;
    put_u32(&mut w, model.params.tensors.len() as u32)?;
    for t in &model.params.tensors {
        put_bytes(&mut w, t.name.as_bytes())?;
        put_u32(&mut w, t.shape.len() as u32)?;
        for &d in &t.shape {
            put_u32(&mut w, d as u32)?;
        }
        for x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(w.flush()?)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Trained> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a model checkpoint".into()));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let cfg: ModelConfig = serde_json::from_slice(&get_bytes(&mut r, 1 << 20)?)?;
    cfg.validate()?;
    let count = get_u32(&mut r)? as usize;
    let tokens = (0..count).map(|_| get_string(&mut r)).collect::<Result<Vec<_>>>()?;
    let vocab = Vocab::from_tokens(tokens.iter().skip(2));
    if vocab.tokens() != tokens.as_slice() {
        return Err(bad("vocabulary does not start with the reserved tokens".into()));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    if hash != vocab_hash(&vocab) {
        return Err(bad("vocabulary hash mismatch".into()));
    }
    if vocab.len() != cfg.vocab_size {
        return Err(bad(format!("vocabulary has {} tokens, config says {}", vocab.len(), cfg.vocab_size)));
    }
    let n = get_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let name = get_string(&mut r)?;
        let ndim = get_u32(&mut r)? as usize;
        let shape = (0..ndim).map(|_| get_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let mut raw = vec![0u8; len * 4];
        r.read_exact(&mut raw)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        tensors.push(Tensor { name, shape, data });
    }
    let params = ModelParams { cfg: cfg.clone(), tensors };
    params.check_layout()?;
    if !params.is_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(Trained { params, encoder: GridEncoder { vocab, rows: cfg.rows, cols: cfg.cols } })
}

pub fn save(model: &Trained, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<Trained> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
