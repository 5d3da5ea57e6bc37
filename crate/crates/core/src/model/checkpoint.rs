//! Binary checkpoint container.
//!
//! Layout (all integers little-endian `u32`, strings as length + UTF-8 bytes):
//! magic `RETROMIX`, format version, config entry count then `key`/`value` strings,
//! vocabulary size then tokens, tensor count then per tensor: name, rank, dims and
//! the values as little-endian `f32`, in layout declaration order.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{Layout, ModelConfig, ModelError, ModelParams, Vocab};

const MAGIC: &[u8; 8] = b"RETROMIX";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| ModelError::Checkpoint(format!("truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn get_str<R: Read>(r: &mut R) -> Result<String, ModelError> {
    let n = get_u32(r)? as usize;
    if n > 1 << 20 {
        return Err(ModelError::Checkpoint(format!("string length {n} is implausible")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)
        .map_err(|e| ModelError::Checkpoint(format!("truncated: {e}")))?;
    String::from_utf8(b).map_err(|_| ModelError::Checkpoint("string is not UTF-8".into()))
}

pub fn save_checkpoint<W: Write>(mut w: W, params: &ModelParams, vocab: &Vocab) -> Result<(), ModelError> {
    if vocab.len() != params.config.vocab_size {
        return Err(ModelError::VocabMismatch(format!(
            "vocabulary has {} tokens, config expects {}",
            vocab.len(),
            params.config.vocab_size
        )));
    }
    w.write_all(MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    let pairs = params.config.to_pairs();
    put_u32(&mut w, pairs.len() as u32)?;
    for (k, v) in pairs {
        put_str(&mut w, k)?;
        put_str(&mut w, &v)?;
    }
    put_u32(&mut w, vocab.len() as u32)?;
    for t in vocab.tokens() {
        put_str(&mut w, t)?;
    }
    put_u32(&mut w, params.layout.tensors.len() as u32)?;
    for t in &params.layout.tensors {
        put_str(&mut w, &t.name)?;
        put_u32(&mut w, t.shape.len() as u32)?;
        for &dim in &t.shape {
            put_u32(&mut w, dim as u32)?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for &x in &params.data[t.offset..t.offset + t.len()] {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<(ModelParams, Vocab), ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| ModelError::Checkpoint("file too short for a checkpoint".into()))?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic bytes".into()));
    }
    let version = get_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let n = get_u32(&mut r)?;
    let mut pairs = BTreeMap::new();
    for _ in 0..n {
        let k = get_str(&mut r)?;
        let v = get_str(&mut r)?;
        pairs.insert(k, v);
    }
    let cfg = ModelConfig::from_pairs(&pairs)?;
    let n = get_u32(&mut r)? as usize;
    if n != cfg.vocab_size {
        return Err(ModelError::Checkpoint(format!(
            "vocabulary has {n} tokens, config says {}",
            cfg.vocab_size
        )));
    }
    let tokens = (0..n).map(|_| get_str(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let vocab = Vocab::from_list(tokens)?;
    let layout = Layout::new(&cfg);
    let n = get_u32(&mut r)? as usize;
    if n != layout.tensors.len() {
        return Err(ModelError::Checkpoint(format!(
            "{n} tensors, config implies {}",
            layout.tensors.len()
        )));
    }
    let mut params = ModelParams::zeros(&cfg)?;
    for t in &layout.tensors {
        let name = get_str(&mut r)?;
        let rank = get_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| get_u32(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if name != t.name || shape != t.shape {
            return Err(ModelError::Checkpoint(format!(
                "tensor {name} {shape:?} where {} {:?} was expected",
                t.name, t.shape
            )));
        }
        let mut buf = vec![0u8; t.len() * 4];
        r.read_exact(&mut buf)
            .map_err(|e| ModelError::Checkpoint(format!("truncated tensor {name}: {e}")))?;
        for (dst, chunk) in params.data[t.offset..t.offset + t.len()].iter_mut().zip(buf.chunks_exact(4)) {
            *dst = f64::from(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    if !params.is_finite() {
        return Err(ModelError::Checkpoint("non-finite parameter values".into()));
    }
    Ok((params, vocab))
}
