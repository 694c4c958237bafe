//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic "SLIPCKPT"
//! 32 bytes  sha256 of every byte after this field
//! 4 bytes   format version (currently 1)
//! 4 bytes   config JSON length, then that many bytes of JSON
//! 4 bytes   tensor record count
//! records   u16 name length + name, u8 rank, u32 dims, f64 data
//! ```
//!
//! The embedded config makes a checkpoint self-describing: loading
//! rebuilds the model from the config and then overwrites every tensor,
//! verifying that names, shapes, and order all match what the config
//! implies. The digest catches truncation and bit rot before any value is
//! interpreted.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use slipnet_core::{SlipModelConfig, SlipModelParams};

use crate::error::{io_at, Error, Result};

const MAGIC: &[u8; 8] = b"SLIPCKPT";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Serializes config + parameters to `bytes`.
pub fn encode(config: &SlipModelConfig, params: &SlipModelParams) -> Result<Vec<u8>> {
    let config_json = serde_json::to_string(config)
        .map_err(|e| Error::Checkpoint(format!("config encode: {e}")))?;
    let tensors = params.named_tensors();

    let mut body = Vec::new();
    body.extend_from_slice(&VERSION.to_le_bytes());
    body.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    body.extend_from_slice(config_json.as_bytes());
    body.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in &tensors {
        if name.len() > u16::MAX as usize {
            return Err(Error::Checkpoint(format!("tensor name too long: {name}")));
        }
        body.extend_from_slice(&(name.len() as u16).to_le_bytes());
        body.extend_from_slice(name.as_bytes());
        let shape = tensor.shape();
        body.push(shape.len() as u8);
        for &d in shape {
            body.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in tensor.to_vec() {
            body.extend_from_slice(&v.to_le_bytes());
        }
    }

    let mut out = Vec::with_capacity(MAGIC.len() + DIGEST_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&Sha256::digest(&body));
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn save(path: &Path, config: &SlipModelConfig, params: &SlipModelParams) -> Result<()> {
    let bytes = encode(config, params)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_at(parent))?;
        }
    }
    fs::write(path, bytes).map_err(io_at(path))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated while reading {what} at byte {}",
                self.at
            )));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Decodes checkpoint bytes into the stored config and parameters.
pub fn decode(bytes: &[u8]) -> Result<(SlipModelConfig, SlipModelParams)> {
    if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint(String::from("not a checkpoint file (bad magic)")));
    }
    let stored_digest = &bytes[MAGIC.len()..MAGIC.len() + DIGEST_LEN];
    let body = &bytes[MAGIC.len() + DIGEST_LEN..];
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_digest {
        return Err(Error::Checkpoint(String::from(
            "digest mismatch: file is corrupt or was edited",
        )));
    }
    let mut r = Reader { bytes: body, at: 0 };
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let config_len = r.u32("config length")? as usize;
    let config_json = core::str::from_utf8(r.take(config_len, "config")?)
        .map_err(|e| Error::Checkpoint(format!("config is not UTF-8: {e}")))?;
    let config: SlipModelConfig = serde_json::from_str(config_json)
        .map_err(|e| Error::Checkpoint(format!("config parse: {e}")))?;
    config.validate()?;

    // Rebuild the parameter tree from the config, then overwrite in place.
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let params = SlipModelParams::init(&config, &mut rng)?;
    let expected = params.named_tensors();

    let count = r.u32("tensor count")? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {count} tensors but the config implies {}",
            expected.len()
        )));
    }
    for (name, tensor) in &expected {
        let name_len = r.u16("tensor name length")? as usize;
        let stored_name = core::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|e| Error::Checkpoint(format!("tensor name is not UTF-8: {e}")))?;
        if stored_name != name {
            return Err(Error::Checkpoint(format!(
                "tensor order mismatch: found {stored_name:?}, expected {name:?}"
            )));
        }
        let rank = r.take(1, "tensor rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor dim")? as usize);
        }
        if shape != tensor.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {shape:?}, config implies {:?}",
                tensor.shape()
            )));
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 8, "tensor data")?;
        let mut data = Vec::with_capacity(numel);
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        tensor
            .set_data(data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
    }
    if r.at != body.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            body.len() - r.at
        )));
    }
    Ok((config, params))
}

pub fn load(path: &Path) -> Result<(SlipModelConfig, SlipModelParams)> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    decode(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}
