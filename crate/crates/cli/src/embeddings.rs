//! Binary storage for per-frame visual embeddings.
//!
//! `visual.hdr` is two text lines (`dim E`, `frames N`); `visual.emb` holds
//! N*E little-endian f32 values, frame-major. The split keeps the bulk data
//! compact while the shape stays human-readable.

use std::fs;
use std::path::Path;

use crate::error::{io_at, Error, Result};

pub fn write(dir: &Path, dim: usize, frames: &[Vec<f32>]) -> Result<()> {
    if dim == 0 {
        return Err(Error::Data(String::from("embedding dim must be >= 1")));
    }
    let mut bytes = Vec::with_capacity(frames.len() * dim * 4);
    for (i, frame) in frames.iter().enumerate() {
        if frame.len() != dim {
            return Err(Error::Data(format!(
                "embedding frame {i} has {} values, expected {dim}",
                frame.len()
            )));
        }
        for v in frame {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let hdr = dir.join("visual.hdr");
    fs::write(&hdr, format!("dim {dim}\nframes {}\n", frames.len())).map_err(io_at(&hdr))?;
    let emb = dir.join("visual.emb");
    fs::write(&emb, bytes).map_err(io_at(&emb))?;
    Ok(())
}

pub fn read(dir: &Path) -> Result<(usize, Vec<Vec<f32>>)> {
    let hdr_path = dir.join("visual.hdr");
    let hdr = fs::read_to_string(&hdr_path).map_err(io_at(&hdr_path))?;
    let mut dim = None;
    let mut frames = None;
    for line in hdr.lines() {
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("dim"), Some(v)) => dim = v.parse::<usize>().ok(),
            (Some("frames"), Some(v)) => frames = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (dim, n_frames) = match (dim, frames) {
        (Some(d), Some(n)) if d > 0 => (d, n),
        _ => {
            return Err(Error::Data(format!(
                "{}: header must state positive dim and frames",
                hdr_path.display()
            )))
        }
    };
    let emb_path = dir.join("visual.emb");
    let bytes = fs::read(&emb_path).map_err(io_at(&emb_path))?;
    let expect = n_frames * dim * 4;
    if bytes.len() != expect {
        return Err(Error::Data(format!(
            "{}: {} bytes, expected {expect} ({n_frames} frames x {dim} dims)",
            emb_path.display(),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut frame = Vec::with_capacity(dim);
        for d in 0..dim {
            let at = (f * dim + d) * 4;
            let v = f32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{}: non-finite value in frame {f}",
                    emb_path.display()
                )));
            }
            frame.push(v);
        }
        out.push(frame);
    }
    Ok((dim, out))
}
