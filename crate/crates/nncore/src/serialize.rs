//! Parameter blobs: a text manifest followed by raw little-endian `f32`s.
//!
//! ```text
//! u32 LE      manifest length in bytes
//! manifest    one line per tensor: "<name> f32 <d0>,<d1>,...\n"
//! payload     tensor data concatenated in manifest order, f32 LE
//! ```

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub fn encode(names: &[String], tensors: &[Tensor<f32>]) -> Vec<u8> {
    let mut manifest = String::new();
    for (name, t) in names.iter().zip(tensors) {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("{name} f32 {}\n", dims.join(",")));
    }
    let payload: usize = tensors.iter().map(|t| t.len() * 4).sum();
    let mut out = Vec::with_capacity(4 + manifest.len() + payload);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    let err = |m: &str| NnError::Format(m.to_string());
    if bytes.len() < 4 {
        return Err(err("truncated header"));
    }
    let mlen = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let manifest = bytes
        .get(4..4 + mlen)
        .ok_or_else(|| err("truncated manifest"))?;
    let manifest = std::str::from_utf8(manifest).map_err(|_| err("manifest is not utf-8"))?;
    let mut offset = 4 + mlen;
    let mut out = Vec::new();
    for line in manifest.lines() {
        let mut parts = line.split(' ');
        let (Some(name), Some(dtype), Some(dims), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(NnError::Format(format!("bad manifest line {line:?}")));
        };
        if dtype != "f32" {
            return Err(NnError::Format(format!("unsupported dtype {dtype}")));
        }
        let shape = dims
            .split(',')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| NnError::Format(format!("bad shape {dims:?}")))?;
        let n: usize = shape.iter().product();
        let raw = bytes
            .get(offset..offset + 4 * n)
            .ok_or_else(|| err("truncated payload"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += 4 * n;
        out.push((name.to_string(), Tensor::from_vec(&shape, data)?));
    }
    if offset != bytes.len() {
        return Err(err("trailing bytes after payload"));
    }
    Ok(out)
}
