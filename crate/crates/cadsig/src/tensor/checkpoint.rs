//! Checkpoint format: `CKPT` magic, version byte, little-endian u32 JSON
//! header length, JSON header (dtype, model config, config hash, tensor
//! table), then raw little-endian tensor data.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Array, Scalar, TensorError};

const MAGIC: &[u8; 4] = b"CKPT";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub dtype: String,
    /// Arbitrary model configuration blob.
    pub config: serde_json::Value,
    pub config_hash: String,
    pub tensors: Vec<TensorEntry>,
}

/// Write named tensors plus a config header.
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    config: &serde_json::Value,
    config_hash: &str,
    names: &[String],
    tensors: &[Array<T>],
) -> Result<(), TensorError> {
    assert_eq!(names.len(), tensors.len());
    let cerr = |e: String| TensorError::Checkpoint(e);
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0usize;
    for (name, t) in names.iter().zip(tensors) {
        entries.push(TensorEntry {
            name: name.clone(),
            rows: t.rows,
            cols: t.cols,
            offset,
        });
        offset += t.data.len() * T::size_of();
    }
    let header = CheckpointHeader {
        dtype: T::DTYPE.to_string(),
        config: config.clone(),
        config_hash: config_hash.to_string(),
        tensors: entries,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| cerr(format!("header encode: {e}")))?;
    let mut buf = Vec::with_capacity(9 + header_json.len() + offset);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for t in tensors {
        for v in &t.data {
            v.write_le(&mut buf);
        }
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| cerr(format!("{}: {e}", path.display())))?;
    f.write_all(&buf)
        .map_err(|e| cerr(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Read a checkpoint saved with the same dtype.
pub fn load_checkpoint<T: Scalar>(
    path: &Path,
) -> Result<(CheckpointHeader, Vec<Array<T>>), TensorError> {
    let cerr = |e: String| TensorError::Checkpoint(e);
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| cerr(format!("{}: {e}", path.display())))?;
    if bytes.len() < 9 || &bytes[0..4] != MAGIC {
        return Err(cerr(format!("{}: not a checkpoint file", path.display())));
    }
    if bytes[4] != VERSION {
        return Err(cerr(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            bytes[4]
        )));
    }
    let hlen = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]) as usize;
    if bytes.len() < 9 + hlen {
        return Err(cerr(format!("{}: truncated header", path.display())));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[9..9 + hlen])
        .map_err(|e| cerr(format!("{}: header decode: {e}", path.display())))?;
    if header.dtype != T::DTYPE {
        return Err(cerr(format!(
            "{}: dtype {} does not match requested {}",
            path.display(),
            header.dtype,
            T::DTYPE
        )));
    }
    let data = &bytes[9 + hlen..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in &header.tensors {
        let count = e.rows * e.cols;
        let need = e.offset + count * T::size_of();
        if data.len() < need {
            return Err(cerr(format!(
                "{}: tensor {} data truncated",
                path.display(),
                e.name
            )));
        }
        let mut values = Vec::with_capacity(count);
        for k in 0..count {
            values.push(T::read_le(&data[e.offset + k * T::size_of()..]));
        }
        tensors.push(Array::from_vec(e.rows, e.cols, values));
    }
    Ok((header, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_f32() {
        let dir = std::env::temp_dir().join("cadsig-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        let names = vec!["w1".to_string(), "b1".to_string()];
        let tensors = vec![
            Array::<f32>::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.5 - 1.0),
            Array::<f32>::from_fn(1, 4, |_, j| j as f64),
        ];
        let cfg = serde_json::json!({"d_e": 32, "blocks": 2});
        save_checkpoint(&path, &cfg, "abc123", &names, &tensors).unwrap();
        let (header, back) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(header.config_hash, "abc123");
        assert_eq!(header.config["d_e"], 32);
        assert_eq!(back, tensors);
        // Wrong dtype refuses.
        assert!(load_checkpoint::<f64>(&path).is_err());
    }
}
