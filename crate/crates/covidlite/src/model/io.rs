//! Bit-exact weight persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CVL1" | u32 version | u32 num_classes | u32 tensor_count
//! per tensor: u16 name_len | name (UTF-8) | u8 rank | u32 dims[rank] | f32 data
//! trailing: u32 CRC-32 of everything after the magic
//! ```
//!
//! Tensors cover every parameter, moving statistics included, plus one
//! `meta.seed` tensor carrying the initialization seed as two f32 bit
//! patterns. Loading rebuilds the architecture and copies every tensor back,
//! so `load(save(m))` reproduces `m` exactly.

use std::path::Path;

use super::build::build_covidlite;
use super::{ModelError, ModelState};

pub const FORMAT_MAGIC: &[u8; 4] = b"CVL1";
pub const FORMAT_VERSION: u32 = 1;

const SEED_TENSOR: &str = "meta.seed";

/// Serializes the model to `path`.
pub fn save_weights(state: &ModelState, path: &Path) -> Result<(), ModelError> {
    let mut body: Vec<u8> = Vec::new();
    body.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    body.extend_from_slice(&(state.num_classes() as u32).to_le_bytes());

    let params = state.network().params();
    body.extend_from_slice(&((params.len() + 1) as u32).to_le_bytes());

    let seed = state.seed();
    let seed_words = [
        f32::from_bits((seed & 0xffff_ffff) as u32),
        f32::from_bits((seed >> 32) as u32),
    ];
    write_tensor(&mut body, SEED_TENSOR, &[2], &seed_words);
    for (info, tensor) in &params {
        write_tensor(&mut body, &info.name, tensor.shape(), tensor.data());
    }

    let mut file = Vec::with_capacity(4 + body.len() + 4);
    file.extend_from_slice(FORMAT_MAGIC);
    file.extend_from_slice(&body);
    file.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());

    std::fs::write(path, &file).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a weight file back into a full [`ModelState`].
pub fn load_weights(path: &Path) -> Result<ModelState, ModelError> {
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.len() < 4 || &bytes[..4] != FORMAT_MAGIC {
        return Err(ModelError::BadMagic);
    }
    if bytes.len() < 4 + 12 + 4 {
        return Err(ModelError::Truncated);
    }
    let (body, trailer) = bytes[4..].split_at(bytes.len() - 8);
    let stored_crc = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    if crc32fast::hash(body) != stored_crc {
        return Err(ModelError::CrcMismatch);
    }

    let mut cursor = Reader { buf: body, pos: 0 };
    let version = cursor.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let num_classes = cursor.u32()? as usize;
    let tensor_count = cursor.u32()? as usize;

    let mut tensors: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        tensors.push(cursor.tensor()?);
    }

    let seed = {
        let (_, shape, data) = tensors
            .iter()
            .find(|(name, _, _)| name == SEED_TENSOR)
            .ok_or_else(|| ModelError::MissingTensor(SEED_TENSOR.into()))?;
        if shape != &[2] {
            return Err(ModelError::TensorShape {
                name: SEED_TENSOR.into(),
                found: shape.clone(),
                expected: vec![2],
            });
        }
        u64::from(data[0].to_bits()) | (u64::from(data[1].to_bits()) << 32)
    };

    let mut state = build_covidlite(num_classes, seed)?;
    for (info, tensor) in state.network_mut().params_mut() {
        let (_, shape, data) = tensors
            .iter()
            .find(|(name, _, _)| *name == info.name)
            .ok_or_else(|| ModelError::MissingTensor(info.name.clone()))?;
        if shape != &info.shape {
            return Err(ModelError::TensorShape {
                name: info.name.clone(),
                found: shape.clone(),
                expected: info.shape.clone(),
            });
        }
        tensor.data_mut().copy_from_slice(data);
    }
    Ok(state)
}

fn write_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f32]) {
    let name_bytes = name.as_bytes();
    assert!(name_bytes.len() <= u16::MAX as usize, "tensor name too long");
    out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
    out.extend_from_slice(name_bytes);
    out.push(shape.len() as u8);
    for &dim in shape {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        if self.pos + n > self.buf.len() {
            return Err(ModelError::Truncated);
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<(String, Vec<usize>, Vec<f32>), ModelError> {
        let name_len = self.u16()? as usize;
        let name = String::from_utf8(self.take(name_len)?.to_vec())
            .map_err(|_| ModelError::Truncated)?;
        let rank = self.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32()? as usize);
        }
        let count: usize = shape.iter().product();
        let raw = self.take(count * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok((name, shape, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Tensor;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn round_trip_reproduces_forward_outputs_exactly() {
        let (_dir, path) = tmp("model.cvl");
        let state = build_covidlite(2, 99).unwrap();
        save_weights(&state, &path).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(loaded.seed(), 99);
        assert_eq!(loaded.num_classes(), 2);
        let x = Tensor::filled(&[1, 224, 224, 3], 0.25);
        let a = state.logits(&x).unwrap();
        let b = loaded.logits(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn corrupted_payload_fails_crc_and_returns_no_model() {
        let (_dir, path) = tmp("model.cvl");
        let state = build_covidlite(2, 5).unwrap();
        save_weights(&state, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_weights(&path), Err(ModelError::CrcMismatch)));
    }

    #[test]
    fn bad_magic_and_truncation_are_distinct() {
        let (_dir, path) = tmp("model.cvl");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load_weights(&path), Err(ModelError::BadMagic)));
        let state = build_covidlite(2, 5).unwrap();
        save_weights(&state, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(load_weights(&path), Err(ModelError::Truncated)));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let (_dir, path) = tmp("model.cvl");
        let state = build_covidlite(2, 5).unwrap();
        save_weights(&state, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9; // version field, little-endian low byte
        let body_len = bytes.len() - 8;
        let crc = crc32fast::hash(&bytes[4..4 + body_len]);
        let at = 4 + body_len;
        bytes[at..].copy_from_slice(&crc.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_weights(&path),
            Err(ModelError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn file_size_matches_parameter_arithmetic() {
        let (_dir, path) = tmp("model.cvl");
        let state = build_covidlite(3, 5).unwrap();
        save_weights(&state, &path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as i64;
        let payload = 4 * (1_019_363i64 + 2_496);
        // Header, names, and dims add a couple of KiB on top of the payload.
        assert!(size > payload, "size {size} <= payload {payload}");
        assert!(size < payload + 8 * 1024, "size {size} too far above payload");
    }
}
