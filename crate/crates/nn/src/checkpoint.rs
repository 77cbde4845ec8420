//! Checkpoint container: JSON manifest + little-endian f64 blob.
//!
//! Layout: 8-byte magic, u64-LE manifest length, manifest JSON, raw blob.
//! Offsets in the manifest are byte offsets into the blob. Save/load round
//! trips are bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::{ParamStore, ParamTensor};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TPACKPT\0";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    shape: [usize; 2],
    offset: u64,
}

/// Manifest header. `extra` carries small structured metadata (for example
/// prototype season ownership) that must travel with the tensors.
#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    tensors: BTreeMap<String, TensorEntry>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Writes every tensor of `store` (names, shapes, values) plus `extra`
/// metadata. Gradients are not persisted.
pub fn save_checkpoint(
    path: &Path,
    store: &ParamStore,
    extra: BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    let mut tensors = BTreeMap::new();
    let mut offset = 0u64;
    // blob is laid out in manifest (name-sorted) order
    let mut ordered: Vec<&ParamTensor> = store.iter().map(|(_, t)| t).collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    for t in &ordered {
        tensors.insert(
            t.name.clone(),
            TensorEntry {
                shape: t.shape(),
                offset,
            },
        );
        offset += (t.len() * 8) as u64;
    }
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        tensors,
        extra,
    };
    let manifest = serde_json::to_vec(&meta).map_err(|e| NnError::Checkpoint(e.to_string()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    w.write_all(&manifest)?;
    for t in &ordered {
        for v in &t.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint into a fresh store (zero gradients) plus its metadata.
pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, CheckpointMeta)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic bytes".into()));
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)?;
    let manifest_len = u64::from_le_bytes(len_bytes) as usize;
    let mut manifest = vec![0u8; manifest_len];
    r.read_exact(&mut manifest)?;
    let meta: CheckpointMeta =
        serde_json::from_slice(&manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported format_version {}",
            meta.format_version
        )));
    }
    let mut blob = Vec::new();
    r.read_to_end(&mut blob)?;

    let mut store = ParamStore::new();
    for (name, entry) in &meta.tensors {
        let n = entry.shape[0] * entry.shape[1];
        let start = entry.offset as usize;
        let end = start + n * 8;
        if end > blob.len() {
            return Err(NnError::Checkpoint(format!(
                "tensor {name} extends past blob end ({end} > {})",
                blob.len()
            )));
        }
        let mut values = Vec::with_capacity(n);
        for chunk in blob[start..end].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let mut iter = values.into_iter();
        store.alloc_with(name, entry.shape[0], entry.shape[1], || iter.next().unwrap())?;
    }
    Ok((store, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = StdRng::seed_from_u64(99);
        let mut store = ParamStore::new();
        store.alloc_weight("encoder.g_o.w", 5, 7, &mut rng).unwrap();
        store.alloc_weight("prototypes.bank", 24, 16, &mut rng).unwrap();
        store.alloc_zeros("critic.b", 1, 3).unwrap();
        // adversarial bit patterns
        store.get_mut(0).values[0] = f64::MIN_POSITIVE;
        store.get_mut(0).values[1] = -0.0;
        store.get_mut(0).values[2] = 1.0 + f64::EPSILON;

        let dir = std::env::temp_dir().join("tpa_nn_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.ckpt");
        let mut extra = BTreeMap::new();
        extra.insert("note".to_string(), serde_json::json!([1, 2, 3]));
        save_checkpoint(&path, &store, extra).unwrap();

        let (loaded, meta) = load_checkpoint(&path).unwrap();
        assert_eq!(meta.format_version, FORMAT_VERSION);
        assert_eq!(meta.extra["note"], serde_json::json!([1, 2, 3]));
        for (_, t) in store.iter() {
            let lid = loaded.id_of(&t.name).unwrap();
            let lt = loaded.get(lid);
            assert_eq!(lt.shape(), t.shape());
            for (a, b) in t.values.iter().zip(&lt.values) {
                assert_eq!(a.to_bits(), b.to_bits(), "tensor {} drifted", t.name);
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = std::env::temp_dir().join("tpa_nn_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad_magic.ckpt");
        std::fs::write(&path, b"NOTACKPTxxxxxxxx").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(NnError::Checkpoint(_))
        ));
    }
}
