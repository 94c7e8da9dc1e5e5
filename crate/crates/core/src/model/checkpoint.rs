//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `CDRMCKPT`                          |
//! | 4     | format version (`u32`)                    |
//! | 8     | header length in bytes (`u64`)            |
//! | 8     | blob length in bytes (`u64`)              |
//! | 32    | SHA-256 of header bytes followed by blob  |
//! | ...   | JSON header                               |
//! | ...   | tensor blob, raw `f64` values             |
//!
//! The header carries the model config, the epoch and optimizer counters,
//! the RNG position and an index of named tensors (`param/…`, `adam_m/…`,
//! `adam_v/…`, `loss_curve`) with their shapes and blob offsets.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::Adam;
use super::config::ModelConfig;
use super::params::{init_params, ModelParams};
use crate::error::{Error, Result};
use crate::fsio;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"CDRMCKPT";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 8 + 4 + 8 + 8 + 32;

/// Exact position of a ChaCha8 generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    /// `u128` word position, decimal.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let bytes = hex::decode(&self.seed).map_err(|e| Error::Integrity(format!("rng seed: {e}")))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Integrity("rng seed must be 32 bytes".into()))?;
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| Error::Integrity(format!("rng position: {e}")))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Everything needed to resume training bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub epoch: usize,
    pub params: ModelParams,
    pub optimizer: Adam,
    pub rng: RngState,
    /// Mean training loss of each completed epoch.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    epoch: usize,
    optimizer_step: u64,
    learning_rate: f64,
    clip_norm: Option<f64>,
    rng: RngState,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in `f64` values.
    offset: usize,
}

impl Checkpoint {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, p) in self.params.store.iter() {
            out.push((format!("param/{name}"), &p.value));
        }
        for ((name, _), m) in self.params.store.iter().zip(&self.optimizer.first_moments) {
            out.push((format!("adam_m/{name}"), m));
        }
        for ((name, _), v) in self.params.store.iter().zip(&self.optimizer.second_moments) {
            out.push((format!("adam_v/{name}"), v));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut blob: Vec<u8> = Vec::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        let curve = (!self.loss_curve.is_empty()).then(|| Tensor::vector(&self.loss_curve));
        let mut tensors = self.named_tensors();
        if let Some(c) = &curve {
            tensors.push(("loss_curve".to_string(), c));
        }
        for (name, t) in tensors {
            entries.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            for x in t.data() {
                blob.extend_from_slice(&x.to_le_bytes());
            }
            offset += t.len();
        }
        let header = Header {
            config: self.config.clone(),
            epoch: self.epoch,
            optimizer_step: self.optimizer.step,
            learning_rate: self.optimizer.learning_rate,
            clip_norm: self.optimizer.clip_norm,
            rng: self.rng.clone(),
            tensors: entries,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut hasher = Sha256::new();
        hasher.update(&header);
        hasher.update(&blob);
        let digest = hasher.finalize();

        let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&digest);
        out.extend_from_slice(&header);
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREFIX_LEN || &bytes[..8] != MAGIC {
            return Err(Error::Integrity("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let blob_len = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")) as usize;
        let digest = &bytes[28..60];
        let body = &bytes[PREFIX_LEN..];
        if Some(body.len()) != header_len.checked_add(blob_len) {
            return Err(Error::Integrity("truncated or padded payload".into()));
        }
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Integrity("checksum mismatch".into()));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| Error::Integrity(format!("header: {e}")))?;
        if !blob_len.is_multiple_of(8) {
            return Err(Error::Integrity("blob is not a whole number of f64 values".into()));
        }
        let values: Vec<f64> = body[header_len..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = |name: &str| -> Result<Tensor> {
            let e = header
                .tensors
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Integrity(format!("missing tensor {name}")))?;
            let n: usize = e.shape.iter().product();
            let data = values
                .get(e.offset..e.offset + n)
                .ok_or_else(|| Error::Integrity(format!("tensor {name} out of bounds")))?;
            Tensor::new(e.shape.clone(), data.to_vec())
        };

        let mut params = init_params(&header.config, &mut <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        let mut optimizer = Adam::new(&params.store, header.learning_rate, header.clip_norm);
        optimizer.step = header.optimizer_step;
        let ids: Vec<_> = params.store.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let name = params.store.name(id).to_string();
            let expected = params.store.get(id).value.shape().to_vec();
            let load = |prefix: &str| -> Result<Tensor> {
                let t = tensor(&format!("{prefix}/{name}"))?;
                if t.shape() != expected.as_slice() {
                    return Err(Error::Integrity(format!("tensor {prefix}/{name} has shape {:?}", t.shape())));
                }
                Ok(t)
            };
            params.store.get_mut(id).value = load("param")?;
            optimizer.first_moments[k] = load("adam_m")?;
            optimizer.second_moments[k] = load("adam_v")?;
        }
        let loss_curve = if header.tensors.iter().any(|e| e.name == "loss_curve") {
            tensor("loss_curve")?.into_data()
        } else {
            Vec::new()
        };
        header.rng.restore()?;
        Ok(Checkpoint {
            config: header.config,
            epoch: header.epoch,
            params,
            optimizer,
            rng: header.rng,
            loss_curve,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fsio::read(path)?)
    }
}
