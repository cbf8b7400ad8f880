//! Checkpoint persistence: a JSON manifest plus raw little-endian blobs for
//! parameters and optimizer moments, each guarded by a content hash. Resume
//! is bit-exact because all batching randomness is derived from the shuffle
//! seed and the step index, both of which live in the manifest.

use super::optim::AdamW;
use super::train::TrainConfig;
use super::{Layout, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::ioutil;
use crate::num::Scalar;
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &str = "XLPCKPT1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub magic: String,
    pub version: u32,
    pub step: usize,
    pub dtype: String,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub opt_steps_done: usize,
    pub params_sha256: String,
    pub optim_sha256: String,
}

fn encode_buf<F: Scalar>(buf: &Array1<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(buf.len() * if F::DTYPE == "f32" { 4 } else { 8 });
    for &x in buf.iter() {
        if F::DTYPE == "f32" {
            out.extend_from_slice(&(x.to_f64() as f32).to_le_bytes());
        } else {
            out.extend_from_slice(&x.to_f64().to_le_bytes());
        }
    }
    out
}

fn decode_buf<F: Scalar>(bytes: &[u8], expected_len: usize) -> Result<Array1<F>> {
    let width = if F::DTYPE == "f32" { 4 } else { 8 };
    if bytes.len() != expected_len * width {
        return Err(Error::Integrity(format!(
            "parameter blob has {} bytes, expected {}",
            bytes.len(),
            expected_len * width
        )));
    }
    let mut out = Array1::<F>::zeros(expected_len);
    for (i, chunk) in bytes.chunks_exact(width).enumerate() {
        let v = if F::DTYPE == "f32" {
            f32::from_le_bytes(chunk.try_into().unwrap()) as f64
        } else {
            f64::from_le_bytes(chunk.try_into().unwrap())
        };
        out[i] = F::from_f64(v);
    }
    Ok(out)
}

fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_checkpoint<F: Scalar>(
    dir: &Path,
    model: &Model<F>,
    opt: &AdamW<F>,
    train_config: &TrainConfig,
    step: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let params_bytes = encode_buf(&model.params);
    let mut optim_bytes = encode_buf(&opt.m);
    optim_bytes.extend_from_slice(&encode_buf(&opt.v));
    let meta = CheckpointMeta {
        magic: CHECKPOINT_MAGIC.to_string(),
        version: 1,
        step,
        dtype: F::DTYPE.to_string(),
        model_config: model.config.clone(),
        train_config: train_config.clone(),
        opt_steps_done: opt.steps_done,
        params_sha256: ioutil::sha256_hex(&params_bytes),
        optim_sha256: ioutil::sha256_hex(&optim_bytes),
    };
    write_bytes_atomic(&dir.join("params.bin"), &params_bytes)?;
    write_bytes_atomic(&dir.join("optim.bin"), &optim_bytes)?;
    ioutil::write_json_pretty(&dir.join("checkpoint.meta.json"), &meta)?;
    Ok(())
}

pub fn load_checkpoint<F: Scalar>(dir: &Path) -> Result<(Model<F>, AdamW<F>, CheckpointMeta)> {
    let meta: CheckpointMeta = ioutil::read_json(&dir.join("checkpoint.meta.json"))?;
    if meta.magic != CHECKPOINT_MAGIC {
        return Err(Error::Integrity(format!("bad checkpoint magic {:?}", meta.magic)));
    }
    if meta.version != 1 {
        return Err(Error::Integrity(format!("unsupported checkpoint version {}", meta.version)));
    }
    if meta.dtype != F::DTYPE {
        return Err(Error::Integrity(format!(
            "checkpoint dtype {} does not match requested {}",
            meta.dtype,
            F::DTYPE
        )));
    }
    meta.model_config.validate()?;
    let params_bytes = std::fs::read(dir.join("params.bin"))?;
    if ioutil::sha256_hex(&params_bytes) != meta.params_sha256 {
        return Err(Error::Integrity("params.bin content hash mismatch".into()));
    }
    let optim_bytes = std::fs::read(dir.join("optim.bin"))?;
    if ioutil::sha256_hex(&optim_bytes) != meta.optim_sha256 {
        return Err(Error::Integrity("optim.bin content hash mismatch".into()));
    }
    let layout = Layout::build(&meta.model_config);
    let params = decode_buf::<F>(&params_bytes, layout.total)?;
    let model = Model { config: meta.model_config.clone(), layout: layout.clone(), params };
    let mut opt = AdamW::<F>::new(
        &layout,
        meta.train_config.beta1,
        meta.train_config.beta2,
        meta.train_config.adam_eps,
        meta.train_config.weight_decay,
    );
    let half = optim_bytes.len() / 2;
    opt.m = decode_buf::<F>(&optim_bytes[..half], layout.total)?;
    opt.v = decode_buf::<F>(&optim_bytes[half..], layout.total)?;
    opt.steps_done = meta.opt_steps_done;
    Ok((model, opt, meta))
}
