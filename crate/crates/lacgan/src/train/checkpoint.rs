//! Versioned binary checkpoint: JSON header (format version, method,
//! config, metrics, RNG position) followed by named parameter arrays as
//! 64-bit little-endian floats. Save/load restores bit-identical training
//! continuation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::Network;
use crate::train::{
    BestTracker, EpochMetrics, MethodModel, Optimizers, TrainConfig, TrainState,
};

const MAGIC: &[u8; 8] = b"LACGANCK";
const TRAILER: &[u8; 8] = b"LACGEND\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub model: MethodModel,
    pub optimizers: Optimizers,
    pub rng: ChaCha8Rng,
    pub best: BestTracker,
    pub best_model: MethodModel,
    pub history: Vec<EpochMetrics>,
}

impl Checkpoint {
    pub fn from_state(config: &TrainConfig, state: &TrainState) -> Self {
        Checkpoint {
            config: config.clone(),
            epoch: state.epoch,
            model: state.model.clone(),
            optimizers: state.optimizers.clone(),
            rng: state.rng.clone(),
            best: state.best.clone(),
            best_model: state.best_model.clone(),
            history: state.history.clone(),
        }
    }

    pub fn into_state(self) -> TrainState {
        TrainState {
            model: self.model,
            optimizers: self.optimizers,
            rng: self.rng,
            epoch: self.epoch,
            best: self.best,
            best_model: self.best_model,
            history: self.history,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    method: String,
    config: TrainConfig,
    epoch: usize,
    best_epoch: usize,
    best_val_acc: f64,
    history: Vec<EpochMetrics>,
    rng_seed: String,
    rng_word_pos_hi: u64,
    rng_word_pos_lo: u64,
    adam_t: BTreeMap<String, u64>,
}

fn networks(model: &MethodModel) -> Vec<(&'static str, &Network)> {
    match model {
        MethodModel::LacGan(m) => vec![("e", &m.e.net), ("g", &m.g.net), ("d", &m.d.net)],
        MethodModel::AcGan(m) => vec![("g", &m.g.net), ("d", &m.d.net)],
        MethodModel::ExtractorOnly(e) => vec![("e", &e.net)],
    }
}

fn networks_mut(model: &mut MethodModel) -> Vec<(&'static str, &mut Network)> {
    match model {
        MethodModel::LacGan(m) => vec![
            ("e", &mut m.e.net),
            ("g", &mut m.g.net),
            ("d", &mut m.d.net),
        ],
        MethodModel::AcGan(m) => vec![("g", &mut m.g.net), ("d", &mut m.d.net)],
        MethodModel::ExtractorOnly(e) => vec![("e", &mut e.net)],
    }
}

fn collect_arrays(ckpt: &Checkpoint) -> Vec<(String, Vec<f64>)> {
    let mut arrays = Vec::new();
    for (prefix, model) in [("cur", &ckpt.model), ("best", &ckpt.best_model)] {
        for (name, net) in networks(model) {
            arrays.push((format!("{prefix}/{name}/params"), net.flat_params()));
            arrays.push((format!("{prefix}/{name}/bn"), net.bn_state()));
        }
    }
    for (name, adam) in [
        ("e", &ckpt.optimizers.e),
        ("g", &ckpt.optimizers.g),
        ("d", &ckpt.optimizers.d),
    ] {
        if let Some(a) = adam {
            arrays.push((format!("adam/{name}/m"), a.m.clone()));
            arrays.push((format!("adam/{name}/v"), a.v.clone()));
        }
    }
    arrays
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let word_pos = ckpt.rng.get_word_pos();
    let mut adam_t = BTreeMap::new();
    for (name, adam) in [
        ("e", &ckpt.optimizers.e),
        ("g", &ckpt.optimizers.g),
        ("d", &ckpt.optimizers.d),
    ] {
        if let Some(a) = adam {
            adam_t.insert(name.to_string(), a.t);
        }
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        method: ckpt.config.method.as_str().to_string(),
        config: ckpt.config.clone(),
        epoch: ckpt.epoch,
        best_epoch: ckpt.best.epoch,
        best_val_acc: ckpt.best.val_acc,
        history: ckpt.history.clone(),
        rng_seed: hex::encode(ckpt.rng.get_seed()),
        rng_word_pos_hi: (word_pos >> 64) as u64,
        rng_word_pos_lo: word_pos as u64,
        adam_t,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Checkpoint(format!("serialize header: {e}")))?;

    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&header_bytes)?;

    let arrays = collect_arrays(ckpt);
    out.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for (name, values) in arrays {
        let name_bytes = name.as_bytes();
        out.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        out.write_all(name_bytes)?;
        out.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.write_all(TRAILER)?;
    out.flush()?;
    Ok(())
}

fn corrupt(detail: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("truncated or corrupt checkpoint: {detail}"))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(corrupt)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let header_len = read_u32(&mut r)? as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut r, &mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes).map_err(corrupt)?;

    let array_count = read_u32(&mut r)? as usize;
    let mut arrays: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for _ in 0..array_count {
        let mut b = [0u8; 2];
        read_exact(&mut r, &mut b)?;
        let name_len = u16::from_le_bytes(b) as usize;
        let mut name = vec![0u8; name_len];
        read_exact(&mut r, &mut name)?;
        let name = String::from_utf8(name).map_err(corrupt)?;
        let len = read_u64(&mut r)? as usize;
        let mut values = Vec::with_capacity(len);
        let mut fb = [0u8; 8];
        for _ in 0..len {
            read_exact(&mut r, &mut fb)?;
            values.push(f64::from_le_bytes(fb));
        }
        arrays.insert(name, values);
    }
    let mut trailer = [0u8; 8];
    read_exact(&mut r, &mut trailer)?;
    if &trailer != TRAILER {
        return Err(corrupt("missing trailer"));
    }

    let config = header.config;
    let take = |arrays: &mut BTreeMap<String, Vec<f64>>, key: &str| -> Result<Vec<f64>> {
        arrays
            .remove(key)
            .ok_or_else(|| corrupt(format!("missing array {key}")))
    };

    let build_model = |arrays: &mut BTreeMap<String, Vec<f64>>,
                           prefix: &str|
     -> Result<MethodModel> {
        let mut scratch_rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = MethodModel::new(&config, &mut scratch_rng);
        for (name, net) in networks_mut(&mut model) {
            net.set_flat_params(&take(arrays, &format!("{prefix}/{name}/params"))?)?;
            net.set_bn_state(&take(arrays, &format!("{prefix}/{name}/bn"))?)?;
            if header.epoch > 0 {
                net.mark_trained();
            }
        }
        Ok(model)
    };
    let model = build_model(&mut arrays, "cur")?;
    let best_model = build_model(&mut arrays, "best")?;

    let mut optimizers = Optimizers::new(&model, &config);
    for (name, slot) in [
        ("e", &mut optimizers.e),
        ("g", &mut optimizers.g),
        ("d", &mut optimizers.d),
    ] {
        if let Some(a) = slot {
            let m = take(&mut arrays, &format!("adam/{name}/m"))?;
            let v = take(&mut arrays, &format!("adam/{name}/v"))?;
            if m.len() != a.m.len() || v.len() != a.v.len() {
                return Err(corrupt(format!("adam buffer size mismatch for {name}")));
            }
            a.m = m;
            a.v = v;
            a.t = *header
                .adam_t
                .get(name)
                .ok_or_else(|| corrupt(format!("missing adam step count for {name}")))?;
        }
    }

    let seed_bytes = hex::decode(&header.rng_seed).map_err(corrupt)?;
    let seed: [u8; 32] = seed_bytes
        .try_into()
        .map_err(|_| corrupt("rng seed length"))?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    let word_pos = ((header.rng_word_pos_hi as u128) << 64) | header.rng_word_pos_lo as u128;
    rng.set_word_pos(word_pos);

    Ok(Checkpoint {
        config,
        epoch: header.epoch,
        model,
        optimizers,
        rng,
        best: BestTracker {
            epoch: header.best_epoch,
            val_acc: header.best_val_acc,
        },
        best_model,
        history: header.history,
    })
}
