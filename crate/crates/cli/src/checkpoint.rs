//! Checkpoint files: one line of JSON header followed by the parameters as
//! little-endian `f64`.
//!
//! Payload order: weights (visible-major), visible bias, hidden bias,
//! visible offsets, hidden offsets, then for persistent chains their
//! visible states, hidden states and visible means.

use std::path::Path;

use ndarray::{Array1, Array2};
use rbmlab::trainer::{Checkpoint, Offsets};
use rbmlab::{ChainEnsemble, RbmError, RbmModel, Result, Scheme, SeedSpec, TrainConfig};
use serde::{Deserialize, Serialize};

const MAGIC: &str = "rbmlab-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub t_age: u64,
    pub scheme: Scheme,
    pub seed: SeedSpec,
    pub config: TrainConfig,
    pub chains: Option<ChainHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub n_chains: usize,
    pub step_counter: u64,
    pub key: u64,
    pub streams: Vec<u64>,
}

pub fn encode(cp: &Checkpoint) -> Vec<u8> {
    let m = &cp.model;
    let header = Header {
        format: MAGIC.into(),
        version: VERSION,
        n_visible: m.n_visible(),
        n_hidden: m.n_hidden(),
        t_age: cp.t_age,
        scheme: cp.config.scheme,
        seed: cp.config.seed,
        config: cp.config.clone(),
        chains: cp.persistent_chains.as_ref().map(|c| ChainHeader {
            n_chains: c.n_chains(),
            step_counter: c.step_counter(),
            key: c.key(),
            streams: c.streams().to_vec(),
        }),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    let mut put = |it: &mut dyn Iterator<Item = &f64>| {
        for x in it {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(&mut m.weights().iter());
    put(&mut m.visible_bias().iter());
    put(&mut m.hidden_bias().iter());
    put(&mut cp.offsets.visible.iter());
    put(&mut cp.offsets.hidden.iter());
    if let Some(c) = &cp.persistent_chains {
        put(&mut c.visible().iter());
        put(&mut c.hidden().iter());
        put(&mut c.visible_means().iter());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        let end = self.pos + 8 * n;
        if end > self.bytes.len() {
            return Err(RbmError::Format {
                location: format!("byte {}", self.bytes.len()),
                message: "checkpoint payload is truncated".into(),
            });
        }
        let v = self.bytes[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos = end;
        Ok(v)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        Ok(Array2::from_shape_vec((rows, cols), self.take(rows * cols)?).expect("length checked"))
    }

    fn vector(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from(self.take(n)?))
    }
}

pub fn read_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| RbmError::Format {
        location: "header".into(),
        message: "missing header line".into(),
    })?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| RbmError::Format {
        location: format!("header, column {}", e.column()),
        message: e.to_string(),
    })?;
    if header.format != MAGIC || header.version != VERSION {
        return Err(RbmError::Format {
            location: "header".into(),
            message: format!("not a version {VERSION} checkpoint"),
        });
    }
    Ok((header, nl + 1))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let (h, start) = read_header(bytes)?;
    let (nv, nh) = (h.n_visible, h.n_hidden);
    let mut r = Reader { bytes, pos: start };
    let w = r.matrix(nv, nh)?;
    let b = r.vector(nv)?;
    let c = r.vector(nh)?;
    let offsets = Offsets {
        visible: r.vector(nv)?,
        hidden: r.vector(nh)?,
    };
    let persistent_chains = match &h.chains {
        Some(ch) => {
            let n = ch.n_chains;
            let visible = r.matrix(n, nv)?;
            let hidden = r.matrix(n, nh)?;
            let means = r.matrix(n, nv)?;
            Some(ChainEnsemble::from_parts(
                visible,
                hidden,
                means,
                ch.step_counter,
                ch.key,
                ch.streams.clone(),
            )?)
        }
        None => None,
    };
    if r.pos != bytes.len() {
        return Err(RbmError::Format {
            location: format!("byte {}", r.pos),
            message: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(Checkpoint {
        model: RbmModel::new(w, b, c)?,
        t_age: h.t_age,
        config: h.config,
        offsets,
        persistent_chains,
    })
}

pub fn save(cp: &Checkpoint, path: &Path) -> Result<()> {
    rbmlab::data::write_atomic(path, &encode(cp))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)
        .map_err(|e| RbmError::Input(format!("cannot read checkpoint {}: {e}", path.display())))?;
    decode(&bytes)
}

pub fn file_name(t_age: u64) -> String {
    format!("ckpt_{t_age:08}.rbm")
}
