//! Network container.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "MCDENET\0"
//! version        u32
//! layer count    u32
//! layer table    per layer: kind u8, a u32, b u32, rate f64
//! weight blobs   per layer: count u64, then count f64 values
//! ```
//!
//! `kind` codes: 0 conv3x3, 1 pointwise, 2 relu, 3 mean-pool, 4 max-pool,
//! 5 dropout, 6 dense, 7 positive head. `a`/`b` hold the input/output
//! sizes where the layer has them and `rate` the dropout rate, zero
//! otherwise. A TOML sidecar next to the container (same stem, `.toml`)
//! describes the architecture and training run for humans and tools.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ArchConfig, LayerSpec, Network, TrainConfig};
use crate::error::{CoreError, Result};

const MAGIC: &[u8; 8] = b"MCDENET\0";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub format_version: u32,
    pub arch: Option<String>,
    pub arch_config: Option<ArchConfig>,
    pub training: Option<TrainConfig>,
    pub param_count: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelCard {
    pub fn describe(net: &Network) -> Self {
        Self {
            format_version: NETWORK_FORMAT_VERSION,
            arch: None,
            arch_config: None,
            training: None,
            param_count: net.params().iter().map(Vec::len).sum(),
            layers: net.layers().to_vec(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("toml")
}

fn encode_layer(l: &LayerSpec) -> (u8, u32, u32, f64) {
    match *l {
        LayerSpec::Conv3x3 { in_ch, out_ch } => (0, in_ch as u32, out_ch as u32, 0.0),
        LayerSpec::Pointwise { in_ch, out_ch } => (1, in_ch as u32, out_ch as u32, 0.0),
        LayerSpec::Relu => (2, 0, 0, 0.0),
        LayerSpec::MeanPool => (3, 0, 0, 0.0),
        LayerSpec::MaxPool => (4, 0, 0, 0.0),
        LayerSpec::Dropout { rate } => (5, 0, 0, rate),
        LayerSpec::Dense { inputs, outputs } => (6, inputs as u32, outputs as u32, 0.0),
        LayerSpec::PositiveHead => (7, 0, 0, 0.0),
    }
}

fn decode_layer(kind: u8, a: u32, b: u32, rate: f64) -> Option<LayerSpec> {
    let (a, b) = (a as usize, b as usize);
    Some(match kind {
        0 => LayerSpec::Conv3x3 {
            in_ch: a,
            out_ch: b,
        },
        1 => LayerSpec::Pointwise {
            in_ch: a,
            out_ch: b,
        },
        2 => LayerSpec::Relu,
        3 => LayerSpec::MeanPool,
        4 => LayerSpec::MaxPool,
        5 => LayerSpec::Dropout { rate },
        6 => LayerSpec::Dense {
            inputs: a,
            outputs: b,
        },
        7 => LayerSpec::PositiveHead,
        _ => return None,
    })
}

pub fn encode_network(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&NETWORK_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        let (kind, a, b, rate) = encode_layer(l);
        out.push(kind);
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
        for w in p {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode_network(bytes: &[u8], path: &Path) -> Result<Network> {
    let truncated = || CoreError::format(path, "truncated network container");
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok_or_else(truncated)? != MAGIC {
        return Err(CoreError::format(path, "bad magic bytes"));
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != NETWORK_FORMAT_VERSION {
        return Err(CoreError::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let n = r.u32().ok_or_else(truncated)? as usize;
    let mut layers = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let kind = r.u8().ok_or_else(truncated)?;
        let a = r.u32().ok_or_else(truncated)?;
        let b = r.u32().ok_or_else(truncated)?;
        let rate = r.f64().ok_or_else(truncated)?;
        layers.push(
            decode_layer(kind, a, b, rate)
                .ok_or_else(|| CoreError::format(path, format!("unknown layer kind {kind}")))?,
        );
    }
    let mut params = Vec::with_capacity(layers.len());
    for _ in 0..n {
        let count = r.u64().ok_or_else(truncated)? as usize;
        let raw = r
            .take(count.checked_mul(8).ok_or_else(truncated)?)
            .ok_or_else(truncated)?;
        params.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    if r.pos != bytes.len() {
        return Err(CoreError::format(path, "trailing bytes after weights"));
    }
    Network::from_parts(layers, params).map_err(|e| CoreError::format(path, e.to_string()))
}

/// Writes the container and its sidecar.
pub fn save_network(path: &Path, net: &Network, card: &ModelCard) -> Result<()> {
    fs::write(path, encode_network(net)).map_err(|e| CoreError::io(path, e))?;
    let side = sidecar_path(path);
    let text = toml::to_string_pretty(card).map_err(|e| CoreError::format(&side, e.to_string()))?;
    fs::write(&side, text).map_err(|e| CoreError::io(&side, e))
}

/// Reads a container; the sidecar is returned when present.
pub fn load_network(path: &Path) -> Result<(Network, Option<ModelCard>)> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    let net = decode_network(&bytes, path)?;
    let side = sidecar_path(path);
    let card = match fs::read_to_string(&side) {
        Ok(text) => {
            Some(toml::from_str(&text).map_err(|e| CoreError::format(&side, e.to_string()))?)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(CoreError::io(&side, e)),
    };
    Ok((net, card))
}
