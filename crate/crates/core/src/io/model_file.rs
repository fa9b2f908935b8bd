//! Versioned binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "GVMMODEL"
//! version  u32
//! hlen     u32      length of the JSON header
//! header   hlen     {"dims", "transfer", "control", "seed"}
//! params   f64 *    w_hidden (N*M, row-major), beta (N), bias (N), w_out (L*N, row-major)
//! ```
//!
//! The file must end exactly after the last parameter.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlParams, Dims, Gvm};
use crate::transfer::TransferKind;

pub const MODEL_MAGIC: &[u8; 8] = b"GVMMODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    dims: Dims,
    transfer: TransferKind,
    control: ControlParams,
    seed: u64,
}

/// Everything a model file holds.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub version: u32,
    pub gvm: Gvm,
    pub control: ControlParams,
    /// Seed the machine was initialized and trained with.
    pub seed: u64,
}

pub fn save_model(gvm: &Gvm, control: &ControlParams, path: &Path) -> Result<()> {
    let header = Header {
        dims: gvm.dims(),
        transfer: gvm.transfer(),
        control: control.clone(),
        seed: control.seed,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let params = gvm.w_hidden().len() + gvm.beta().len() + gvm.bias().len() + gvm.w_out().len();
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * params);
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend(MODEL_VERSION.to_le_bytes());
    buf.extend((json.len() as u32).to_le_bytes());
    buf.extend(&json);
    for slice in [gvm.w_hidden(), gvm.beta(), gvm.bias(), gvm.w_out()] {
        for v in slice {
            buf.extend(v.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Gvm> {
    Ok(read_model_file(path)?.gvm)
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let truncated = |needed: usize| Error::Truncated {
        path: path.into(),
        needed: needed as u64,
        found: bytes.len() as u64,
    };
    if bytes.len() < 16 {
        return Err(truncated(16));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(Error::CorruptModel(format!(
            "{} is not a model file (bad magic)",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = 16 + hlen;
    if bytes.len() < body {
        return Err(truncated(body));
    }
    let header: Header = serde_json::from_slice(&bytes[16..body])
        .map_err(|e| Error::CorruptModel(format!("header: {e}")))?;
    let Dims {
        inputs,
        hidden,
        outputs,
    } = header.dims;
    let Dims {
        inputs: m,
        hidden: n,
        outputs: l,
    } = Dims::new(inputs, hidden, outputs)?;
    let counts = [n * m, n, n, l * n];
    let expected = body + 8 * counts.iter().sum::<usize>();
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(Error::DimMismatch(format!(
            "{} holds {} bytes but its {} header implies {expected}",
            path.display(),
            bytes.len(),
            header.dims
        )));
    }
    let mut floats = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |k: usize| floats.by_ref().take(k).collect::<Vec<f64>>();
    let (w_hidden, beta, bias, w_out) = (
        take(counts[0]),
        take(counts[1]),
        take(counts[2]),
        take(counts[3]),
    );
    let gvm = Gvm::from_parts(header.dims, header.transfer, w_hidden, beta, bias, w_out)?;
    Ok(ModelFile {
        version,
        gvm,
        control: header.control,
        seed: header.seed,
    })
}
