//! Network checkpoints: one JSON header line, a newline, then all parameters
//! as little-endian `f32` in layer order.

use std::fs;
use std::path::Path;

use radar_ism_core::diffnet::{Architecture, NetworkParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT: &str = "radar-ism-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub architecture: Architecture,
    pub seed: u64,
    pub epoch: usize,
    pub dtype: String,
    pub parameters: usize,
}

pub fn checkpoint_bytes(params: &NetworkParams<f32>, seed: u64, epoch: usize) -> Vec<u8> {
    let header = CheckpointHeader {
        format: FORMAT.into(),
        architecture: params.architecture().clone(),
        seed,
        epoch,
        dtype: "f32".into(),
        parameters: params.num_parameters(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for v in params.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_checkpoint(path: &Path, params: &NetworkParams<f32>, seed: u64, epoch: usize) -> Result<()> {
    fs::write(path, checkpoint_bytes(params, seed, epoch)).map_err(Error::io(path))
}

pub fn parse_checkpoint(bytes: &[u8]) -> std::result::Result<(CheckpointHeader, NetworkParams<f32>), String> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl]).map_err(|e| format!("bad header: {e}"))?;
    if header.format != FORMAT || header.dtype != "f32" {
        return Err(format!("unsupported checkpoint {} / {}", header.format, header.dtype));
    }
    let mut params = NetworkParams::<f32>::zeros(header.architecture.clone()).map_err(|e| e.to_string())?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 4 * params.num_parameters() || header.parameters != params.num_parameters() {
        return Err(format!("{} payload bytes for {} parameters", payload.len(), params.num_parameters()));
    }
    let flat: Vec<f32> = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    params.set_flat(&flat).map_err(|e| e.to_string())?;
    Ok((header, params))
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, NetworkParams<f32>)> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    parse_checkpoint(&bytes).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use radar_ism_core::diffnet::Head;

    #[test]
    fn round_trip() {
        let arch = Architecture { widths: vec![2, 4], head: Head::Softmax3, ..Architecture::default() };
        let p = NetworkParams::<f32>::init(arch, 4).unwrap();
        let bytes = checkpoint_bytes(&p, 11, 3);
        let (h, q) = parse_checkpoint(&bytes).unwrap();
        assert_eq!(q, p);
        assert_eq!((h.seed, h.epoch, h.parameters), (11, 3, p.num_parameters()));
        assert!(parse_checkpoint(&bytes[..bytes.len() - 4]).is_err());
    }
}
