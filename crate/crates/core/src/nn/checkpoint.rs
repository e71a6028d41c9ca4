use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::LayerSpec;
use crate::nn::network::Network;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamBlob {
    shape: Vec<usize>,
    /// Little-endian f64 values, base64 encoded.
    data: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    arch: Vec<LayerSpec>,
    params: Vec<ParamBlob>,
}

fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode(s: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(s)
        .map_err(|e| Error::invalid(format!("bad base64 in checkpoint: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid("checkpoint blob length not a multiple of 8"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        arch: net.specs(),
        params: net
            .params()
            .iter()
            .map(|p| ParamBlob { shape: p.shape().to_vec(), data: encode(p.data()) })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("unsupported checkpoint version {}", file.version),
        });
    }
    let mut net = Network::init(&file.arch, 0)?;
    {
        let mut params = net.params_mut();
        if params.len() != file.params.len() {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                reason: format!(
                    "checkpoint has {} parameter blobs, architecture needs {}",
                    file.params.len(),
                    params.len()
                ),
            });
        }
        for (p, blob) in params.iter_mut().zip(&file.params) {
            if p.shape() != blob.shape.as_slice() {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    reason: format!("parameter shape {:?} does not match {:?}", blob.shape, p.shape()),
                });
            }
            let values = decode(&blob.data)?;
            if values.len() != p.len() {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    reason: "parameter value count mismatch".into(),
                });
            }
            p.data_mut().copy_from_slice(&values);
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let specs = [
            LayerSpec::Conv3x3 { in_ch: 1, out_ch: 2 },
            LayerSpec::Relu,
            LayerSpec::Dense { input: 2 * 4 * 4, output: 3 },
            LayerSpec::Sigmoid,
        ];
        let net = Network::init(&specs, 99).unwrap();
        let dir = std::env::temp_dir().join("lbaug_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt.json");
        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(net.specs(), loaded.specs());
        assert_eq!(net.param_vector(), loaded.param_vector());
    }

    #[test]
    fn rejects_wrong_version() {
        let dir = std::env::temp_dir().join("lbaug_ckpt_test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt.json");
        std::fs::write(&path, r#"{"version":42,"arch":[],"params":[]}"#).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
