use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Algorithm;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CTXC";

/// Agent snapshot: network parameter blob, hyperparameters as JSON and the
/// optimizer state blob.
///
/// File layout: `b"CTXC"`, then three `u64`-length-prefixed parts in the
/// order weights, hyperparameter JSON, optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algorithm: Algorithm,
    pub weights: Vec<u8>,
    pub hyperparams: BTreeMap<String, f64>,
    pub optimizer: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct HyperSection {
    algorithm: Algorithm,
    hyperparams: BTreeMap<String, f64>,
}

impl Checkpoint {
    /// Weights followed by optimizer state; the part copied at exploit time.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut out = self.weights.clone();
        out.extend_from_slice(&self.optimizer);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let hyper = serde_json::to_vec(&HyperSection {
            algorithm: self.algorithm,
            hyperparams: self.hyperparams.clone(),
        })
        .expect("hyperparameters serialize");
        let mut out =
            Vec::with_capacity(4 + 24 + self.weights.len() + hyper.len() + self.optimizer.len());
        out.extend_from_slice(MAGIC);
        for part in [&self.weights[..], &hyper[..], &self.optimizer[..]] {
            out.extend_from_slice(&(part.len() as u64).to_le_bytes());
            out.extend_from_slice(part);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::invalid("not a checkpoint"));
        }
        let mut rest = &bytes[4..];
        let mut parts = Vec::with_capacity(3);
        for _ in 0..3 {
            if rest.len() < 8 {
                return Err(Error::invalid("truncated checkpoint"));
            }
            let len = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
            let part = rest
                .get(8..8 + len)
                .ok_or_else(|| Error::invalid("truncated checkpoint"))?;
            parts.push(part.to_vec());
            rest = &rest[8 + len..];
        }
        if !rest.is_empty() {
            return Err(Error::invalid("trailing bytes after checkpoint"));
        }
        let optimizer = parts.pop().unwrap();
        let hyper: HyperSection = serde_json::from_slice(&parts.pop().unwrap())?;
        let weights = parts.pop().unwrap();
        Ok(Self {
            algorithm: hyper.algorithm,
            weights,
            hyperparams: hyper.hyperparams,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let ckpt = Checkpoint {
            algorithm: Algorithm::Ppo,
            weights: vec![1, 2, 3],
            hyperparams: [("gamma".to_string(), 0.9)].into_iter().collect(),
            optimizer: vec![9; 17],
        };
        let bytes = ckpt.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ckpt);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"CTXB").is_err());
        assert_eq!(ckpt.state_bytes().len(), 20);
    }
}
