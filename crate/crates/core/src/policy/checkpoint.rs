//! Binary parameter checkpoints.
//!
//! ```text
//! magic    8 bytes  "WBCPOLCY"
//! version  u32 LE
//! hash     32 bytes SHA-256 of the JSON-encoded PolicyConfig
//! count    u64 LE
//! params   count x f64 LE, in layout order
//! ```

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Policy, PolicyConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WBCPOLCY";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a policy checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint was written for a different network configuration")]
    ConfigMismatch,
    #[error("checkpoint truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("parameter count {got} does not match the configuration ({expected})")]
    ParamCount { expected: usize, got: usize },
    #[error("invalid network configuration: {0}")]
    Config(String),
}

impl PolicyConfig {
    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }
}

impl Policy {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.num_params());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config().hash());
        out.extend_from_slice(&(self.num_params() as u64).to_le_bytes());
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Decodes a checkpoint written for `config`; returns the policy and the
    /// number of bytes consumed.
    pub fn decode(config: PolicyConfig, bytes: &[u8]) -> Result<(Policy, usize), CheckpointError> {
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Truncated {
                needed: HEADER_LEN,
                have: bytes.len(),
            });
        }
        if &bytes[0..8] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        if bytes[12..44] != config.hash() {
            return Err(CheckpointError::ConfigMismatch);
        }
        let count = u64::from_le_bytes(bytes[44..52].try_into().expect("8 bytes")) as usize;
        let mut policy = Policy::zeros(config).map_err(|e| CheckpointError::Config(e.to_string()))?;
        if count != policy.num_params() {
            return Err(CheckpointError::ParamCount {
                expected: policy.num_params(),
                got: count,
            });
        }
        let end = HEADER_LEN + 8 * count;
        if bytes.len() < end {
            return Err(CheckpointError::Truncated {
                needed: end,
                have: bytes.len(),
            });
        }
        for (dst, chunk) in policy
            .params_mut()
            .iter_mut()
            .zip(bytes[HEADER_LEN..end].chunks_exact(8))
        {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        Ok((policy, end))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(config: PolicyConfig, path: &Path) -> Result<Policy, CheckpointError> {
        let bytes = fs::read(path)?;
        Ok(Policy::decode(config, &bytes)?.0)
    }
}
