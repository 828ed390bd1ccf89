//! Parameter checkpoints as a single JSON document:
//!
//! ```text
//! {"format":"hiermargin-checkpoint","version":1,"seed":7,"epoch":3,
//!  "dims":[16,64,32],"layers":[{"in_dim":16,"out_dim":64,"weight":[...],"bias":[...]},...]}
//! ```
//!
//! Weights are row-major (`out_dim x in_dim`). Floats are written in their
//! shortest round-trip form, so equal parameters give byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedder::{EmbedderParams, Layer};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "hiermargin-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub epoch: usize,
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Checkpoint {
    pub fn new(params: &EmbedderParams, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            seed,
            epoch,
            dims: params.dims(),
            layers: params.layers.clone(),
        }
    }

    pub fn params(&self) -> Result<EmbedderParams> {
        let p = EmbedderParams {
            layers: self.layers.clone(),
        };
        p.validate()
            .map_err(|e| Error::Checkpoint(format!("invalid parameters: {e}")))?;
        if p.dims() != self.dims {
            return Err(Error::Checkpoint(format!(
                "declared dims {:?} do not match layers {:?}",
                self.dims,
                p.dims()
            )));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.format != FORMAT_NAME || c.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{}",
                c.format, c.version
            )));
        }
        c.params()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// `checkpoint-epoch-0007.json`
pub fn checkpoint_file_name(epoch: usize) -> String {
    format!("checkpoint-epoch-{epoch:04}.json")
}
