//! JSON checkpoint container: parameter name → shape + row-major values,
//! plus the configuration block that produced them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const FORMAT: &str = "graphrel-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: Value,
    /// Free-form metadata (step, dev score, ...). Not validated.
    #[serde(default)]
    pub meta: Value,
    pub params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(config: Value, store: &ParamStore, meta: Value) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            config,
            meta,
            params: store.snapshot(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_slice(&fs::read(path)?)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        for (name, t) in &ck.params {
            if t.shape().iter().product::<usize>() != t.len() || t.is_empty() {
                return Err(Error::Format(format!("parameter {name} has inconsistent shape")));
            }
        }
        Ok(ck)
    }

    /// Loads parameter values into `store` after checking that the stored
    /// configuration equals `expected`.
    pub fn restore_into(&self, expected: &Value, store: &mut ParamStore) -> Result<()> {
        if &self.config != expected {
            return Err(Error::config(
                "checkpoint configuration does not match the requested model configuration",
            ));
        }
        store.restore(&self.params)
    }
}
