//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys mirror the field names of the config structs. Every key in a file must
//! be claimed by some config, so typos are reported instead of ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::encoder::{ClassifierConfig, EncoderConfig};
use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::learning::TrainerConfig;

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    path: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "empty key".into(),
                });
            }
            if entries.contains_key(&key) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
            entries.insert(key, (value.trim().to_string(), line));
        }
        Ok(KeyValues {
            path: path.to_path_buf(),
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses `key` into `target` when present.
    pub fn set<T: FromStr>(&self, key: &str, target: &mut T) -> Result<()> {
        if let Some((raw, line)) = self.entries.get(key) {
            self.used.borrow_mut().insert(key.to_string());
            *target = raw.parse().map_err(|_| Error::Parse {
                path: self.path.clone(),
                line: *line,
                message: format!("invalid value {raw:?} for {key}"),
            })?;
        }
        Ok(())
    }

    /// Comma-separated list form of [`KeyValues::set`].
    pub fn set_list<T: FromStr>(&self, key: &str, target: &mut Vec<T>) -> Result<()> {
        if let Some((raw, line)) = self.entries.get(key) {
            self.used.borrow_mut().insert(key.to_string());
            *target = raw
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map_err(|_| Error::Parse {
                    path: self.path.clone(),
                    line: *line,
                    message: format!("invalid list {raw:?} for {key}"),
                })?;
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some((raw, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        raw.parse().map(Some).map_err(|_| Error::Parse {
            path: self.path.clone(),
            line: *line,
            message: format!("invalid value {raw:?} for {key}"),
        })
    }

    /// Fails on the first key no config claimed.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((key, (_, line))) => Err(Error::Parse {
                path: self.path.clone(),
                line: *line,
                message: format!("unknown key {key:?}"),
            }),
            None => Ok(()),
        }
    }
}

/// Config structs that can be overridden from a [`KeyValues`] file.
pub trait FromKeyValues {
    fn apply(&mut self, kv: &KeyValues) -> Result<()>;
}

impl FromKeyValues for InferenceConfig {
    fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.set("zeta", &mut self.zeta)?;
        kv.set("alpha0", &mut self.alpha0)?;
        kv.set("decay", &mut self.decay)?;
        kv.set("max_iters", &mut self.max_iters)?;
        kv.set("tol", &mut self.tol)?;
        kv.set("init_variance", &mut self.init_variance)?;
        kv.set("restarts", &mut self.restarts)?;
        kv.set("accelerate", &mut self.accelerate)?;
        kv.set("record_trace", &mut self.record_trace)?;
        Ok(())
    }
}

impl FromKeyValues for TrainerConfig {
    fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.set("lr_psi", &mut self.lr_psi)?;
        kv.set("epochs", &mut self.epochs)?;
        kv.set("batch_size", &mut self.batch_size)?;
        kv.set("gamma", &mut self.gamma)?;
        kv.set("init_variance_psi", &mut self.init_variance_psi)?;
        kv.set("latent_scale", &mut self.latent_scale)?;
        kv.set("seed", &mut self.seed)?;
        self.inference.apply(kv)
    }
}

impl FromKeyValues for EncoderConfig {
    fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.set("zeta_prior", &mut self.zeta_prior)?;
        kv.set("kl_weight", &mut self.kl_weight)?;
        kv.set("samples_j", &mut self.samples_j)?;
        kv.set("lr", &mut self.lr)?;
        kv.set("epochs", &mut self.epochs)?;
        kv.set("batch_size", &mut self.batch_size)?;
        kv.set("coefficient_spread", &mut self.coefficient_spread)?;
        kv.set_list("hidden", &mut self.hidden)?;
        kv.set("seed", &mut self.seed)?;
        Ok(())
    }
}

impl FromKeyValues for ClassifierConfig {
    fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.set("lr", &mut self.lr)?;
        kv.set("epochs", &mut self.epochs)?;
        kv.set("l2", &mut self.l2)?;
        Ok(())
    }
}
