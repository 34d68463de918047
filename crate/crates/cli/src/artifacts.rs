//! Versioned JSON artifacts in the output directory.
//!
//! Every file records the artifact kind, a format version and the hash of the
//! config that produced it. A file written under a different config is treated
//! as absent, so stages retrain instead of silently mixing runs.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    format_version: u32,
    config_hash: String,
    body: T,
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
    config_hash: String,
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>, config_hash: impl Into<String>) -> Self {
        Self {
            dir: dir.into(),
            config_hash: config_hash.into(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join("artifacts").join(format!("{name}.json"))
    }

    pub fn save<T: Serialize>(&self, kind: &str, name: &str, body: &T) -> Result<PathBuf> {
        let envelope = Envelope {
            kind: kind.to_string(),
            format_version: FORMAT_VERSION,
            config_hash: self.config_hash.clone(),
            body,
        };
        let path = self.path(name);
        write_file(&path, &serde_json::to_vec_pretty(&envelope)?)?;
        Ok(path)
    }

    /// `None` when the file is missing or was produced by another config.
    pub fn load<T: DeserializeOwned>(&self, kind: &str, name: &str) -> Result<Option<T>> {
        let path = self.path(name);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        let envelope: Envelope<serde_json::Value> = serde_json::from_slice(&bytes)?;
        if envelope.kind != kind {
            return Err(CliError::Artifact(format!(
                "{}: expected kind {kind}, found {}",
                path.display(),
                envelope.kind
            )));
        }
        if envelope.format_version != FORMAT_VERSION {
            return Err(CliError::Artifact(format!(
                "{}: format version {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                envelope.format_version
            )));
        }
        if envelope.config_hash != self.config_hash {
            return Ok(None);
        }
        Ok(Some(serde_json::from_value(envelope.body)?))
    }

    /// Loads `name`, or builds and saves it.
    pub fn fetch<T, F>(&self, kind: &str, name: &str, make: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.load(kind, name)? {
            return Ok(v);
        }
        let v = make()?;
        self.save(kind, name, &v)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path(), "abc");
        assert_eq!(store.load::<Vec<f64>>("v", "x").unwrap(), None);
        let v = vec![0.1, 1.0 / 3.0, -2.5e-300];
        store.save("v", "x", &v).unwrap();
        assert_eq!(store.load::<Vec<f64>>("v", "x").unwrap(), Some(v.clone()));
        assert!(matches!(
            store.load::<Vec<f64>>("w", "x"),
            Err(CliError::Artifact(_))
        ));
        let other = Store::new(dir.path(), "def");
        assert_eq!(other.load::<Vec<f64>>("v", "x").unwrap(), None);
        let mut calls = 0;
        let got: Vec<f64> = other
            .fetch("v", "x", || {
                calls += 1;
                Ok(vec![2.0])
            })
            .unwrap();
        assert_eq!((got, calls), (vec![2.0], 1));
    }
}
