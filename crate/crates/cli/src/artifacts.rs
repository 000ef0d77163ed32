//! Artifact emission. Every file carries the config hash and seeds; the
//! manifest lists each artifact with its digest and is itself a valid
//! `--config` input.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
struct Entry {
    name: String,
    bytes: usize,
    sha256: String,
}

pub struct Artifacts {
    dir: PathBuf,
    config: Value,
    hash: String,
    seeds: Value,
    entries: Vec<Entry>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn config_hash(config: &RunConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

/// Shortest round-trip form, scientific for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

impl Artifacts {
    pub fn new(dir: &Path, config: &RunConfig, seeds: Value) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            config: serde_json::to_value(config).expect("config serializes"),
            hash: config_hash(config),
            seeds,
            entries: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, data: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), data)?;
        self.entries.push(Entry {
            name: name.to_string(),
            bytes: data.len(),
            sha256: sha256_hex(data),
        });
        Ok(())
    }

    /// CSV with a leading `#` comment line holding the hash and seeds.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut out = format!("# config_sha256={} seeds={}\n", self.hash, self.seeds);
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write(name, out.as_bytes())
    }

    /// JSON object with `config_sha256` and `seeds` added at the top level.
    pub fn json(&mut self, name: &str, value: impl Serialize) -> std::io::Result<()> {
        let mut v = serde_json::to_value(value).expect("artifact serializes");
        let obj = match v {
            Value::Object(ref mut m) => m,
            _ => panic!("JSON artifacts are objects"),
        };
        obj.insert("config_sha256".into(), Value::String(self.hash.clone()));
        obj.insert("seeds".into(), self.seeds.clone());
        let mut text = serde_json::to_string_pretty(&v).expect("artifact serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Raw bytes; provenance lives in the sidecar `<name>.json`.
    pub fn binary(&mut self, name: &str, data: &[u8], sidecar: impl Serialize) -> std::io::Result<()> {
        self.write(name, data)?;
        let digest = self.entries.last().expect("just written").sha256.clone();
        let mut side = serde_json::to_value(sidecar).expect("sidecar serializes");
        if let Value::Object(ref mut m) = side {
            m.insert("file".into(), Value::String(name.to_string()));
            m.insert("file_sha256".into(), Value::String(digest));
        }
        self.json(&format!("{name}.json"), side)
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        let manifest = json!({
            "tool": "lgcert",
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "config_sha256": self.hash,
            "seeds": self.seeds,
            "artifacts": self.entries,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        self.entries.clear();
        Ok(())
    }
}
