//! `run_meta` sidecar written next to each command's outputs.

use std::path::{Path, PathBuf};

use astskin::io::{sha256_hex, write_atomic};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(label: impl Into<String>, bytes: &[u8]) -> Self {
        Self { path: label.into(), sha256: sha256_hex(bytes) }
    }

    pub fn of_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::of_bytes(path.display().to_string(), &std::fs::read(path)?))
    }
}

#[derive(Debug, Serialize)]
struct Versions {
    astskin: &'static str,
    rng: &'static str,
    model_format: u64,
}

#[derive(Debug, Serialize)]
pub struct RunMeta {
    command: String,
    args: Vec<String>,
    seed: u64,
    versions: Versions,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunMeta {
    pub fn new(command: &str, args: &[String], seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args: args.to_vec(),
            seed,
            versions: Versions {
                astskin: env!("CARGO_PKG_VERSION"),
                rng: astskin::rng::RNG_VERSION,
                model_format: astskin::learn::MODEL_FORMAT_VERSION,
            },
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push(FileDigest::of_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.push(FileDigest::of_file(path)?);
        Ok(())
    }

    /// Writes `<primary>.run_meta.json`, or `run_meta.json` inside a directory.
    pub fn write_beside(&self, primary: &Path) -> std::io::Result<PathBuf> {
        let path = if primary.is_dir() {
            primary.join("run_meta.json")
        } else {
            let mut name = primary.file_name().unwrap_or_default().to_os_string();
            name.push(".run_meta.json");
            primary.with_file_name(name)
        };
        let mut text = serde_json::to_string_pretty(self).expect("run metadata serialises");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
