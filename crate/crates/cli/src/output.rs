//! Output directory handling and the run manifest.

use std::path::{Path, PathBuf};

use risplan_core::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const INPUT: u8 = 2;
pub const RUNTIME: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: INPUT, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: RUNTIME, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Touchstone { .. }
            | Error::Scene { .. }
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. } => INPUT,
            Error::Coincident(_) | Error::Incompatible(_) | Error::Io { .. } => RUNTIME,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input_path: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<OutputFile>,
}

/// Files of one run, staged in memory and written together.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    /// Fails with an input error when any target already exists and `force`
    /// is off. Called before the computation so nothing is wasted.
    pub fn check_clobber(dir: &Path, names: &[String], force: bool) -> CliResult<()> {
        if force {
            return Ok(());
        }
        let mut existing = names
            .iter()
            .map(|n| dir.join(n))
            .chain(std::iter::once(dir.join(MANIFEST)))
            .filter(|p| p.exists());
        match existing.next() {
            Some(p) => Err(CliError::input(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            ))),
            None => Ok(()),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every file and then `manifest.json` listing their digests.
    pub fn finish(
        self,
        command: &str,
        input_path: &Path,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> CliResult<()> {
        let write = |path: &Path, data: &[u8]| {
            std::fs::write(path, data)
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| {
            CliError::runtime(format!("cannot create {}: {e}", self.dir.display()))
        })?;
        let mut outputs = Vec::with_capacity(self.files.len());
        for (name, data) in &self.files {
            write(&self.dir.join(name), data)?;
            outputs.push(OutputFile { file: name.clone(), sha256: sha256_hex(data) });
            log::info!("wrote {}", self.dir.join(name).display());
        }
        let manifest = RunManifest {
            command: command.to_string(),
            input_path: input_path.display().to_string(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        write(&self.dir.join(MANIFEST), text.as_bytes())
    }
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn error_codes() {
        let e: CliError = Error::Incompatible("x".into()).into();
        assert_eq!(e.code, RUNTIME);
        let e: CliError = Error::Scene { path: "a.b".into(), message: "bad".into() }.into();
        assert_eq!(e.code, INPUT);
    }
}
