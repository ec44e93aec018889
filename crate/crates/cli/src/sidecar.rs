//! Provenance sidecars: every output file is paired with a JSON record of
//! the fully resolved configuration and a digest of the bytes written, so
//! a run can be revalidated against recomputation later.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DIGEST_ALGO: &str = "fnv1a-64";

/// FNV-1a 64-bit digest, hex-encoded. Deterministic across platforms.
pub fn digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: usize,
    pub digest: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub digest_algo: String,
    pub resolved_config: Value,
    pub outputs: Vec<OutputRecord>,
}

/// The complete result of a command run, before it touches the disk.
pub struct RunProduct {
    pub command: &'static str,
    pub resolved_config: Value,
    /// (path, bytes) of each primary output.
    pub outputs: Vec<(PathBuf, Vec<u8>)>,
    /// Human-readable summary printed to stdout.
    pub summary: String,
}

pub fn sidecar_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".sidecar.json");
    primary.with_file_name(name)
}

impl RunProduct {
    fn sidecar(&self) -> Sidecar {
        Sidecar {
            tool: "pragma".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            digest_algo: DIGEST_ALGO.into(),
            resolved_config: self.resolved_config.clone(),
            outputs: self
                .outputs
                .iter()
                .map(|(p, b)| OutputRecord {
                    path: p.display().to_string(),
                    bytes: b.len(),
                    digest: digest(b),
                })
                .collect(),
        }
    }

    /// Write every output plus the sidecar, then print the summary.
    pub fn write(&self) -> Result<(), CliError> {
        for (path, bytes) in &self.outputs {
            std::fs::write(path, bytes)
                .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        }
        if let Some((primary, _)) = self.outputs.first() {
            let sc = sidecar_path(primary);
            let text = serde_json::to_string_pretty(&self.sidecar())
                .expect("sidecar serializes") + "\n";
            std::fs::write(&sc, text)
                .map_err(|e| CliError::config(format!("cannot write {}: {e}", sc.display())))?;
        }
        if !self.summary.is_empty() {
            println!("{}", self.summary);
        }
        Ok(())
    }

    /// Check mode: compare this freshly recomputed product against the
    /// sidecar and the bytes currently on disk.
    pub fn check(&self) -> Result<(), CliError> {
        let Some((primary, _)) = self.outputs.first() else {
            return Err(CliError::config("this command produces no output file to check"));
        };
        let sc_path = sidecar_path(primary);
        let recorded: Sidecar = crate::config::load_json(&sc_path)?;
        let fresh = self.sidecar();
        let mut failures = Vec::new();
        if recorded.resolved_config != fresh.resolved_config {
            failures.push("resolved configuration differs from the sidecar".to_string());
        }
        for (rec, new) in recorded.outputs.iter().zip(&fresh.outputs) {
            if rec.digest != new.digest {
                failures.push(format!(
                    "recomputed {} digest {} != recorded {}",
                    rec.path, new.digest, rec.digest
                ));
            }
        }
        for (path, bytes) in &self.outputs {
            match std::fs::read(path) {
                Ok(disk) if digest(&disk) == digest(bytes) => {}
                Ok(_) => failures.push(format!("{} on disk differs from recomputation", path.display())),
                Err(e) => failures.push(format!("cannot read {}: {e}", path.display())),
            }
        }
        if failures.is_empty() {
            println!("check ok: {} output(s) reproduced bit-exactly", self.outputs.len());
            Ok(())
        } else {
            Err(CliError::Mismatch(failures.join("; ")))
        }
    }

    /// Dispatch on `--check`.
    pub fn finish(&self, check: bool) -> Result<(), CliError> {
        if check {
            self.check()
        } else {
            self.write()
        }
    }
}
