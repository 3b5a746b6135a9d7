//! Per-run state: resolved config, digests of everything read and written,
//! and the run-log record.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const RUN_LOG: &str = "run_log.jsonl";

pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Ctx {
    pub fn new(cfg: RunConfig, seed: u64, out: PathBuf) -> Self {
        Ctx {
            cfg,
            seed,
            out,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn note_input_bytes(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs
            .insert(path.display().to_string(), sha256_hex(bytes));
    }

    /// Read a whole input file and record its digest.
    pub fn read(&mut self, path: &Path) -> anyhow::Result<Vec<u8>> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.note_input_bytes(path, &bytes);
        Ok(bytes)
    }

    /// Write `name` under the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs
            .insert(path.display().to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn append_log(
        &self,
        subcommand: &str,
        argv: &[String],
        status: Status,
    ) -> anyhow::Result<()> {
        append_log(
            &self.out,
            &LogRecord {
                timestamp: chrono::Utc::now().to_rfc3339(),
                subcommand,
                argv,
                config: Some(&self.cfg),
                seed: Some(self.seed),
                inputs: &self.inputs,
                outputs: &self.outputs,
                status,
            },
        )
    }
}

#[derive(Serialize)]
pub struct LogRecord<'a> {
    pub timestamp: String,
    pub subcommand: &'a str,
    pub argv: &'a [String],
    pub config: Option<&'a RunConfig>,
    pub seed: Option<u64>,
    pub inputs: &'a BTreeMap<String, String>,
    pub outputs: &'a BTreeMap<String, String>,
    #[serde(flatten)]
    pub status: Status,
}

pub fn append_log(out: &Path, record: &LogRecord) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join(RUN_LOG))?;
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error { kind: String, message: String },
}
