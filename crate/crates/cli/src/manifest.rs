//! Run manifests and output-collision checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Fails unless every output is new (or `force` is set) and no output is
/// also an input.
pub fn check_outputs(outputs: &[PathBuf], inputs: &[PathBuf], force: bool) -> Result<(), CliError> {
    let canon = |p: &Path| fs::canonicalize(p).ok();
    let input_set: Vec<PathBuf> = inputs.iter().filter_map(|p| canon(p)).collect();
    for out in outputs {
        if let Some(c) = canon(out) {
            if input_set.contains(&c) {
                return Err(CliError::usage(format!("output {} is also an input", out.display())));
            }
        }
        if out.exists() && !force {
            return Err(CliError::usage(format!(
                "refusing to overwrite {} (pass --force)",
                out.display()
            )));
        }
    }
    Ok(())
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

pub fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Plain-text `key = value` record of one command invocation.
pub struct Manifest {
    command: String,
    started: Instant,
    seed: Option<u64>,
    config: BTreeMap<String, String>,
    config_file: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    results: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Instant::now(),
            seed: None,
            config: BTreeMap::new(),
            config_file: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Vec::new(),
        }
    }

    pub fn config(&mut self, snapshot: BTreeMap<String, String>, file: Option<&Path>) {
        self.config = snapshot;
        self.config_file = file.map(Path::to_path_buf);
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut s = String::new();
        let mut line = |k: &str, v: &str| writeln!(s, "{k} = {v}").expect("string write");
        line("command", &self.command);
        line("artifact_version", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.seed {
            line("seed", &seed.to_string());
        }
        if let Some(f) = &self.config_file {
            line("config_file", &f.display().to_string());
        }
        for (k, v) in &self.config {
            line(&format!("config.{k}"), v);
        }
        for (i, p) in self.inputs.iter().enumerate() {
            line(&format!("input.{i}.path"), &p.display().to_string());
            line(&format!("input.{i}.sha256"), &sha256_file(p)?);
        }
        for (i, p) in self.outputs.iter().enumerate() {
            line(&format!("output.{i}"), &p.display().to_string());
        }
        for (k, v) in &self.results {
            line(&format!("result.{k}"), v);
        }
        line("wall_clock_s", &format!("{:.3}", self.started.elapsed().as_secs_f64()));
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = self.render()?;
        write_output(path, text)
    }
}
