//! Run manifests and output-file bookkeeping for the command-line tool.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fft3::GridDims;
use crate::params::ModelParams;

/// One manifest per command invocation; every output file it produced is
/// listed exactly once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: ModelParams,
    pub grid: Option<GridDims>,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

pub struct ManifestBuilder {
    command: String,
    params: ModelParams,
    grid: Option<GridDims>,
    seed: u64,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, params: &ModelParams) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            params: *params,
            grid: None,
            seed: 0,
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn grid(mut self, dims: GridDims) -> Self {
        self.grid = Some(dims);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(self, path: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            params: self.params,
            grid: self.grid,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}
