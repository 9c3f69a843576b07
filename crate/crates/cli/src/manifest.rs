//! Run manifests: the fully resolved job that produced an output set.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::{CliError, Job};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub job: Job,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

/// Where the manifest of an output set lives.
pub fn manifest_path(job: &Job) -> PathBuf {
    let out = job.out();
    if job.writes_directory() {
        out.join("manifest.json")
    } else {
        let mut name = out
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

pub fn write(job: &Job, outputs: &[PathBuf]) -> Result<PathBuf, CliError> {
    let path = manifest_path(job);
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest {
        command: job.name().to_string(),
        tool_version: TOOL_VERSION.to_string(),
        seed: job.seed(),
        job: job.clone(),
        outputs: outputs
            .iter()
            .map(|p| {
                p.strip_prefix(&dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned()
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Internal(format!("serializing manifest: {e}")))?;
    fs::write(&path, text + "\n")
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

pub fn read(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("reading manifest {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("parsing manifest {}: {e}", path.display())))
}
