//! Reading inputs and writing outputs atomically.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use aligncheck_core::alignment::RecordingAlignment;
use aligncheck_core::detect::DetectorConfig;
use aligncheck_core::io::parse_alignment_records;
use aligncheck_core::model::CorpusModel;

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV: &str = "ALIGNCHECK_CONFIG";

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the same directory, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let fail = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_alignments(path: &Path) -> CliResult<BTreeMap<String, RecordingAlignment>> {
    parse_alignment_records(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_model(path: &Path) -> CliResult<CorpusModel> {
    CorpusModel::from_json(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// The detector configuration from `--config`, else from the file named by
/// `ALIGNCHECK_CONFIG`, else the defaults. Returns the file used, if any.
pub fn load_config(flag: Option<&Path>) -> CliResult<(DetectorConfig, Option<PathBuf>)> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    let Some(path) = path else {
        return Ok((DetectorConfig::default(), None));
    };
    let cfg = DetectorConfig::from_toml_str(&read_text(&path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((cfg, Some(path)))
}
