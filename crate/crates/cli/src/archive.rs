//! Sample archives: one packed-bits file per generation time plus an
//! `archive.json` index.

use std::path::{Path, PathBuf};

use rbmlab::data::{load_binary_matrix, write_atomic};
use rbmlab::{BinaryDataset, Format, RbmError, Result};
use serde::{Deserialize, Serialize};

use crate::config::InitMode;

pub const INDEX: &str = "archive.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveIndex {
    pub t_age: u64,
    pub init: InitMode,
    pub seed: u64,
    pub n_chains: usize,
    pub n_visible: usize,
    pub image_shape: Option<(usize, usize)>,
    pub points: Vec<ArchivePoint>,
    /// Autocorrelation file, when recorded.
    pub rho: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivePoint {
    pub t_g: u64,
    pub file: String,
}

pub fn sample_file(t_g: u64) -> String {
    format!("samples_t{t_g:08}.rbmb")
}

pub fn write_index(dir: &Path, index: &ArchiveIndex) -> Result<()> {
    let mut text = serde_json::to_string_pretty(index).expect("index serializes");
    text.push('\n');
    write_atomic(&dir.join(INDEX), text.as_bytes())
}

pub fn read_index(dir: &Path) -> Result<ArchiveIndex> {
    let path = dir.join(INDEX);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| RbmError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RbmError::Format {
        location: format!("{}, line {}", path.display(), e.line()),
        message: e.to_string(),
    })
}

pub fn load_point(dir: &Path, point: &ArchivePoint) -> Result<BinaryDataset> {
    load_binary_matrix(&dir.join(&point.file), Format::PackedBits)
}

pub fn point_path(dir: &Path, point: &ArchivePoint) -> PathBuf {
    dir.join(&point.file)
}
