//! Dataset manifests: one entry per design case.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::pdb::{parse_pdb_ca, PdbError};
use crate::seq::{ContextError, ReferenceContext, Sequence};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("case {case_id}: structure file {path} does not exist")]
    MissingStructure { case_id: String, path: PathBuf },
    #[error("case {case_id}: {path}: {source}")]
    Pdb {
        case_id: String,
        path: PathBuf,
        source: PdbError,
    },
    #[error("case {case_id}: {source}")]
    Context {
        case_id: String,
        source: ContextError,
    },
    #[error("case {case_id}: start sequence has {got} residues, structure has {expected}")]
    LengthMismatch {
        case_id: String,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub case_id: String,
    /// Relative paths are resolved against the manifest's directory.
    pub reference_structure_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_sequence: Option<Sequence>,
    pub start_sequence: Sequence,
    /// 1-based residue positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ligand_sites: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Loads a manifest and resolves its structure paths, which must exist.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut manifest.entries {
            if e.reference_structure_path.is_relative() {
                e.reference_structure_path = base.join(&e.reference_structure_path);
            }
            if !e.reference_structure_path.exists() {
                return Err(ManifestError::MissingStructure {
                    case_id: e.case_id.clone(),
                    path: e.reference_structure_path.clone(),
                });
            }
        }
        Ok(manifest)
    }
}

impl ManifestEntry {
    /// Reads the reference structure and builds the design context.
    pub fn context(&self) -> Result<ReferenceContext, ManifestError> {
        let path = &self.reference_structure_path;
        let bytes = fs::read(path).map_err(|source| ManifestError::Io {
            path: path.clone(),
            source,
        })?;
        let structure = parse_pdb_ca(&bytes, false).map_err(|source| ManifestError::Pdb {
            case_id: self.case_id.clone(),
            path: path.clone(),
            source,
        })?;
        if structure.len() != self.start_sequence.len() {
            return Err(ManifestError::LengthMismatch {
                case_id: self.case_id.clone(),
                got: self.start_sequence.len(),
                expected: structure.len(),
            });
        }
        ReferenceContext::new(
            self.native_sequence.clone(),
            structure,
            self.ligand_sites.clone().unwrap_or_default(),
        )
        .map_err(|source| ManifestError::Context {
            case_id: self.case_id.clone(),
            source,
        })
    }
}
