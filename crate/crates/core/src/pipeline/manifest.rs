//! Catalogue of recorded sequences: name, length, spike count and file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub name: String,
    pub length_s: f64,
    pub spike_count: u64,
    /// `.vdr` file, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
}

/// Stored as TOML with one `[[sequence]]` table per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default, rename = "sequence")]
    pub sequences: Vec<SequenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub name: String,
    pub field: String,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ManifestReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ManifestReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Durations closer than this are taken as equal.
const LENGTH_TOLERANCE_S: f64 = 1e-9;

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io::open_error(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        crate::io::write_atomic(path, text.as_bytes())
    }

    /// Entry for a `.vdr` file, named after its file stem.
    pub fn entry_for(file: &Path, stored_as: PathBuf) -> Result<SequenceEntry> {
        let cube = crate::io::load_cube(file)?;
        Ok(SequenceEntry {
            name: file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            length_s: cube.duration_secs(),
            spike_count: cube.spike_count(),
            path: stored_as,
        })
    }

    /// Recomputes every entry from its file. Entries whose file is missing or
    /// unreadable are reported as a mismatch on `path`.
    pub fn validate(&self, base: &Path) -> ManifestReport {
        let mut report = ManifestReport::default();
        for e in &self.sequences {
            report.checked += 1;
            let file = if e.path.is_absolute() {
                e.path.clone()
            } else {
                base.join(&e.path)
            };
            let mismatch = |field: &str, expected: String, found: String| Mismatch {
                name: e.name.clone(),
                field: field.into(),
                expected,
                found,
            };
            match crate::io::load_cube(&file) {
                Err(err) => report
                    .mismatches
                    .push(mismatch("path", file.display().to_string(), err.to_string())),
                Ok(cube) => {
                    let count = cube.spike_count();
                    if count != e.spike_count {
                        report.mismatches.push(mismatch(
                            "spike_count",
                            e.spike_count.to_string(),
                            count.to_string(),
                        ));
                    }
                    let len = cube.duration_secs();
                    if (len - e.length_s).abs() > LENGTH_TOLERANCE_S {
                        report
                            .mismatches
                            .push(mismatch("length_s", e.length_s.to_string(), len.to_string()));
                    }
                }
            }
        }
        report
    }
}
