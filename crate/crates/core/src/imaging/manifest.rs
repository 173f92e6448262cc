//! Dataset manifest: one JSON array describing every enrollable image.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::IrisGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Eye {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl fmt::Display for Eye {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Eye::Left => "L",
            Eye::Right => "R",
        })
    }
}

/// Capture session. `Fused` never appears in manifests; it labels templates
/// built by concatenating a VL/NIR pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Session {
    #[serde(rename = "VL")]
    Vl,
    #[serde(rename = "NIR")]
    Nir,
    #[serde(rename = "FUSED")]
    Fused,
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Session::Vl => "VL",
            Session::Nir => "NIR",
            Session::Fused => "FUSED",
        })
    }
}

impl std::str::FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "VL" => Ok(Session::Vl),
            "NIR" => Ok(Session::Nir),
            "FUSED" => Ok(Session::Fused),
            other => Err(Error::Manifest(format!("unknown session {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub eye: Eye,
    pub session: Session,
    pub path: String,
    /// Absent geometry triggers circle detection at enrollment time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<IrisGeometry>,
}

impl ManifestEntry {
    /// Class label used throughout matching and evaluation: one eye of one
    /// subject is one class.
    pub fn class_label(&self) -> String {
        format!("{}_{}", self.subject_id, self.eye)
    }

    pub fn resolved_path(&self, base: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

/// Serialized as a bare JSON array of entries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
        for entry in &manifest.entries {
            if entry.session == Session::Fused {
                return Err(Error::Manifest(format!(
                    "entry {} declares session FUSED; manifests may only hold VL or NIR captures",
                    entry.path
                )));
            }
            if let Some(g) = &entry.geometry {
                g.validate()
                    .map_err(|e| Error::Manifest(format!("entry {}: {e}", entry.path)))?;
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries of one session grouped by class label, manifest order kept.
    pub fn by_class(&self, session: Session) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.session == session {
                map.entry(e.class_label()).or_default().push(i);
            }
        }
        map
    }
}
