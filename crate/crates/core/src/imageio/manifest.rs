use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// One rated image of a subjective database.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    /// Source scene; images sharing it never straddle a train/test split.
    pub content_id: String,
    pub mos: f64,
    pub reference_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct content ids in first-appearance order.
    pub fn content_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .map(|e| e.content_id.as_str())
            .filter(|c| seen.insert(*c))
            .collect()
    }
}

const REQUIRED: [&str; 3] = ["image_path", "content_id", "mos"];
const OPTIONAL: &str = "reference_path";

/// Reads `image_path,content_id,mos[,reference_path]` CSV. Relative paths are
/// resolved against the manifest's directory; `#` lines are comments.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

pub(crate) fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let has_reference = match names.as_slice() {
        [a, b, c] if [*a, *b, *c] == REQUIRED => false,
        [a, b, c, d] if [*a, *b, *c] == REQUIRED && *d == OPTIONAL => true,
        _ => {
            return Err(Error::Schema(format!(
                "header must be `image_path,content_id,mos[,reference_path]`, got `{}`",
                names.join(",")
            )))
        }
    };

    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                row,
                message: e.to_string(),
            }
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 3 || record.len() > names.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let image = &record[0];
        if image.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty image_path".into(),
            });
        }
        let content_id = &record[1];
        if content_id.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty content_id".into(),
            });
        }
        let mos: f64 = record[2].parse().map_err(|_| Error::Parse {
            row,
            message: format!("mos {:?} is not a number", &record[2]),
        })?;
        if !mos.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("mos {:?} is not finite", &record[2]),
            });
        }
        let reference_path = if has_reference {
            record.get(3).filter(|s| !s.is_empty()).map(resolve)
        } else {
            None
        };
        let image_path = resolve(image);
        if !seen.insert(image_path.clone()) {
            return Err(Error::Duplicate(format!(
                "image_path {} (row {row})",
                image_path.display()
            )));
        }
        entries.push(ManifestEntry {
            image_path,
            content_id: content_id.to_string(),
            mos,
            reference_path,
        });
    }
    Ok(DatasetManifest { entries })
}
