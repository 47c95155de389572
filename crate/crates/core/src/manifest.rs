//! The on-disk dataset-set format shared by every pipeline stage.
//!
//! A set is a directory holding:
//!
//! * `meta.json` — image geometry, record count, and the crop policy used;
//! * `manifest.jsonl` — one JSON entry per record (labels, synthetic flag,
//!   provenance);
//! * `arrays/<id>.bin` — raw little-endian f32 pixel data, H×W×3 row-major,
//!   values in [0, 1].
//!
//! Stages append new sets rather than mutating existing ones, so a run
//! directory stays reproducible and diffable.

use crate::image::ImageTensor;
use crate::ingest::FaceRecord;
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed manifest line {line} in {path}: {source}")]
    MalformedEntry { path: String, line: usize, source: serde_json::Error },
    #[error("malformed meta file {path}: {source}")]
    MalformedMeta { path: String, source: serde_json::Error },
    #[error("array {path} holds {got} values, expected {expected}")]
    BadArrayLength { path: String, got: usize, expected: usize },
    #[error("array value {value} in {path} outside [0,1]")]
    ArrayValueOutOfRange { path: String, value: f32 },
    #[error("duplicate entry id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Image(#[from] crate::image::ImageError),
}

fn io_err(path: &Path, source: std::io::Error) -> ManifestError {
    ManifestError::Io { path: path.display().to_string(), source }
}

/// How a synthetic record came to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

/// One manifest line: a record, its pixel array, and its origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub array: String,
    pub record: FaceRecord,
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Set-level metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMeta {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub count: usize,
    /// "full-frame" when no crop box was supplied, "box" otherwise.
    pub crop: String,
}

/// Write one image as raw little-endian f32 values.
pub fn write_array(path: &Path, image: &ImageTensor) -> Result<(), ManifestError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| io_err(path, e))?);
    for &v in image.data().iter() {
        out.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Read one raw f32 array of the given geometry back into an image tensor.
pub fn read_array(path: &Path, height: usize, width: usize) -> Result<ImageTensor, ManifestError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| io_err(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| io_err(path, e))?;
    let expected = height * width * 3;
    if bytes.len() != expected * 4 {
        return Err(ManifestError::BadArrayLength {
            path: path.display().to_string(),
            got: bytes.len() / 4,
            expected,
        });
    }
    let mut values = Vec::with_capacity(expected);
    for chunk in bytes.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(ManifestError::ArrayValueOutOfRange {
                path: path.display().to_string(),
                value: v,
            });
        }
        values.push(v);
    }
    let data = Array3::from_shape_vec((height, width, 3), values).expect("length checked");
    Ok(ImageTensor::new(data)?)
}

/// A dataset set rooted at a directory.
pub struct DatasetSet {
    pub root: PathBuf,
    pub meta: SetMeta,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetSet {
    /// Create a set directory and write `(entry, image)` pairs into it.
    /// Entry ids must be unique; `array` paths are assigned automatically.
    pub fn create(
        root: &Path,
        crop: &str,
        height: usize,
        width: usize,
        items: impl IntoIterator<Item = (ManifestEntry, ImageTensor)>,
    ) -> Result<Self, ManifestError> {
        let arrays_dir = root.join("arrays");
        std::fs::create_dir_all(&arrays_dir).map_err(|e| io_err(&arrays_dir, e))?;
        let mut entries = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (mut entry, image) in items {
            if !seen.insert(entry.id.clone()) {
                return Err(ManifestError::DuplicateId(entry.id));
            }
            entry.array = format!("arrays/{}.bin", entry.id);
            write_array(&root.join(&entry.array), &image)?;
            entries.push(entry);
        }
        let meta = SetMeta {
            height,
            width,
            channels: 3,
            count: entries.len(),
            crop: crop.to_string(),
        };
        let meta_path = root.join("meta.json");
        let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        std::fs::write(&meta_path, meta_json).map_err(|e| io_err(&meta_path, e))?;
        let manifest_path = root.join("manifest.jsonl");
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&manifest_path).map_err(|e| io_err(&manifest_path, e))?,
        );
        for entry in &entries {
            let line = serde_json::to_string(entry).expect("entry serializes");
            writeln!(out, "{line}").map_err(|e| io_err(&manifest_path, e))?;
        }
        Ok(Self { root: root.to_path_buf(), meta, entries })
    }

    /// Open an existing set (manifest and meta only; arrays load lazily).
    pub fn open(root: &Path) -> Result<Self, ManifestError> {
        let meta_path = root.join("meta.json");
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
        let meta: SetMeta = serde_json::from_str(&meta_text).map_err(|source| {
            ManifestError::MalformedMeta { path: meta_path.display().to_string(), source }
        })?;
        let manifest_path = root.join("manifest.jsonl");
        let file = std::fs::File::open(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(&manifest_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|source| ManifestError::MalformedEntry {
                path: manifest_path.display().to_string(),
                line: idx + 1,
                source,
            })?;
            entries.push(entry);
        }
        Ok(Self { root: root.to_path_buf(), meta, entries })
    }

    /// Load the pixel array for one entry.
    pub fn load_image(&self, entry: &ManifestEntry) -> Result<ImageTensor, ManifestError> {
        read_array(&self.root.join(&entry.array), self.meta.height, self.meta.width)
    }

    /// Load every image, in manifest order.
    pub fn load_all_images(&self) -> Result<Vec<ImageTensor>, ManifestError> {
        self.entries.iter().map(|e| self.load_image(e)).collect()
    }
}
