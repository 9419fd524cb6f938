use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassId, DatasetError, ZslDataset};
use crate::linalg::Matrix;

/// On-disk description of a split. Matrix and label paths are relative to
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub visual_seen: String,
    pub labels_seen: String,
    pub visual_unseen: String,
    pub labels_unseen: String,
    pub prototypes: String,
    pub seen_classes: Vec<ClassId>,
    pub unseen_classes: Vec<ClassId>,
}

impl Manifest {
    /// File names used by [`save_manifest`].
    pub fn standard(seen_classes: Vec<ClassId>, unseen_classes: Vec<ClassId>) -> Self {
        Self {
            visual_seen: "visual_seen.csv".into(),
            labels_seen: "labels_seen.txt".into(),
            visual_unseen: "visual_unseen.csv".into(),
            labels_unseen: "labels_unseen.txt".into(),
            prototypes: "prototypes.csv".into(),
            seen_classes,
            unseen_classes,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DatasetError::MissingFile(path.to_path_buf())
        } else {
            DatasetError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

fn parse_err(path: &Path, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a headerless, comma-separated, row-major matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix, DatasetError> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, format!("row {}: {f:?}: {e}", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if let Some(first) = rows.first() {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(parse_err(
                path,
                format!("row {} has {} fields, expected {}", i + 1, r.len(), first.len()),
            ));
        }
    }
    Matrix::from_rows(&rows).map_err(|e| parse_err(path, e.to_string()))
}

/// Reads one non-negative integer per line; blank lines are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<ClassId>, DatasetError> {
    read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<ClassId>()
                .map_err(|e| parse_err(path, format!("line {}: {l:?}: {e}", i + 1)))
        })
        .collect()
}

fn create(path: &Path) -> Result<fs::File, DatasetError> {
    fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a matrix as headerless CSV using the shortest decimal form that
/// parses back to the same `f64`.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<(), DatasetError> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(io_err(path))
}

pub fn write_labels(path: &Path, labels: &[ClassId]) -> Result<(), DatasetError> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Loads and validates a dataset from a JSON manifest.
pub fn load_manifest(path: &Path) -> Result<ZslDataset, DatasetError> {
    let text = read_to_string(path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |rel: &str| -> PathBuf { base.join(rel) };

    let visual_seen = read_matrix_csv(&resolve(&manifest.visual_seen))?;
    let labels_seen = read_labels(&resolve(&manifest.labels_seen))?;
    let visual_unseen = read_matrix_csv(&resolve(&manifest.visual_unseen))?;
    let labels_unseen = read_labels(&resolve(&manifest.labels_unseen))?;
    let prototypes = read_matrix_csv(&resolve(&manifest.prototypes))?;
    ZslDataset::new(
        visual_seen,
        labels_seen,
        visual_unseen,
        labels_unseen,
        prototypes,
        manifest.seen_classes,
        manifest.unseen_classes,
    )
}

/// Writes `dataset` into `dir` using the standard file names and returns the
/// manifest path.
pub fn save_manifest(dataset: &ZslDataset, dir: &Path) -> Result<PathBuf, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = Manifest::standard(
        dataset.seen_classes().to_vec(),
        dataset.unseen_classes().to_vec(),
    );
    write_matrix_csv(&dir.join(&manifest.visual_seen), dataset.visual_seen())?;
    write_labels(&dir.join(&manifest.labels_seen), dataset.labels_seen())?;
    write_matrix_csv(&dir.join(&manifest.visual_unseen), dataset.visual_unseen())?;
    write_labels(&dir.join(&manifest.labels_unseen), dataset.labels_unseen())?;
    write_matrix_csv(&dir.join(&manifest.prototypes), dataset.prototypes())?;
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    create(&path)?.write_all(json.as_bytes()).map_err(io_err(&path))?;
    Ok(path)
}
