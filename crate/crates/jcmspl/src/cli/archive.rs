//! Versioned little-endian binary format for trained models.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "JCMSPLMB"
//! version      u32
//! variant      u8
//! normalize    u8
//! lambda1..4   4 × f64
//! k, t_max     2 × u64
//! tol          f64
//! seed         u64
//! ridge_eps    f64
//! fingerprint  5 × u64 (m, d, n_seen, seen classes, unseen classes) + 8-byte checksum
//! matrices     A, B, C: u8 presence flag, then u64 rows, u64 cols, rows·cols × f64
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Normalization, ZslDataset};
use crate::linalg::Matrix;
use crate::trainer::{Hyperparams, JcmsplModel, Variant};

pub const MAGIC: &[u8; 8] = b"JCMSPLMB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a model archive (bad magic bytes)")]
    BadMagic,
    #[error("unsupported archive version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("archive is truncated")]
    Truncated,
    #[error("corrupt archive: {0}")]
    Corrupt(String),
}

/// Shape and content digest of the dataset a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub visual_dim: usize,
    pub semantic_dim: usize,
    pub n_seen: usize,
    pub seen_classes: usize,
    pub unseen_classes: usize,
    /// First eight bytes of a SHA-256 over the dataset contents.
    pub checksum: [u8; 8],
}

impl DatasetFingerprint {
    pub fn of(dataset: &ZslDataset) -> Self {
        let mut hasher = Sha256::new();
        let put_usizes = |h: &mut Sha256, v: &[usize]| {
            h.update((v.len() as u64).to_le_bytes());
            for x in v {
                h.update((*x as u64).to_le_bytes());
            }
        };
        for m in [dataset.visual_seen(), dataset.visual_unseen(), dataset.prototypes()] {
            put_usizes(&mut hasher, &[m.rows(), m.cols()]);
            for v in m.as_slice() {
                hasher.update(v.to_le_bytes());
            }
        }
        put_usizes(&mut hasher, dataset.labels_seen());
        put_usizes(&mut hasher, dataset.labels_unseen());
        put_usizes(&mut hasher, dataset.seen_classes());
        put_usizes(&mut hasher, dataset.unseen_classes());
        let digest = hasher.finalize();
        let mut checksum = [0u8; 8];
        checksum.copy_from_slice(&digest[..8]);
        Self {
            visual_dim: dataset.visual_dim(),
            semantic_dim: dataset.semantic_dim(),
            n_seen: dataset.n_seen(),
            seen_classes: dataset.seen_classes().len(),
            unseen_classes: dataset.unseen_classes().len(),
            checksum,
        }
    }

    pub fn checksum_hex(&self) -> String {
        self.checksum.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A model together with everything needed to evaluate it again.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub model: JcmsplModel,
    /// Visual feature normalization applied before training.
    pub normalization: Normalization,
    pub fingerprint: DatasetFingerprint,
}

fn normalization_code(n: Normalization) -> u8 {
    match n {
        Normalization::None => 0,
        Normalization::L2Columns => 1,
    }
}

impl ModelArchive {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.model.variant.code());
        out.push(normalization_code(self.normalization));

        let h = &self.model.hyper;
        for v in [h.lambda1, h.lambda2, h.lambda3, h.lambda4] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(h.k as u64).to_le_bytes());
        out.extend_from_slice(&(h.t_max as u64).to_le_bytes());
        out.extend_from_slice(&h.tol.to_le_bytes());
        out.extend_from_slice(&h.seed.to_le_bytes());
        out.extend_from_slice(&h.ridge_eps.to_le_bytes());

        let f = &self.fingerprint;
        for v in [f.visual_dim, f.semantic_dim, f.n_seen, f.seen_classes, f.unseen_classes] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&f.checksum);

        for m in [Some(&self.model.a), self.model.b.as_ref(), self.model.c.as_ref()] {
            match m {
                None => out.push(0),
                Some(m) => {
                    out.push(1);
                    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
                    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
                    for v in m.as_slice() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(ArchiveError::BadMagic);
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != FORMAT_VERSION {
            return Err(ArchiveError::UnsupportedVersion(version));
        }
        let code = r.u8()?;
        let variant = Variant::from_code(code)
            .ok_or_else(|| ArchiveError::Corrupt(format!("unknown variant code {code}")))?;
        let normalization = match r.u8()? {
            0 => Normalization::None,
            1 => Normalization::L2Columns,
            other => return Err(ArchiveError::Corrupt(format!("unknown normalization code {other}"))),
        };

        let hyper = Hyperparams {
            lambda1: r.f64()?,
            lambda2: r.f64()?,
            lambda3: r.f64()?,
            lambda4: r.f64()?,
            k: r.usize()?,
            t_max: r.usize()?,
            tol: r.f64()?,
            seed: r.u64()?,
            variant,
            ridge_eps: r.f64()?,
        };
        let fingerprint = DatasetFingerprint {
            visual_dim: r.usize()?,
            semantic_dim: r.usize()?,
            n_seen: r.usize()?,
            seen_classes: r.usize()?,
            unseen_classes: r.usize()?,
            checksum: r.array()?,
        };

        let a = r.matrix()?.ok_or_else(|| ArchiveError::Corrupt("missing A".into()))?;
        let b = r.matrix()?;
        let c = r.matrix()?;
        if r.pos != bytes.len() {
            return Err(ArchiveError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        if variant == Variant::Fpl && b.is_some() {
            return Err(ArchiveError::Corrupt("FPL archive carries a B matrix".into()));
        }
        if variant != Variant::Fpl {
            let b = b.as_ref().ok_or_else(|| ArchiveError::Corrupt("missing B".into()))?;
            if b.rows() != a.rows() {
                return Err(ArchiveError::Corrupt(format!(
                    "A has {} rows but B has {}",
                    a.rows(),
                    b.rows()
                )));
            }
        }
        Ok(Self {
            model: JcmsplModel {
                a,
                b,
                c,
                variant,
                hyper,
            },
            normalization,
            fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ArchiveError> {
        fs::write(path, self.to_bytes()).map_err(|source| ArchiveError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ArchiveError> {
        let bytes = fs::read(path).map_err(|source| ArchiveError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        let end = self.pos.checked_add(n).ok_or(ArchiveError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(ArchiveError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ArchiveError> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }

    fn u8(&mut self) -> Result<u8, ArchiveError> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64, ArchiveError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize, ArchiveError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| ArchiveError::Corrupt(format!("size {v} does not fit")))
    }

    fn f64(&mut self) -> Result<f64, ArchiveError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn matrix(&mut self) -> Result<Option<Matrix>, ArchiveError> {
        match self.u8()? {
            0 => return Ok(None),
            1 => {}
            other => return Err(ArchiveError::Corrupt(format!("bad presence flag {other}"))),
        }
        let rows = self.usize()?;
        let cols = self.usize()?;
        let len = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= self.bytes.len() - self.pos))
            .ok_or(ArchiveError::Truncated)?;
        let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Matrix::new(rows, cols, data)
            .map(Some)
            .map_err(|e| ArchiveError::Corrupt(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthSpec};

    fn sample() -> ModelArchive {
        let a = Matrix::from_rows(&[vec![0.1, -2.5e-300, f64::MIN_POSITIVE], vec![1.0 / 3.0, 7.0, -0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![std::f64::consts::PI]]).unwrap();
        let c = Matrix::from_rows(&[vec![0.5, 0.25], vec![-1e10, 3.0]]).unwrap();
        let mut hyper = Hyperparams::new(2);
        hyper.lambda3 = 1e7;
        hyper.seed = 99;
        ModelArchive {
            model: JcmsplModel {
                a,
                b: Some(b),
                c: Some(c),
                variant: Variant::Full,
                hyper,
            },
            normalization: Normalization::L2Columns,
            fingerprint: DatasetFingerprint {
                visual_dim: 3,
                semantic_dim: 1,
                n_seen: 2,
                seen_classes: 1,
                unseen_classes: 1,
                checksum: [1, 2, 3, 4, 5, 6, 7, 8],
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let archive = sample();
        let back = ModelArchive::from_bytes(&archive.to_bytes()).unwrap();
        assert_eq!(back, archive);
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.model.a), bits(&archive.model.a));
        assert_eq!(back.to_bytes(), archive.to_bytes());
    }

    #[test]
    fn fpl_round_trip() {
        let mut archive = sample();
        archive.model.variant = Variant::Fpl;
        archive.model.hyper.variant = Variant::Fpl;
        archive.model.b = None;
        archive.model.c = None;
        assert_eq!(ModelArchive::from_bytes(&archive.to_bytes()).unwrap(), archive);
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        assert!(matches!(ModelArchive::from_bytes(&bytes[..bytes.len() - 1]), Err(ArchiveError::Truncated)));
        assert!(matches!(ModelArchive::from_bytes(b"NOTAMODELFILE"), Err(ArchiveError::BadMagic)));

        let mut future = bytes.clone();
        future[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(ModelArchive::from_bytes(&future), Err(ArchiveError::UnsupportedVersion(7))));

        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(ModelArchive::from_bytes(&extra), Err(ArchiveError::Corrupt(_))));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let spec = SynthSpec {
            samples_per_class: 3,
            ..SynthSpec::default()
        };
        let (ds, _) = synth_generate(&spec).unwrap();
        let (other, _) = synth_generate(&SynthSpec { seed: 2, ..spec }).unwrap();
        let f = DatasetFingerprint::of(&ds);
        assert_eq!(f, DatasetFingerprint::of(&ds));
        assert_eq!((f.visual_dim, f.semantic_dim, f.n_seen), (50, 20, 30));
        assert_ne!(f.checksum, DatasetFingerprint::of(&other).checksum);
        assert_eq!(f.checksum_hex().len(), 16);
    }
}
