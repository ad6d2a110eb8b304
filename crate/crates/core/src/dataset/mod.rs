//! MNIST-style datasets: IDX ingestion, normalization and the retain/forget split.

mod idx;
mod split;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_images, load_idx_labels, parse_idx_images,
    parse_idx_labels, RawImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use split::{make_split, Split, CLASSES};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Pixel bytes scaled to `[0, 1]` (`v / 255`).
pub fn normalize(raw: &[u8]) -> Vec<f32> {
    raw.iter().map(|&v| v as f32 / 255.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Digits,
    Fashion,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Digits => "digits",
            DatasetKind::Fashion => "fashion",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "digits" => Ok(DatasetKind::Digits),
            "fashion" => Ok(DatasetKind::Fashion),
            _ => Err(Error::Argument(format!(
                "unknown dataset {s:?} (expected digits or fashion)"
            ))),
        }
    }
}

/// Normalized images `[count, rows, cols]` with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub images: Tensor<f32>,
    pub labels: Vec<u8>,
    pub name: String,
}

impl ImageSet {
    pub fn from_raw(raw: &RawImages, labels: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        if raw.count != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                raw.count,
                labels.len()
            )));
        }
        let images = Tensor::new(vec![raw.count, raw.rows, raw.cols], normalize(&raw.pixels))?;
        Ok(Self {
            images,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Self {
        Self {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            name: name.into(),
        }
    }

    /// The first `n` samples (or all, if there are fewer).
    pub fn truncated(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx, self.name.clone())
    }
}

/// The train and test halves of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub train: ImageSet,
    pub test: ImageSet,
}

impl Dataset {
    /// The four IDX files expected under `dir`.
    pub fn files(dir: &Path) -> [PathBuf; 4] {
        [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS].map(|f| dir.join(f))
    }

    /// Loads `dir/{train,t10k}-{images,labels}-idx?-ubyte`.
    pub fn load(kind: DatasetKind, dir: impl AsRef<Path>) -> Result<Self> {
        let [tri, trl, tei, tel] = Self::files(dir.as_ref());
        let train = ImageSet::from_raw(
            &load_idx_images(tri)?,
            load_idx_labels(trl)?,
            format!("{kind}-train"),
        )?;
        let test = ImageSet::from_raw(
            &load_idx_images(tei)?,
            load_idx_labels(tel)?,
            format!("{kind}-test"),
        )?;
        Ok(Self { kind, train, test })
    }
}
