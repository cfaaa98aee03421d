//! Labeled image datasets: MNIST from IDX files and synthetic blobs.

mod idx;
mod synthetic;

use std::path::{Path, PathBuf};

use rand::seq::index::sample;

pub use idx::{
    encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, read_maybe_gzip,
    IdxHeader, RawImages, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use synthetic::synthetic_blobs;

use crate::error::{Error, Result};
use crate::math::{ClassIndex, Matrix};
use crate::rng::RngStream;

/// Unit-interval images with integer labels.
///
/// Pixels live in one contiguous buffer; `image(i)` is the flattened view used
/// by the dense models and `image_matrix(i)` the `rows x cols` view.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
    labels: Vec<ClassIndex>,
    num_classes: usize,
}

impl LabeledDataset {
    /// Builds a dataset from already-normalized pixels.
    pub fn new(
        rows: usize,
        cols: usize,
        pixels: Vec<f64>,
        labels: Vec<ClassIndex>,
        num_classes: usize,
    ) -> Result<Self> {
        let dim = rows * cols;
        if dim == 0 {
            return Err(Error::invalid("images must have at least one pixel"));
        }
        if pixels.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "{} pixels do not match {} labels of {rows}x{cols} images",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {} at index {i} is not below {num_classes}",
                labels[i]
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pixel outside [0, 1]"));
        }
        Ok(LabeledDataset {
            rows,
            cols,
            pixels,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn input_dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.pixels[i * d..(i + 1) * d]
    }

    pub fn image_matrix(&self, i: usize) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.image(i).to_vec()).expect("consistent shape")
    }

    pub fn label(&self, i: usize) -> ClassIndex {
        self.labels[i]
    }

    pub fn labels(&self) -> &[ClassIndex] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], ClassIndex)> {
        self.pixels
            .chunks_exact(self.input_dim())
            .zip(self.labels.iter().copied())
    }

    /// Samples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let d = self.input_dim();
        let mut pixels = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("index {i} out of range {}", self.len())));
            }
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Ok(LabeledDataset {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels,
            num_classes: self.num_classes,
        })
    }

    /// Seeded subset of `size` samples, kept in original dataset order.
    pub fn random_subset(&self, size: usize, rng: &RngStream) -> Result<Self> {
        if size >= self.len() {
            return Ok(self.clone());
        }
        let mut idx = sample(&mut rng.rng(), self.len(), size).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Back to raw bytes (`round(255 p)`), mainly for writing test fixtures.
    pub fn to_raw(&self) -> (RawImages, Vec<u8>) {
        let pixels = self.pixels.iter().map(|p| (p * 255.0).round() as u8).collect();
        let labels = self.labels.iter().map(|&l| l as u8).collect();
        (
            RawImages {
                rows: self.rows,
                cols: self.cols,
                pixels,
            },
            labels,
        )
    }
}

/// Pairs raw images with labels and scales bytes into `[0, 1]` by `/255`.
pub fn make_dataset(
    raw_images: &RawImages,
    raw_labels: &[ClassIndex],
    num_classes: usize,
) -> Result<LabeledDataset> {
    if raw_images.len() != raw_labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            raw_images.len(),
            raw_labels.len()
        )));
    }
    let pixels = raw_images.pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    LabeledDataset::new(
        raw_images.rows,
        raw_images.cols,
        pixels,
        raw_labels.to_vec(),
        num_classes,
    )
}

/// Loads an image/label IDX pair (plain or gzip).
pub fn load_idx_pair(images: &Path, labels: &Path, num_classes: usize) -> Result<LabeledDataset> {
    let raw_images = parse_idx_images(&read_maybe_gzip(images)?)?;
    let raw_labels = parse_idx_labels(&read_maybe_gzip(labels)?)?;
    make_dataset(&raw_images, &raw_labels, num_classes)
}

pub const MNIST_CLASSES: usize = 10;
pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Finds `name` or `name.gz` inside `dir`.
pub fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::io(
        plain,
        std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST file not found (also tried .gz)"),
    ))
}

/// Standard MNIST train/test split from a directory of IDX files.
pub fn load_mnist(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let train = load_idx_pair(
        &locate(dir, MNIST_TRAIN_IMAGES)?,
        &locate(dir, MNIST_TRAIN_LABELS)?,
        MNIST_CLASSES,
    )?;
    let test = load_idx_pair(
        &locate(dir, MNIST_TEST_IMAGES)?,
        &locate(dir, MNIST_TEST_LABELS)?,
        MNIST_CLASSES,
    )?;
    Ok((train, test))
}
