#![allow(dead_code)]

use std::path::{Path, PathBuf};

use entropy_uq::dataset::{
    encode_idx_images, encode_idx_labels, synthetic_blobs, LabeledDataset, MNIST_TEST_IMAGES,
    MNIST_TEST_LABELS, MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS,
};
use entropy_uq::rng::RngStream;

/// Writes `train`/`test` as the four MNIST file names in `dir`.
pub fn write_idx_dir(dir: &Path, train: &LabeledDataset, test: &LabeledDataset) {
    for (data, images, labels) in [
        (train, MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS),
        (test, MNIST_TEST_IMAGES, MNIST_TEST_LABELS),
    ] {
        let (raw, lab) = data.to_raw();
        std::fs::write(dir.join(images), encode_idx_images(&raw)).unwrap();
        std::fs::write(dir.join(labels), encode_idx_labels(&lab)).unwrap();
    }
}

/// Ten well-separated 16-pixel classes, written as an MNIST-shaped directory.
pub fn blobs_dir(dir: &Path) -> PathBuf {
    let root = RngStream::new(99);
    let train = synthetic_blobs(10, 16, 30, 6.0, &root.child(0)).unwrap();
    let test = synthetic_blobs(10, 16, 10, 6.0, &root.child(1)).unwrap();
    write_idx_dir(dir, &train, &test);
    dir.to_path_buf()
}
