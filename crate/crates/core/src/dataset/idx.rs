//! Reader and writer for the big-endian IDX container used by MNIST.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Parsed IDX header: magic number plus dimension sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxHeader {
    pub magic: u32,
    pub dims: Vec<u32>,
}

impl IdxHeader {
    fn byte_len(&self) -> usize {
        4 + 4 * self.dims.len()
    }

    fn payload_len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

/// Raw greyscale images in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl RawImages {
    pub fn len(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.pixels.chunks_exact((self.rows * self.cols).max(1))
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let word = bytes.get(at..at + 4).ok_or(Error::Length {
        expected: at + 4,
        actual: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(word.try_into().expect("four bytes")))
}

fn parse_header(bytes: &[u8], magic: u32, ndims: usize) -> Result<IdxHeader> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Format {
            expected: magic,
            found,
        });
    }
    let dims = (0..ndims)
        .map(|i| be_u32(bytes, 4 + 4 * i))
        .collect::<Result<Vec<_>>>()?;
    let header = IdxHeader { magic, dims };
    let expected = header.byte_len() + header.payload_len();
    if bytes.len() < expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(header)
}

/// Parses an IDX3 image file (magic `0x00000803`).
pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImages> {
    let header = parse_header(bytes, IMAGES_MAGIC, 3)?;
    let start = header.byte_len();
    Ok(RawImages {
        rows: header.dims[1] as usize,
        cols: header.dims[2] as usize,
        pixels: bytes[start..start + header.payload_len()].to_vec(),
    })
}

/// Parses an IDX1 label file (magic `0x00000801`).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let header = parse_header(bytes, LABELS_MAGIC, 1)?;
    let start = header.byte_len();
    Ok(bytes[start..start + header.payload_len()]
        .iter()
        .map(|&b| b as usize)
        .collect())
}

pub fn encode_idx_images(images: &RawImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [images.len(), images.rows, images.cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Reads a whole file, transparently inflating gzip (`1f 8b` prefix).
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}
