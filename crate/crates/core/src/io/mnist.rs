//! IDX image and label files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const SIDE: usize = 28;

/// Raw pixels (`count x 784`, values 0..=255) and labels in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistRaw {
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl MnistRaw {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Pixels as reals, unscaled.
    pub fn pixels_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    pub fn labels_usize(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| usize::from(l)).collect()
    }
}

/// `0.1 (x - 100)`: raw 0 maps to -10, 100 to 0, 255 to 15.5.
pub fn rescale_pixel(raw: f64) -> f64 {
    0.1 * (raw - 100.0)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    let word = bytes.get(at..at + 4).ok_or_else(|| Error::Truncated {
        path: path.into(),
        needed: (at + 4) as u64,
        found: bytes.len() as u64,
    })?;
    Ok(u32::from_be_bytes(word.try_into().unwrap()))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.into(),
            found,
            expected,
        });
    }
    Ok(())
}

fn payload<'a>(
    bytes: &'a [u8],
    header: usize,
    count: usize,
    item: usize,
    path: &Path,
) -> Result<&'a [u8]> {
    let needed = header as u64 + count as u64 * item as u64;
    if (bytes.len() as u64) < needed {
        return Err(Error::Truncated {
            path: path.into(),
            needed,
            found: bytes.len() as u64,
        });
    }
    Ok(&bytes[header..needed as usize])
}

/// Reads an image/label file pair, keeping the first `limit` records.
pub fn load_mnist_raw(
    images_path: &Path,
    labels_path: &Path,
    limit: Option<usize>,
) -> Result<MnistRaw> {
    let img = read(images_path)?;
    check_magic(&img, IMAGE_MAGIC, images_path)?;
    let n_img = be_u32(&img, 4, images_path)? as usize;
    let rows = be_u32(&img, 8, images_path)? as usize;
    let cols = be_u32(&img, 12, images_path)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(Error::BadShape {
            path: images_path.into(),
            rows,
            cols,
        });
    }

    let lab = read(labels_path)?;
    check_magic(&lab, LABEL_MAGIC, labels_path)?;
    let n_lab = be_u32(&lab, 4, labels_path)? as usize;
    if n_img != n_lab {
        return Err(Error::CountMismatch {
            images: n_img,
            labels: n_lab,
        });
    }

    let px = SIDE * SIDE;
    let pixels = payload(&img, 16, n_img, px, images_path)?;
    let labels = payload(&lab, 8, n_lab, 1, labels_path)?;
    if let Some(mu) = labels.iter().position(|&l| l > 9) {
        return Err(Error::MalformedRow {
            row: mu,
            reason: format!("label {} is not a digit", labels[mu]),
        });
    }
    let keep = limit.map_or(n_img, |k| k.min(n_img));
    Ok(MnistRaw {
        pixels: pixels[..keep * px].to_vec(),
        labels: labels[..keep].to_vec(),
    })
}

/// Loads MNIST as a 10-class dataset with rescaled pixels.
pub fn load_mnist(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let raw = load_mnist_raw(images_path, labels_path, limit)?;
    let inputs = raw
        .pixels
        .iter()
        .map(|&p| rescale_pixel(f64::from(p)))
        .collect();
    Dataset::classification(inputs, SIDE * SIDE, raw.labels_usize(), 10)
}
