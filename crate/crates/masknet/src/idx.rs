//! Reader for the big-endian IDX files that carry MNIST.

use std::path::Path;

use masknet_core::data::Examples;
use masknet_core::linalg::Matrix;

use crate::error::{AppError, AppResult};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn header(bytes: &[u8], what: &str, magic: u32, dims: usize) -> AppResult<Vec<usize>> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(AppError::Format(format!(
            "{what}: truncated header, expected at least {need} bytes, found {}",
            bytes.len()
        )));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(AppError::Format(format!(
            "{what}: bad magic 0x{found:08x}, expected 0x{magic:08x}"
        )));
    }
    Ok((0..dims).map(|d| be_u32(bytes, 4 + 4 * d) as usize).collect())
}

fn check_len(bytes: &[u8], what: &str, expected: usize) -> AppResult<()> {
    if bytes.len() != expected {
        return Err(AppError::Format(format!(
            "{what}: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    Ok(())
}

/// Images as `rows·cols × count` with pixels scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> AppResult<Matrix> {
    let dims = header(bytes, "image file", IMAGE_MAGIC, 3)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    check_len(bytes, "image file", 16 + count * pixels)?;
    let data = bytes[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Matrix::from_col_major(pixels, count, data)?)
}

pub fn parse_labels(bytes: &[u8]) -> AppResult<Vec<u8>> {
    let dims = header(bytes, "label file", LABEL_MAGIC, 1)?;
    check_len(bytes, "label file", 8 + dims[0])?;
    let labels = bytes[8..].to_vec();
    if let Some(bad) = labels.iter().find(|&&l| usize::from(l) >= CLASSES) {
        return Err(AppError::Format(format!("label file: label {bad} outside 0..{CLASSES}")));
    }
    Ok(labels)
}

/// One-hot targets, one column per label.
pub fn one_hot(labels: &[u8]) -> Matrix {
    Matrix::from_fn(CLASSES, labels.len(), |i, j| {
        if usize::from(labels[j]) == i {
            1.0
        } else {
            0.0
        }
    })
}

pub fn parse_idx(images: &[u8], labels: &[u8]) -> AppResult<Examples> {
    let x = parse_images(images)?;
    let l = parse_labels(labels)?;
    if x.cols() != l.len() {
        return Err(AppError::Format(format!(
            "image count {} does not match label count {}",
            x.cols(),
            l.len()
        )));
    }
    Ok(Examples::new(x, one_hot(&l))?)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> AppResult<Examples> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| AppError::io(p, e));
    parse_idx(&read(images_path)?, &read(labels_path)?)
}

/// Standard MNIST file names inside a directory.
pub fn load_mnist_split(dir: &Path, train: bool) -> AppResult<Examples> {
    let prefix = if train { "train" } else { "t10k" };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}
