//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "MASKNET\0"
//! version    u32      1
//! layers     u32
//! per layer:
//!   kind     u8       0 = dense, 1 = conv
//!   dense:   input_dim u64, output_dim u64
//!   conv:    in_height, in_width, channels_in, channels_out,
//!            kernel_height, kernel_width, stride (u64 each)
//!   rows     u64, cols u64, then rows·cols f64 in row-major order
//!            (the kernel for conv layers, the weight matrix otherwise)
//!   beta     u64 length, then that many f64
//! sweep      u8       0 = absent, 1 = present
//!   present: u32 layer count, then per layer u64 length and f64 values
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so save, load, save reproduces
//! the file byte for byte.

use std::path::Path;

use masknet_core::alternation::MaskThresholds;
use masknet_core::linalg::{ConvGeometry, Matrix};
use masknet_core::network::{Layer, LayerKind, LayerSpec, NetworkParams};
use masknet_core::ThresholdVector;

use crate::codec::{Reader, Writer};
use crate::error::{AppError, AppResult};

const MAGIC: &[u8; 8] = b"MASKNET\0";
const VERSION: u32 = 1;

/// A network plus the thresholds its last mask sweep used, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub net: NetworkParams,
    pub sweep_thresholds: Option<MaskThresholds>,
}

pub fn encode_model(model: &SavedModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u32(model.net.depth() as u32);
    for layer in model.net.layers() {
        match layer.spec().kind {
            LayerKind::Dense => {
                w.u8(0);
                w.u64(layer.spec().input_dim as u64);
                w.u64(layer.spec().output_dim as u64);
            }
            LayerKind::Conv(g) => {
                w.u8(1);
                for v in [
                    g.in_height,
                    g.in_width,
                    g.channels_in,
                    g.channels_out,
                    g.kernel_height,
                    g.kernel_width,
                    g.stride,
                ] {
                    w.u64(v as u64);
                }
            }
        }
        let p = layer.parameters();
        w.u64(p.rows() as u64);
        w.u64(p.cols() as u64);
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                w.f64(p[(i, j)]);
            }
        }
        w.f64_slice(layer.beta());
    }
    match &model.sweep_thresholds {
        None => w.u8(0),
        Some(t) => {
            w.u8(1);
            w.u32(t.0.len() as u32);
            for b in &t.0 {
                w.f64_slice(b);
            }
        }
    }
    w.finish()
}

pub fn decode_model(bytes: &[u8]) -> AppResult<SavedModel> {
    let mut r = Reader::new(bytes, "model");
    if r.bytes(8)? != MAGIC {
        return Err(AppError::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(AppError::Format(format!("unsupported model version {version}")));
    }
    let depth = r.u32()? as usize;
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let spec = match r.u8()? {
            0 => {
                let input = r.usize()?;
                let output = r.usize()?;
                LayerSpec::dense(input, output)
            }
            1 => {
                let mut v = [0usize; 7];
                for x in &mut v {
                    *x = r.usize()?;
                }
                LayerSpec::conv(ConvGeometry {
                    in_height: v[0],
                    in_width: v[1],
                    channels_in: v[2],
                    channels_out: v[3],
                    kernel_height: v[4],
                    kernel_width: v[5],
                    stride: v[6],
                })?
            }
            k => return Err(AppError::Format(format!("unknown layer kind {k}"))),
        };
        let rows = r.usize()?;
        let cols = r.usize()?;
        let mut row_major = Vec::with_capacity(rows.saturating_mul(cols).min(r.remaining() / 8));
        for _ in 0..rows.saturating_mul(cols) {
            row_major.push(r.f64()?);
        }
        let params = Matrix::from_fn(rows, cols, |i, j| row_major[i * cols + j]);
        let beta = ThresholdVector::new(r.f64_vec()?)?;
        layers.push(Layer::from_parameters(spec, params, beta)?);
    }
    let net = NetworkParams::new(layers)?;
    let sweep_thresholds = match r.u8()? {
        0 => None,
        1 => {
            let n = r.u32()? as usize;
            let mut t = Vec::with_capacity(n.min(depth));
            for _ in 0..n {
                t.push(ThresholdVector::new(r.f64_vec()?)?);
            }
            let t = MaskThresholds(t);
            t.check_against(&net)?;
            Some(t)
        }
        f => return Err(AppError::Format(format!("bad sweep-threshold flag {f}"))),
    };
    r.expect_end()?;
    Ok(SavedModel {
        net,
        sweep_thresholds,
    })
}

pub fn save_model(path: &Path, model: &SavedModel) -> AppResult<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| AppError::io(path, e))
}

pub fn load_model(path: &Path) -> AppResult<SavedModel> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_model(&bytes)
}
