//! Bitmap container for a [`MaskStore`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "MASKBITS"
//! version    u32      1
//! epoch      u64
//! layout     u8       0 = one slot per example, 1 = batches
//!   0: examples u64
//!   1: batch count u64, then per batch u64 length and u64 example ids
//! layers     u32, then one u64 width per hidden layer
//! per layer: ceil(width·slots / 8) bytes; bit k of the layer's
//!            width × slots column-major bit matrix is bit k % 8 of byte k / 8
//! ```

use std::path::Path;

use masknet_core::alternation::{MaskStore, StoreLayout};

use crate::codec::{Reader, Writer};
use crate::error::{AppError, AppResult};

const MAGIC: &[u8; 8] = b"MASKBITS";
const VERSION: u32 = 1;

pub fn encode_masks(store: &MaskStore) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(store.epoch() as u64);
    match store.layout() {
        StoreLayout::Instance { examples } => {
            w.u8(0);
            w.u64(*examples as u64);
        }
        StoreLayout::Batches(batches) => {
            w.u8(1);
            w.u64(batches.len() as u64);
            for b in batches {
                w.u64(b.len() as u64);
                for &i in b {
                    w.u64(i as u64);
                }
            }
        }
    }
    w.u32(store.widths().len() as u32);
    for &width in store.widths() {
        w.u64(width as u64);
    }
    for l in 0..store.widths().len() {
        let bits = store.layer_bits(l);
        let mut packed = vec![0u8; bits.len().div_ceil(8)];
        for (k, &on) in bits.iter().enumerate() {
            if on {
                packed[k / 8] |= 1 << (k % 8);
            }
        }
        w.bytes(&packed);
    }
    w.finish()
}

pub fn decode_masks(bytes: &[u8]) -> AppResult<MaskStore> {
    let mut r = Reader::new(bytes, "mask");
    if r.bytes(8)? != MAGIC {
        return Err(AppError::Format("not a mask file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(AppError::Format(format!("unsupported mask file version {version}")));
    }
    let epoch = r.usize()?;
    let layout = match r.u8()? {
        0 => StoreLayout::Instance {
            examples: r.usize()?,
        },
        1 => {
            let n = r.usize()?;
            let mut batches = Vec::with_capacity(n.min(r.remaining() / 8));
            for _ in 0..n {
                let len = r.usize()?;
                let mut b = Vec::with_capacity(len.min(r.remaining() / 8));
                for _ in 0..len {
                    b.push(r.usize()?);
                }
                batches.push(b);
            }
            StoreLayout::Batches(batches)
        }
        t => return Err(AppError::Format(format!("unknown mask layout tag {t}"))),
    };
    let slots = match &layout {
        StoreLayout::Instance { examples } => *examples,
        StoreLayout::Batches(b) => b.len(),
    };
    let layers = r.u32()? as usize;
    let mut widths = Vec::with_capacity(layers.min(r.remaining() / 8));
    for _ in 0..layers {
        widths.push(r.usize()?);
    }
    let mut bits = Vec::with_capacity(layers);
    for &width in &widths {
        let n = width
            .checked_mul(slots)
            .ok_or_else(|| AppError::Format("mask dimensions overflow".into()))?;
        let packed = r.bytes(n.div_ceil(8))?;
        bits.push((0..n).map(|k| packed[k / 8] >> (k % 8) & 1 == 1).collect());
    }
    r.expect_end()?;
    Ok(MaskStore::from_parts(layout, widths, bits, epoch)?)
}

pub fn save_masks(path: &Path, store: &MaskStore) -> AppResult<()> {
    std::fs::write(path, encode_masks(store)).map_err(|e| AppError::io(path, e))
}

pub fn load_masks(path: &Path) -> AppResult<MaskStore> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_masks(&bytes)
}
