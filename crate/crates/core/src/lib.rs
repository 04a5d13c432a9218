//! Deep networks viewed as linear maps gated by a binary multi-layer support.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature, on by default,
//! only adds `std::error::Error` impls and runtime SIMD detection in the GEMM
//! kernel.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod alternation;
pub mod data;
pub mod decoupling;
pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub mod network;
pub mod nonlinearity;
pub mod recovery;

pub use network::{MultiLayerSupport, NetworkParams};
pub use nonlinearity::{Nonlinearity, SupportMask, ThresholdVector};
