//! Joint restoration and lossless symbol-dictionary compression of noisy
//! bilevel document images.

pub mod arith;
pub mod bench;
pub mod codec;
pub mod config;
pub mod context;
pub mod dictionary;
pub mod error;
pub mod fixture;
pub mod forward;
pub mod generic;
pub mod image;
pub mod pbm;
pub mod restore;
pub mod symbols;

pub use error::{Error, Result};
pub use image::{error_count, BinaryImage, PixelDiff};
