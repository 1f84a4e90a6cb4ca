//! Interpretable inverse design of two-phase pixelated phononic unit cells.
//!
//! The crate covers the whole loop: Bloch-Floquet finite-element dispersion
//! analysis to label designs with band gaps ([`dispersion`], [`dataset`]),
//! shape-frequency features and optimal sparse decision trees over them
//! ([`sff`], [`tree`]), unit-cell template mining with exact subset selection
//! ([`template`]), and coarse-to-fine sampling of new designs ([`sampler`]).

pub mod bits;
pub mod dataset;
pub mod dispersion;
pub mod error;
pub mod evaluate;
pub mod sampler;
pub mod sff;
pub mod template;
pub mod tree;
pub mod unitcell;

pub use error::{Error, Result};
pub use unitcell::{PhysicalConfig, PixelGrid, UnitCell};

/// Lower-case hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
