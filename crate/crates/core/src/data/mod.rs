//! Datasets, observability masks, synthetic generators and file formats.

mod dataset;
pub mod idx;
mod labels;
mod manifest;
mod mask;
pub mod matrix;
mod synthetic;

pub use dataset::{apply_zero_padding, MultiViewDataset};
pub use idx::{load_idx, read_idx, write_idx, IdxArray};
pub use labels::{read_labels, write_labels};
pub use manifest::{load_manifest, Manifest};
pub use mask::{generate_mask, MaskMatrix};
pub use matrix::{load_matrix, save_matrix};
pub use synthetic::{generate_synthetic, SyntheticSpec};
