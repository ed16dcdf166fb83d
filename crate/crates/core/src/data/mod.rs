//! Datasets: the manifest format, annotation masks, stratified splits,
//! flip augmentation and the synthetic radiograph generator.

mod manifest;
mod masks;
mod split;
mod synth;

pub use manifest::{load_manifest, parse_manifest, write_manifest, Dataset, KneeAnnotation, ManifestRecord, MANIFEST_HEADER};
pub use masks::{make_mask, make_masks, MaskMode, MaskSet, CENTER_BOX};
pub use split::{split, Split};
pub use synth::{grade_from_gap, measure_gap, synth_generate, SyntheticConfig, SyntheticSet, BONE_THRESHOLD};

use std::path::PathBuf;

use crate::imageproc::{hflip, GrayImage, ImageError};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("image `{0}` referenced by the manifest does not exist")]
    MissingImage(PathBuf),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("record `{image}` has no {what}")]
    MissingAnnotation { image: String, what: &'static str },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Append a mirrored copy of every sample. Apply to training data only,
/// after splitting, so no test knee leaks in mirrored form.
pub fn flip_augment<L: Clone>(images: &[GrayImage], labels: &[L]) -> (Vec<GrayImage>, Vec<L>) {
    let mut out_images = images.to_vec();
    out_images.extend(images.iter().map(hflip));
    let mut out_labels = labels.to_vec();
    out_labels.extend_from_slice(labels);
    (out_images, out_labels)
}
