//! Database ingestion, score normalization, content-disjoint splits and
//! patch sampling.

mod adapters;
mod batch;
mod kind;
mod manifest;
mod patches;
mod score;
mod split;
pub mod synth;

pub use adapters::{load_manifest, load_manifest_with};
pub use batch::{make_training_batch, BatchSampler, ImageCache, TrainingBatch};
pub use kind::{DatabaseKind, ScoreScale};
pub use manifest::{
    read_manifest_csv, CountSummary, DatabaseManifest, ImageRecord, LoadOptions, ManifestRow,
    PixelSource,
};
pub use patches::{crop_patches, Patch, PatchGrid, PATCH_SIZE};
pub use score::normalize_score;
pub use split::{split_by_reference, split_sizes, SplitSpec, DEFAULT_RATIOS};
