//! Spiral-scan 2D representations of CT nodule candidates.
//!
//! Pipeline: load a MetaImage volume ([`volume_io`]), cut a cubic volume of
//! interest around each candidate and window it to `[0, 1]` ([`resample`]),
//! optionally augment it ([`augment`]), then turn it into a 2D image
//! ([`spiral`], [`views`]). [`dataset`] runs that over a candidate list
//! into fold directories of `.s2dt` tensors, and [`eval`] scores
//! classifier output with AUC, FROC and CPM.

pub mod augment;
pub mod cli;
pub mod dataset;
pub mod eval;
mod fingerprint;
pub mod resample;
pub mod s2dt;
pub mod spiral;
pub mod synthetic;
mod table;
pub mod views;
pub mod volume_io;

pub use augment::{apply_augment, sample_augment_spec, AugmentSpec};
pub use eval::{compute_auc, compute_cpm, compute_froc, evaluate, match_candidates};
pub use resample::{extract_voi, rescale_intensity, trilinear_sample, VoiCube};
pub use s2dt::{read_s2dt, write_s2dt, Tensor};
pub use spiral::{
    build_schedule, spiral_transform, SpiralConfig, SpiralImage, SpiralSchedule, SpiralTransformer,
};
pub use views::{center_slice, nine_views, Representation2D};
pub use volume_io::{load_candidates, load_metaimage, CandidateRecord, Volume3D};
