//! Volume ingestion: MetaImage (`.mhd` + `.raw`) scans and candidate lists.
//!
//! Volumes are stored x-fastest, so the voxel at `(i, j, k)` lives at
//! `i + j * nx + k * nx * ny`. World coordinates follow the MetaImage
//! convention: `world = origin + index * spacing` with an identity
//! direction matrix.

mod candidates;
mod metaimage;

pub use candidates::{load_candidates, parse_candidates, CandidateRecord};
pub use metaimage::{
    load_metaimage, read_metaimage_header, write_metaimage, ElementType, MetaHeader,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Intensity scale of a voxel array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueUnit {
    /// Raw Hounsfield units as read from the scan.
    Hu,
    /// Rescaled into `[0, 1]`.
    Normalized,
}

#[derive(Debug, thiserror::Error)]
pub enum VolumeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed header line {text:?}")]
    MalformedHeaderLine {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("{path}: missing required header key `{key}`")]
    MissingKey { path: PathBuf, key: &'static str },
    #[error("{path}: invalid value {value:?} for `{key}`")]
    InvalidValue {
        path: PathBuf,
        key: String,
        value: String,
    },
    #[error("{path}: unsupported dimensionality NDims = {ndims} (only 3 is supported)")]
    UnsupportedDimensionality { path: PathBuf, ndims: usize },
    #[error("{path}: unsupported ElementType {element_type:?}")]
    UnsupportedElementType { path: PathBuf, element_type: String },
    #[error("{path}: unsupported ObjectType {object_type:?}")]
    UnsupportedObjectType { path: PathBuf, object_type: String },
    #[error("{path}: non-identity TransformMatrix is not supported")]
    NonIdentityTransform { path: PathBuf },
    #[error("{path}: compressed data is not supported")]
    Compressed { path: PathBuf },
    #[error("{path}: data file holds {actual} bytes, expected {expected}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error(transparent)]
    MalformedRow(#[from] crate::table::RowError),
}

/// Dense 3D scalar grid with world-space geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: Vec<f32>,
    unit: ValueUnit,
}

impl Volume3D {
    /// Builds a volume in Hounsfield units, checking the grid invariants.
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        data: Vec<f32>,
    ) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidVolume(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(VolumeError::InvalidVolume(format!(
                "data holds {} voxels but dims {:?} require {}",
                data.len(),
                dims,
                expected
            )));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(VolumeError::InvalidVolume(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(VolumeError::InvalidVolume(format!(
                "origin must be finite, got {origin:?}"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            data,
            unit: ValueUnit::Hu,
        })
    }

    /// Volume filled with a constant value.
    pub fn filled(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        value: f32,
    ) -> Result<Self, VolumeError> {
        Self::new(dims, spacing, origin, vec![value; dims[0] * dims[1] * dims[2]])
    }

    /// Volume whose voxel `(i, j, k)` holds `f(world position of that voxel)`.
    pub fn from_world_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        mut f: impl FnMut([f64; 3]) -> f32,
    ) -> Result<Self, VolumeError> {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f([
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    ]));
                }
            }
        }
        Self::new(dims, spacing, origin, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn unit(&self) -> ValueUnit {
        self.unit
    }

    /// Flat index of voxel `(i, j, k)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.index(i, j, k)]
    }

    /// Continuous voxel coordinates of a world point.
    #[inline]
    pub fn world_to_voxel(&self, world: [f64; 3]) -> [f64; 3] {
        [
            (world[0] - self.origin[0]) / self.spacing[0],
            (world[1] - self.origin[1]) / self.spacing[1],
            (world[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// World position of the center of voxel `(i, j, k)`.
    pub fn voxel_to_world(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }
}
