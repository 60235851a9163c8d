//! VOI extraction around a candidate and HU windowing.
//!
//! Output cube voxel `(i, j, k)` samples the source volume at
//! `center + ((i, j, k) + 0.5 - side / 2) * size_mm / side`, i.e. voxel
//! centers are spread symmetrically about the candidate. For even `side`
//! the candidate falls between the two central voxels.

use serde::{Deserialize, Serialize};

use crate::fingerprint::Fingerprint;
use crate::volume_io::{ValueUnit, Volume3D};

/// Lower end of the HU window; also the fill value outside the scan.
pub const HU_MIN: f64 = -1000.0;
/// Upper end of the HU window.
pub const HU_MAX: f64 = 400.0;
/// Default physical VOI edge length in mm.
pub const DEFAULT_VOI_MM: f64 = 50.0;
/// Default number of voxels per VOI edge.
pub const DEFAULT_SIDE: usize = 64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ResampleError {
    #[error("VOI center must be finite, got {0:?}")]
    NonFiniteCenter([f64; 3]),
    #[error("VOI size must be a positive finite length in mm, got {0}")]
    InvalidSize(f64),
    #[error("VOI side must be at least 2 voxels, got {0}")]
    InvalidSide(usize),
    #[error("cube is already normalized")]
    AlreadyNormalized,
    #[error("invalid cube: {0}")]
    InvalidCube(String),
}

/// Fixed-size cubic patch, x-fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiCube {
    side: usize,
    resolution: f64,
    center_world: [f64; 3],
    unit: ValueUnit,
    data: Vec<f32>,
}

impl VoiCube {
    pub fn new(
        side: usize,
        resolution: f64,
        center_world: [f64; 3],
        unit: ValueUnit,
        data: Vec<f32>,
    ) -> Result<Self, ResampleError> {
        if side < 2 {
            return Err(ResampleError::InvalidSide(side));
        }
        if data.len() != side * side * side {
            return Err(ResampleError::InvalidCube(format!(
                "expected {} voxels for side {side}, got {}",
                side * side * side,
                data.len()
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(ResampleError::InvalidCube(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if unit == ValueUnit::Normalized && data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ResampleError::InvalidCube(
                "normalized cube holds values outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            side,
            resolution,
            center_world,
            unit,
            data,
        })
    }

    /// Unit-resolution cube at the origin filled by `f(i, j, k)`. Handy for
    /// synthetic inputs.
    pub fn from_fn(
        side: usize,
        unit: ValueUnit,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self, ResampleError> {
        let mut data = Vec::with_capacity(side * side * side);
        for k in 0..side {
            for j in 0..side {
                for i in 0..side {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(side, 1.0, [0.0; 3], unit, data)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// mm per voxel.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn center_world(&self) -> [f64; 3] {
        self.center_world
    }

    pub fn unit(&self) -> ValueUnit {
        self.unit
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.side; 3]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.side * (j + self.side * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.index(i, j, k)]
    }

    /// Same geometry and unit, new voxel values.
    pub(crate) fn with_data(&self, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            data,
            ..self.clone()
        }
    }

    /// Content hash over side, unit and voxel bytes.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new("voi-cube");
        fp.update_u64(self.side as u64);
        fp.update(&[self.unit as u8]);
        for v in &self.data {
            fp.update(&v.to_le_bytes());
        }
        fp.finish()
    }
}

/// Trilinear interpolation on an x-fastest grid at continuous voxel
/// coordinates. `None` when any coordinate leaves `[0, n - 1]`.
#[inline]
pub fn interpolate(data: &[f32], dims: [usize; 3], p: [f64; 3]) -> Option<f64> {
    let mut base = [0usize; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        let hi = (dims[a] - 1) as f64;
        if !(p[a] >= 0.0 && p[a] <= hi) {
            return None;
        }
        if dims[a] == 1 {
            continue;
        }
        let f = p[a].floor();
        if f >= hi {
            base[a] = dims[a] - 2;
            frac[a] = 1.0;
        } else {
            base[a] = f as usize;
            frac[a] = p[a] - f;
        }
    }
    Some(blend(data, dims, base, frac))
}

/// Like [`interpolate`] but clamps each coordinate into `[0, n - 1]` first.
#[inline]
pub fn interpolate_clamped(data: &[f32], dims: [usize; 3], p: [f64; 3]) -> f64 {
    let q = [
        p[0].clamp(0.0, (dims[0] - 1) as f64),
        p[1].clamp(0.0, (dims[1] - 1) as f64),
        p[2].clamp(0.0, (dims[2] - 1) as f64),
    ];
    interpolate(data, dims, q).expect("clamped point is in range")
}

#[inline]
fn blend(data: &[f32], dims: [usize; 3], base: [usize; 3], t: [f64; 3]) -> f64 {
    let step = [
        usize::from(dims[0] > 1),
        if dims[1] > 1 { dims[0] } else { 0 },
        if dims[2] > 1 { dims[0] * dims[1] } else { 0 },
    ];
    let i000 = base[0] + dims[0] * (base[1] + dims[1] * base[2]);
    let v = |off: usize| f64::from(data[i000 + off]);
    let lerp = |a: f64, b: f64, t: f64| (1.0 - t) * a + t * b;

    let c00 = lerp(v(0), v(step[0]), t[0]);
    let c10 = lerp(v(step[1]), v(step[1] + step[0]), t[0]);
    let c01 = lerp(v(step[2]), v(step[2] + step[0]), t[0]);
    let c11 = lerp(v(step[2] + step[1]), v(step[2] + step[1] + step[0]), t[0]);
    let c0 = lerp(c00, c10, t[1]);
    let c1 = lerp(c01, c11, t[1]);
    lerp(c0, c1, t[2])
}

/// Samples `vol` at a world position. `None` is the out-of-bounds marker,
/// returned when the continuous voxel coordinate leaves `[0, dims - 1]` on
/// any axis or the position is not finite.
pub fn trilinear_sample(vol: &Volume3D, world_pos: [f64; 3]) -> Option<f64> {
    interpolate(vol.data(), vol.dims(), vol.world_to_voxel(world_pos))
}

/// Resamples a `side`³ cube of edge `size_mm` centered on `center_world`.
/// Points outside the scan read as air ([`HU_MIN`]).
pub fn extract_voi(
    vol: &Volume3D,
    center_world: [f64; 3],
    size_mm: f64,
    side: usize,
) -> Result<VoiCube, ResampleError> {
    if center_world.iter().any(|c| !c.is_finite()) {
        return Err(ResampleError::NonFiniteCenter(center_world));
    }
    if !(size_mm.is_finite() && size_mm > 0.0) {
        return Err(ResampleError::InvalidSize(size_mm));
    }
    if side < 2 {
        return Err(ResampleError::InvalidSide(side));
    }
    let pitch = size_mm / side as f64;
    let half = side as f64 / 2.0;
    let origin = vol.origin();
    let spacing = vol.spacing();

    // per-axis continuous source coordinates of the output voxel centers
    let axis = |a: usize| -> Vec<f64> {
        (0..side)
            .map(|i| {
                let w = center_world[a] + (i as f64 + 0.5 - half) * pitch;
                (w - origin[a]) / spacing[a]
            })
            .collect()
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));

    let dims = vol.dims();
    let src = vol.data();
    let mut data = Vec::with_capacity(side * side * side);
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                let v = interpolate(src, dims, [x, y, z]).unwrap_or(HU_MIN);
                data.push(v as f32);
            }
        }
    }
    VoiCube::new(side, pitch, center_world, vol.unit(), data)
}

/// Maps one HU value into `[0, 1]` over the `[-1000, 400]` window.
#[inline]
pub fn hu_to_unit(v: f64) -> f64 {
    ((v - HU_MIN) / (HU_MAX - HU_MIN)).clamp(0.0, 1.0)
}

/// Windows a HU cube to `[0, 1]`. Rejects cubes that are already normalized.
pub fn rescale_intensity(cube: VoiCube) -> Result<VoiCube, ResampleError> {
    if cube.unit == ValueUnit::Normalized {
        return Err(ResampleError::AlreadyNormalized);
    }
    let VoiCube {
        side,
        resolution,
        center_world,
        data,
        ..
    } = cube;
    let data = data
        .into_iter()
        .map(|v| hu_to_unit(f64::from(v)) as f32)
        .collect();
    Ok(VoiCube {
        side,
        resolution,
        center_world,
        unit: ValueUnit::Normalized,
        data,
    })
}
