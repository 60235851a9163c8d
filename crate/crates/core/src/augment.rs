//! Geometric augmentation of VOI cubes.
//!
//! A spec holds up to four steps applied in the order rotation, flip, zoom,
//! shift. They are composed into one affine map about the cube center and
//! the cube is resampled once through its inverse. Source coordinates that
//! leave the cube are mirrored about the boundary voxel centers, so
//! `-e` reads `+e` and `n - 1 + e` reads `n - 1 - e`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::resample::{interpolate, VoiCube};

/// Largest zoom factor.
pub const MAX_ZOOM: f64 = 1.25;
/// Largest shift, as a fraction of the cube side.
pub const MAX_SHIFT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    /// One or two distinct axes in increasing order; rotations are applied
    /// in that order.
    pub axes: Vec<usize>,
    /// Degrees in `[0, 360)`, one per axis.
    pub angles_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zoom {
    pub axes: Vec<usize>,
    /// Magnification in `(1, 1.25]`.
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub axis: usize,
    /// Displacement as a fraction of the side, in `[-0.25, 0.25]`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub rotation: Option<Rotation>,
    pub flip: Option<usize>,
    pub zoom: Option<Zoom>,
    pub shift: Option<Shift>,
    pub provenance_id: String,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AugmentError {
    #[error("invalid augmentation spec: {0}")]
    InvalidSpec(String),
}

impl AugmentSpec {
    /// No steps.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.rotation.is_none() && self.flip.is_none() && self.zoom.is_none() && self.shift.is_none()
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: String| Err(AugmentError::InvalidSpec(m));
        let axes_ok = |axes: &[usize]| {
            !axes.is_empty() && axes.iter().all(|&a| a < 3) && axes.windows(2).all(|w| w[0] < w[1])
        };
        if let Some(r) = &self.rotation {
            if !(1..=2).contains(&r.axes.len()) || !axes_ok(&r.axes) {
                return bad(format!("rotation axes {:?}", r.axes));
            }
            if r.angles_deg.len() != r.axes.len()
                || r.angles_deg.iter().any(|a| !(0.0..360.0).contains(a))
            {
                return bad(format!("rotation angles {:?}", r.angles_deg));
            }
        }
        if let Some(f) = self.flip {
            if f >= 3 {
                return bad(format!("flip axis {f}"));
            }
        }
        if let Some(z) = &self.zoom {
            if !axes_ok(&z.axes) {
                return bad(format!("zoom axes {:?}", z.axes));
            }
            if !(z.factor > 1.0 && z.factor <= MAX_ZOOM) {
                return bad(format!("zoom factor {}", z.factor));
            }
        }
        if let Some(s) = &self.shift {
            if s.axis >= 3 || !(s.fraction.abs() <= MAX_SHIFT) {
                return bad(format!("shift {s:?}"));
            }
        }
        Ok(())
    }
}

/// Draws a spec: each of the four steps is included independently with
/// probability 1/2 (redrawn if none is), then its parameters are drawn
/// uniformly over their ranges.
pub fn sample_augment_spec<R: Rng + ?Sized>(rng: &mut R) -> AugmentSpec {
    let provenance_id = format!("{:016x}", rng.random::<u64>());
    let include = loop {
        let pick: [bool; 4] = std::array::from_fn(|_| rng.random_bool(0.5));
        if pick.iter().any(|&b| b) {
            break pick;
        }
    };
    let rotation = include[0].then(|| {
        let axes = if rng.random_bool(0.5) {
            vec![rng.random_range(0..3)]
        } else {
            let skip = rng.random_range(0..3);
            (0..3).filter(|&a| a != skip).collect()
        };
        let angles_deg = axes.iter().map(|_| rng.random_range(0.0..360.0)).collect();
        Rotation { axes, angles_deg }
    });
    let flip = include[1].then(|| rng.random_range(0..3));
    let zoom = include[2].then(|| {
        let axes = if rng.random_bool(0.5) {
            vec![0, 1, 2]
        } else {
            vec![rng.random_range(0..3)]
        };
        // uniform on (1, 1.25]
        let factor = MAX_ZOOM - (MAX_ZOOM - 1.0) * rng.random::<f64>();
        Zoom { axes, factor }
    });
    let shift = include[3].then(|| Shift {
        axis: rng.random_range(0..3),
        fraction: rng.random_range(-MAX_SHIFT..=MAX_SHIFT),
    });
    AugmentSpec {
        rotation,
        flip,
        zoom,
        shift,
        provenance_id,
    }
}

type Mat3 = [[f64; 3]; 3];

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-12 {
        r
    } else {
        v
    }
}

/// Right-handed rotation by `deg` about `axis`. Quarter turns are exact.
fn rotation_matrix(axis: usize, deg: f64) -> Mat3 {
    let (s, c) = (deg * PI / 180.0).sin_cos();
    let (s, c) = (snap(s), snap(c));
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let mut m = IDENTITY;
    m[a][a] = c;
    m[a][b] = -s;
    m[b][a] = s;
    m[b][b] = c;
    m
}

fn transpose(m: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| m[j][i]))
}

/// Reflects `x` into `[0, n - 1]` about the end voxel centers.
#[inline]
pub fn mirror_coordinate(x: f64, n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let hi = (n - 1) as f64;
    if (0.0..=hi).contains(&x) {
        return x;
    }
    let period = 2.0 * hi;
    let y = x.rem_euclid(period);
    if y > hi {
        period - y
    } else {
        y
    }
}

/// Inverse map `q = center + linear * (p - center - offset)`.
struct InverseMap {
    linear: Mat3,
    offset: [f64; 3],
}

fn inverse_map(spec: &AugmentSpec, side: usize) -> InverseMap {
    // forward: p = c + t + Z F R (q - c); inverse linear part R^T F Z^-1
    let mut rot_inv = IDENTITY;
    if let Some(r) = &spec.rotation {
        for (&axis, &deg) in r.axes.iter().zip(&r.angles_deg) {
            rot_inv = matmul(&rot_inv, &transpose(&rotation_matrix(axis, deg)));
        }
    }
    let mut flip = IDENTITY;
    if let Some(a) = spec.flip {
        flip[a][a] = -1.0;
    }
    let mut zoom_inv = IDENTITY;
    if let Some(z) = &spec.zoom {
        for &a in &z.axes {
            zoom_inv[a][a] = 1.0 / z.factor;
        }
    }
    let mut offset = [0.0; 3];
    if let Some(s) = &spec.shift {
        offset[s.axis] = s.fraction * side as f64;
    }
    InverseMap {
        linear: matmul(&matmul(&rot_inv, &flip), &zoom_inv),
        offset,
    }
}

/// Applies `spec` to `cube` in one resampling pass. The side, geometry and
/// unit are preserved.
pub fn apply_augment(cube: &VoiCube, spec: &AugmentSpec) -> Result<VoiCube, AugmentError> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(cube.clone());
    }
    let side = cube.side();
    let dims = cube.dims();
    let c = (side as f64 - 1.0) / 2.0;
    let map = inverse_map(spec, side);
    let l = &map.linear;
    let src = cube.data();
    let mut out = Vec::with_capacity(src.len());
    for k in 0..side {
        let dz = k as f64 - c - map.offset[2];
        for j in 0..side {
            let dy = j as f64 - c - map.offset[1];
            for i in 0..side {
                let dx = i as f64 - c - map.offset[0];
                let q: [f64; 3] = std::array::from_fn(|a| {
                    let v = c + l[a][0] * dx + l[a][1] * dy + l[a][2] * dz;
                    mirror_coordinate(v, side)
                });
                let v = interpolate(src, dims, q).expect("mirrored coordinate in range");
                out.push(v as f32);
            }
        }
    }
    Ok(cube.with_data(out))
}
