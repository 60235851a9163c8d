//! Baseline 2D / 2.5D / 3D representations of a VOI cube.
//!
//! Conventions (also listed in `docs/formats.md`):
//!
//! * Central index `m = side / 2` (for even sides, the upper of the two
//!   middle voxels).
//! * Axis-aligned blocks are plain copies: `xy(r, c) = cube(c, r, m)`,
//!   `xz(r, c) = cube(c, m, r)`, `yz(r, c) = cube(m, c, r)`.
//! * Diagonal blocks pass through the continuous cube center
//!   `(side - 1) / 2` with normals `(1,1,0)`, `(1,-1,0)`, `(1,0,1)`,
//!   `(1,0,-1)`, `(0,1,1)`, `(0,1,-1)` (normalized), in that order. The row
//!   axis `e1` is the normalized projection of `+z` onto the plane (`+x` if
//!   that projection vanishes) and the column axis is `e2 = n x e1`. Pixel
//!   `(r, c)` samples `center + (r - h) e1 + (c - h) e2` with `h = (side-1)/2`.
//! * The montage places blocks left to right: xy, xz, yz, then the six
//!   diagonals.

use serde::{Deserialize, Serialize};

use crate::resample::{interpolate_clamped, VoiCube};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Spiral,
    CenterSlice,
    NineViewMontage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRef {
    pub scan_id: String,
    pub index: usize,
}

/// Row-major 2D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation2D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub kind: RepresentationKind,
    pub candidate_ref: Option<CandidateRef>,
}

impl Representation2D {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn with_candidate(mut self, candidate: CandidateRef) -> Self {
        self.candidate_ref = Some(candidate);
        self
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ViewError {
    #[error("nine-view montage needs an even cube side, got {0}")]
    OddSide(usize),
}

/// Normals of the six diagonal planes, montage order.
pub const DIAGONAL_NORMALS: [[f64; 3]; 6] = [
    [1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0],
    [0.0, 1.0, 1.0],
    [0.0, 1.0, -1.0],
];

/// The xy plane at the middle of z.
pub fn center_slice(cube: &VoiCube) -> Representation2D {
    let side = cube.side();
    let m = side / 2;
    let start = cube.index(0, 0, m);
    Representation2D {
        rows: side,
        cols: side,
        data: cube.data()[start..start + side * side].to_vec(),
        kind: RepresentationKind::CenterSlice,
        candidate_ref: None,
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// In-plane `(row axis, column axis)` for a plane with the given normal.
pub fn plane_basis(normal: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let n = normalize(normal);
    let project = |v: [f64; 3]| {
        let d = v[0] * n[0] + v[1] * n[1] + v[2] * n[2];
        [v[0] - d * n[0], v[1] - d * n[1], v[2] - d * n[2]]
    };
    let pz = project([0.0, 0.0, 1.0]);
    let e1 = if pz.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
        normalize(pz)
    } else {
        normalize(project([1.0, 0.0, 0.0]))
    };
    (e1, cross(n, e1))
}

/// Nine central planes side by side: `side` rows by `9 * side` columns.
pub fn nine_views(cube: &VoiCube) -> Result<Representation2D, ViewError> {
    let side = cube.side();
    if side % 2 != 0 {
        return Err(ViewError::OddSide(side));
    }
    let cols = 9 * side;
    let m = side / 2;
    let mut data = vec![0f32; side * cols];
    let mut put = |block: usize, r: usize, c: usize, v: f32| {
        data[r * cols + block * side + c] = v;
    };
    for r in 0..side {
        for c in 0..side {
            put(0, r, c, cube.get(c, r, m));
            put(1, r, c, cube.get(c, m, r));
            put(2, r, c, cube.get(m, c, r));
        }
    }
    let h = (side as f64 - 1.0) / 2.0;
    let dims = cube.dims();
    for (b, normal) in DIAGONAL_NORMALS.iter().enumerate() {
        let (e1, e2) = plane_basis(*normal);
        for r in 0..side {
            let dr = r as f64 - h;
            for c in 0..side {
                let dc = c as f64 - h;
                let p = [
                    h + dr * e1[0] + dc * e2[0],
                    h + dr * e1[1] + dc * e2[1],
                    h + dr * e1[2] + dc * e2[2],
                ];
                put(3 + b, r, c, interpolate_clamped(cube.data(), dims, p) as f32);
            }
        }
    }
    Ok(Representation2D {
        rows: side,
        cols,
        data,
        kind: RepresentationKind::NineViewMontage,
        candidate_ref: None,
    })
}

/// The 3D strategy consumes the cube as is.
pub fn cube_passthrough(cube: VoiCube) -> VoiCube {
    cube
}
