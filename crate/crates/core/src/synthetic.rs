//! Synthetic volumes and candidate lists for examples and tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::resample::VoiCube;
use crate::volume_io::{write_metaimage, CandidateRecord, ElementType, ValueUnit, Volume3D, VolumeError};

/// Soft-tissue density used for synthetic nodules.
pub const NODULE_HU: f32 = 40.0;
/// Lung parenchyma background.
pub const LUNG_HU: f32 = -850.0;

/// Normalized cube holding a solid ball of `radius` voxels centered at the
/// cube center `(side - 1) / 2`: 1 inside, 0 outside.
pub fn ball_cube(side: usize, radius: f64) -> VoiCube {
    let c = (side as f64 - 1.0) / 2.0;
    VoiCube::from_fn(side, ValueUnit::Normalized, |i, j, k| {
        let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2) + (k as f64 - c).powi(2);
        if d2 <= radius * radius {
            1.0
        } else {
            0.0
        }
    })
    .expect("valid ball cube")
}

/// Normalized cube whose value rises linearly along x from 0 to 1.
pub fn ramp_cube(side: usize) -> VoiCube {
    let n = (side - 1) as f32;
    VoiCube::from_fn(side, ValueUnit::Normalized, |i, _, _| i as f32 / n).expect("valid ramp cube")
}

/// Normalized cube of smooth pseudo-random structure, seeded.
pub fn textured_cube(side: usize, seed: u64) -> VoiCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<([f64; 3], f64)> = (0..4)
        .map(|_| {
            let f = [
                rng.random_range(0.05..0.3),
                rng.random_range(0.05..0.3),
                rng.random_range(0.05..0.3),
            ];
            (f, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    VoiCube::from_fn(side, ValueUnit::Normalized, |i, j, k| {
        let p = [i as f64, j as f64, k as f64];
        let s: f64 = waves
            .iter()
            .map(|(f, ph)| (f[0] * p[0] + f[1] * p[1] + f[2] * p[2] + ph).sin())
            .sum();
        (0.5 + s / 8.0) as f32
    })
    .expect("valid textured cube")
}

/// HU volume of lung background with solid balls of nodule density.
pub fn ball_volume(
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    balls: &[([f64; 3], f64)],
) -> Volume3D {
    Volume3D::from_world_fn(dims, spacing, origin, |p| {
        let inside = balls.iter().any(|(c, r)| {
            (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2) <= r * r
        });
        if inside {
            NODULE_HU
        } else {
            LUNG_HU
        }
    })
    .expect("valid ball volume")
}

/// Shape of a synthetic candidate set.
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub scans: usize,
    pub positives: usize,
    pub negatives: usize,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub seed: u64,
}

impl Default for FixtureSpec {
    /// Two scans, three nodules, 300 non-nodules.
    fn default() -> Self {
        Self {
            scans: 2,
            positives: 3,
            negatives: 300,
            dims: [48, 48, 40],
            spacing: [1.0, 1.0, 1.25],
            seed: 7,
        }
    }
}

/// Files written by [`write_fixture`].
#[derive(Debug, Clone)]
pub struct Fixture {
    pub volumes_dir: PathBuf,
    pub candidates_csv: PathBuf,
    pub candidates: Vec<CandidateRecord>,
    pub scan_ids: Vec<String>,
}

pub fn scan_id(i: usize) -> String {
    format!("1.3.6.1.4.1.14519.5.2.1.{:04}", 1000 + i)
}

/// Writes `scans` MetaImage volumes (`MET_SHORT`) under `dir/volumes` and a
/// labeled candidates CSV at `dir/candidates.csv`. Positives sit on 4 mm
/// balls; negatives are scattered across the scans. Positives are spread
/// round-robin over the scans.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<Fixture, VolumeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let volumes_dir = dir.join("volumes");
    fs::create_dir_all(&volumes_dir).map_err(|source| VolumeError::Io {
        path: volumes_dir.clone(),
        source,
    })?;
    let extent: Vec<f64> = (0..3)
        .map(|a| (spec.dims[a] - 1) as f64 * spec.spacing[a])
        .collect();
    let scan_ids: Vec<String> = (0..spec.scans).map(scan_id).collect();
    let origins: Vec<[f64; 3]> = (0..spec.scans)
        .map(|s| [-100.0 + 10.0 * s as f64, -80.0, -200.0 - 5.0 * s as f64])
        .collect();
    let inner = |rng: &mut ChaCha8Rng, o: [f64; 3]| -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..3 {
            let v: f64 = rng.random_range(0.2..0.8);
            p[a] = ((o[a] + v * extent[a]) * 4.0).round() / 4.0;
        }
        p
    };

    let mut candidates = Vec::new();
    let mut balls: Vec<Vec<([f64; 3], f64)>> = vec![Vec::new(); spec.scans];
    for i in 0..spec.positives {
        let s = i % spec.scans;
        let p = inner(&mut rng, origins[s]);
        balls[s].push((p, 4.0));
        candidates.push(CandidateRecord {
            scan_id: scan_ids[s].clone(),
            world_pos: p,
            label: Some(true),
        });
    }
    for _ in 0..spec.negatives {
        let s = rng.random_range(0..spec.scans);
        candidates.push(CandidateRecord {
            scan_id: scan_ids[s].clone(),
            world_pos: inner(&mut rng, origins[s]),
            label: Some(false),
        });
    }
    // interleave classes so file order is not class order
    let n = candidates.len();
    for i in (1..n).rev() {
        candidates.swap(i, rng.random_range(0..=i));
    }

    for s in 0..spec.scans {
        let vol = ball_volume(spec.dims, spec.spacing, origins[s], &balls[s]);
        write_metaimage(
            &vol,
            &volumes_dir.join(format!("{}.mhd", scan_ids[s])),
            ElementType::Short,
        )?;
    }

    let candidates_csv = dir.join("candidates.csv");
    fs::write(&candidates_csv, candidates_csv_text(&candidates)).map_err(|source| {
        VolumeError::Io {
            path: candidates_csv.clone(),
            source,
        }
    })?;
    Ok(Fixture {
        volumes_dir,
        candidates_csv,
        candidates,
        scan_ids,
    })
}

/// Candidate CSV text, with a `class` column when every record is labeled.
pub fn candidates_csv_text(records: &[CandidateRecord]) -> String {
    let labeled = records.iter().all(|r| r.label.is_some());
    let mut out = String::from("seriesuid,coordX,coordY,coordZ");
    out.push_str(if labeled { ",class\n" } else { "\n" });
    for r in records {
        let [x, y, z] = r.world_pos;
        write!(out, "{},{x},{y},{z}", r.scan_id).unwrap();
        match r.label {
            Some(l) if labeled => writeln!(out, ",{}", u8::from(l)).unwrap(),
            _ => out.push('\n'),
        }
    }
    out
}
