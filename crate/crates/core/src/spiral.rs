//! Spiral-scan representation of a cubic patch.
//!
//! Rays leave the cube center and end on the inscribed sphere. Ray
//! directions are laid out latitude by latitude: for latitude index
//! `k = 0..=N` the polar angle is `alpha_k = k * pi / N` and the circle at
//! that latitude carries about `2N sin(alpha_k)` rays, spaced evenly in the
//! azimuthal angle `beta` starting from zero. Summed over latitudes this
//! gives roughly `4N^2 / pi` rays.
//!
//! Each ray is sampled at `samples_per_ray` evenly spaced points from the
//! center (row 0) to the sphere surface (last row), and becomes one column of
//! the output image. Columns follow schedule order: north pole first,
//! counter-clockwise around each latitude circle.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fingerprint::Fingerprint;
use crate::resample::{interpolate_clamped, VoiCube};

/// Per-latitude ray counts of the 123-column schedule. The floor rule at
/// N = 10 gives 124 columns; this variant drops one ray from the equator to
/// match the published 32x123 image width. It is an approximation: the
/// exact published ray layout is not recoverable.
pub const COMPAT_123_COUNTS: [usize; 11] = [0, 6, 11, 16, 19, 19, 19, 16, 11, 6, 0];

#[derive(Debug, thiserror::Error)]
pub enum SpiralError {
    #[error("invalid spiral config: {0}")]
    InvalidConfig(String),
    #[error("spiral schedule is empty (every latitude has zero rays)")]
    EmptySchedule,
    #[error("cube side must be at least 2, got {0}")]
    CubeTooSmall(usize),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schedule file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Rounding applied to `2N sin(alpha)` when counting rays per latitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatitudeRule {
    Floor,
    Round,
    Ceil,
}

impl LatitudeRule {
    fn apply(self, x: f64) -> usize {
        // 2N sin(alpha) is often an integer in exact arithmetic; keep ceil
        // from jumping on the rounding noise.
        let snapped = if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
        let v = match self {
            LatitudeRule::Floor => snapped.floor(),
            LatitudeRule::Round => snapped.round(),
            LatitudeRule::Ceil => snapped.ceil(),
        };
        v.max(0.0) as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LatitudeRule::Floor => "floor",
            LatitudeRule::Round => "round",
            LatitudeRule::Ceil => "ceil",
        }
    }
}

impl FromStr for LatitudeRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "floor" => Ok(Self::Floor),
            "round" => Ok(Self::Round),
            "ceil" => Ok(Self::Ceil),
            other => Err(format!("unknown latitude rule {other:?} (floor|round|ceil)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpiralConfig {
    /// Angular resolution N; the polar step is `pi / N`.
    pub n_steps: usize,
    pub samples_per_ray: usize,
    pub latitude_rule: LatitudeRule,
    pub include_poles: bool,
    /// Overrides the rule with one count per latitude (`n_steps + 1` values).
    pub explicit_counts: Option<Vec<usize>>,
}

impl Default for SpiralConfig {
    /// N = 10, 32 samples per ray, floor rule, no poles: 32 x 124.
    fn default() -> Self {
        Self {
            n_steps: 10,
            samples_per_ray: 32,
            latitude_rule: LatitudeRule::Floor,
            include_poles: false,
            explicit_counts: None,
        }
    }
}

impl SpiralConfig {
    /// The 32 x 123 layout, see [`COMPAT_123_COUNTS`].
    pub fn compat_123() -> Self {
        Self {
            explicit_counts: Some(COMPAT_123_COUNTS.to_vec()),
            ..Self::default()
        }
    }

    pub fn with_n_steps(n_steps: usize) -> Self {
        Self {
            n_steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpiralError> {
        if self.n_steps < 2 {
            return Err(SpiralError::InvalidConfig(format!(
                "n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        if self.samples_per_ray < 2 {
            return Err(SpiralError::InvalidConfig(format!(
                "samples_per_ray must be >= 2, got {}",
                self.samples_per_ray
            )));
        }
        if let Some(c) = &self.explicit_counts {
            if c.len() != self.n_steps + 1 {
                return Err(SpiralError::InvalidConfig(format!(
                    "explicit_counts needs {} entries, got {}",
                    self.n_steps + 1,
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// Number of rays at each latitude `k = 0..=n_steps`.
    pub fn latitude_counts(&self) -> Vec<usize> {
        if let Some(c) = &self.explicit_counts {
            return c.clone();
        }
        let n = self.n_steps;
        (0..=n)
            .map(|k| {
                if k == 0 || k == n {
                    usize::from(self.include_poles)
                } else {
                    let alpha = PI * (k as f64 / n as f64);
                    self.latitude_rule.apply(2.0 * n as f64 * alpha.sin())
                }
            })
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new("spiral-config");
        fp.update(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        );
        fp.finish()
    }
}

/// `4 N^2 / pi`: the continuum estimate of the ray count.
pub fn expected_surface_points(n_steps: usize) -> f64 {
    let n = n_steps as f64;
    4.0 * n * n / PI
}

/// Ordered ray directions on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralSchedule {
    config: SpiralConfig,
    latitudes: Vec<usize>,
    angles: Vec<(f64, f64)>,
    directions: Vec<[f64; 3]>,
}

/// Builds the ray schedule for `cfg`.
pub fn build_schedule(cfg: &SpiralConfig) -> Result<SpiralSchedule, SpiralError> {
    cfg.validate()?;
    let counts = cfg.latitude_counts();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(SpiralError::EmptySchedule);
    }
    let mut latitudes = Vec::with_capacity(total);
    let mut angles = Vec::with_capacity(total);
    let mut directions = Vec::with_capacity(total);
    for (k, &m) in counts.iter().enumerate() {
        let alpha = PI * (k as f64 / cfg.n_steps as f64);
        let (sa, ca) = alpha.sin_cos();
        for j in 0..m {
            let beta = 2.0 * PI * j as f64 / m as f64;
            let (sb, cb) = beta.sin_cos();
            latitudes.push(k);
            angles.push((alpha, beta));
            directions.push([sa * cb, sa * sb, ca]);
        }
    }
    Ok(SpiralSchedule {
        config: cfg.clone(),
        latitudes,
        angles,
        directions,
    })
}

impl SpiralSchedule {
    pub fn config(&self) -> &SpiralConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    /// `(alpha, beta)` per ray: polar angle from +z and azimuth from +x.
    pub fn angles(&self) -> &[(f64, f64)] {
        &self.angles
    }

    /// Latitude index `k` per ray.
    pub fn latitudes(&self) -> &[usize] {
        &self.latitudes
    }

    /// Cube-local continuous voxel coordinate of sample `s` on ray `ray`
    /// for a cube of `side` voxels.
    #[inline]
    pub fn sample_position(&self, side: usize, ray: usize, s: usize) -> [f64; 3] {
        let c = (side as f64 - 1.0) / 2.0;
        let radius = side as f64 / 2.0;
        let t = s as f64 / (self.config.samples_per_ray - 1) as f64 * radius;
        let u = self.directions[ray];
        [c + t * u[0], c + t * u[1], c + t * u[2]]
    }

    /// Writes the text form: one header line with the config, then
    /// `k alpha beta ux uy uz` per ray.
    pub fn to_text(&self) -> String {
        let cfg = &self.config;
        let counts = match &cfg.explicit_counts {
            Some(c) => c
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
            None => "none".to_string(),
        };
        let mut out = format!(
            "# spiral-schedule v1 n_steps={} samples_per_ray={} latitude_rule={} include_poles={} explicit_counts={}\n",
            cfg.n_steps,
            cfg.samples_per_ray,
            cfg.latitude_rule.as_str(),
            cfg.include_poles,
            counts
        );
        for i in 0..self.len() {
            let (a, b) = self.angles[i];
            let u = self.directions[i];
            writeln!(out, "{} {} {} {} {} {}", self.latitudes[i], a, b, u[0], u[1], u[2])
                .expect("write to string");
        }
        out
    }

    /// Parses [`SpiralSchedule::to_text`] output. The rows must agree with
    /// the schedule the header config builds.
    pub fn from_text(text: &str) -> Result<Self, SpiralError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(SpiralError::Parse {
            line: 1,
            reason: "empty schedule file".into(),
        })?;
        let cfg = parse_header(header)?;
        let schedule = build_schedule(&cfg)?;

        let mut n = 0usize;
        for (lineno, line) in lines {
            let line_no = lineno + 1;
            let bad = |reason: String| SpiralError::Parse {
                line: line_no,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            }
            let k: usize = fields[0].parse().map_err(|_| bad("bad latitude index".into()))?;
            let vals: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("non-numeric field".into()))?;
            if n >= schedule.len() {
                return Err(bad("more rays than the header config produces".into()));
            }
            let want_u = schedule.directions[n];
            let (wa, wb) = schedule.angles[n];
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
            if k != schedule.latitudes[n]
                || !close(vals[0], wa)
                || !close(vals[1], wb)
                || !(0..3).all(|d| close(vals[2 + d], want_u[d]))
            {
                return Err(bad(format!("ray {n} disagrees with the header config")));
            }
            n += 1;
        }
        if n != schedule.len() {
            return Err(SpiralError::Parse {
                line: text.lines().count(),
                reason: format!("expected {} rays, found {n}", schedule.len()),
            });
        }
        Ok(schedule)
    }

    pub fn export(&self, path: &Path) -> Result<(), SpiralError> {
        std::fs::write(path, self.to_text()).map_err(|source| SpiralError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn import(path: &Path) -> Result<Self, SpiralError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpiralError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

fn parse_header(line: &str) -> Result<SpiralConfig, SpiralError> {
    let bad = |reason: String| SpiralError::Parse { line: 1, reason };
    let rest = line
        .strip_prefix("# spiral-schedule v1")
        .ok_or_else(|| bad("missing `# spiral-schedule v1` header".into()))?;
    let mut cfg = SpiralConfig::default();
    let mut seen = 0;
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed field {kv:?}")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad {k} {v:?}")));
        match k {
            "n_steps" => cfg.n_steps = num(v)?,
            "samples_per_ray" => cfg.samples_per_ray = num(v)?,
            "latitude_rule" => cfg.latitude_rule = v.parse().map_err(bad)?,
            "include_poles" => {
                cfg.include_poles = v.parse().map_err(|_| bad(format!("bad include_poles {v:?}")))?
            }
            "explicit_counts" => {
                cfg.explicit_counts = if v == "none" {
                    None
                } else {
                    Some(v.split(',').map(num).collect::<Result<_, _>>()?)
                }
            }
            other => return Err(bad(format!("unknown field {other:?}"))),
        }
        seen += 1;
    }
    if seen != 5 {
        return Err(bad("header must list all five config fields".into()));
    }
    Ok(cfg)
}

/// Spiral view: `rows = samples_per_ray`, `cols = rays`, row-major, so
/// column `c` holds the samples along ray `c` from center to surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub config_fingerprint: String,
}

impl SpiralImage {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f32> + '_ {
        (0..self.rows).map(move |r| self.get(r, col))
    }
}

/// Holds a prebuilt schedule so many cubes can share it.
#[derive(Debug, Clone)]
pub struct SpiralTransformer {
    schedule: SpiralSchedule,
    fingerprint: String,
}

impl SpiralTransformer {
    pub fn new(cfg: &SpiralConfig) -> Result<Self, SpiralError> {
        Ok(Self::from_schedule(build_schedule(cfg)?))
    }

    pub fn from_schedule(schedule: SpiralSchedule) -> Self {
        let fingerprint = schedule.config.fingerprint();
        Self {
            schedule,
            fingerprint,
        }
    }

    pub fn schedule(&self) -> &SpiralSchedule {
        &self.schedule
    }

    pub fn transform(&self, cube: &VoiCube) -> Result<SpiralImage, SpiralError> {
        let side = cube.side();
        if side < 2 {
            return Err(SpiralError::CubeTooSmall(side));
        }
        let rows = self.schedule.config.samples_per_ray;
        let cols = self.schedule.len();
        let dims = cube.dims();
        // the sphere touches the cube faces half a voxel beyond the outer
        // voxel centers; that rim reads the edge voxels
        let lo = -0.5;
        let hi = side as f64 - 0.5;
        let mut data = vec![0f32; rows * cols];
        for col in 0..cols {
            for row in 0..rows {
                let p = self.schedule.sample_position(side, col, row);
                if p.iter().all(|&x| x >= lo && x <= hi) {
                    data[row * cols + col] = interpolate_clamped(cube.data(), dims, p) as f32;
                }
            }
        }
        Ok(SpiralImage {
            rows,
            cols,
            data,
            config_fingerprint: self.fingerprint.clone(),
        })
    }
}

/// One-shot transform; prefer [`SpiralTransformer`] for batches.
pub fn spiral_transform(cube: &VoiCube, cfg: &SpiralConfig) -> Result<SpiralImage, SpiralError> {
    SpiralTransformer::new(cfg)?.transform(cube)
}
