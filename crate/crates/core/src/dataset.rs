//! Fold-split, class-balanced datasets of per-candidate tensors.
//!
//! A [`DatasetManifest`] fixes everything a build needs: the scan-to-fold
//! split, which candidates are kept, and how many augmented copies each
//! positive receives. [`build_dataset`] then turns it into
//!
//! ```text
//! out/
//!   manifest.json
//!   report.json
//!   provenance.jsonl          one line per augmented sample
//!   fold{F}/pos/c{index:07}.s2dt
//!   fold{F}/pos/c{index:07}_a{aug:05}.s2dt
//!   fold{F}/neg/c{index:07}.s2dt
//! ```
//!
//! where `index` is the candidate's row in the source list. Output bytes
//! depend only on the manifest and the volumes, never on the worker count.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_augment, sample_augment_spec, AugmentSpec};
use crate::fingerprint::Fingerprint;
use crate::resample::{extract_voi, rescale_intensity, VoiCube, DEFAULT_SIDE, DEFAULT_VOI_MM};
use crate::s2dt::{write_pgm, write_s2dt, Tensor};
use crate::spiral::{SpiralConfig, SpiralSchedule, SpiralTransformer};
use crate::views::{center_slice, nine_views};
use crate::volume_io::{load_metaimage, CandidateRecord, Volume3D};

/// Representation written for each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Spiral,
    CenterSlice,
    NineView,
    Cube,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Spiral => "spiral",
            Mode::CenterSlice => "slice",
            Mode::NineView => "nineview",
            Mode::Cube => "cube",
        }
    }

    pub fn is_2d(self) -> bool {
        self != Mode::Cube
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spiral" => Ok(Mode::Spiral),
            "slice" | "center_slice" => Ok(Mode::CenterSlice),
            "nineview" | "nine_view" => Ok(Mode::NineView),
            "cube" => Ok(Mode::Cube),
            other => Err(format!(
                "unknown mode {other:?}, expected spiral, slice, nineview or cube"
            )),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no candidates")]
    NoCandidates,
    #[error("candidate {index} has no label; datasets need labeled candidates")]
    Unlabeled { index: usize },
    #[error("invalid dataset options: {0}")]
    InvalidOptions(String),
    #[error("subsampling by {factor} empties the {class} class of fold {fold} ({count} candidates)")]
    ClassEmptied {
        factor: usize,
        fold: usize,
        class: &'static str,
        count: usize,
    },
    #[error("output directory {0} is not empty")]
    OutputNotEmpty(PathBuf),
    #[error("two volumes for scan {scan_id}: {first} and {second}")]
    DuplicateVolume {
        scan_id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("emitted files disagree with the build plan: {0}")]
    CountMismatch(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Knobs for [`DatasetManifest::plan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestOptions {
    pub mode: Mode,
    pub n_folds: usize,
    /// Held-out folds: never augmented, never subsampled.
    pub test_folds: Vec<usize>,
    pub seed: u64,
    pub voi_size_mm: f64,
    pub side: usize,
    pub spiral: SpiralConfig,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Spiral,
            n_folds: 10,
            test_folds: Vec::new(),
            seed: 0,
            voi_size_mm: DEFAULT_VOI_MM,
            side: DEFAULT_SIDE,
            spiral: SpiralConfig::compat_123(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCandidate {
    /// Row in the source candidate list; names the output files.
    pub index: usize,
    pub scan_id: String,
    pub world_pos: [f64; 3],
    pub label: bool,
    pub fold: usize,
    /// Augmented copies to emit (positives in training folds only).
    pub augmentations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold: usize,
    pub is_test: bool,
    pub positives: usize,
    pub negatives: usize,
    /// Augmented positives planned for this fold.
    pub augmented: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub mode: Mode,
    pub n_folds: usize,
    pub test_folds: Vec<usize>,
    pub global_seed: u64,
    pub voi_size_mm: f64,
    pub side: usize,
    pub spiral: SpiralConfig,
    pub spiral_fingerprint: String,
    /// Product of all subsampling factors applied so far.
    pub subsample_factor: usize,
    pub fold_of_scan: BTreeMap<String, usize>,
    pub folds: Vec<FoldPlan>,
    pub candidates: Vec<ManifestCandidate>,
}

fn seeded_rng(domain: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut fp = Fingerprint::new(domain);
    for &p in parts {
        fp.update_u64(p);
    }
    ChaCha8Rng::from_seed(fp.finish_seed())
}

impl DatasetManifest {
    /// Splits scans into folds (seeded) and plans augmentation so every
    /// training fold reaches positive/negative parity.
    pub fn plan(candidates: &[CandidateRecord], opts: &ManifestOptions) -> Result<Self, DatasetError> {
        if candidates.is_empty() {
            return Err(DatasetError::NoCandidates);
        }
        if opts.n_folds == 0 {
            return Err(DatasetError::InvalidOptions("n_folds must be at least 1".into()));
        }
        if let Some(f) = opts.test_folds.iter().find(|&&f| f >= opts.n_folds) {
            return Err(DatasetError::InvalidOptions(format!(
                "test fold {f} out of range for {} folds",
                opts.n_folds
            )));
        }
        if !(opts.voi_size_mm.is_finite() && opts.voi_size_mm > 0.0) || opts.side < 2 {
            return Err(DatasetError::InvalidOptions(format!(
                "VOI of {} mm at side {} is not usable",
                opts.voi_size_mm, opts.side
            )));
        }
        if opts.mode == Mode::NineView && opts.side % 2 != 0 {
            return Err(DatasetError::InvalidOptions("nine-view mode needs an even side".into()));
        }
        opts.spiral
            .validate()
            .map_err(|e| DatasetError::InvalidOptions(e.to_string()))?;

        let mut scans: Vec<&str> = candidates.iter().map(|c| c.scan_id.as_str()).collect();
        scans.sort_unstable();
        scans.dedup();
        scans.shuffle(&mut seeded_rng("folds", &[opts.seed]));
        let fold_of_scan: BTreeMap<String, usize> = scans
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i % opts.n_folds))
            .collect();

        let candidates = candidates
            .iter()
            .enumerate()
            .map(|(index, c)| {
                Ok(ManifestCandidate {
                    index,
                    scan_id: c.scan_id.clone(),
                    world_pos: c.world_pos,
                    label: c.label.ok_or(DatasetError::Unlabeled { index })?,
                    fold: fold_of_scan[&c.scan_id],
                    augmentations: 0,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut test_folds = opts.test_folds.clone();
        test_folds.sort_unstable();
        test_folds.dedup();
        let mut m = Self {
            mode: opts.mode,
            n_folds: opts.n_folds,
            test_folds,
            global_seed: opts.seed,
            voi_size_mm: opts.voi_size_mm,
            side: opts.side,
            spiral: opts.spiral.clone(),
            spiral_fingerprint: opts.spiral.fingerprint(),
            subsample_factor: 1,
            fold_of_scan,
            folds: Vec::new(),
            candidates,
        };
        m.plan_augmentation();
        Ok(m)
    }

    pub fn is_test_fold(&self, fold: usize) -> bool {
        self.test_folds.contains(&fold)
    }

    /// Spreads each training fold's shortfall of positives round-robin
    /// over its positives (lowest index first).
    fn plan_augmentation(&mut self) {
        self.folds = (0..self.n_folds)
            .map(|fold| FoldPlan {
                fold,
                is_test: self.is_test_fold(fold),
                positives: 0,
                negatives: 0,
                augmented: 0,
            })
            .collect();
        for c in &mut self.candidates {
            c.augmentations = 0;
            let f = &mut self.folds[c.fold];
            if c.label {
                f.positives += 1;
            } else {
                f.negatives += 1;
            }
        }
        for f in &mut self.folds {
            if f.is_test || f.positives == 0 {
                if !f.is_test && f.negatives > 0 {
                    log::warn!("fold {} has no positives and cannot be balanced", f.fold);
                }
                continue;
            }
            let need = f.negatives.saturating_sub(f.positives);
            let (base, extra) = (need / f.positives, need % f.positives);
            let mut seen = 0;
            for c in self.candidates.iter_mut().filter(|c| c.fold == f.fold && c.label) {
                c.augmentations = base + usize::from(seen < extra);
                seen += 1;
            }
            f.augmented = need;
        }
    }

    /// Total files a full build emits.
    pub fn planned_samples(&self) -> usize {
        self.candidates.iter().map(|c| 1 + c.augmentations).sum()
    }
}

/// Keeps `1/factor` of each class in every training fold (floor, seeded,
/// order preserved); test folds are left intact. Re-plans augmentation.
pub fn subsample(
    manifest: &DatasetManifest,
    factor: usize,
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    if factor == 0 {
        return Err(DatasetError::InvalidOptions("subsample factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(manifest.clone());
    }
    let mut keep = vec![true; manifest.candidates.len()];
    for fold in 0..manifest.n_folds {
        if manifest.is_test_fold(fold) {
            continue;
        }
        for label in [true, false] {
            let mut members: Vec<usize> = (0..manifest.candidates.len())
                .filter(|&i| {
                    let c = &manifest.candidates[i];
                    c.fold == fold && c.label == label
                })
                .collect();
            let kept = members.len() / factor;
            if kept == 0 && !members.is_empty() {
                return Err(DatasetError::ClassEmptied {
                    factor,
                    fold,
                    class: if label { "positive" } else { "negative" },
                    count: members.len(),
                });
            }
            members.shuffle(&mut seeded_rng("subsample", &[seed, fold as u64, u64::from(label)]));
            for &i in &members[kept..] {
                keep[i] = false;
            }
        }
    }
    let mut out = manifest.clone();
    out.candidates = manifest
        .candidates
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(c, _)| c.clone())
        .collect();
    out.subsample_factor *= factor;
    out.plan_augmentation();
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Worker threads; 0 means one per logical CPU.
    pub jobs: usize,
    /// Also write an 8-bit PGM next to every 2D sample.
    pub pgm: bool,
    /// Spiral schedule to use instead of building one from the manifest's
    /// configuration; it must have been built from that configuration.
    pub schedule: Option<SpiralSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub is_test: bool,
    pub positives: usize,
    pub augmented: usize,
    pub negatives: usize,
    /// Positives (original plus augmented) within 1% of negatives; absent
    /// for test folds.
    pub balanced: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub index: usize,
    pub scan_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub mode: Mode,
    pub tensor_dims: Vec<usize>,
    pub samples_written: usize,
    pub augmented_written: usize,
    pub folds: Vec<FoldReport>,
    pub failures: Vec<CandidateFailure>,
}

impl BuildReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// One augmented sample in `provenance.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub file: String,
    pub candidate_index: usize,
    pub scan_id: String,
    pub augment_index: usize,
    pub spec: AugmentSpec,
}

/// Relative path of a sample inside the output tree.
pub fn sample_path(fold: usize, label: bool, index: usize, augment: Option<usize>) -> String {
    let class = if label { "pos" } else { "neg" };
    match augment {
        None => format!("fold{fold}/{class}/c{index:07}.s2dt"),
        Some(a) => format!("fold{fold}/{class}/c{index:07}_a{a:05}.s2dt"),
    }
}

/// Augmentation spec for one augmented copy; depends only on the global
/// seed and the two indices.
pub fn augment_spec_for(global_seed: u64, candidate_index: usize, augment_index: usize) -> AugmentSpec {
    let mut rng = seeded_rng(
        "augment",
        &[global_seed, candidate_index as u64, augment_index as u64],
    );
    sample_augment_spec(&mut rng)
}

/// Maps `*.mhd` files under `dir` (recursively) by file stem.
pub fn index_volumes(dir: &Path) -> Result<HashMap<String, PathBuf>, DatasetError> {
    let mut out: HashMap<String, PathBuf> = HashMap::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::Read {
            path: e.path().unwrap_or(dir).to_path_buf(),
            source: e.into(),
        })?;
        let p = entry.path();
        if !entry.file_type().is_file() || p.extension().and_then(|e| e.to_str()) != Some("mhd") {
            continue;
        }
        let Some(stem) = p.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(first) = out.insert(stem.to_string(), p.to_path_buf()) {
            return Err(DatasetError::DuplicateVolume {
                scan_id: stem.to_string(),
                first,
                second: p.to_path_buf(),
            });
        }
    }
    Ok(out)
}

/// Turns a normalized cube into the tensor for `mode`.
pub struct Representer {
    mode: Mode,
    spiral: Option<SpiralTransformer>,
}

impl Representer {
    pub fn new(mode: Mode, spiral: SpiralTransformer) -> Self {
        Self {
            mode,
            spiral: (mode == Mode::Spiral).then_some(spiral),
        }
    }

    pub fn tensor(&self, cube: &VoiCube) -> Result<Tensor, String> {
        let (dims, data) = match self.mode {
            Mode::Spiral => {
                let img = self
                    .spiral
                    .as_ref()
                    .expect("spiral mode holds a transformer")
                    .transform(cube)
                    .map_err(|e| e.to_string())?;
                (vec![img.rows, img.cols], img.data)
            }
            Mode::CenterSlice => {
                let r = center_slice(cube);
                (vec![r.rows, r.cols], r.data)
            }
            Mode::NineView => {
                let r = nine_views(cube).map_err(|e| e.to_string())?;
                (vec![r.rows, r.cols], r.data)
            }
            Mode::Cube => {
                let s = cube.side();
                (vec![s, s, s], cube.data().to_vec())
            }
        };
        Tensor::new(dims, data).map_err(|e| e.to_string())
    }
}

enum UnitError {
    Candidate(String),
    Fatal(DatasetError),
}

struct Emitted {
    index: usize,
    augment: Option<usize>,
    spec: Option<AugmentSpec>,
    file: String,
    dims: Vec<usize>,
}

fn emit(out: &Path, rel: &str, tensor: &Tensor, pgm: bool) -> Result<(), UnitError> {
    let path = out.join(rel);
    let fatal = |e: crate::s2dt::S2dtError| {
        UnitError::Fatal(DatasetError::Write {
            path: path.clone(),
            reason: e.to_string(),
        })
    };
    write_s2dt(&path, tensor).map_err(fatal)?;
    if pgm && tensor.dims.len() == 2 {
        write_pgm(&path.with_extension("pgm"), tensor.dims[0], tensor.dims[1], &tensor.data)
            .map_err(fatal)?;
    }
    Ok(())
}

fn normalized_voi(vol: &Volume3D, c: &ManifestCandidate, m: &DatasetManifest) -> Result<VoiCube, UnitError> {
    extract_voi(vol, c.world_pos, m.voi_size_mm, m.side)
        .and_then(rescale_intensity)
        .map_err(|e| UnitError::Candidate(e.to_string()))
}

/// Emits the candidate (`augment = None`) or one of its augmented copies.
fn run_unit(
    base: &VoiCube,
    c: &ManifestCandidate,
    augment: Option<usize>,
    m: &DatasetManifest,
    rep: &Representer,
    out: &Path,
    pgm: bool,
) -> Result<Emitted, UnitError> {
    let (cube, spec) = match augment {
        None => (None, None),
        Some(a) => {
            let spec = augment_spec_for(m.global_seed, c.index, a);
            let cube = apply_augment(base, &spec).map_err(|e| UnitError::Candidate(e.to_string()))?;
            (Some(cube), Some(spec))
        }
    };
    let tensor = rep
        .tensor(cube.as_ref().unwrap_or(base))
        .map_err(UnitError::Candidate)?;
    let file = sample_path(c.fold, c.label, c.index, augment);
    emit(out, &file, &tensor, pgm)?;
    Ok(Emitted {
        index: c.index,
        augment,
        spec,
        file,
        dims: tensor.dims,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(|e| DatasetError::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn prepare_output(out: &Path, n_folds: usize) -> Result<(), DatasetError> {
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|source| DatasetError::Read {
            path: out.to_path_buf(),
            source,
        })?;
        if entries.next().is_some() {
            return Err(DatasetError::OutputNotEmpty(out.to_path_buf()));
        }
    }
    for f in 0..n_folds {
        for class in ["pos", "neg"] {
            let d = out.join(format!("fold{f}")).join(class);
            fs::create_dir_all(&d).map_err(|e| DatasetError::Write {
                path: d.clone(),
                reason: e.to_string(),
            })?;
        }
    }
    Ok(())
}

/// Per fold: (original positives, augmented, negatives) found on disk.
fn recount(out: &Path, n_folds: usize) -> Result<Vec<[usize; 3]>, DatasetError> {
    let mut counts = vec![[0usize; 3]; n_folds];
    for (f, slot) in counts.iter_mut().enumerate() {
        for class in ["pos", "neg"] {
            let d = out.join(format!("fold{f}")).join(class);
            let entries = fs::read_dir(&d).map_err(|source| DatasetError::Read {
                path: d.clone(),
                source,
            })?;
            for e in entries {
                let e = e.map_err(|source| DatasetError::Read {
                    path: d.clone(),
                    source,
                })?;
                let name = e.file_name();
                let name = name.to_string_lossy();
                if !name.ends_with(".s2dt") {
                    continue;
                }
                let k = match (class, name.contains("_a")) {
                    ("pos", false) => 0,
                    ("pos", true) => 1,
                    _ => 2,
                };
                slot[k] += 1;
            }
        }
    }
    Ok(counts)
}

/// Builds the on-disk dataset described by `manifest`. Candidates whose
/// volume is missing or unreadable are skipped and listed in the report;
/// the build still fails outright on write errors, on an unusable output
/// directory and when the emitted files do not match the plan.
pub fn build_dataset(
    volumes_dir: &Path,
    manifest: &DatasetManifest,
    out: &Path,
    opts: &BuildOptions,
) -> Result<BuildReport, DatasetError> {
    if manifest.candidates.is_empty() {
        return Err(DatasetError::NoCandidates);
    }
    let transformer = match &opts.schedule {
        Some(s) => {
            if s.config() != &manifest.spiral {
                return Err(DatasetError::InvalidOptions(
                    "spiral schedule does not match the manifest configuration".into(),
                ));
            }
            SpiralTransformer::from_schedule(s.clone())
        }
        None => SpiralTransformer::new(&manifest.spiral)
            .map_err(|e| DatasetError::InvalidOptions(e.to_string()))?,
    };
    let rep = Representer::new(manifest.mode, transformer);
    let volumes = index_volumes(volumes_dir)?;
    prepare_output(out, manifest.n_folds)?;

    let mut by_scan: BTreeMap<&str, Vec<&ManifestCandidate>> = BTreeMap::new();
    for c in &manifest.candidates {
        by_scan.entry(c.scan_id.as_str()).or_default().push(c);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| DatasetError::Pool(e.to_string()))?;

    type UnitResult = (usize, Result<Emitted, UnitError>);
    let results: Vec<UnitResult> = pool.install(|| {
        by_scan
            .par_iter()
            .flat_map_iter(|(scan, cands)| -> Vec<UnitResult> {
                let vol = match volumes.get(*scan) {
                    None => Err(format!("no volume file for scan {scan}")),
                    Some(p) => load_metaimage(p).map_err(|e| e.to_string()),
                };
                let vol = match vol {
                    Ok(v) => v,
                    Err(reason) => {
                        return cands
                            .iter()
                            .map(|c| (c.index, Err(UnitError::Candidate(reason.clone()))))
                            .collect()
                    }
                };
                log::debug!("scan {scan}: {} candidates", cands.len());
                cands
                    .par_iter()
                    .flat_map_iter(|c| -> Vec<UnitResult> {
                        let base = match normalized_voi(&vol, c, manifest) {
                            Ok(b) => b,
                            Err(e) => return vec![(c.index, Err(e))],
                        };
                        (0..=c.augmentations)
                            .into_par_iter()
                            .map(|a| {
                                let aug = (a > 0).then(|| a - 1);
                                (c.index, run_unit(&base, c, aug, manifest, &rep, out, opts.pgm))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    });

    let mut emitted = Vec::new();
    let mut failures: BTreeMap<usize, String> = BTreeMap::new();
    for (index, r) in results {
        match r {
            Ok(e) => emitted.push(e),
            Err(UnitError::Fatal(e)) => return Err(e),
            Err(UnitError::Candidate(reason)) => {
                log::warn!("candidate {index}: {reason}");
                failures.entry(index).or_insert(reason);
            }
        }
    }
    emitted.sort_by_key(|e| (e.index, e.augment));
    let failures: Vec<CandidateFailure> = failures
        .into_iter()
        .map(|(index, reason)| CandidateFailure {
            scan_id: manifest
                .candidates
                .iter()
                .find(|c| c.index == index)
                .map(|c| c.scan_id.clone())
                .unwrap_or_default(),
            index,
            reason,
        })
        .collect();

    let by_index: HashMap<usize, &ManifestCandidate> =
        manifest.candidates.iter().map(|c| (c.index, c)).collect();
    let mut provenance = String::new();
    let mut folds: Vec<FoldReport> = manifest
        .folds
        .iter()
        .map(|f| FoldReport {
            fold: f.fold,
            is_test: f.is_test,
            positives: 0,
            augmented: 0,
            negatives: 0,
            balanced: None,
        })
        .collect();
    for e in &emitted {
        let c = by_index[&e.index];
        let f = &mut folds[c.fold];
        match (c.label, &e.spec) {
            (true, None) => f.positives += 1,
            (true, Some(spec)) => {
                f.augmented += 1;
                let rec = ProvenanceRecord {
                    file: e.file.clone(),
                    candidate_index: e.index,
                    scan_id: c.scan_id.clone(),
                    augment_index: e.augment.expect("augmented sample"),
                    spec: spec.clone(),
                };
                provenance.push_str(&serde_json::to_string(&rec).expect("serializable"));
                provenance.push('\n');
            }
            (false, _) => f.negatives += 1,
        }
    }
    for f in &mut folds {
        if !f.is_test {
            let pos = (f.positives + f.augmented) as f64;
            let neg = f.negatives as f64;
            f.balanced = Some((pos - neg).abs() <= 0.01 * neg);
        }
    }

    let on_disk = recount(out, manifest.n_folds)?;
    for (f, counts) in folds.iter().zip(&on_disk) {
        let expected = [f.positives, f.augmented, f.negatives];
        if &expected != counts {
            return Err(DatasetError::CountMismatch(format!(
                "fold {}: expected (pos, aug, neg) = {expected:?}, found {counts:?}",
                f.fold
            )));
        }
    }

    let report = BuildReport {
        mode: manifest.mode,
        tensor_dims: emitted.first().map(|e| e.dims.clone()).unwrap_or_default(),
        samples_written: emitted.len(),
        augmented_written: emitted.iter().filter(|e| e.spec.is_some()).count(),
        folds,
        failures,
    };
    write_file(&out.join("provenance.jsonl"), provenance.as_bytes())?;
    write_file(&out.join("manifest.json"), pretty_json(manifest).as_bytes())?;
    write_file(&out.join("report.json"), pretty_json(&report).as_bytes())?;
    Ok(report)
}

pub(crate) fn pretty_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
