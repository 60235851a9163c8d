//! Command-line front end.
//!
//! Exit codes: 0 success, 1 fatal or usage error, 2 partial success (some
//! candidates failed, the rest were written).
//!
//! `--config file.json` supplies defaults for any flag. Top-level keys apply
//! to the chosen subcommand (or are global, like `jobs`); an object keyed by
//! a subcommand name applies to that subcommand only and wins over the top
//! level. Flags given on the command line always win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{
    build_dataset, pretty_json, subsample, BuildOptions, DatasetManifest, ManifestOptions, Mode,
    Representer,
};
use crate::eval::{evaluate, load_predictions, load_reference, PredictionSet};
use crate::resample::{extract_voi, rescale_intensity, DEFAULT_SIDE, DEFAULT_VOI_MM};
use crate::s2dt::{write_pgm, write_s2dt};
use crate::spiral::{
    build_schedule, expected_surface_points, LatitudeRule, SpiralConfig, SpiralSchedule,
    SpiralTransformer,
};
use crate::volume_io::{load_candidates, load_metaimage, CandidateRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// Environment fallback for `--jobs`.
pub const JOBS_ENV: &str = "SPIRALREP_JOBS";

#[derive(Parser, Debug)]
#[command(
    name = "spiralrep",
    version,
    about = "Spiral-scan and baseline 2D representations of CT nodule candidates"
)]
struct Cli {
    /// Worker threads (default: $SPIRALREP_JOBS, else one per logical CPU).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON file of flag defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one tensor per candidate of a single volume.
    Transform(TransformArgs),
    /// Build a fold-split, balanced dataset from a volume directory.
    Build(BuildArgs),
    /// Score predictions: AUC, FROC and CPM.
    Eval(EvalArgs),
    /// Inspect, export or import a spiral schedule.
    Schedule(ScheduleArgs),
}

#[derive(Args, Debug)]
struct SpiralArgs {
    /// Angular resolution N with the latitude rule; without it the 123-ray
    /// compatibility schedule is used.
    #[arg(long)]
    n: Option<usize>,
    /// Rays per latitude: floor, round or ceil of 2N sin(alpha).
    #[arg(long, requires = "n")]
    rule: Option<LatitudeRule>,
    /// Put one ray on each pole.
    #[arg(long, requires = "n")]
    poles: bool,
    /// Samples per ray (image rows).
    #[arg(long)]
    samples: Option<usize>,
    /// Schedule file written by `schedule --export`.
    #[arg(long, conflicts_with_all = ["n", "samples"])]
    schedule: Option<PathBuf>,
}

impl SpiralArgs {
    fn config(&self) -> SpiralConfig {
        let mut cfg = match self.n {
            Some(n) => SpiralConfig {
                latitude_rule: self.rule.unwrap_or(LatitudeRule::Floor),
                include_poles: self.poles,
                ..SpiralConfig::with_n_steps(n)
            },
            None => SpiralConfig::compat_123(),
        };
        if let Some(s) = self.samples {
            cfg.samples_per_ray = s;
        }
        cfg
    }

    fn schedule(&self) -> Result<SpiralSchedule> {
        match &self.schedule {
            Some(p) => SpiralSchedule::import(p)
                .with_context(|| format!("loading schedule {}", p.display())),
            None => Ok(build_schedule(&self.config())?),
        }
    }
}

#[derive(Args, Debug)]
struct VoiArgs {
    /// Edge of the volume of interest in mm.
    #[arg(long, default_value_t = DEFAULT_VOI_MM)]
    voi_mm: f64,
    /// Voxels per cube edge.
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    side: usize,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["center", "candidates"]))]
struct TransformArgs {
    /// MetaImage header (.mhd).
    #[arg(long)]
    input: PathBuf,
    /// World position x,y,z in mm.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    center: Option<[f64; 3]>,
    /// Candidate CSV; rows whose seriesuid matches the input file stem are used.
    #[arg(long, conflicts_with = "center")]
    candidates: Option<PathBuf>,
    #[arg(long, default_value = "spiral")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
    /// Also write 8-bit PGM images of 2D outputs.
    #[arg(long)]
    pgm: bool,
    #[command(flatten)]
    spiral: SpiralArgs,
    #[command(flatten)]
    voi: VoiArgs,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Directory searched recursively for <seriesuid>.mhd volumes.
    #[arg(long)]
    volumes: PathBuf,
    /// Labeled candidate CSV.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Held-out folds (comma-separated): no augmentation, no subsampling.
    #[arg(long, value_delimiter = ',')]
    test_folds: Vec<usize>,
    #[arg(long, default_value = "spiral")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep 1/k of each class in every training fold.
    #[arg(long, default_value_t = 1)]
    subsample: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: bool,
    #[command(flatten)]
    spiral: SpiralArgs,
    #[command(flatten)]
    voi: VoiArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// seriesuid,coordX,coordY,coordZ,probability
    #[arg(long)]
    pred: PathBuf,
    /// seriesuid,coordX,coordY,coordZ,diameter_mm
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Findings that count neither as hits nor as false positives.
    #[arg(long)]
    exclude: Option<PathBuf>,
    /// Scans evaluated (default: distinct seriesuids in predictions and reference).
    #[arg(long)]
    scans: Option<usize>,
    /// Writes froc.csv and report.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[command(flatten)]
    spiral: SpiralArgs,
    /// Write the schedule to this file.
    #[arg(long)]
    export: Option<PathBuf>,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !o.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(out)
}

const SUBCOMMANDS: [&str; 4] = ["transform", "build", "eval", "schedule"];

fn config_value_args(key: &str, v: &serde_json::Value) -> Result<Vec<String>> {
    use serde_json::Value;
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| -> Result<String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            other => bail!("config key {key:?}: unsupported value {other}"),
        }
    };
    Ok(match v {
        Value::Bool(true) => vec![flag],
        Value::Bool(false) | Value::Null => vec![],
        Value::Array(items) => vec![
            flag,
            items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","),
        ],
        other => vec![flag, scalar(other)?],
    })
}

/// Appends config-file flags that the command line does not already set.
fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let json: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let serde_json::Value::Object(top) = json else {
        bail!("config {path} must hold a JSON object");
    };
    let sub = args.iter().skip(1).find(|a| SUBCOMMANDS.contains(&a.as_str()));
    let mut merged: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    for (k, v) in &top {
        if !(SUBCOMMANDS.contains(&k.as_str()) && v.is_object()) {
            merged.insert(k.clone(), v.clone());
        }
    }
    if let Some(serde_json::Value::Object(section)) = sub.and_then(|s| top.get(s.as_str())) {
        merged.extend(section.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    let mut out = args.clone();
    for (k, v) in &merged {
        let flag = format!("--{}", k.replace('_', "-"));
        let given = args
            .iter()
            .any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if !given {
            out.extend(config_value_args(k, v)?);
        }
    }
    Ok(out)
}

fn resolve_jobs(flag: Option<usize>) -> Result<usize> {
    if let Some(j) = flag {
        return Ok(j);
    }
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{JOBS_ENV}={v:?} is not a worker count")),
        Err(_) => Ok(0),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code. Data goes to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return EXIT_FATAL;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_FATAL
                }
            };
        }
    };
    let result = resolve_jobs(cli.jobs).and_then(|jobs| match cli.command {
        Command::Transform(a) => cmd_transform(a, jobs, stdout),
        Command::Build(a) => cmd_build(a, jobs, stdout),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Schedule(a) => cmd_schedule(a, stdout),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_FATAL
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Reads a candidate file with or without the `class` column.
fn load_any_candidates(path: &Path) -> Result<Vec<CandidateRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default();
    let labeled = header.split(',').count() >= 5;
    Ok(load_candidates(path, labeled)?)
}

fn cmd_transform(a: TransformArgs, jobs: usize, stdout: &mut dyn Write) -> Result<i32> {
    let schedule = a.spiral.schedule()?;
    let rep = Representer::new(a.mode, SpiralTransformer::from_schedule(schedule));
    if a.mode == Mode::NineView && a.voi.side % 2 != 0 {
        bail!("nine-view mode needs an even --side");
    }
    let vol = load_metaimage(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let stem = a
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();

    let targets: Vec<(usize, [f64; 3])> = match (&a.center, &a.candidates) {
        (Some(c), _) => vec![(0, *c)],
        (None, Some(csv)) => {
            let all = load_any_candidates(csv)?;
            let mine: Vec<(usize, [f64; 3])> = all
                .iter()
                .enumerate()
                .filter(|(_, c)| c.scan_id == stem)
                .map(|(i, c)| (i, c.world_pos))
                .collect();
            if mine.is_empty() {
                bail!("no candidates in {} for scan {stem}", csv.display());
            }
            mine
        }
        (None, None) => unreachable!("clap requires a target"),
    };
    create_dir(&a.out)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let results: Vec<Result<(PathBuf, Vec<usize>), String>> = pool.install(|| {
        targets
            .par_iter()
            .map(|&(index, center)| {
                let cube = extract_voi(&vol, center, a.voi.voi_mm, a.voi.side)
                    .and_then(rescale_intensity)
                    .map_err(|e| e.to_string())?;
                let t = rep.tensor(&cube)?;
                let path = a.out.join(format!("c{index:07}.s2dt"));
                write_s2dt(&path, &t).map_err(|e| e.to_string())?;
                if a.pgm && t.dims.len() == 2 {
                    write_pgm(&path.with_extension("pgm"), t.dims[0], t.dims[1], &t.data)
                        .map_err(|e| e.to_string())?;
                }
                Ok((path, t.dims))
            })
            .collect()
    });

    let mut failed = 0;
    for ((index, center), r) in targets.iter().zip(results) {
        let [x, y, z] = center;
        match r {
            Ok((path, dims)) => {
                let dims: Vec<String> = dims.iter().map(usize::to_string).collect();
                writeln!(
                    stdout,
                    "c{index:07} ok center={x},{y},{z} mode={} shape={} -> {}",
                    a.mode.as_str(),
                    dims.join("x"),
                    path.display()
                )?;
            }
            Err(e) => {
                failed += 1;
                log::error!("candidate {index}: {e}");
                writeln!(stdout, "c{index:07} failed center={x},{y},{z}: {e}")?;
            }
        }
    }
    Ok(match failed {
        0 => EXIT_OK,
        n if n == targets.len() => EXIT_FATAL,
        _ => EXIT_PARTIAL,
    })
}

fn cmd_build(a: BuildArgs, jobs: usize, stdout: &mut dyn Write) -> Result<i32> {
    let schedule = a.spiral.schedule()?;
    let candidates = load_candidates(&a.candidates, true)?;
    let opts = ManifestOptions {
        mode: a.mode,
        n_folds: a.folds,
        test_folds: a.test_folds,
        seed: a.seed,
        voi_size_mm: a.voi.voi_mm,
        side: a.voi.side,
        spiral: schedule.config().clone(),
    };
    let mut manifest = DatasetManifest::plan(&candidates, &opts)?;
    if a.subsample > 1 {
        manifest = subsample(&manifest, a.subsample, a.seed)?;
    }
    let report = build_dataset(
        &a.volumes,
        &manifest,
        &a.out,
        &BuildOptions {
            jobs,
            pgm: a.pgm,
            schedule: Some(schedule),
        },
    )?;
    write!(stdout, "{}", pretty_json(&report))?;
    Ok(if report.is_complete() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

fn cmd_eval(a: EvalArgs, stdout: &mut dyn Write) -> Result<i32> {
    let preds = load_predictions(&a.pred)?;
    let reference = load_reference(&a.reference)?;
    let excluded = match &a.exclude {
        Some(p) => load_reference(p)?,
        None => Vec::new(),
    };
    let scans = match a.scans {
        Some(s) => s,
        None => {
            let mut ids: Vec<&str> = preds
                .iter()
                .map(|p| p.scan_id.as_str())
                .chain(reference.iter().map(|r| r.scan_id.as_str()))
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids.len()
        }
    };
    let set = PredictionSet::new(preds, scans)?;
    let (report, curve) = evaluate(&set, &reference, &excluded)?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        fs::write(dir.join("froc.csv"), curve.to_csv())
            .with_context(|| format!("writing {}", dir.join("froc.csv").display()))?;
        fs::write(dir.join("report.json"), pretty_json(&report))
            .with_context(|| format!("writing {}", dir.join("report.json").display()))?;
    }
    write!(stdout, "{}", pretty_json(&report))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ScheduleSummary {
    n_steps: usize,
    rule: &'static str,
    poles: bool,
    samples: usize,
    counts: Vec<usize>,
    count: usize,
    expected: f64,
}

fn cmd_schedule(a: ScheduleArgs, stdout: &mut dyn Write) -> Result<i32> {
    let schedule = a.spiral.schedule()?;
    let cfg = schedule.config();
    let counts = cfg.latitude_counts();
    let expected = expected_surface_points(cfg.n_steps);
    let s = ScheduleSummary {
        n_steps: cfg.n_steps,
        rule: if cfg.explicit_counts.is_some() {
            "explicit"
        } else {
            cfg.latitude_rule.as_str()
        },
        poles: cfg.include_poles,
        samples: cfg.samples_per_ray,
        counts,
        count: schedule.len(),
        expected,
    };
    let counts: Vec<String> = s.counts.iter().map(usize::to_string).collect();
    writeln!(stdout, "n_steps {}", s.n_steps)?;
    writeln!(stdout, "rule {}", s.rule)?;
    writeln!(stdout, "poles {}", s.poles)?;
    writeln!(stdout, "samples {}", s.samples)?;
    writeln!(stdout, "counts {}", counts.join(","))?;
    writeln!(stdout, "count {}", s.count)?;
    writeln!(stdout, "expected {:.2}", s.expected)?;
    writeln!(
        stdout,
        "relative_error {:.4}",
        (s.count as f64 - expected).abs() / expected
    )?;
    writeln!(stdout, "fingerprint {}", cfg.fingerprint())?;
    if let Some(p) = &a.export {
        schedule
            .export(p)
            .with_context(|| format!("exporting schedule to {}", p.display()))?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("spiralrep").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn triple_parsing() {
        assert_eq!(parse_triple("-1, 2.5,3").unwrap(), [-1.0, 2.5, 3.0]);
        assert!(parse_triple("1,2").is_err());
        assert!(parse_triple("1,2,nan").is_err());
    }

    #[test]
    fn schedule_counts() {
        let (code, out, _) = run_capture(&["schedule", "--n", "10"]);
        assert_eq!(code, 0);
        assert!(out.contains("count 124\n"), "{out}");
        assert!(out.contains("expected 127.32\n"), "{out}");
        let (_, out, _) = run_capture(&["schedule", "--n", "2", "--rule", "round", "--poles"]);
        assert!(out.contains("count 6\n"), "{out}");
        let (_, out, _) = run_capture(&["schedule"]);
        assert!(out.contains("count 123\n"), "{out}");
        assert!(out.contains("rule explicit\n"), "{out}");
    }

    #[test]
    fn usage_errors_exit_one_help_exits_zero() {
        assert_eq!(run_capture(&["schedule", "--bogus"]).0, 1);
        assert_eq!(run_capture(&["schedule", "--rule", "round"]).0, 1);
        assert_eq!(run_capture(&[]).0, 1);
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("transform"));
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(
            &cfg,
            r#"{"jobs": 2, "schedule": {"n": 12, "poles": false, "rule": "ceil"}, "build": {"seed": 9}}"#,
        )
        .unwrap();
        let args: Vec<String> = ["spiralrep", "schedule", "--config", cfg.to_str().unwrap(), "--n", "10"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merged = merge_config(args).unwrap();
        let tail: Vec<&str> = merged[6..].iter().map(String::as_str).collect();
        assert_eq!(tail, ["--jobs", "2", "--rule", "ceil"]);
        let (code, out, _) = run_capture(&["schedule", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.contains("n_steps 12\n") && out.contains("rule ceil\n"), "{out}");
    }

    #[test]
    fn explicit_jobs_flag_wins() {
        assert_eq!(resolve_jobs(Some(3)).unwrap(), 3);
    }
}
