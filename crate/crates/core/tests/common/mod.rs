#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spiralrep::volume_io::CandidateRecord;

/// Every file under `root` keyed by its relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// `(positives, augmented, negatives)` per fold, counted from file names.
pub fn count_files(root: &Path, n_folds: usize) -> Vec<[usize; 3]> {
    let snap = snapshot(root);
    (0..n_folds)
        .map(|f| {
            let pos = format!("fold{f}/pos/");
            let neg = format!("fold{f}/neg/");
            let mut c = [0; 3];
            for name in snap.keys().filter(|k| k.ends_with(".s2dt")) {
                if let Some(rest) = name.strip_prefix(&pos) {
                    c[if rest.contains("_a") { 1 } else { 0 }] += 1;
                } else if name.starts_with(&neg) {
                    c[2] += 1;
                }
            }
            c
        })
        .collect()
}

pub fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spiralrep"));
    c.env_remove("SPIRALREP_JOBS");
    c
}

pub fn run(args: &[&str]) -> Output {
    cli().args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn positives(c: &[CandidateRecord]) -> usize {
    c.iter().filter(|r| r.label == Some(true)).count()
}
