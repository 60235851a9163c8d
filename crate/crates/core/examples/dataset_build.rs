//! Builds a small fold-split dataset from synthetic scans and prints the
//! report.
//!
//!     cargo run --release --example dataset_build -- [work_dir]

use std::path::PathBuf;

use spiralrep::dataset::{build_dataset, subsample, BuildOptions, DatasetManifest, ManifestOptions};
use spiralrep::synthetic::{write_fixture, FixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp;
    let work = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    let fixture = write_fixture(
        &work,
        &FixtureSpec {
            scans: 4,
            positives: 6,
            negatives: 120,
            ..FixtureSpec::default()
        },
    )?;
    let manifest = DatasetManifest::plan(
        &fixture.candidates,
        &ManifestOptions {
            n_folds: 2,
            test_folds: vec![1],
            seed: 42,
            ..ManifestOptions::default()
        },
    )?;
    for f in &manifest.folds {
        println!(
            "fold {} test={} pos={} neg={} planned augmented={}",
            f.fold, f.is_test, f.positives, f.negatives, f.augmented
        );
    }
    let report = build_dataset(&fixture.volumes_dir, &manifest, &work.join("full"), &BuildOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let small = subsample(&manifest, 3, 42)?;
    println!(
        "subsampled by 3: {} -> {} candidates",
        manifest.candidates.len(),
        small.candidates.len()
    );
    Ok(())
}
