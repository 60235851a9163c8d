mod common;

use std::fs;

use common::{count_files, snapshot};
use spiralrep::dataset::{
    augment_spec_for, build_dataset, subsample, BuildOptions, DatasetError, DatasetManifest,
    ManifestOptions, Mode, ProvenanceRecord,
};
use spiralrep::s2dt::read_s2dt;
use spiralrep::synthetic::{write_fixture, FixtureSpec};

fn options(test_folds: Vec<usize>) -> ManifestOptions {
    ManifestOptions {
        n_folds: 2,
        test_folds,
        seed: 42,
        ..ManifestOptions::default()
    }
}

#[test]
fn two_scan_fixture_is_balanced_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(dir.path(), &FixtureSpec::default()).unwrap();
    let m = DatasetManifest::plan(&fx.candidates, &options(vec![])).unwrap();
    let out = dir.path().join("out");
    let report = build_dataset(&fx.volumes_dir, &m, &out, &BuildOptions::default()).unwrap();
    assert!(report.is_complete());
    assert_eq!(report.tensor_dims, vec![32, 123]);

    let counts = count_files(&out, 2);
    for (f, c) in report.folds.iter().zip(&counts) {
        assert_eq!([f.positives, f.augmented, f.negatives], *c);
        let pos = (c[0] + c[1]) as f64;
        let neg = c[2] as f64;
        assert!((pos - neg).abs() <= 0.01 * neg, "fold {}: {c:?}", f.fold);
    }
    assert_eq!(counts.iter().map(|c| c[0]).sum::<usize>(), 3);
    assert_eq!(counts.iter().map(|c| c[2]).sum::<usize>(), 300);

    // every augmented file has exactly one provenance line that regenerates its spec
    let log = fs::read_to_string(out.join("provenance.jsonl")).unwrap();
    let recs: Vec<ProvenanceRecord> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), counts.iter().map(|c| c[1]).sum::<usize>());
    for r in &recs {
        assert!(out.join(&r.file).is_file(), "{}", r.file);
        assert_eq!(r.spec, augment_spec_for(42, r.candidate_index, r.augment_index));
    }

    let back: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn rebuilds_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        positives: 2,
        negatives: 40,
        ..FixtureSpec::default()
    };
    let fx = write_fixture(dir.path(), &spec).unwrap();
    let m = DatasetManifest::plan(&fx.candidates, &options(vec![])).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    build_dataset(&fx.volumes_dir, &m, &a, &BuildOptions { jobs: 1, ..Default::default() }).unwrap();
    build_dataset(&fx.volumes_dir, &m, &b, &BuildOptions { jobs: 3, ..Default::default() }).unwrap();
    assert_eq!(snapshot(&a), snapshot(&b));

    let other = DatasetManifest::plan(&fx.candidates, &ManifestOptions { seed: 43, ..options(vec![]) }).unwrap();
    let c = dir.path().join("c");
    build_dataset(&fx.volumes_dir, &other, &c, &BuildOptions::default()).unwrap();
    assert_ne!(snapshot(&a), snapshot(&c));
}

#[test]
fn test_folds_get_no_augmentation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        scans: 4,
        positives: 4,
        negatives: 40,
        ..FixtureSpec::default()
    };
    let fx = write_fixture(dir.path(), &spec).unwrap();
    let m = DatasetManifest::plan(&fx.candidates, &options(vec![1])).unwrap();
    let out = dir.path().join("out");
    let report = build_dataset(&fx.volumes_dir, &m, &out, &BuildOptions::default()).unwrap();
    let counts = count_files(&out, 2);
    assert_eq!(counts[1][1], 0);
    assert!(counts[0][1] > 0);
    assert_eq!(report.folds[1].balanced, None);
    let log = fs::read_to_string(out.join("provenance.jsonl")).unwrap();
    assert!(log.lines().all(|l| l.contains("\"file\":\"fold0/")));
}

#[test]
fn missing_volume_is_reported_per_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        positives: 2,
        negatives: 10,
        ..FixtureSpec::default()
    };
    let fx = write_fixture(dir.path(), &spec).unwrap();
    let gone = &fx.scan_ids[1];
    fs::remove_file(fx.volumes_dir.join(format!("{gone}.mhd"))).unwrap();
    let m = DatasetManifest::plan(&fx.candidates, &options(vec![])).unwrap();
    let out = dir.path().join("out");
    let report = build_dataset(&fx.volumes_dir, &m, &out, &BuildOptions::default()).unwrap();
    let expected: Vec<usize> = fx
        .candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| &c.scan_id == gone)
        .map(|(i, _)| i)
        .collect();
    let failed: Vec<usize> = report.failures.iter().map(|f| f.index).collect();
    assert_eq!(failed, expected);
    assert!(report.failures[0].reason.contains("no volume file"));
    let written: usize = count_files(&out, 2).iter().flatten().sum();
    assert_eq!(written, report.samples_written);
    assert!(written > 0);
}

#[test]
fn other_modes_write_their_shapes_and_pgms() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        scans: 1,
        positives: 1,
        negatives: 2,
        ..FixtureSpec::default()
    };
    let fx = write_fixture(dir.path(), &spec).unwrap();
    for (mode, dims) in [
        (Mode::CenterSlice, vec![64, 64]),
        (Mode::NineView, vec![64, 576]),
        (Mode::Cube, vec![64, 64, 64]),
    ] {
        let m = DatasetManifest::plan(
            &fx.candidates,
            &ManifestOptions {
                mode,
                n_folds: 1,
                ..ManifestOptions::default()
            },
        )
        .unwrap();
        let out = dir.path().join(mode.as_str());
        let report = build_dataset(&fx.volumes_dir, &m, &out, &BuildOptions { pgm: true, ..Default::default() }).unwrap();
        assert_eq!(report.tensor_dims, dims);
        let snap = snapshot(&out);
        let first = snap.keys().find(|k| k.ends_with(".s2dt")).unwrap();
        assert_eq!(read_s2dt(&out.join(first)).unwrap().dims, dims);
        let pgms = snap.keys().filter(|k| k.ends_with(".pgm")).count();
        assert_eq!(pgms, if mode.is_2d() { report.samples_written } else { 0 });
    }
}

#[test]
fn refuses_empty_input_and_dirty_output() {
    assert!(matches!(
        DatasetManifest::plan(&[], &ManifestOptions::default()),
        Err(DatasetError::NoCandidates)
    ));
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(
        dir.path(),
        &FixtureSpec {
            positives: 1,
            negatives: 1,
            ..FixtureSpec::default()
        },
    )
    .unwrap();
    let m = DatasetManifest::plan(&fx.candidates, &options(vec![])).unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("stale"), b"x").unwrap();
    let err = build_dataset(&fx.volumes_dir, &m, &out, &BuildOptions::default()).unwrap_err();
    assert!(matches!(err, DatasetError::OutputNotEmpty(_)));

    let mut empty = m.clone();
    empty.candidates.clear();
    let err = build_dataset(&fx.volumes_dir, &empty, &dir.path().join("o2"), &BuildOptions::default()).unwrap_err();
    assert_eq!(err.to_string(), "no candidates");
}

#[test]
fn subsample_recount_on_emitted_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        scans: 4,
        positives: 20,
        negatives: 100,
        ..FixtureSpec::default()
    };
    let fx = write_fixture(dir.path(), &spec).unwrap();
    let m = DatasetManifest::plan(&fx.candidates, &options(vec![1])).unwrap();
    let s = subsample(&m, 9, 3).unwrap();
    let out = dir.path().join("out");
    let mut small = s.clone();
    small.mode = Mode::CenterSlice;
    build_dataset(&fx.volumes_dir, &small, &out, &BuildOptions::default()).unwrap();
    let emitted: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let counts = count_files(&out, 2);
    for (before, after) in m.folds.iter().zip(&emitted.folds) {
        let c = counts[after.fold];
        assert_eq!((c[0], c[2]), (after.positives, after.negatives));
        if before.is_test {
            assert_eq!((before.positives, before.negatives), (after.positives, after.negatives));
        } else {
            assert_eq!(after.positives, before.positives / 9);
            assert_eq!(after.negatives, before.negatives / 9);
            let ratio = before.negatives as f64 / before.positives as f64;
            assert!((after.negatives as f64 - ratio * after.positives as f64).abs() <= ratio + 1.0);
        }
    }
}
