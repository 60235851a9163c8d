//! Scores a small detection result: matching, FROC, CPM and AUC.
//!
//!     cargo run --example evaluate

use spiralrep::eval::{evaluate, Prediction, PredictionSet, ReferenceNodule};

fn nodule(scan: &str, pos: [f64; 3], d: f64) -> ReferenceNodule {
    ReferenceNodule {
        scan_id: scan.into(),
        world_pos: pos,
        diameter_mm: d,
    }
}

fn pred(scan: &str, pos: [f64; 3], score: f64) -> Prediction {
    Prediction {
        scan_id: scan.into(),
        world_pos: pos,
        score,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = [
        nodule("A", [0.0, 0.0, 0.0], 10.0),
        nodule("A", [50.0, 0.0, 0.0], 6.0),
        nodule("B", [0.0, 0.0, 0.0], 8.0),
    ];
    let excluded = [nodule("B", [60.0, 60.0, 61.0], 4.0)];
    let predictions = PredictionSet::new(
        vec![
            pred("A", [1.0, 0.0, 0.0], 0.9),
            pred("A", [20.0, 20.0, 20.0], 0.8),
            pred("B", [0.0, 3.9, 0.0], 0.7),
            pred("B", [0.0, 4.0, 0.0], 0.6),
            pred("A", [50.0, 0.0, 2.0], 0.5),
            pred("A", [0.0, 0.0, 1.0], 0.4),
            pred("B", [30.0, 0.0, 0.0], 0.3),
            pred("A", [100.0, 0.0, 0.0], 0.2),
            pred("B", [60.0, 60.0, 60.0], 0.95),
        ],
        2,
    )?;
    let (report, curve) = evaluate(&predictions, &reference, &excluded)?;
    print!("{}", curve.to_csv());
    for p in &report.operating_points {
        println!("sensitivity at {:>5} FP/scan: {:.3}", p.fps_per_scan, p.sensitivity);
    }
    println!("CPM {:.4}  AUC {:.4}", report.cpm, report.auc);
    Ok(())
}
