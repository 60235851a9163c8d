//! Ray counts of spiral schedules against the 4N^2/pi estimate, and the
//! schedule text format.
//!
//!     cargo run --example schedule

use spiralrep::spiral::{build_schedule, expected_surface_points, LatitudeRule, SpiralConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>5} {:>8} {:>10} {:>8}", "N", "rays", "4N^2/pi", "rel.err");
    for n in [10, 20, 50, 100, 200] {
        let s = build_schedule(&SpiralConfig::with_n_steps(n))?;
        let e = expected_surface_points(n);
        println!("{n:>5} {:>8} {e:>10.2} {:>7.2}%", s.len(), 100.0 * (s.len() as f64 - e).abs() / e);
    }

    for rule in [LatitudeRule::Floor, LatitudeRule::Round, LatitudeRule::Ceil] {
        let cfg = SpiralConfig {
            latitude_rule: rule,
            ..SpiralConfig::default()
        };
        println!("N=10 {:<5} {:?}", rule.as_str(), cfg.latitude_counts());
    }
    let compat = build_schedule(&SpiralConfig::compat_123())?;
    println!("compat  {:?} -> {} rays", compat.config().latitude_counts(), compat.len());

    // first lines of the exported text
    for line in compat.to_text().lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
