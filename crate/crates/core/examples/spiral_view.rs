//! Spiral view of a synthetic ball: each column is one ray from the cube
//! center outwards, so a centered ball becomes a horizontal band.
//!
//!     cargo run --example spiral_view -- [out.pgm]

use spiralrep::s2dt::write_pgm;
use spiralrep::spiral::{SpiralConfig, SpiralTransformer};
use spiralrep::synthetic::ball_cube;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cube = ball_cube(64, 16.0);
    let t = SpiralTransformer::new(&SpiralConfig::default())?;
    let img = t.transform(&cube)?;
    println!("{} rows x {} columns", img.rows, img.cols);

    // the ball edge is half way along every ray
    let edges: Vec<usize> = (0..img.cols)
        .map(|c| img.column(c).position(|v| v < 0.5).unwrap_or(img.rows))
        .collect();
    println!(
        "first outside sample per ray: min {} max {}",
        edges.iter().min().unwrap(),
        edges.iter().max().unwrap()
    );

    let start = std::time::Instant::now();
    let reps = 200;
    for _ in 0..reps {
        std::hint::black_box(t.transform(&cube)?);
    }
    println!("{:.3} ms per transform", start.elapsed().as_secs_f64() * 1e3 / reps as f64);

    if let Some(path) = std::env::args().nth(1) {
        write_pgm(path.as_ref(), img.rows, img.cols, &img.data)?;
        println!("wrote {path}");
    }
    Ok(())
}
