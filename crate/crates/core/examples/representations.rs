//! All four representations of one candidate cut from a synthetic scan:
//! spiral, center slice, nine-view montage and the raw cube.
//!
//!     cargo run --example representations -- [out_dir]

use std::path::PathBuf;

use spiralrep::dataset::{Mode, Representer};
use spiralrep::resample::{extract_voi, rescale_intensity};
use spiralrep::s2dt::{write_pgm, write_s2dt};
use spiralrep::spiral::{SpiralConfig, SpiralTransformer};
use spiralrep::synthetic::ball_volume;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 80 x 80 x 60 scan with 0.7 mm pixels and 1.25 mm slices
    let nodule = [12.0, -30.0, -110.0];
    let vol = ball_volume(
        [80, 80, 60],
        [0.7, 0.7, 1.25],
        [-15.0, -60.0, -150.0],
        &[(nodule, 5.0), ([nodule[0] + 9.0, nodule[1], nodule[2]], 2.5)],
    );
    let cube = rescale_intensity(extract_voi(&vol, nodule, 50.0, 64)?)?;
    println!("VOI: side {} at {:.5} mm/voxel", cube.side(), cube.resolution());

    let out = std::env::args().nth(1).map(PathBuf::from);
    if let Some(d) = &out {
        std::fs::create_dir_all(d)?;
    }
    for mode in [Mode::Spiral, Mode::CenterSlice, Mode::NineView, Mode::Cube] {
        let rep = Representer::new(mode, SpiralTransformer::new(&SpiralConfig::compat_123())?);
        let t = rep.tensor(&cube)?;
        let mean = t.data.iter().sum::<f32>() / t.data.len() as f32;
        println!("{:<8} shape {:?} mean {mean:.4}", mode.as_str(), t.dims);
        if let Some(d) = &out {
            write_s2dt(&d.join(format!("{}.s2dt", mode.as_str())), &t)?;
            if t.dims.len() == 2 {
                write_pgm(&d.join(format!("{}.pgm", mode.as_str())), t.dims[0], t.dims[1], &t.data)?;
            }
        }
    }
    Ok(())
}
