//! Writes a MetaImage pair, reads it back and samples it in world space.
//!
//!     cargo run --example metaimage

use spiralrep::resample::trilinear_sample;
use spiralrep::volume_io::{load_metaimage, read_metaimage_header, write_metaimage, ElementType, Volume3D};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let header = dir.path().join("scan.mhd");
    let vol = Volume3D::from_world_fn([32, 24, 16], [0.8, 0.8, 2.0], [-10.0, 5.0, -40.0], |p| {
        (p[0] * 10.0 + p[2]).round() as f32
    })?;
    write_metaimage(&vol, &header, ElementType::Short)?;
    print!("{}", std::fs::read_to_string(&header)?);

    let h = read_metaimage_header(&header)?;
    println!("parsed: dims {:?} spacing {:?} {}", h.dims, h.spacing, h.element_type);
    let back = load_metaimage(&header)?;
    println!("voxels identical after round trip: {}", back.data() == vol.data());

    let p = [-6.2, 9.0, -35.0];
    println!("value at {p:?}: {:?}", trilinear_sample(&back, p));
    println!("outside the grid: {:?}", trilinear_sample(&back, [500.0, 0.0, 0.0]));
    Ok(())
}
