//! Seeded augmentation specs and what they do to a cube.
//!
//!     cargo run --example augmentation

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spiralrep::augment::{apply_augment, sample_augment_spec, AugmentSpec, Rotation};
use spiralrep::synthetic::textured_cube;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cube = textured_cube(32, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..4 {
        let spec = sample_augment_spec(&mut rng);
        let out = apply_augment(&cube, &spec)?;
        let diff = cube
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0f32, f32::max);
        println!("{}", serde_json::to_string(&spec)?);
        println!("  max |change| {diff:.3}");
    }

    // quarter turns move voxels without interpolating
    let quarter = AugmentSpec {
        rotation: Some(Rotation {
            axes: vec![2],
            angles_deg: vec![90.0],
        }),
        ..AugmentSpec::identity()
    };
    let four = (0..4).try_fold(cube.clone(), |c, _| apply_augment(&c, &quarter))?;
    println!("four quarter turns about z reproduce the cube: {}", four == cube);
    Ok(())
}
