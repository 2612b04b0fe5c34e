//! Draws perturbed copies of a small map and condenses the distances to one
//! cell into a Gaussian.

use probmission::geo::{CartesianLocation, Geometry, TypedFeatureSet};
use probmission::pcm::distance_samples;
use probmission::uncertainty::{generate_ensemble, moment_match, AffineErrorModel, ErrorParams};

fn main() -> probmission::Result<()> {
    let roads = TypedFeatureSet::new(
        "primary",
        vec![Geometry::line(vec![CartesianLocation::new(-200.0, 0.0), CartesianLocation::new(200.0, 0.0)])?],
        12.0,
    )?;
    let model = AffineErrorModel::new().with_type(
        "primary",
        ErrorParams {
            translation_cov: [[4.0, 0.0], [0.0, 9.0]],
            rotation_sigma: 0.01,
            ..Default::default()
        },
    );
    let ensemble = generate_ensemble(&roads, &model, 500, 7)?;
    let cell = CartesianLocation::new(40.0, 25.0);
    let d = distance_samples(&ensemble, cell);
    let g = moment_match(&d)?;
    println!("{} samples: distance ~ normal({:.2}, {:.2})", d.len(), g.mean, g.variance);

    let exact = generate_ensemble(&roads, &AffineErrorModel::uniform_translation(0.0), 10, 7)?;
    let g0 = moment_match(&distance_samples(&exact, cell))?;
    println!("without error: normal({}, {})", g0.mean, g0.variance);
    Ok(())
}
