//! Projects two landmarks into a local frame and measures point, line and
//! polygon distances there.

use probmission::geo::{covers, distance_to_geometry, project, unproject, CartesianLocation, Geometry, PolarLocation};

fn main() -> probmission::Result<()> {
    let origin = PolarLocation::new(49.8728, 8.6512)?;
    let tower = project(PolarLocation::new(49.8745, 8.6540)?, origin)?;
    println!("tower at east {:.1} m, north {:.1} m", tower.east, tower.north);
    let back = unproject(tower, origin);
    println!("round trip: {:.7}, {:.7}", back.latitude, back.longitude);

    let road = Geometry::line(vec![CartesianLocation::new(-100.0, 0.0), CartesianLocation::new(100.0, 50.0)])?;
    let field = Geometry::polygon(vec![
        CartesianLocation::new(0.0, -80.0),
        CartesianLocation::new(60.0, -80.0),
        CartesianLocation::new(60.0, -20.0),
        CartesianLocation::new(0.0, -20.0),
    ])?;
    let probe = CartesianLocation::new(30.0, -30.0);
    println!("probe to road: {:.2} m", distance_to_geometry(probe, &road));
    println!("probe to field: {:.2} m (inside: {})", distance_to_geometry(probe, &field), covers(probe, &field, 0.0));
    println!("probe to tower: {:.2} m", probe.distance(&tower));
    Ok(())
}
