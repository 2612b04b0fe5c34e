//! Builds the Overpass query for a bounding box and converts a recorded
//! reply to GeoJSON. Pass `--live` to send the query to the public endpoint.

use std::time::Duration;

use probmission::ingest::{
    build_overpass_query, fetch_overpass, load_geojson, overpass_to_geojson, BoundingBox, FeatureTypeMapping,
    UreqTransport, DEFAULT_OVERPASS_ENDPOINT,
};

fn main() -> probmission::Result<()> {
    let mapping = FeatureTypeMapping::from_json(include_str!("../fixtures/scenarios/park/mapping.json"))?;
    let bbox = BoundingBox::new(49.868, 8.645, 49.872, 8.655)?;
    println!("{}", build_overpass_query(&bbox, &mapping)?);

    let geojson = if std::env::args().any(|a| a == "--live") {
        fetch_overpass(&UreqTransport::default(), DEFAULT_OVERPASS_ENDPOINT, &bbox, &mapping, Duration::from_secs(2))?
    } else {
        overpass_to_geojson(include_str!("../fixtures/overpass/two_ways.json"))?
    };
    let bundle = load_geojson(&geojson.to_string(), &mapping, bbox.center())?;
    println!("{:?}", bundle.report);
    for set in &bundle.feature_sets {
        println!("{}: {} feature(s)", set.type_tag, set.features.len());
    }
    Ok(())
}
