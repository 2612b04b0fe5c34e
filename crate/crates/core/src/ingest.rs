//! Map input: typed features from GeoJSON fixtures, and an optional Overpass
//! client that produces the same GeoJSON from OpenStreetMap.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geo::{
    project, CartesianLocation, Geometry, PolarLocation, TypedFeatureSet, DEFAULT_LINE_WIDTH_M,
};

/// One `key=value` → type rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEntry {
    #[serde(rename = "match")]
    pub tag: String,
    #[serde(rename = "type")]
    pub type_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_width_m: Option<f64>,
}

impl MappingEntry {
    fn key_value(&self) -> (&str, &str) {
        self.tag.split_once('=').expect("validated")
    }
}

/// Classifies source features into typed sets, e.g. `highway=primary` →
/// `primary`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTypeMapping {
    entries: Vec<MappingEntry>,
    widths: BTreeMap<String, f64>,
}

impl FeatureTypeMapping {
    pub fn new(entries: Vec<MappingEntry>) -> Result<Self> {
        let mut widths: BTreeMap<String, f64> = BTreeMap::new();
        for e in &entries {
            match e.tag.split_once('=') {
                Some((k, v)) if !k.is_empty() && !v.is_empty() => {}
                _ => {
                    return Err(Error::config(format!(
                        "mapping match `{}` is not of the form key=value",
                        e.tag
                    )))
                }
            }
            if e.type_tag.is_empty() {
                return Err(Error::config(format!("mapping for `{}` has an empty type", e.tag)));
            }
            if entries.iter().filter(|o| o.tag == e.tag).count() > 1 {
                return Err(Error::config(format!("`{}` is mapped more than once", e.tag)));
            }
            if let Some(w) = e.line_width_m {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::config(format!(
                        "line width for `{}` must be > 0, got {w}",
                        e.type_tag
                    )));
                }
                if let Some(&prev) = widths.get(&e.type_tag) {
                    if prev != w {
                        return Err(Error::config(format!(
                            "type `{}` has conflicting line widths {prev} and {w}",
                            e.type_tag
                        )));
                    }
                }
                widths.insert(e.type_tag.clone(), w);
            }
        }
        for e in &entries {
            widths.entry(e.type_tag.clone()).or_insert(DEFAULT_LINE_WIDTH_M);
        }
        Ok(FeatureTypeMapping { entries, widths })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<MappingEntry> = serde_json::from_str(text)?;
        Self::new(entries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("mapping serializes")
    }

    pub fn entries(&self) -> &[MappingEntry] {
        &self.entries
    }

    /// Distinct type tags, sorted.
    pub fn type_tags(&self) -> impl Iterator<Item = &str> {
        self.widths.keys().map(String::as_str)
    }

    pub fn line_width(&self, type_tag: &str) -> f64 {
        self.widths.get(type_tag).copied().unwrap_or(DEFAULT_LINE_WIDTH_M)
    }

    /// A `type` property naming a mapped type wins; otherwise the first entry
    /// whose `key=value` appears among the properties.
    pub fn classify(&self, properties: &Map<String, Value>) -> Option<&str> {
        if let Some(Value::String(t)) = properties.get("type") {
            if let Some((k, _)) = self.widths.get_key_value(t.as_str()) {
                return Some(k);
            }
        }
        self.entries.iter().find_map(|e| {
            let (k, v) = e.key_value();
            match properties.get(k) {
                Some(Value::String(s)) if s == v => Some(e.type_tag.as_str()),
                _ => None,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Fixture,
    Overpass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: MapSource,
    pub fetched_at: Option<String>,
}

/// What [`load_geojson`] could not use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadReport {
    pub total: usize,
    pub classified: usize,
    /// No mapping entry matched.
    pub unmatched: usize,
    /// Matched, but the geometry is missing or not Point/LineString/Polygon.
    pub skipped: usize,
}

/// Typed features projected into the frame of `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapBundle {
    pub origin: PolarLocation,
    /// Only types with at least one feature, sorted by tag.
    pub feature_sets: Vec<TypedFeatureSet>,
    pub provenance: Provenance,
    pub report: LoadReport,
}

impl MapBundle {
    pub fn empty(origin: PolarLocation, source: MapSource) -> Self {
        MapBundle {
            origin,
            feature_sets: Vec::new(),
            provenance: Provenance {
                source,
                fetched_at: None,
            },
            report: LoadReport::default(),
        }
    }

    pub fn get(&self, type_tag: &str) -> Option<&TypedFeatureSet> {
        self.feature_sets.iter().find(|s| s.type_tag == type_tag)
    }

    /// Feature sets for every type the mapping knows, adding empty sets for
    /// types absent from this map.
    pub fn sets_for(&self, mapping: &FeatureTypeMapping) -> Result<Vec<TypedFeatureSet>> {
        mapping
            .type_tags()
            .map(|t| match self.get(t) {
                Some(s) => Ok(s.clone()),
                None => TypedFeatureSet::new(t, Vec::new(), mapping.line_width(t)),
            })
            .collect()
    }
}

fn gj_err(msg: impl Into<String>) -> Error {
    Error::GeoJson(msg.into())
}

fn position(v: &Value, origin: PolarLocation) -> Result<CartesianLocation> {
    let pair = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
        .ok_or_else(|| gj_err(format!("bad position {v}")))?;
    // GeoJSON order is (lon, lat).
    project(PolarLocation::new(pair.1, pair.0)?, origin)
}

fn positions(v: &Value, origin: PolarLocation) -> Result<Vec<CartesianLocation>> {
    v.as_array()
        .ok_or_else(|| gj_err("coordinates must be an array"))?
        .iter()
        .map(|p| position(p, origin))
        .collect()
}

/// `Ok(None)` for geometry kinds that are skipped.
fn geometry(v: &Value, origin: PolarLocation) -> Result<Option<Geometry>> {
    if v.is_null() {
        return Ok(None);
    }
    let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| gj_err("geometry without type"))?;
    let coords = v.get("coordinates");
    let coords = || coords.ok_or_else(|| gj_err(format!("{kind} without coordinates")));
    Ok(Some(match kind {
        "Point" => Geometry::point(position(coords()?, origin)?),
        "LineString" => match Geometry::line(positions(coords()?, origin)?) {
            Ok(g) => g,
            Err(_) => return Ok(None),
        },
        "Polygon" => {
            // Outer ring only; holes are not modelled.
            let ring = coords()?
                .as_array()
                .and_then(|r| r.first())
                .ok_or_else(|| gj_err("polygon without rings"))?;
            match Geometry::polygon(positions(ring, origin)?) {
                Ok(g) => g,
                Err(_) => return Ok(None),
            }
        }
        _ => return Ok(None),
    }))
}

/// Reads a FeatureCollection and sorts its features into typed sets.
pub fn load_geojson(
    document: &str,
    mapping: &FeatureTypeMapping,
    origin: PolarLocation,
) -> Result<MapBundle> {
    origin.validate()?;
    let doc: Value = serde_json::from_str(document).map_err(|e| gj_err(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(gj_err("top level must be a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| gj_err("`features` must be an array"))?;

    let empty = Map::new();
    let mut report = LoadReport {
        total: features.len(),
        ..Default::default()
    };
    let mut sets: BTreeMap<String, Vec<Geometry>> = BTreeMap::new();
    for (i, f) in features.iter().enumerate() {
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(gj_err(format!("features[{i}] is not a Feature")));
        }
        let props = match f.get("properties") {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => return Err(gj_err(format!("features[{i}].properties is not an object"))),
        };
        let Some(tag) = mapping.classify(props) else {
            report.unmatched += 1;
            continue;
        };
        let g = f.get("geometry").unwrap_or(&Value::Null);
        match geometry(g, origin).map_err(|e| match e {
            Error::GeoJson(m) => gj_err(format!("features[{i}]: {m}")),
            e => e,
        })? {
            Some(g) => {
                report.classified += 1;
                sets.entry(tag.to_string()).or_default().push(g);
            }
            None => report.skipped += 1,
        }
    }
    if report.unmatched + report.skipped > 0 {
        log::info!(
            "{} of {} features dropped ({} unmatched, {} unsupported geometry)",
            report.unmatched + report.skipped,
            report.total,
            report.unmatched,
            report.skipped
        );
    }
    let feature_sets = sets
        .into_iter()
        .map(|(tag, features)| {
            let w = mapping.line_width(&tag);
            TypedFeatureSet::new(tag, features, w)
        })
        .collect::<Result<_>>()?;
    Ok(MapBundle {
        origin,
        feature_sets,
        provenance: Provenance {
            source: MapSource::Fixture,
            fetched_at: None,
        },
        report,
    })
}

/// Geographic bounds in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl BoundingBox {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self> {
        PolarLocation::new(south, west)?;
        PolarLocation::new(north, east)?;
        if !(south < north && west < east) {
            return Err(Error::domain(format!(
                "bounding box needs south < north and west < east, got ({south}, {west}, {north}, {east})"
            )));
        }
        Ok(BoundingBox {
            south,
            west,
            north,
            east,
        })
    }

    /// Parses `south,west,north,east`.
    pub fn parse(text: &str) -> Result<Self> {
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(format!("bad bbox `{text}`: {e}")))?;
        match v.as_slice() {
            [s, w, n, e] => Self::new(*s, *w, *n, *e),
            _ => Err(Error::config(format!("bbox `{text}` needs 4 numbers"))),
        }
    }

    pub fn center(&self) -> PolarLocation {
        PolarLocation {
            latitude: (self.south + self.north) / 2.0,
            longitude: (self.west + self.east) / 2.0,
        }
    }
}

/// Overpass QL text with one `way[...]` clause per mapping entry.
pub fn build_overpass_query(bbox: &BoundingBox, mapping: &FeatureTypeMapping) -> Result<String> {
    if mapping.entries().is_empty() {
        return Err(Error::config("mapping has no entries, so the query would be empty"));
    }
    let b = format!("{},{},{},{}", bbox.south, bbox.west, bbox.north, bbox.east);
    let mut q = String::from("[out:json][timeout:25];\n(\n");
    for e in mapping.entries() {
        let (k, v) = e.key_value();
        q.push_str(&format!("    way[\"{k}\"=\"{v}\"]({b});\n"));
    }
    q.push_str(");\nout body; >; out skel qt;\n");
    Ok(q)
}

const AREA_KEYS: [&str; 8] = [
    "building", "landuse", "leisure", "natural", "amenity", "water", "place", "aeroway",
];

fn is_area(tags: &Map<String, Value>) -> bool {
    match tags.get("area").and_then(Value::as_str) {
        Some("yes") => true,
        Some("no") => false,
        _ => AREA_KEYS.iter().any(|k| tags.contains_key(*k)),
    }
}

/// Converts an Overpass JSON response to a GeoJSON FeatureCollection. Tags
/// become properties. Closed ways with area-like tags become Polygons, other
/// ways LineStrings, tagged nodes Points.
pub fn overpass_to_geojson(response: &str) -> Result<Value> {
    let doc: Value = serde_json::from_str(response)?;
    let elements = doc
        .get("elements")
        .and_then(Value::as_array)
        .ok_or_else(|| gj_err("Overpass response has no `elements` array"))?;
    let mut nodes: HashMap<i64, [f64; 2]> = HashMap::new();
    for e in elements {
        if e.get("type").and_then(Value::as_str) == Some("node") {
            if let (Some(id), Some(lat), Some(lon)) = (
                e.get("id").and_then(Value::as_i64),
                e.get("lat").and_then(Value::as_f64),
                e.get("lon").and_then(Value::as_f64),
            ) {
                nodes.insert(id, [lon, lat]);
            }
        }
    }
    let empty = Map::new();
    let mut features = Vec::new();
    for e in elements {
        let tags = e.get("tags").and_then(Value::as_object).unwrap_or(&empty);
        let id = e.get("id").cloned().unwrap_or(Value::Null);
        let mut props = tags.clone();
        props.insert("osm_id".into(), id);
        match e.get("type").and_then(Value::as_str) {
            Some("node") if !tags.is_empty() => {
                let Some(p) = e.get("id").and_then(Value::as_i64).and_then(|i| nodes.get(&i)) else {
                    continue;
                };
                features.push(json!({
                    "type": "Feature",
                    "properties": props,
                    "geometry": {"type": "Point", "coordinates": p},
                }));
            }
            Some("way") => {
                let ids: Vec<i64> = e
                    .get("nodes")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().filter_map(Value::as_i64).collect())
                    .unwrap_or_default();
                let coords: Vec<[f64; 2]> = ids.iter().filter_map(|i| nodes.get(i).copied()).collect();
                if coords.len() < 2 || coords.len() != ids.len() {
                    log::warn!("way {} skipped: missing node positions", e["id"]);
                    continue;
                }
                let closed = ids.len() >= 4 && ids.first() == ids.last();
                let geometry = if closed && is_area(tags) {
                    json!({"type": "Polygon", "coordinates": [coords]})
                } else {
                    json!({"type": "LineString", "coordinates": coords})
                };
                features.push(json!({"type": "Feature", "properties": props, "geometry": geometry}));
            }
            _ => {}
        }
    }
    Ok(json!({"type": "FeatureCollection", "features": features}))
}

/// Status and body of one HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends Overpass QL; swapped for a recorded transcript in tests.
pub trait OverpassTransport {
    fn post(&self, endpoint: &str, query: &str) -> std::result::Result<HttpReply, String>;
}

/// Blocking HTTP transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        UreqTransport {
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl OverpassTransport for UreqTransport {
    fn post(&self, endpoint: &str, query: &str) -> std::result::Result<HttpReply, String> {
        let mut resp = self
            .agent
            .post(endpoint)
            .header("Content-Type", "text/plain; charset=utf-8")
            .send(query)
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

pub const DEFAULT_OVERPASS_ENDPOINT: &str = "https://overpass-api.de/api/interpreter";
const ATTEMPTS: u32 = 3;

/// Queries Overpass and returns GeoJSON. Rate-limit and gateway-timeout
/// replies are retried with exponential backoff starting at `backoff`.
pub fn fetch_overpass(
    transport: &dyn OverpassTransport,
    endpoint: &str,
    bbox: &BoundingBox,
    mapping: &FeatureTypeMapping,
    backoff: Duration,
) -> Result<Value> {
    let query = build_overpass_query(bbox, mapping)?;
    let fail = |message: String| Error::Http {
        message,
        query: query.clone(),
    };
    let mut delay = backoff;
    for attempt in 1..=ATTEMPTS {
        let reply = transport.post(endpoint, &query).map_err(&fail)?;
        match reply.status {
            200 => {
                return overpass_to_geojson(&reply.body)
                    .map_err(|e| fail(format!("unreadable response: {e}")))
            }
            429 | 504 if attempt < ATTEMPTS => {
                log::warn!("overpass returned {}, retrying in {delay:?}", reply.status);
                std::thread::sleep(delay);
                delay *= 2;
            }
            s => {
                let snippet: String = reply.body.chars().take(200).collect();
                return Err(fail(format!("status {s} after {attempt} attempt(s): {snippet}")));
            }
        }
    }
    unreachable!("the last attempt always returns")
}
