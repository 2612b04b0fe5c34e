//! Coordinates and exact planar geometry.
//!
//! Polar (WGS84 degree) data is projected onto a local equirectangular tangent
//! plane around a mission origin. All distance and containment queries work in
//! that plane, in meters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Buffer applied to line features when no width is configured.
pub const DEFAULT_LINE_WIDTH_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarLocation {
    pub latitude: f64,
    pub longitude: f64,
}

impl PolarLocation {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        let p = PolarLocation {
            latitude,
            longitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::domain(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::domain(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        Ok(())
    }
}

/// A point in the local frame: meters east and north of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianLocation {
    pub east: f64,
    pub north: f64,
}

impl CartesianLocation {
    pub const fn new(east: f64, north: f64) -> Self {
        CartesianLocation { east, north }
    }

    pub fn distance(&self, other: &CartesianLocation) -> f64 {
        (self.east - other.east).hypot(self.north - other.north)
    }

    pub fn is_finite(&self) -> bool {
        self.east.is_finite() && self.north.is_finite()
    }
}

pub fn project(p: PolarLocation, origin: PolarLocation) -> Result<CartesianLocation> {
    p.validate()?;
    origin.validate()?;
    if p.latitude.abs() >= 89.0 || origin.latitude.abs() >= 89.0 {
        return Err(Error::domain(
            "tangent-plane projection needs |latitude| < 89",
        ));
    }
    let k = EARTH_RADIUS_M.to_radians();
    Ok(CartesianLocation {
        east: (p.longitude - origin.longitude) * k * origin.latitude.to_radians().cos(),
        north: (p.latitude - origin.latitude) * k,
    })
}

pub fn unproject(c: CartesianLocation, origin: PolarLocation) -> PolarLocation {
    let k = EARTH_RADIUS_M.to_radians();
    PolarLocation {
        latitude: origin.latitude + c.north / k,
        longitude: origin.longitude + c.east / (k * origin.latitude.to_radians().cos()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Point,
    Line,
    Polygon,
}

/// A point, polyline or simple polygon in the local frame.
///
/// Polygons are stored open: the closing edge from the last vertex back to the
/// first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    kind: GeometryKind,
    vertices: Vec<CartesianLocation>,
}

impl Geometry {
    pub fn new(kind: GeometryKind, mut vertices: Vec<CartesianLocation>) -> Result<Self> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("geometry has non-finite coordinates"));
        }
        if kind == GeometryKind::Polygon && vertices.len() > 3 && vertices.first() == vertices.last()
        {
            vertices.pop();
        }
        let min = match kind {
            GeometryKind::Point => 1,
            GeometryKind::Line => 2,
            GeometryKind::Polygon => 3,
        };
        if vertices.len() < min || (kind == GeometryKind::Point && vertices.len() != 1) {
            return Err(Error::domain(format!(
                "{kind:?} needs {min} vertices, got {}",
                vertices.len()
            )));
        }
        Ok(Geometry { kind, vertices })
    }

    pub fn point(p: CartesianLocation) -> Self {
        Geometry {
            kind: GeometryKind::Point,
            vertices: vec![p],
        }
    }

    pub fn line(vertices: Vec<CartesianLocation>) -> Result<Self> {
        Self::new(GeometryKind::Line, vertices)
    }

    pub fn polygon(vertices: Vec<CartesianLocation>) -> Result<Self> {
        Self::new(GeometryKind::Polygon, vertices)
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn vertices(&self) -> &[CartesianLocation] {
        &self.vertices
    }

    /// Vertex mean; the fixed point of the affine map-error model.
    pub fn centroid(&self) -> CartesianLocation {
        let n = self.vertices.len() as f64;
        let (e, s) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(e, s), v| (e + v.east, s + v.north));
        CartesianLocation::new(e / n, s / n)
    }

    /// Same kind, new vertices. The caller keeps the vertex count unchanged.
    pub(crate) fn with_vertices(&self, vertices: Vec<CartesianLocation>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Geometry {
            kind: self.kind,
            vertices,
        }
    }

    fn edges(&self) -> impl Iterator<Item = (&CartesianLocation, &CartesianLocation)> {
        let n = self.vertices.len();
        let closing = usize::from(self.kind == GeometryKind::Polygon);
        (0..n - 1 + closing).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }
}

/// A set of features sharing one map type, e.g. all `building`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedFeatureSet {
    pub type_tag: String,
    pub features: Vec<Geometry>,
    pub line_width: f64,
}

impl TypedFeatureSet {
    pub fn new(type_tag: impl Into<String>, features: Vec<Geometry>, line_width: f64) -> Result<Self> {
        let type_tag = type_tag.into();
        if type_tag.is_empty() {
            return Err(Error::domain("feature set type tag is empty"));
        }
        if !(line_width > 0.0) {
            return Err(Error::domain(format!("line width must be > 0, got {line_width}")));
        }
        Ok(TypedFeatureSet {
            type_tag,
            features,
            line_width,
        })
    }

    /// Distance from `p` to the nearest feature in the set; `None` if empty.
    pub fn min_distance(&self, p: CartesianLocation) -> Option<f64> {
        self.features
            .iter()
            .map(|g| distance_to_geometry(p, g))
            .reduce(f64::min)
    }

    pub fn any_covers(&self, p: CartesianLocation) -> bool {
        self.features.iter().any(|g| covers(p, g, self.line_width))
    }
}

fn segment_distance(p: &CartesianLocation, a: &CartesianLocation, b: &CartesianLocation) -> f64 {
    let (dx, dy) = (b.east - a.east, b.north - a.north);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.east - a.east) * dx + (p.north - a.north) * dy) / len2).clamp(0.0, 1.0);
    let foot = CartesianLocation::new(a.east + t * dx, a.north + t * dy);
    p.distance(&foot)
}

/// Even-odd containment with the boundary counted as inside.
fn polygon_contains(p: &CartesianLocation, g: &Geometry) -> bool {
    let mut inside = false;
    for (a, b) in g.edges() {
        if segment_distance(p, a, b) <= 1e-12 {
            return true;
        }
        if (a.north > p.north) != (b.north > p.north) {
            let x = a.east + (p.north - a.north) * (b.east - a.east) / (b.north - a.north);
            if p.east < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Euclidean distance to the nearest point of `g`; zero on the geometry and
/// inside polygons.
pub fn distance_to_geometry(p: CartesianLocation, g: &Geometry) -> f64 {
    match g.kind {
        GeometryKind::Point => p.distance(&g.vertices[0]),
        GeometryKind::Line => g
            .edges()
            .map(|(a, b)| segment_distance(&p, a, b))
            .fold(f64::INFINITY, f64::min),
        GeometryKind::Polygon => {
            if polygon_contains(&p, g) {
                0.0
            } else {
                g.edges()
                    .map(|(a, b)| segment_distance(&p, a, b))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Occupancy test: polygon containment, or within half the line width of a
/// line or point.
pub fn covers(p: CartesianLocation, g: &Geometry, line_width: f64) -> bool {
    match g.kind {
        GeometryKind::Polygon => polygon_contains(&p, g),
        GeometryKind::Line | GeometryKind::Point => distance_to_geometry(p, g) <= line_width / 2.0,
    }
}
