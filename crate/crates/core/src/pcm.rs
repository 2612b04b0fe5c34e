//! Clause modules: per-cell `distance` and `over` clauses computed from
//! feature ensembles.
//!
//! A [`DistributionalClauseDB`] holds one Gaussian raster per feature type for
//! `distance(R, C, tag)` and one probability raster for `over(R, C, tag)`.
//! [`emit_clauses`] turns a single cell into program facts such as
//!
//! ```text
//! distance(r0, c0, building) ~ normal(20, 0.5).
//! 0.9::over(r0, c0, primary).
//! ```

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CartesianLocation, PolarLocation, TypedFeatureSet};
use crate::hplp::{col_const, row_const, Atom, Distribution, Statement, Term};
use crate::uncertainty::{
    generate_ensemble, moment_match, occupancy_estimate, AffineErrorModel, FeatureEnsemble,
    GaussianParams,
};

/// A rectangular raster of `rows × cols` cells centred on `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecJson", into = "GridSpecJson")]
pub struct GridSpec {
    pub origin: PolarLocation,
    /// East-west extent in meters.
    pub width: f64,
    /// North-south extent in meters.
    pub height: f64,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpecJson {
    origin_lat: f64,
    origin_lon: f64,
    width_m: f64,
    height_m: f64,
    rows: usize,
    cols: usize,
}

impl TryFrom<GridSpecJson> for GridSpec {
    type Error = Error;

    fn try_from(j: GridSpecJson) -> Result<Self> {
        GridSpec::new(
            PolarLocation::new(j.origin_lat, j.origin_lon)?,
            j.width_m,
            j.height_m,
            j.rows,
            j.cols,
        )
    }
}

impl From<GridSpec> for GridSpecJson {
    fn from(g: GridSpec) -> Self {
        GridSpecJson {
            origin_lat: g.origin.latitude,
            origin_lon: g.origin.longitude,
            width_m: g.width,
            height_m: g.height,
            rows: g.rows,
            cols: g.cols,
        }
    }
}

impl GridSpec {
    pub fn new(origin: PolarLocation, width: f64, height: f64, rows: usize, cols: usize) -> Result<Self> {
        let g = GridSpec {
            origin,
            width,
            height,
            rows,
            cols,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.origin.validate()?;
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(Error::domain(format!(
                "grid extent must be positive, got {} x {} m",
                self.width, self.height
            )));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::domain(format!(
                "grid resolution must be at least 1x1, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Same extent, different resolution.
    pub fn with_resolution(&self, rows: usize, cols: usize) -> Result<Self> {
        GridSpec::new(self.origin, self.width, self.height, rows, cols)
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// True when both grids cover the same area, whatever their resolution.
    pub fn same_extent(&self, other: &GridSpec) -> bool {
        self.origin == other.origin && self.width == other.width && self.height == other.height
    }

    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    fn center_unchecked(&self, r: usize, c: usize) -> CartesianLocation {
        CartesianLocation::new(
            -self.width / 2.0 + (c as f64 + 0.5) * self.width / self.cols as f64,
            self.height / 2.0 - (r as f64 + 0.5) * self.height / self.rows as f64,
        )
    }
}

/// Centre of cell `(r, c)`; row 0 is the northernmost row.
pub fn cell_center(grid: &GridSpec, r: usize, c: usize) -> Result<CartesianLocation> {
    if r >= grid.rows || c >= grid.cols {
        return Err(Error::domain(format!(
            "cell ({r}, {c}) outside {}x{} grid",
            grid.rows, grid.cols
        )));
    }
    Ok(grid.center_unchecked(r, c))
}

/// Per-cell distance distributions for one feature type.
///
/// `empty` marks a type with no features at all: every cell then holds the
/// sentinel `(+inf, 0)`, so `distance < x` is false and `distance > x` true.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRaster {
    pub cells: Vec<GaussianParams>,
    pub empty: bool,
}

impl DistanceRaster {
    pub const SENTINEL: GaussianParams = GaussianParams {
        mean: f64::INFINITY,
        variance: 0.0,
    };

    fn sentinel(len: usize) -> Self {
        DistanceRaster {
            cells: vec![Self::SENTINEL; len],
            empty: true,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DistanceRasterJson {
    #[serde(default)]
    empty: bool,
    #[serde(default)]
    mean: Vec<f64>,
    #[serde(default)]
    variance: Vec<f64>,
}

/// Clause rasters for every feature type on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionalClauseDB {
    pub grid: GridSpec,
    /// Ensemble size the rasters were estimated from; 0 when hand-built.
    pub n_ensemble: usize,
    pub distance: BTreeMap<String, DistanceRaster>,
    pub over: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClauseDbJson {
    grid: GridSpec,
    #[serde(default)]
    n_ensemble: usize,
    distance: BTreeMap<String, DistanceRasterJson>,
    over: BTreeMap<String, Vec<f64>>,
}

impl DistributionalClauseDB {
    pub fn new(grid: GridSpec) -> Self {
        DistributionalClauseDB {
            grid,
            n_ensemble: 0,
            distance: BTreeMap::new(),
            over: BTreeMap::new(),
        }
    }

    /// Checks raster shapes, probability range and variance sign.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let n = self.grid.cell_count();
        for (tag, r) in &self.distance {
            if r.cells.len() != n {
                return Err(Error::domain(format!(
                    "distance raster `{tag}` has {} cells, grid has {n}",
                    r.cells.len()
                )));
            }
            if let Some(p) = r.cells.iter().find(|p| !(p.variance >= 0.0) || p.mean.is_nan()) {
                return Err(Error::domain(format!(
                    "distance raster `{tag}` holds invalid parameters {p:?}"
                )));
            }
        }
        for (tag, r) in &self.over {
            if r.len() != n {
                return Err(Error::domain(format!(
                    "over raster `{tag}` has {} cells, grid has {n}",
                    r.len()
                )));
            }
            if let Some(p) = r.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::domain(format!("over raster `{tag}` holds probability {p}")));
            }
        }
        Ok(())
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        let mut t: Vec<&str> = self.distance.keys().chain(self.over.keys()).map(String::as_str).collect();
        t.sort_unstable();
        t.dedup();
        t.into_iter()
    }

    pub fn to_json(&self) -> String {
        let doc = ClauseDbJson {
            grid: self.grid,
            n_ensemble: self.n_ensemble,
            distance: self
                .distance
                .iter()
                .map(|(tag, r)| {
                    let j = if r.empty {
                        DistanceRasterJson {
                            empty: true,
                            mean: vec![],
                            variance: vec![],
                        }
                    } else {
                        DistanceRasterJson {
                            empty: false,
                            mean: r.cells.iter().map(|p| p.mean).collect(),
                            variance: r.cells.iter().map(|p| p.variance).collect(),
                        }
                    };
                    (tag.clone(), j)
                })
                .collect(),
            over: self.over.clone(),
        };
        serde_json::to_string(&doc).expect("clause DB serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ClauseDbJson = serde_json::from_str(text)?;
        let n = doc.grid.cell_count();
        let mut distance = BTreeMap::new();
        for (tag, j) in doc.distance {
            let r = if j.empty {
                DistanceRaster::sentinel(n)
            } else {
                if j.mean.len() != j.variance.len() {
                    return Err(Error::domain(format!(
                        "distance raster `{tag}`: mean and variance lengths differ"
                    )));
                }
                DistanceRaster {
                    cells: j
                        .mean
                        .into_iter()
                        .zip(j.variance)
                        .map(|(mean, variance)| GaussianParams { mean, variance })
                        .collect(),
                    empty: false,
                }
            };
            distance.insert(tag, r);
        }
        let db = DistributionalClauseDB {
            grid: doc.grid,
            n_ensemble: doc.n_ensemble,
            distance,
            over: doc.over,
        };
        db.validate()?;
        Ok(db)
    }
}

fn check_ensemble(ensemble: &FeatureEnsemble) -> Result<()> {
    if ensemble.samples.is_empty() {
        return Err(Error::domain(format!(
            "ensemble `{}` has no samples",
            ensemble.type_tag
        )));
    }
    Ok(())
}

/// Raw per-sample nearest distances at one point, for diagnostics.
pub fn distance_samples(ensemble: &FeatureEnsemble, p: CartesianLocation) -> Vec<f64> {
    ensemble
        .samples
        .iter()
        .filter_map(|s| s.min_distance(p))
        .collect()
}

/// Moment-matched nearest-feature distance for every cell.
pub fn compute_distance_clauses(ensemble: &FeatureEnsemble, grid: &GridSpec) -> Result<DistanceRaster> {
    check_ensemble(ensemble)?;
    grid.validate()?;
    if ensemble.feature_count() == 0 {
        return Ok(DistanceRaster::sentinel(grid.cell_count()));
    }
    let cells = (0..grid.cell_count())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let p = grid.center_unchecked(i / grid.cols, i % grid.cols);
            buf.clear();
            buf.extend(ensemble.samples.iter().filter_map(|s| s.min_distance(p)));
            moment_match(buf)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceRaster { cells, empty: false })
}

/// Fraction of ensemble samples in which some feature covers each cell centre.
pub fn compute_over_clauses(ensemble: &FeatureEnsemble, grid: &GridSpec) -> Result<Vec<f64>> {
    check_ensemble(ensemble)?;
    grid.validate()?;
    let n = ensemble.sample_count();
    (0..grid.cell_count())
        .into_par_iter()
        .map(|i| {
            let p = grid.center_unchecked(i / grid.cols, i % grid.cols);
            let hits = ensemble.samples.iter().filter(|s| s.any_covers(p)).count();
            occupancy_estimate(hits, n)
        })
        .collect()
}

/// `P(D > threshold)` for `D ~ N(mean, variance)`; a point mass when the
/// variance is zero.
pub fn gaussian_exceedance(params: GaussianParams, threshold: f64) -> f64 {
    if params.variance == 0.0 {
        return if params.mean > threshold { 1.0 } else { 0.0 };
    }
    let z = (threshold - params.mean) / (2.0 * params.variance).sqrt();
    0.5 * libm::erfc(z)
}

/// Ensembles and rasters for every feature set. Sets without features are
/// kept and produce sentinel distances and zero occupancy.
pub fn build_clause_db(
    feature_sets: &[TypedFeatureSet],
    model: &AffineErrorModel,
    n_ensemble: usize,
    seed: u64,
    grid: &GridSpec,
) -> Result<DistributionalClauseDB> {
    let ensembles = feature_sets
        .iter()
        .map(|s| generate_ensemble(s, model, n_ensemble, seed))
        .collect::<Result<Vec<_>>>()?;
    clause_db_from_ensembles(&ensembles, grid)
}

/// Rasterizes precomputed ensembles onto `grid`, so one ensemble can serve
/// several resolutions.
pub fn clause_db_from_ensembles(
    ensembles: &[FeatureEnsemble],
    grid: &GridSpec,
) -> Result<DistributionalClauseDB> {
    let mut db = DistributionalClauseDB::new(*grid);
    db.n_ensemble = ensembles.iter().map(FeatureEnsemble::sample_count).max().unwrap_or(0);
    for e in ensembles {
        if db.distance.contains_key(&e.type_tag) {
            return Err(Error::config(format!("feature type `{}` appears twice", e.type_tag)));
        }
        db.distance.insert(e.type_tag.clone(), compute_distance_clauses(e, grid)?);
        db.over.insert(e.type_tag.clone(), compute_over_clauses(e, grid)?);
    }
    Ok(db)
}

fn cell_atom(name: &str, r: usize, c: usize, tag: &str) -> Atom {
    Atom::new(
        name,
        vec![
            Term::Const(row_const(r)),
            Term::Const(col_const(c)),
            Term::Const(tag.to_string()),
        ],
    )
}

/// Facts for cell `(r, c)`: a `distance` clause and an `over` fact per type.
/// Zero probabilities are kept as explicit `0.0::over(...)` facts.
pub fn emit_clauses(db: &DistributionalClauseDB, r: usize, c: usize) -> Result<Vec<Statement>> {
    cell_center(&db.grid, r, c)?;
    let i = db.grid.index(r, c);
    let mut out = Vec::with_capacity(db.distance.len() + db.over.len());
    for (tag, raster) in &db.distance {
        let p = raster.cells[i];
        out.push(Statement::DistFact {
            atom: cell_atom("distance", r, c, tag),
            dist: Distribution::normal(p.mean, p.variance),
        });
    }
    for (tag, raster) in &db.over {
        out.push(Statement::ProbFact {
            prob: raster[i],
            atom: cell_atom("over", r, c, tag),
        });
    }
    Ok(out)
}

/// [`emit_clauses`] rendered as rule text, one clause per line.
pub fn render_clauses(clauses: &[Statement]) -> String {
    clauses.iter().map(|s| format!("{s}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Geometry;
    use crate::hplp::parse_program;
    use crate::uncertainty::ErrorParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(w: f64, rows: usize) -> GridSpec {
        GridSpec::new(PolarLocation::new(49.0, 8.0).unwrap(), w, w, rows, rows).unwrap()
    }

    fn point_set(tag: &str, e: f64, n: f64, width: f64) -> TypedFeatureSet {
        TypedFeatureSet::new(tag, vec![Geometry::point(CartesianLocation::new(e, n))], width).unwrap()
    }

    // Standard normal upper tail by Simpson integration of the density,
    // independent of erfc.
    fn upper_tail_quadrature(z: f64) -> f64 {
        let (a, b, n) = (z, z + 12.0, 20_000);
        let h = (b - a) / n as f64;
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(a) + pdf(b);
        for k in 1..n {
            s += pdf(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn cell_centers() {
        let g1 = grid(100.0, 1);
        assert_eq!(cell_center(&g1, 0, 0).unwrap(), CartesianLocation::new(0.0, 0.0));
        assert_eq!(cell_center(&grid(100.0, 2), 0, 0).unwrap(), CartesianLocation::new(-25.0, 25.0));
        assert_eq!(cell_center(&grid(100.0, 4), 3, 3).unwrap(), CartesianLocation::new(37.5, -37.5));
        assert!(cell_center(&g1, 1, 0).is_err());
        assert!(GridSpec::new(PolarLocation::new(0.0, 0.0).unwrap(), 0.0, 1.0, 1, 1).is_err());
        assert!(GridSpec::new(PolarLocation::new(0.0, 0.0).unwrap(), 1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn exceedance_matches_quadrature() {
        let d = GaussianParams::new(20.0, 0.5).unwrap();
        let p19 = gaussian_exceedance(d, 19.0);
        assert_abs_diff_eq!(p19, 0.92135, epsilon = 1e-4);
        // P(D > 19) = P(Z > -1/sqrt(0.5)) = 1 - upper tail at +sqrt(2).
        assert_abs_diff_eq!(p19, 1.0 - upper_tail_quadrature(2f64.sqrt()), epsilon = 1e-9);
        let p30 = gaussian_exceedance(d, 30.0);
        // Mills ratio bound: tail(z) < pdf(z) / z.
        let z = 10.0 / 0.5f64.sqrt();
        let mills = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / z;
        assert!(p30 < 1e-40 && p30 <= mills && p30 > 0.0, "{p30}");
        let dirac = GaussianParams::new(7.0, 0.0).unwrap();
        assert_eq!(gaussian_exceedance(dirac, 6.0), 1.0);
        assert_eq!(gaussian_exceedance(dirac, 7.0), 0.0);
        assert_eq!(gaussian_exceedance(DistanceRaster::SENTINEL, 1e300), 1.0);
    }

    #[test]
    fn zero_error_distance_is_deterministic() {
        let g = GridSpec::new(PolarLocation::new(0.0, 0.0).unwrap(), 6.0, 8.0, 1, 1).unwrap();
        // Cell centre is the origin; feature at (3, 4) is 5 m away.
        let e = generate_ensemble(&point_set("p", 3.0, 4.0, 1.0), &AffineErrorModel::uniform_translation(0.0), 7, 1)
            .unwrap();
        let r = compute_distance_clauses(&e, &g).unwrap();
        assert_eq!(r.cells, vec![GaussianParams { mean: 5.0, variance: 0.0 }]);
    }

    #[test]
    fn translated_point_distance_variance() {
        // Far from the point the distance is ~ linear in the offset along the
        // line of sight, so its variance approaches the per-axis variance.
        let sigma2 = 10.0;
        let g = grid(10.0, 1);
        let src = point_set("p", 1000.0, 0.0, 1.0);
        let e = generate_ensemble(&src, &AffineErrorModel::uniform_translation(sigma2), 10_000, 3).unwrap();
        let r = compute_distance_clauses(&e, &g).unwrap();
        // Oracle: plain Monte Carlo over the same offsets.
        let d: Vec<f64> = e.samples.iter().map(|s| {
            let v = s.features[0].vertices()[0];
            (v.east.powi(2) + v.north.powi(2)).sqrt()
        }).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert_abs_diff_eq!(r.cells[0].variance, var, epsilon = 1e-9);
        assert!((r.cells[0].variance - sigma2).abs() < 0.1 * sigma2, "{}", r.cells[0].variance);
    }

    #[test]
    fn empty_sets_give_sentinel_and_zero_occupancy() {
        let g = grid(100.0, 3);
        let empty = TypedFeatureSet::new("tertiary", vec![], 5.0).unwrap();
        let db = build_clause_db(&[empty], &AffineErrorModel::uniform_translation(10.0), 5, 0, &g).unwrap();
        assert!(db.distance["tertiary"].empty);
        assert!(db.distance["tertiary"].cells.iter().all(|p| *p == DistanceRaster::SENTINEL));
        assert!(db.over["tertiary"].iter().all(|&p| p == 0.0));
        let text = render_clauses(&emit_clauses(&db, 0, 0).unwrap());
        assert_eq!(text, "distance(r0, c0, tertiary) ~ normal(inf, 0).\n0.0::over(r0, c0, tertiary).\n");
        parse_program(&text).unwrap();
    }

    #[test]
    fn zero_error_over_is_coverage_indicator() {
        let g = grid(100.0, 10);
        let sq = Geometry::polygon(vec![
            CartesianLocation::new(-20.0, -20.0),
            CartesianLocation::new(20.0, -20.0),
            CartesianLocation::new(20.0, 20.0),
            CartesianLocation::new(-20.0, 20.0),
        ])
        .unwrap();
        let set = TypedFeatureSet::new("park", vec![sq], 5.0).unwrap();
        let e = generate_ensemble(&set, &AffineErrorModel::uniform_translation(0.0), 4, 0).unwrap();
        let over = compute_over_clauses(&e, &g).unwrap();
        for r in 0..10 {
            for c in 0..10 {
                let want = set.any_covers(cell_center(&g, r, c).unwrap());
                assert_eq!(over[g.index(r, c)], if want { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(over.iter().filter(|&&p| p == 1.0).count(), 16);
    }

    #[test]
    fn translated_point_occupancy_matches_disk_mass() {
        // Point at the cell centre, buffer 0.5 m (radius 0.25), isotropic
        // sigma^2 = 100. Oracle: numerical integral of the bivariate normal
        // over the disk in polar coordinates.
        let (var, radius, n) = (100.0, 0.25, 10_000);
        let g = grid(10.0, 1);
        let set = point_set("p", 0.0, 0.0, 2.0 * radius);
        let e = generate_ensemble(&set, &AffineErrorModel::uniform_translation(var), n, 11).unwrap();
        let p_hat = compute_over_clauses(&e, &g).unwrap()[0];
        let steps = 10_000;
        let h = radius / steps as f64;
        let mass: f64 = (0..steps)
            .map(|k| {
                let rho = (k as f64 + 0.5) * h;
                rho * (-rho * rho / (2.0 * var)).exp() / var * h
            })
            .sum();
        let se = (mass * (1.0 - mass) / n as f64).sqrt();
        assert!((p_hat - mass).abs() <= 3.0 * se + 1.0 / n as f64, "{p_hat} vs {mass}");
    }

    #[test]
    fn sampled_exceedance_converges_to_gaussian() {
        let g = grid(10.0, 1);
        let src = point_set("p", 0.0, 40.0, 1.0);
        let e = generate_ensemble(&src, &AffineErrorModel::uniform_translation(10.0), 10_000, 5).unwrap();
        let params = compute_distance_clauses(&e, &g).unwrap().cells[0];
        let d = distance_samples(&e, cell_center(&g, 0, 0).unwrap());
        for tau in [35.0, 38.0, 40.0, 42.0, 45.0] {
            let sampled = d.iter().filter(|&&x| x > tau).count() as f64 / d.len() as f64;
            assert!((sampled - gaussian_exceedance(params, tau)).abs() < 0.02, "tau {tau}");
        }
    }

    #[test]
    fn listing3_rendering_and_round_trip() {
        let g = grid(100.0, 2);
        let mut db = DistributionalClauseDB::new(g);
        db.distance.insert(
            "building".into(),
            DistanceRaster {
                cells: vec![
                    GaussianParams { mean: 20.0, variance: 0.5 },
                    GaussianParams { mean: 18.5, variance: 0.45 },
                    GaussianParams { mean: 19.0, variance: 0.4 },
                    GaussianParams { mean: 17.25, variance: 0.6 },
                ],
                empty: false,
            },
        );
        db.over.insert("primary".into(), vec![0.9, 0.1, 0.8, 0.0]);
        db.validate().unwrap();
        let cl = emit_clauses(&db, 0, 0).unwrap();
        let text = render_clauses(&cl);
        assert_eq!(
            text,
            "distance(r0, c0, building) ~ normal(20, 0.5).\n0.9::over(r0, c0, primary).\n"
        );
        assert_eq!(parse_program(&text).unwrap().statements, cl);
        let last = render_clauses(&emit_clauses(&db, 1, 1).unwrap());
        assert!(last.contains("0.0::over(r1, c1, primary)."));

        let back = DistributionalClauseDB::from_json(&db.to_json()).unwrap();
        assert_eq!(back, db);
        assert!(emit_clauses(&db, 2, 0).is_err());
    }

    #[test]
    fn db_is_deterministic_and_validated() {
        let g = grid(200.0, 8);
        let sets = [point_set("operator", 0.0, 0.0, 5.0), point_set("rail", 30.0, -10.0, 4.0)];
        let model = AffineErrorModel::uniform_translation(10.0)
            .with_type("rail", ErrorParams { rotation_sigma: 0.1, ..ErrorParams::translation(4.0) });
        let a = build_clause_db(&sets, &model, 20, 9, &g).unwrap();
        let b = build_clause_db(&sets, &model, 20, 9, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let mut bad = a.clone();
        bad.over.get_mut("rail").unwrap()[0] = 1.5;
        assert!(bad.validate().is_err());
        assert!(DistributionalClauseDB::from_json(&bad.to_json()).is_err());
    }

    proptest! {
        #[test]
        fn exceedance_is_monotone(mean in -100.0..100.0f64, var in 0.0..50.0f64, t1 in -150.0..150.0f64, dt in 0.0..50.0f64) {
            let p = GaussianParams { mean, variance: var };
            let a = gaussian_exceedance(p, t1);
            let b = gaussian_exceedance(p, t1 + dt);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(b <= a);
        }

        #[test]
        fn emitted_clauses_round_trip(mean in 0.0..1e4f64, var in 0.0..100.0f64, p in 0.0..=1.0f64) {
            let mut db = DistributionalClauseDB::new(grid(10.0, 1));
            db.distance.insert("building".into(), DistanceRaster { cells: vec![GaussianParams { mean, variance: var }], empty: false });
            db.over.insert("park".into(), vec![p]);
            let cl = emit_clauses(&db, 0, 0).unwrap();
            prop_assert_eq!(parse_program(&render_clauses(&cl)).unwrap().statements, cl);
        }
    }
}
