//! End-to-end mission computation shared by the command line and the HTTP
//! service: map → ensembles → clause DB → landscape.
//!
//! Both front ends build a [`MissionInputs`] from their own input format and
//! call [`compute_landscape`], so they produce identical values for identical
//! inputs and seeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{
    fetch_overpass, load_geojson, BoundingBox, FeatureTypeMapping, UreqTransport,
    DEFAULT_OVERPASS_ENDPOINT,
};
use crate::landscape::{compute_pml, sha256_hex, split, ComputeOptions, MissionLandscape};
use crate::pcm::{clause_db_from_ensembles, DistributionalClauseDB, GridSpec};
use crate::hplp::{grid_query, parse_program, InferenceParams, Program};
use crate::uncertainty::{generate_ensemble, AffineErrorModel, FeatureEnsemble};

/// Feature samples drawn per type when not configured.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 100;

/// Everything needed to compute one landscape, already read into memory.
#[derive(Debug, Clone)]
pub struct MissionInputs {
    /// GeoJSON FeatureCollection text.
    pub geojson: String,
    pub mapping: FeatureTypeMapping,
    pub error_model: AffineErrorModel,
    pub rules: Program,
    pub grid: GridSpec,
    pub n_ensemble: usize,
    pub params: InferenceParams,
    pub tiling: u32,
}

impl MissionInputs {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.params.validate()?;
        self.error_model.validate()?;
        if self.n_ensemble == 0 {
            return Err(Error::domain("ensemble size must be >= 1"));
        }
        if grid_query(&self.rules).is_none() {
            return Err(Error::domain(
                "rules need a grid query with two variables, e.g. query(landscape(R, C))",
            ));
        }
        Ok(())
    }

    /// Content hash of everything the clause DB depends on. Rules and
    /// inference sample count are deliberately left out.
    pub fn clause_key(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            version: u32,
            geojson: &'a str,
            mapping: String,
            errors: String,
            grid: GridSpec,
            n_ensemble: usize,
            seed: u64,
        }
        let key = Key {
            version: 1,
            geojson: &self.geojson,
            mapping: self.mapping.to_json(),
            errors: self.error_model.to_json(),
            grid: self.grid,
            n_ensemble: self.n_ensemble,
            seed: self.params.seed,
        };
        sha256_hex(serde_json::to_string(&key).expect("key serializes").as_bytes())
    }
}

/// Directory of clause DBs keyed by [`MissionInputs::clause_key`]. Writes go
/// to a temporary file that is renamed into place.
#[derive(Debug, Clone)]
pub struct ClauseCache {
    dir: PathBuf,
}

impl ClauseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ClauseCache { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.clauses.json"))
    }

    pub fn get(&self, key: &str) -> Option<DistributionalClauseDB> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        match DistributionalClauseDB::from_json(&text) {
            Ok(db) => Some(db),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, db: &DistributionalClauseDB) -> Result<()> {
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, db.to_json())?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}

/// Parses the map and perturbs every mapped feature type. The result does
/// not depend on the grid resolution.
pub fn feature_ensembles(inputs: &MissionInputs) -> Result<Vec<FeatureEnsemble>> {
    let bundle =
        load_geojson(&inputs.geojson, &inputs.mapping, inputs.grid.origin).map_err(|e| e.at_stage("ingest"))?;
    let sets = bundle.sets_for(&inputs.mapping).map_err(|e| e.at_stage("ingest"))?;
    sets.iter()
        .map(|s| generate_ensemble(s, &inputs.error_model, inputs.n_ensemble, inputs.params.seed))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("uncertainty"))
}

/// Map ingestion, ensemble generation and rasterization, with optional
/// caching of the result.
pub fn clause_db(inputs: &MissionInputs, cache: Option<&ClauseCache>) -> Result<DistributionalClauseDB> {
    let key = cache.map(|_| inputs.clause_key());
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Some(db) = c.get(k) {
            log::info!("clause DB cache hit {}", &k[..12]);
            return Ok(db);
        }
    }
    let ensembles = feature_ensembles(inputs)?;
    let db = clause_db_from_ensembles(&ensembles, &inputs.grid).map_err(|e| e.at_stage("pcm"))?;
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Err(e) = c.put(k, &db) {
            log::warn!("could not write clause cache: {e}");
        }
    }
    Ok(db)
}

/// The full pipeline for in-memory inputs.
pub fn compute_landscape(
    inputs: &MissionInputs,
    options: &ComputeOptions,
    cache: Option<&ClauseCache>,
) -> Result<MissionLandscape> {
    inputs.validate().map_err(|e| e.at_stage("config"))?;
    let db = clause_db(inputs, cache)?;
    let plan = split(inputs.grid.rows, inputs.grid.cols, inputs.tiling);
    compute_pml(&inputs.rules, &db, &inputs.params, &plan, options).map_err(|e| e.at_stage("landscape"))
}

/// Where the map comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MapInput {
    Fixture(PathBuf),
    Overpass { bbox: BoundingBox, endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputPaths {
    pub pml: Option<PathBuf>,
    pub png: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// File-based pipeline configuration, as given on the command line.
#[derive(Debug, Clone)]
pub struct MissionConfig {
    pub map: MapInput,
    pub mapping: PathBuf,
    pub errors: PathBuf,
    pub rules: PathBuf,
    pub grid: GridSpec,
    pub n_ensemble: usize,
    pub params: InferenceParams,
    pub tiling: u32,
    pub workers: Option<usize>,
    pub outputs: OutputPaths,
    pub cache_dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        let mut files = vec![&self.mapping, &self.errors, &self.rules];
        if let MapInput::Fixture(p) = &self.map {
            files.push(p);
        }
        if let Some(p) = files.iter().find(|p| !p.is_file()) {
            return Err(Error::config(format!("{} does not exist", p.display())));
        }
        self.grid.validate()?;
        self.params.validate()?;
        if self.n_ensemble == 0 {
            return Err(Error::domain("ensemble size must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("worker count must be >= 1"));
        }
        Ok(())
    }

    /// Reads every referenced file; fetches the map when it comes from
    /// Overpass.
    pub fn load(&self) -> Result<MissionInputs> {
        self.validate().map_err(|e| e.at_stage("config"))?;
        let mapping = FeatureTypeMapping::from_json(&read(&self.mapping)?).map_err(|e| e.at_stage("config"))?;
        let error_model =
            AffineErrorModel::from_json(&read(&self.errors)?).map_err(|e| e.at_stage("config"))?;
        let rules = parse_program(&read(&self.rules)?).map_err(|e| e.at_stage("hplp"))?;
        let geojson = match &self.map {
            MapInput::Fixture(p) => read(p)?,
            MapInput::Overpass { bbox, endpoint } => fetch_overpass(
                &UreqTransport::default(),
                endpoint,
                bbox,
                &mapping,
                Duration::from_secs(2),
            )
            .map_err(|e| e.at_stage("ingest"))?
            .to_string(),
        };
        Ok(MissionInputs {
            geojson,
            mapping,
            error_model,
            rules,
            grid: self.grid,
            n_ensemble: self.n_ensemble,
            params: self.params,
            tiling: self.tiling,
        })
    }
}

impl MapInput {
    pub fn overpass(bbox: BoundingBox) -> Self {
        MapInput::Overpass {
            bbox,
            endpoint: DEFAULT_OVERPASS_ENDPOINT.to_string(),
        }
    }
}

fn write_outputs(l: &MissionLandscape, out: &OutputPaths, written: &mut Vec<PathBuf>) -> Result<()> {
    fn atomic(path: &Path, written: &mut Vec<PathBuf>, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let tmp = path.with_extension("partial");
        written.push(tmp.clone());
        f(&tmp)?;
        fs::rename(&tmp, path)?;
        written.pop();
        written.push(path.to_path_buf());
        Ok(())
    }
    if let Some(p) = &out.pml {
        atomic(p, written, |t| Ok(fs::write(t, l.to_json())?))?;
    }
    if let Some(p) = &out.png {
        atomic(p, written, |t| l.write_png(t))?;
    }
    if let Some(p) = &out.csv {
        atomic(p, written, |t| l.write_csv(fs::File::create(t)?))?;
    }
    Ok(())
}

/// Runs the whole pipeline and writes the requested artifacts. On failure
/// every file this run created is removed and the error names its stage.
pub fn run_mission(config: &MissionConfig) -> Result<MissionLandscape> {
    let inputs = config.load()?;
    let cache = match &config.cache_dir {
        Some(d) => Some(ClauseCache::new(d).map_err(|e| e.at_stage("config"))?),
        None => None,
    };
    let options = ComputeOptions {
        workers: config.workers,
        ..Default::default()
    };
    let l = compute_landscape(&inputs, &options, cache.as_ref())?;
    let mut written = Vec::new();
    if let Err(e) = write_outputs(&l, &config.outputs, &mut written) {
        for p in written {
            let _ = fs::remove_file(p);
        }
        return Err(e.at_stage("output"));
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PolarLocation;

    const MAP: &str = r#"{"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"leisure": "park"},
         "geometry": {"type": "Polygon", "coordinates": [[[8.6495, 49.8695], [8.6505, 49.8695], [8.6505, 49.8705], [8.6495, 49.8705]]]}}]}"#;

    fn inputs() -> MissionInputs {
        MissionInputs {
            geojson: MAP.into(),
            mapping: FeatureTypeMapping::from_json(r#"[{"match": "leisure=park", "type": "park"}]"#).unwrap(),
            error_model: AffineErrorModel::uniform_translation(10.0),
            rules: parse_program("ok(R, C) :- over(R, C, park). query(ok(R, C)).").unwrap(),
            grid: GridSpec::new(PolarLocation::new(49.87, 8.65).unwrap(), 200.0, 200.0, 6, 6).unwrap(),
            n_ensemble: 20,
            params: InferenceParams::sampling(100, 3),
            tiling: 1,
        }
    }

    #[test]
    fn cache_round_trip_and_key_scope() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ClauseCache::new(dir.path()).unwrap();
        let a = inputs();
        let fresh = clause_db(&a, Some(&cache)).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(cache.get(&a.clause_key()).unwrap(), fresh);
        let mut b = a.clone();
        b.rules = parse_program("x(R, C) :- over(R, C, park). query(x(R, C)).").unwrap();
        b.params.sample_count = 7;
        assert_eq!(a.clause_key(), b.clause_key());
        b.params.seed = 4;
        assert_ne!(a.clause_key(), b.clause_key());
        let l1 = compute_landscape(&a, &Default::default(), Some(&cache)).unwrap();
        let l2 = compute_landscape(&a, &Default::default(), None).unwrap();
        assert_eq!(l1.values, l2.values);
    }

    #[test]
    fn errors_carry_stage() {
        let mut bad = inputs();
        bad.geojson = "{}".into();
        let e = compute_landscape(&bad, &Default::default(), None).unwrap_err();
        assert!(e.to_string().starts_with("[ingest]"), "{e}");
        let mut bad = inputs();
        bad.rules = parse_program("ok(R, C) :- over(R, C, lake). query(ok(R, C)).").unwrap();
        let e = compute_landscape(&bad, &Default::default(), None).unwrap_err();
        assert!(e.to_string().starts_with("[landscape]") && e.to_string().contains("lake"), "{e}");
        let mut bad = inputs();
        bad.n_ensemble = 0;
        let e = compute_landscape(&bad, &Default::default(), None).unwrap_err();
        assert!(e.to_string().starts_with("[config]"), "{e}");
    }

    #[test]
    fn run_mission_writes_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        std::fs::write(p("map.geojson"), MAP).unwrap();
        std::fs::write(p("mapping.json"), inputs().mapping.to_json()).unwrap();
        std::fs::write(p("errors.json"), inputs().error_model.to_json()).unwrap();
        std::fs::write(p("rules.pl"), "ok(R, C) :- over(R, C, park). query(ok(R, C)).").unwrap();
        let mut cfg = MissionConfig {
            map: MapInput::Fixture(p("map.geojson")),
            mapping: p("mapping.json"),
            errors: p("errors.json"),
            rules: p("rules.pl"),
            grid: inputs().grid,
            n_ensemble: 10,
            params: InferenceParams::sampling(50, 1),
            tiling: 0,
            workers: Some(2),
            outputs: OutputPaths {
                pml: Some(p("out.json")),
                png: Some(p("out.png")),
                csv: Some(p("out.csv")),
            },
            cache_dir: None,
        };
        let l = run_mission(&cfg).unwrap();
        assert_eq!(MissionLandscape::from_json(&std::fs::read_to_string(p("out.json")).unwrap()).unwrap().values, l.values);
        assert!(p("out.png").is_file() && p("out.csv").is_file());

        // PNG into a missing directory fails after the JSON was written.
        std::fs::remove_file(p("out.json")).unwrap();
        cfg.outputs.png = Some(p("missing/out.png"));
        let e = run_mission(&cfg).unwrap_err();
        assert!(e.to_string().starts_with("[output]"), "{e}");
        assert!(!p("out.json").exists());

        std::fs::write(p("rules.pl"), "ok(R, C) :- over(R, C, park)").unwrap();
        let e = run_mission(&cfg).unwrap_err();
        assert!(e.to_string().starts_with("[hplp]"), "{e}");
        cfg.rules = p("nope.pl");
        assert!(run_mission(&cfg).unwrap_err().to_string().contains("does not exist"));
    }
}
