//! Committed scenario fixtures and the experiment drivers built on them.
//!
//! A fixture directory holds `scenario.json`, which names the map, mapping,
//! error model, rules and manifest files and pins the grid, ensemble size,
//! sample count and seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hplp::{parse_program, InferenceParams};
use crate::ingest::FeatureTypeMapping;
use crate::landscape::{
    compute_pml, interpolate_bilinear, mse, split, ComputeOptions, MissionLandscape, RegionStats,
};
use crate::pcm::{clause_db_from_ensembles, GridSpec};
use crate::pipeline::{feature_ensembles, MissionInputs, DEFAULT_ENSEMBLE_SIZE};
use crate::geo::PolarLocation;
use crate::hplp::DEFAULT_SAMPLE_COUNT;
use crate::uncertainty::AffineErrorModel;

/// Inclusive block of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub r0: usize,
    pub c0: usize,
    pub r1: usize,
    pub c1: usize,
}

impl Region {
    fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.r0 > self.r1 || self.c0 > self.c1 || self.r1 >= grid.rows || self.c1 >= grid.cols {
            return Err(Error::config(format!(
                "region {self} lies outside the {}x{} grid",
                grid.rows, grid.cols
            )));
        }
        Ok(())
    }

    pub fn stats(&self, l: &MissionLandscape) -> Result<RegionStats> {
        l.region_stats(self.r0, self.c0, self.r1, self.c1)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rows {}..={} cols {}..={}", self.r0, self.r1, self.c0, self.c1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Mean,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "<")]
    Less,
}

/// One manifest line: `stat(region) op value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionAssertion {
    pub region: Region,
    pub stat: Stat,
    pub op: Comparison,
    pub value: f64,
    /// Free-text reason, shown in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RegionAssertion {
    pub fn observe(&self, l: &MissionLandscape) -> Result<f64> {
        let s = self.region.stats(l)?;
        Ok(match self.stat {
            Stat::Mean => s.mean,
            Stat::Min => s.min,
            Stat::Max => s.max,
        })
    }

    pub fn holds(&self, observed: f64) -> bool {
        match self.op {
            Comparison::Greater => observed > self.value,
            Comparison::Less => observed < self.value,
        }
    }
}

impl fmt::Display for RegionAssertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stat = match self.stat {
            Stat::Mean => "mean",
            Stat::Min => "min",
            Stat::Max => "max",
        };
        let op = match self.op {
            Comparison::Greater => ">",
            Comparison::Less => "<",
        };
        write!(f, "{stat}({}) {op} {}", self.region, self.value)?;
        if let Some(n) = &self.note {
            write!(f, " [{n}]")?;
        }
        Ok(())
    }
}

/// Region mean must grow when a probabilistic fact goes from `low` to
/// `high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneCheck {
    pub fact: String,
    pub low: f64,
    pub high: f64,
    pub region: Region,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    map: PathBuf,
    mapping: PathBuf,
    errors: PathBuf,
    rules: PathBuf,
    manifest: PathBuf,
    origin: [f64; 2],
    extent_m: [f64; 2],
    resolution: [usize; 2],
    #[serde(default = "default_ensemble")]
    n_ensemble: usize,
    #[serde(default = "default_samples")]
    sample_count: usize,
    seed: u64,
    #[serde(default)]
    monotone: Option<MonotoneCheck>,
}

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE_SIZE
}

fn default_samples() -> usize {
    DEFAULT_SAMPLE_COUNT
}

#[derive(Debug, Clone)]
pub struct ScenarioFixture {
    pub name: String,
    pub dir: PathBuf,
    pub geojson: PathBuf,
    pub mapping: PathBuf,
    pub errors: PathBuf,
    pub rules: PathBuf,
    pub manifest: Vec<RegionAssertion>,
    pub grid: GridSpec,
    pub n_ensemble: usize,
    pub params: InferenceParams,
    pub monotone: Option<MonotoneCheck>,
}

/// Directory holding the committed fixtures.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios")
}

pub const SCENARIOS: [&str; 4] = ["park", "bay", "crossing", "rails"];

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))
}

impl ScenarioFixture {
    /// One of the committed fixtures by name.
    pub fn builtin(name: &str) -> Result<Self> {
        if !SCENARIOS.contains(&name) {
            return Err(Error::config(format!(
                "unknown scenario `{name}`, expected one of {}",
                SCENARIOS.join(", ")
            )));
        }
        Self::load(fixtures_dir().join(name))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: ScenarioFile = serde_json::from_str(&read(&dir.join("scenario.json"))?)
            .map_err(|e| Error::config(format!("{}/scenario.json: {e}", dir.display())))?;
        let at = |p: &Path| dir.join(p);
        for p in [&file.map, &file.mapping, &file.errors, &file.rules, &file.manifest] {
            if !at(p).is_file() {
                return Err(Error::config(format!("scenario file {} is missing", at(p).display())));
            }
        }
        let manifest: Vec<RegionAssertion> = serde_json::from_str(&read(&at(&file.manifest))?)
            .map_err(|e| Error::config(format!("manifest: {e}")))?;
        let grid = GridSpec::new(
            PolarLocation::new(file.origin[0], file.origin[1])?,
            file.extent_m[0],
            file.extent_m[1],
            file.resolution[0],
            file.resolution[1],
        )?;
        for a in &manifest {
            a.region.check(&grid)?;
        }
        if let Some(m) = &file.monotone {
            m.region.check(&grid)?;
        }
        let params = InferenceParams::sampling(file.sample_count, file.seed);
        params.validate()?;
        Ok(ScenarioFixture {
            name: file.name,
            dir: dir.to_path_buf(),
            geojson: at(&file.map),
            mapping: at(&file.mapping),
            errors: at(&file.errors),
            rules: at(&file.rules),
            manifest,
            grid,
            n_ensemble: file.n_ensemble,
            params,
            monotone: file.monotone,
        })
    }

    /// Reads every file into pipeline inputs at the fixture's own grid.
    pub fn inputs(&self) -> Result<MissionInputs> {
        Ok(MissionInputs {
            geojson: read(&self.geojson)?,
            mapping: FeatureTypeMapping::from_json(&read(&self.mapping)?)?,
            error_model: AffineErrorModel::from_json(&read(&self.errors)?)?,
            rules: parse_program(&read(&self.rules)?)?,
            grid: self.grid,
            n_ensemble: self.n_ensemble,
            params: self.params,
            tiling: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionOutcome {
    pub assertion: RegionAssertion,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneOutcome {
    pub check: MonotoneCheck,
    pub low_mean: f64,
    pub high_mean: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub outcomes: Vec<AssertionOutcome>,
    pub monotone: Option<MonotoneOutcome>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed) && self.monotone.as_ref().is_none_or(|m| m.passed)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
        writeln!(f, "scenario {}: {}", self.name, mark(self.passed()))?;
        for o in &self.outcomes {
            writeln!(f, "  {} {} (observed {:.4})", mark(o.passed), o.assertion, o.observed)?;
        }
        if let Some(m) = &self.monotone {
            writeln!(
                f,
                "  {} mean({}) rises with {}: {:.4} at {} -> {:.4} at {}",
                mark(m.passed),
                m.check.region,
                m.check.fact,
                m.low_mean,
                m.check.low,
                m.high_mean,
                m.check.high
            )?;
        }
        Ok(())
    }
}

/// Computes the fixture's landscape and evaluates its manifest. With a
/// monotonicity check, the landscape is also recomputed with the named fact
/// pinned to each end of its range over the same clause DB.
pub fn run_scenario(
    fixture: &ScenarioFixture,
    options: &ComputeOptions,
) -> Result<(MissionLandscape, ScenarioReport)> {
    let inputs = fixture.inputs().map_err(|e| e.at_stage("config"))?;
    inputs.validate().map_err(|e| e.at_stage("config"))?;
    let ensembles = feature_ensembles(&inputs)?;
    let db = clause_db_from_ensembles(&ensembles, &inputs.grid).map_err(|e| e.at_stage("pcm"))?;
    let plan = split(inputs.grid.rows, inputs.grid.cols, inputs.tiling);
    let run = |rules: &crate::hplp::Program| compute_pml(rules, &db, &inputs.params, &plan, options).map_err(|e| e.at_stage("landscape"));

    let landscape = run(&inputs.rules)?;
    let outcomes = fixture
        .manifest
        .iter()
        .map(|a| {
            let observed = a.observe(&landscape)?;
            Ok(AssertionOutcome {
                assertion: a.clone(),
                observed,
                passed: a.holds(observed),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let monotone = match &fixture.monotone {
        None => None,
        Some(m) => {
            let pinned = |p| -> Result<f64> {
                let mut rules = inputs.rules.clone();
                if rules.set_fact_probability(&m.fact, p) == 0 {
                    return Err(Error::config(format!("rules have no probabilistic fact `{}`", m.fact)));
                }
                Ok(m.region.stats(&run(&rules)?)?.mean)
            };
            let (low_mean, high_mean) = (pinned(m.low)?, pinned(m.high)?);
            Some(MonotoneOutcome {
                check: m.clone(),
                low_mean,
                high_mean,
                passed: high_mean > low_mean,
            })
        }
    };

    Ok((
        landscape,
        ScenarioReport {
            name: fixture.name.clone(),
            outcomes,
            monotone,
        },
    ))
}

/// MSE of each upsampled resolution against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpStudy {
    pub reference: usize,
    pub rows: Vec<(usize, f64)>,
}

impl InterpStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("resolution,mse\n");
        for (n, e) in &self.rows {
            s.push_str(&format!("{n},{e}\n"));
        }
        s
    }

    /// Steps where the error grows with resolution, as `(from, to, relative
    /// increase)`.
    pub fn inversions(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .windows(2)
            .filter(|w| w[1].1 > w[0].1)
            .map(|w| (w[0].0, w[1].0, (w[1].1 - w[0].1) / w[0].1))
            .collect()
    }

    /// Non-increasing up to at most one inversion of at most `tolerance`
    /// relative, and the finest error strictly below the coarsest.
    pub fn trend_holds(&self, tolerance: f64) -> bool {
        let inv = self.inversions();
        let ends = match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if self.rows.len() > 1 => b.1 < a.1,
            _ => true,
        };
        ends && inv.len() <= 1 && inv.iter().all(|&(_, _, rel)| rel <= tolerance)
    }
}

/// Computes square landscapes at each resolution and at the reference,
/// upsamples each to the reference grid and measures the MSE. One set of
/// feature ensembles serves every resolution.
pub fn run_interp_study(
    fixture: &ScenarioFixture,
    resolutions: &[usize],
    reference: usize,
    options: &ComputeOptions,
) -> Result<InterpStudy> {
    if let Some(&m) = resolutions.iter().max() {
        if m >= reference {
            return Err(Error::domain(format!(
                "reference resolution {reference} must exceed every study resolution (got {m})"
            )));
        }
    }
    let inputs = fixture.inputs().map_err(|e| e.at_stage("config"))?;
    inputs.validate().map_err(|e| e.at_stage("config"))?;
    let ensembles = feature_ensembles(&inputs)?;
    let landscape = |n: usize| -> Result<MissionLandscape> {
        let grid = inputs.grid.with_resolution(n, n)?;
        let db = clause_db_from_ensembles(&ensembles, &grid).map_err(|e| e.at_stage("pcm"))?;
        compute_pml(&inputs.rules, &db, &inputs.params, &split(n, n, 0), options)
            .map_err(|e| e.at_stage("landscape"))
    };
    let reference_pml = landscape(reference)?;
    let mut rows = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let up = interpolate_bilinear(&landscape(n)?, &reference_pml.grid)?;
        let e = mse(&up, &reference_pml)?;
        log::info!("resolution {n}: mse {e:.6}");
        rows.push((n, e));
    }
    Ok(InterpStudy { reference, rows })
}
