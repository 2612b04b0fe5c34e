//! Probabilistic mission landscapes: the per-cell probability that a rule
//! program's grid query holds, plus tiling, resampling and export.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::unproject;
use crate::hplp::{
    grid_bindings, grid_query, ground, infer_exact_discrete, infer_sampling_stream, specialize,
    Atom, InferenceMode, InferenceParams, Program,
};
use crate::pcm::{cell_center, emit_clauses, DistributionalClauseDB, GridSpec};

/// Provenance of a landscape.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LandscapeMetadata {
    pub program_hash: String,
    pub db_hash: String,
    pub seed: u64,
    pub n_ensemble: usize,
    pub n_inf: usize,
    /// RFC 3339; the only field that differs between identical runs.
    pub timestamp: String,
}

/// A row-major probability raster over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLandscape {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub metadata: LandscapeMetadata,
}

impl MissionLandscape {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[self.grid.index(r, c)]
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.values.len() != self.grid.cell_count() {
            return Err(Error::domain(format!(
                "landscape has {} values for a {}x{} grid",
                self.values.len(),
                self.grid.rows,
                self.grid.cols
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("landscape value {v} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("landscape serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("landscape serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let l: MissionLandscape = serde_json::from_str(text)?;
        l.validate()?;
        Ok(l)
    }

    /// Mean, min and max over the inclusive cell block `[r0..=r1] × [c0..=c1]`.
    pub fn region_stats(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> Result<RegionStats> {
        if r0 > r1 || c0 > c1 || r1 >= self.grid.rows || c1 >= self.grid.cols {
            return Err(Error::domain(format!(
                "region ({r0},{c0})-({r1},{c1}) outside {}x{} grid",
                self.grid.rows, self.grid.cols
            )));
        }
        let mut s = RegionStats {
            mean: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for r in r0..=r1 {
            for c in c0..=c1 {
                let v = self.get(r, c);
                s.mean += v;
                s.min = s.min.min(v);
                s.max = s.max.max(v);
            }
        }
        s.mean /= ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
        Ok(s)
    }

    /// `r,c,lat,lon,probability` with one row per cell centre.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "c", "lat", "lon", "probability"]).map_err(csv_err)?;
        for r in 0..self.grid.rows {
            for c in 0..self.grid.cols {
                let p = unproject(cell_center(&self.grid, r, c)?, self.grid.origin);
                w.write_record([
                    r.to_string(),
                    c.to_string(),
                    p.latitude.to_string(),
                    p.longitude.to_string(),
                    self.get(r, c).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Heatmap image, one pixel per cell: red at 0, cyan at 1, cells below 0.1
    /// fully transparent.
    pub fn to_image(&self) -> image::RgbaImage {
        image::RgbaImage::from_fn(self.grid.cols as u32, self.grid.rows as u32, |x, y| {
            image::Rgba(heat_color(self.get(y as usize, x as usize)))
        })
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        self.to_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Display cut-off: lower probabilities are not drawn.
pub const DISPLAY_THRESHOLD: f64 = 0.1;

/// Red→cyan ramp with the display cut-off applied.
pub fn heat_color(p: f64) -> [u8; 4] {
    if p < DISPLAY_THRESHOLD {
        return [0, 0, 0, 0];
    }
    let p = p.clamp(0.0, 1.0);
    let hi = (255.0 * p).round() as u8;
    [255 - hi, hi, hi, 255]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Half-open block of rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl Tile {
    pub fn cell_count(&self) -> usize {
        (self.rows.1 - self.rows.0) * (self.cols.1 - self.cols.0)
    }
}

/// `4^s` tiles from `s` rounds of halving rows and columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingPlan {
    pub s: u32,
    pub tiles: Vec<Tile>,
}

/// Splits a `rows × cols` grid `s` times. Odd extents split floor/ceil; tiles
/// may be empty once a dimension is down to a single cell.
pub fn split(rows: usize, cols: usize, s: u32) -> TilingPlan {
    let mut tiles = vec![Tile {
        rows: (0, rows),
        cols: (0, cols),
    }];
    for _ in 0..s {
        tiles = tiles
            .into_iter()
            .flat_map(|t| {
                let rm = t.rows.0 + (t.rows.1 - t.rows.0) / 2;
                let cm = t.cols.0 + (t.cols.1 - t.cols.0) / 2;
                [
                    Tile { rows: (t.rows.0, rm), cols: (t.cols.0, cm) },
                    Tile { rows: (t.rows.0, rm), cols: (cm, t.cols.1) },
                    Tile { rows: (rm, t.rows.1), cols: (t.cols.0, cm) },
                    Tile { rows: (rm, t.rows.1), cols: (cm, t.cols.1) },
                ]
            })
            .collect();
    }
    TilingPlan { s, tiles }
}

/// Scheduling knobs that never change the result.
#[derive(Debug, Clone, Default)]
pub struct ComputeOptions {
    /// Worker threads; `None` uses the global pool (one per core).
    pub workers: Option<usize>,
    /// Checked before every cell.
    pub cancel: Option<Arc<AtomicBool>>,
    /// Incremented after every finished cell.
    pub progress: Option<Arc<AtomicUsize>>,
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// World stream for a cell. Unique per cell, so each cell's estimate is
/// reproducible on its own.
fn cell_stream(r: usize, c: usize) -> u64 {
    ((r as u64) << 32) | c as u64
}

fn resolved_query(program: &Program) -> Result<&Atom> {
    grid_query(program).ok_or_else(|| {
        Error::domain("program has no grid query with two variable arguments, e.g. query(landscape(R, C))")
    })
}

/// The probability for cell `(r, c)` alone: specialize, ground, infer.
pub fn infer_cell(
    program: &Program,
    db: &DistributionalClauseDB,
    params: &InferenceParams,
    r: usize,
    c: usize,
) -> Result<f64> {
    let query = resolved_query(program)?;
    let bindings = grid_bindings(query, r, c)?;
    let cell = || -> Result<f64> {
        let clauses = emit_clauses(db, r, c)?;
        let spec = specialize(program, &clauses, &bindings)?;
        let g = ground(&spec)?;
        let q = spec
            .queries()
            .find(|q| q.name == query.name && q.is_ground() && q.arity() == 2)
            .expect("specialize binds the grid query");
        match params.mode {
            InferenceMode::Sampling => infer_sampling_stream(&g, q, params, cell_stream(r, c)),
            InferenceMode::ExactDiscrete => infer_exact_discrete(&g, q),
        }
    };
    cell().map_err(|e| Error::Cell {
        row: r,
        col: c,
        source: Box::new(e),
    })
}

/// Evaluates the grid query of `program` over every cell of `db`'s grid.
///
/// Each tile of `plan` is one task; the values do not depend on the plan or
/// on the worker count.
pub fn compute_pml(
    program: &Program,
    db: &DistributionalClauseDB,
    params: &InferenceParams,
    plan: &TilingPlan,
    options: &ComputeOptions,
) -> Result<MissionLandscape> {
    params.validate()?;
    db.validate()?;
    resolved_query(program)?;
    let grid = db.grid;
    let covered: usize = plan.tiles.iter().map(Tile::cell_count).sum();
    if covered != grid.cell_count() {
        return Err(Error::domain(format!(
            "tiling plan covers {covered} cells, grid has {}",
            grid.cell_count()
        )));
    }

    let run_tile = |t: &Tile| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(t.cell_count());
        for r in t.rows.0..t.rows.1 {
            for c in t.cols.0..t.cols.1 {
                if options.cancel.as_ref().is_some_and(|f| f.load(Ordering::Relaxed)) {
                    return Err(Error::Cancelled);
                }
                out.push(infer_cell(program, db, params, r, c)?);
                if let Some(p) = &options.progress {
                    p.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        Ok(out)
    };
    let run_all = || -> Result<Vec<Vec<f64>>> {
        plan.tiles.par_iter().with_max_len(1).map(run_tile).collect()
    };
    let parts = match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let mut values = vec![0.0; grid.cell_count()];
    for (t, part) in plan.tiles.iter().zip(parts) {
        let mut it = part.into_iter();
        for r in t.rows.0..t.rows.1 {
            for c in t.cols.0..t.cols.1 {
                values[grid.index(r, c)] = it.next().expect("tile size");
            }
        }
    }

    Ok(MissionLandscape {
        grid,
        values,
        metadata: LandscapeMetadata {
            program_hash: sha256_hex(program.to_string().as_bytes()),
            db_hash: sha256_hex(db.to_json().as_bytes()),
            seed: params.seed,
            n_ensemble: db.n_ensemble,
            n_inf: params.sample_count,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        },
    })
}

/// Resamples `src` onto `target` by bilinear interpolation between cell
/// centres, extending edge values outward.
pub fn interpolate_bilinear(src: &MissionLandscape, target: &GridSpec) -> Result<MissionLandscape> {
    if !src.grid.same_extent(target) {
        return Err(Error::domain("interpolation needs grids with the same origin and extent"));
    }
    // Position of a target centre in source index units.
    fn axis(i: usize, n_src: usize, n_dst: usize) -> (usize, usize, f64) {
        let f = ((i as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
        let lo = f.floor() as usize;
        (lo, (lo + 1).min(n_src - 1), f - lo as f64)
    }
    let (sr, sc) = (src.grid.rows, src.grid.cols);
    let mut values = Vec::with_capacity(target.cell_count());
    for r in 0..target.rows {
        let (r0, r1, ty) = axis(r, sr, target.rows);
        for c in 0..target.cols {
            let (c0, c1, tx) = axis(c, sc, target.cols);
            let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
            let top = lerp(src.get(r0, c0), src.get(r0, c1), tx);
            let bottom = lerp(src.get(r1, c0), src.get(r1, c1), tx);
            values.push(lerp(top, bottom, ty).clamp(0.0, 1.0));
        }
    }
    Ok(MissionLandscape {
        grid: *target,
        values,
        metadata: src.metadata.clone(),
    })
}

/// Mean squared difference between two landscapes on the same grid.
pub fn mse(a: &MissionLandscape, b: &MissionLandscape) -> Result<f64> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::domain(format!(
            "cannot compare {}x{} and {}x{} landscapes",
            a.grid.rows, a.grid.cols, b.grid.rows, b.grid.cols
        )));
    }
    let n = a.values.len() as f64;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n)
}

/// Cells whose probability reaches a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMask {
    pub grid: GridSpec,
    pub mask: Vec<bool>,
    pub threshold: f64,
}

impl ValidityMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

pub fn threshold_mask(l: &MissionLandscape, tau: f64) -> Result<ValidityMask> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::domain(format!("threshold {tau} outside [0, 1]")));
    }
    Ok(ValidityMask {
        grid: l.grid,
        mask: l.values.iter().map(|&v| v >= tau).collect(),
        threshold: tau,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub s: u32,
    pub tiles: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub workers: usize,
    pub rows: Vec<TimingRow>,
}

impl TimingReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    /// Fastest tiled run relative to the untiled one, if `s = 0` was timed.
    pub fn best_speedup_ratio(&self) -> Option<f64> {
        let base = self.rows.iter().find(|r| r.s == 0)?.seconds;
        let best = self.rows.iter().map(|r| r.seconds).fold(f64::INFINITY, f64::min);
        Some(best / base)
    }
}

/// Times [`compute_pml`] for each tiling factor and checks that all outputs
/// are bitwise identical.
pub fn benchmark_tiling(
    program: &Program,
    db: &DistributionalClauseDB,
    params: &InferenceParams,
    s_values: &[u32],
    workers: usize,
) -> Result<(TimingReport, MissionLandscape)> {
    if s_values.is_empty() {
        return Err(Error::domain("no tiling factors given"));
    }
    let options = ComputeOptions {
        workers: Some(workers),
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut first: Option<MissionLandscape> = None;
    for &s in s_values {
        let plan = split(db.grid.rows, db.grid.cols, s);
        let start = Instant::now();
        let l = compute_pml(program, db, params, &plan, &options)?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("s={s}: {} tiles in {seconds:.3}s", plan.tiles.len());
        rows.push(TimingRow {
            s,
            tiles: plan.tiles.len(),
            seconds,
        });
        match &first {
            None => first = Some(l),
            Some(f) => {
                if let Some(i) = f
                    .values
                    .iter()
                    .zip(&l.values)
                    .position(|(a, b)| a.to_bits() != b.to_bits())
                {
                    return Err(Error::Consistency(format!(
                        "tiling s={s} differs from s={} at cell ({}, {})",
                        s_values[0],
                        i / db.grid.cols,
                        i % db.grid.cols
                    )));
                }
            }
        }
    }
    Ok((TimingReport { workers, rows }, first.expect("non-empty")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PolarLocation;
    use crate::hplp::{infer_sampling, parse_program};
    use crate::pcm::DistanceRaster;
    use crate::uncertainty::GaussianParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(rows: usize, cols: usize) -> GridSpec {
        GridSpec::new(PolarLocation::new(49.87, 8.65).unwrap(), 100.0, 100.0, rows, cols).unwrap()
    }

    fn raster(rows: usize, cols: usize, values: Vec<f64>) -> MissionLandscape {
        MissionLandscape {
            grid: grid(rows, cols),
            values,
            metadata: LandscapeMetadata {
                program_hash: String::new(),
                db_hash: String::new(),
                seed: 0,
                n_ensemble: 0,
                n_inf: 0,
                timestamp: String::new(),
            },
        }
    }

    // A DB whose `over(R, C, park)` rises left to right and `distance(R, C, road)`
    // grows downward.
    fn gradient_db(rows: usize, cols: usize) -> DistributionalClauseDB {
        let g = grid(rows, cols);
        let mut db = DistributionalClauseDB::new(g);
        let mut over = Vec::new();
        let mut dist = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                over.push(c as f64 / (cols - 1).max(1) as f64);
                dist.push(GaussianParams { mean: 5.0 * r as f64, variance: 4.0 });
            }
        }
        db.over.insert("park".into(), over);
        db.distance.insert("road".into(), DistanceRaster { cells: dist, empty: false });
        db
    }

    const RULES: &str = "ok(R, C) :- over(R, C, park); distance(R, C, road) < 12.\nquery(ok(R, C)).";

    #[test]
    fn split_examples() {
        assert_eq!(split(100, 100, 0).tiles, vec![Tile { rows: (0, 100), cols: (0, 100) }]);
        let one = split(100, 100, 1);
        assert_eq!(one.tiles.len(), 4);
        assert!(one.tiles.iter().all(|t| t.cell_count() == 2500));
        let two = split(100, 100, 2);
        assert_eq!(two.tiles.len(), 16);
        assert!(two.tiles.iter().all(|t| t.rows.1 - t.rows.0 == 25 && t.cols.1 - t.cols.0 == 25));
        let odd = split(5, 3, 1);
        assert_eq!(odd.tiles[0], Tile { rows: (0, 2), cols: (0, 1) });
        assert_eq!(odd.tiles[3], Tile { rows: (2, 5), cols: (1, 3) });
    }

    proptest! {
        #[test]
        fn split_partitions_grid(rows in 1usize..40, cols in 1usize..40, s in 0u32..4) {
            let plan = split(rows, cols, s);
            prop_assert_eq!(plan.tiles.len(), 4usize.pow(s));
            let mut seen = vec![0u8; rows * cols];
            for t in &plan.tiles {
                for r in t.rows.0..t.rows.1 {
                    for c in t.cols.0..t.cols.1 {
                        seen[r * cols + c] += 1;
                    }
                }
            }
            prop_assert!(seen.iter().all(|&n| n == 1));
        }

        #[test]
        fn masks_are_nested(values in proptest::collection::vec(0.0..=1.0f64, 12), t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64) {
            let l = raster(3, 4, values);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = threshold_mask(&l, lo).unwrap();
            let b = threshold_mask(&l, hi).unwrap();
            prop_assert!(a.mask.iter().zip(&b.mask).all(|(x, y)| *x || !*y));
        }
    }

    #[test]
    fn trivial_programs() {
        let db = gradient_db(3, 4);
        let p = parse_program("yes. landscape(R, C) :- yes. query(landscape(R, C)).").unwrap();
        let params = InferenceParams::sampling(50, 1);
        let l = compute_pml(&p, &db, &params, &split(3, 4, 0), &Default::default()).unwrap();
        assert!(l.values.iter().all(|&v| v == 1.0));
        let p = parse_program("0.0::yes. landscape(R, C) :- yes. query(landscape(R, C)).").unwrap();
        let l = compute_pml(&p, &db, &params, &split(3, 4, 0), &Default::default()).unwrap();
        assert!(l.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tiling_and_workers_do_not_change_values() {
        let db = gradient_db(7, 9);
        let p = parse_program(RULES).unwrap();
        let params = InferenceParams::sampling(200, 42);
        let base = compute_pml(&p, &db, &params, &split(7, 9, 0), &Default::default()).unwrap();
        for s in 1..=3 {
            for workers in [1, 3] {
                let opts = ComputeOptions { workers: Some(workers), ..Default::default() };
                let l = compute_pml(&p, &db, &params, &split(7, 9, s), &opts).unwrap();
                assert!(base.values.iter().zip(&l.values).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
        // Equal to a cell computed on its own.
        assert_eq!(infer_cell(&p, &db, &params, 4, 5).unwrap(), base.get(4, 5));
        let (report, _) = benchmark_tiling(&p, &db, &params, &[0, 1, 2], 2).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.to_csv().starts_with("s,tiles,seconds\n0,1,"));
    }

    #[test]
    fn cell_value_matches_independent_estimate() {
        // P(ok) = 1 - (1 - p_over) * (1 - P(D < 12)) at cell (2, 3).
        let db = gradient_db(4, 4);
        let p = parse_program(RULES).unwrap();
        let params = InferenceParams::sampling(100_000, 7);
        let v = infer_cell(&p, &db, &params, 2, 3).unwrap();
        let p_over = 1.0;
        assert_eq!(v, p_over);
        let v = infer_cell(&p, &db, &params, 2, 1).unwrap();
        let p_over = 1.0 / 3.0;
        let p_near = 1.0 - crate::pcm::gaussian_exceedance(GaussianParams { mean: 10.0, variance: 4.0 }, 12.0);
        let want = 1.0 - (1.0 - p_over) * (1.0 - p_near);
        assert!((v - want).abs() < 3.0 * (want * (1.0 - want) / 1e5).sqrt(), "{v} vs {want}");
        // Same specialized program through the general sampler agrees in distribution.
        let q = crate::hplp::Atom::new("ok", vec![crate::hplp::Term::Const("r2".into()), crate::hplp::Term::Const("c1".into())]);
        let spec = specialize(&p, &emit_clauses(&db, 2, 1).unwrap(), &grid_bindings(grid_query(&p).unwrap(), 2, 1).unwrap()).unwrap();
        let w = infer_sampling(&ground(&spec).unwrap(), &q, &params).unwrap();
        assert!((v - w).abs() < 0.01);
    }

    #[test]
    fn errors_name_the_cell_and_cancel() {
        let db = gradient_db(2, 2);
        let p = parse_program("ok(R, C) :- over(R, C, lake). query(ok(R, C)).").unwrap();
        let err = compute_pml(&p, &db, &InferenceParams::sampling(10, 0), &split(2, 2, 0), &Default::default())
            .unwrap_err();
        assert!(matches!(err, Error::Cell { row: 0, col: 0, .. }), "{err}");
        assert!(err.to_string().contains("lake"));

        let p = parse_program(RULES).unwrap();
        let cancel = Arc::new(AtomicBool::new(true));
        let opts = ComputeOptions { cancel: Some(cancel), ..Default::default() };
        let err = compute_pml(&p, &db, &InferenceParams::sampling(10, 0), &split(2, 2, 1), &opts).unwrap_err();
        assert!(matches!(err, Error::Cancelled));

        let no_grid = parse_program("a. query(a).").unwrap();
        assert!(compute_pml(&no_grid, &db, &InferenceParams::sampling(10, 0), &split(2, 2, 0), &Default::default()).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let src = raster(2, 2, vec![0.0, 1.0, 0.0, 1.0]);
        let up = interpolate_bilinear(&src, &grid(4, 4)).unwrap();
        for r in 0..4 {
            let row: Vec<f64> = (0..4).map(|c| up.get(r, c)).collect();
            assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
        }
        let noisy = raster(3, 5, (0..15).map(|i| (i as f64 * 0.37).fract()).collect());
        assert_eq!(interpolate_bilinear(&noisy, &noisy.grid).unwrap().values, noisy.values);
        let flat = raster(3, 3, vec![0.3; 9]);
        assert!(interpolate_bilinear(&flat, &grid(7, 11)).unwrap().values.iter().all(|&v| v == 0.3));
        let other = GridSpec::new(PolarLocation::new(0.0, 0.0).unwrap(), 100.0, 100.0, 4, 4).unwrap();
        assert!(interpolate_bilinear(&src, &other).is_err());
    }

    #[test]
    fn mse_and_masks() {
        let a = raster(1, 2, vec![0.0, 0.5]);
        let b = raster(1, 2, vec![0.5, 0.5]);
        assert_abs_diff_eq!(mse(&a, &b).unwrap(), 0.125);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&raster(2, 2, vec![0.0; 4]), &raster(2, 2, vec![1.0; 4])).unwrap(), 1.0);
        assert!(mse(&a, &raster(2, 1, vec![0.0, 0.5])).is_err());

        let l = raster(1, 4, vec![0.0, 0.05, 0.5, 1.0]);
        assert_eq!(threshold_mask(&l, 0.0).unwrap().count(), 4);
        assert_eq!(threshold_mask(&l, 1.0).unwrap().mask, vec![false, false, false, true]);
        assert!(threshold_mask(&l, 1.0 + f64::EPSILON).is_err());
        assert_eq!(threshold_mask(&l, DISPLAY_THRESHOLD).unwrap().mask, vec![false, false, true, true]);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let values: Vec<f64> = (0..12).map(|i| (i as f64 * 0.1234567891234).fract() / 3.0).collect();
        let mut l = raster(3, 4, values);
        l.metadata.timestamp = "2024-01-01T00:00:00.000Z".into();
        let back = MissionLandscape::from_json(&l.to_json()).unwrap();
        assert!(back.values.iter().zip(&l.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back, l);
        let doc: serde_json::Value = serde_json::from_str(&l.to_json()).unwrap();
        assert_eq!(doc["grid"]["rows"], 3);
        assert_eq!(doc["grid"]["origin_lat"], 49.87);
        assert!(doc["metadata"]["db_hash"].is_string());
    }

    #[test]
    fn exports() {
        let l = raster(2, 2, vec![0.0, 0.05, 0.1, 1.0]);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r,c,lat,lon,probability");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("1,1,") && lines[4].ends_with(",1"));
        let img = l.to_image();
        assert_eq!(img.get_pixel(0, 0).0[3], 0);
        assert_eq!(img.get_pixel(1, 0).0[3], 0);
        assert_eq!(img.get_pixel(0, 1).0[3], 255);
        assert_eq!(img.get_pixel(1, 1).0, [0, 255, 255, 255]);
        assert_eq!(heat_color(0.1)[0], 229);
    }
}
