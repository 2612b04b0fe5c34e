//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs without the test harness so the report reads top to bottom. Any
//! FAIL makes the process exit non-zero. Soft criteria that cannot be
//! measured on the current machine print SKIP with the reason.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

use probmission::geo::{CartesianLocation, Geometry, PolarLocation, TypedFeatureSet};
use probmission::hplp::{
    ground, infer_exact_discrete, infer_sampling, parse_program, Atom, InferenceParams, Program,
};
use probmission::landscape::benchmark_tiling;
use probmission::pcm::{cell_center, clause_db_from_ensembles, compute_distance_clauses, gaussian_exceedance, GridSpec};
use probmission::pipeline::feature_ensembles;
use probmission::scenario::{run_interp_study, run_scenario, ScenarioFixture, SCENARIOS};
use probmission::uncertainty::{generate_ensemble, AffineErrorModel, GaussianParams};

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Outcome {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        }
    }
}

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn single_query(p: &Program) -> Atom {
    p.queries().next().expect("program has a query").clone()
}

fn expected_value(text: &str) -> f64 {
    let line = text.lines().find_map(|l| l.strip_prefix("% expect:")).expect("corpus file states its value");
    line.split_whitespace().next().unwrap().parse().unwrap()
}

fn discrete_inference() -> Outcome {
    let start = Instant::now();
    let dir = crate_dir().join("fixtures/discrete");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let n = 100_000;
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    let mut listing1 = f64::NAN;
    for (i, f) in files.iter().enumerate() {
        let text = read(f);
        let program = parse_program(&text).unwrap();
        let g = ground(&program).unwrap();
        let q = single_query(&program);
        let exact = infer_exact_discrete(&g, &q).unwrap();
        let sampled = infer_sampling(&g, &q, &InferenceParams::sampling(n, 1000 + i as u64)).unwrap();
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        if name.contains("listing1") {
            listing1 = exact;
        }
        if (exact - expected_value(&text)).abs() > 1e-12 {
            problems.push(format!("{name}: exact {exact} != hand value {}", expected_value(&text)));
        }
        let bound = 3.0 * (exact * (1.0 - exact) / n as f64).sqrt();
        let err = (sampled - exact).abs();
        if bound > 0.0 {
            worst = worst.max(err / bound);
        }
        if err > bound {
            problems.push(format!("{name}: sampled {sampled} vs exact {exact}, bound {bound:.5}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = files.len() >= 10 && problems.is_empty() && (listing1 - 0.18).abs() < 1e-12 && secs < 30.0;
    Outcome::check(
        ok,
        format!(
            "{} programs, listing 1 = {listing1:.12}, worst |sampled-exact| = {worst:.2} of the 3-sigma bound, {secs:.1} s{}",
            files.len(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn cdf_equivalence() -> Outcome {
    let program = parse_program("d ~ normal(20, 0.5).\nabove :- d > 19.\nfar :- d > 30.\nquery(above).\nquery(far).\n").unwrap();
    let g = ground(&program).unwrap();
    let params = InferenceParams::sampling(100_000, 3);
    let sampled = infer_sampling(&g, &Atom::constant("above"), &params).unwrap();
    let far_sampled = infer_sampling(&g, &Atom::constant("far"), &params).unwrap();
    let d = GaussianParams::new(20.0, 0.5).unwrap();
    let analytic = gaussian_exceedance(d, 19.0);
    let far_analytic = gaussian_exceedance(d, 30.0);
    let ok = (analytic - 0.92135).abs() < 5e-6
        && (sampled - analytic).abs() <= 0.01
        && far_sampled < 1e-6
        && far_analytic < 1e-6;
    Outcome::check(
        ok,
        format!(
            "P(D>19): sampled {sampled:.5}, analytic {analytic:.5}; P(D>30): sampled {far_sampled}, analytic {far_analytic:.2e}"
        ),
    )
}

fn tiling(speedup: &mut Outcome) -> Outcome {
    let f = ScenarioFixture::builtin("park").unwrap();
    let mut inputs = f.inputs().unwrap();
    inputs.grid = inputs.grid.with_resolution(100, 100).unwrap();
    let db = clause_db_from_ensembles(&feature_ensembles(&inputs).unwrap(), &inputs.grid).unwrap();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers = cores.max(1);
    match benchmark_tiling(&inputs.rules, &db, &inputs.params, &[0, 1, 2, 3], workers) {
        Ok((report, _)) => {
            let times: Vec<String> = report.rows.iter().map(|r| format!("s={} {:.2}s", r.s, r.seconds)).collect();
            let ratio = report.best_speedup_ratio().unwrap_or(f64::NAN);
            *speedup = if cores >= 4 {
                Outcome::check(ratio <= 0.6, format!("min/s=0 runtime ratio {ratio:.3} on {cores} cores ({})", times.join(", ")))
            } else {
                Outcome {
                    verdict: Verdict::Skip,
                    detail: format!(
                        "needs >= 4 cores, this machine has {cores}; measured ratio {ratio:.3} ({})",
                        times.join(", ")
                    ),
                }
            };
            Outcome::check(true, format!("100x100 park, s = 0..3 bitwise identical with {workers} worker(s)"))
        }
        Err(e) => Outcome::check(false, format!("{e}")),
    }
}

fn interpolation() -> Outcome {
    let start = Instant::now();
    let f = ScenarioFixture::builtin("park").unwrap();
    let study = run_interp_study(&f, &[25, 50, 100, 150], 200, &Default::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let first = study.rows.first().unwrap().1;
    let last = study.rows.last().unwrap().1;
    let table: Vec<String> = study.rows.iter().map(|(n, e)| format!("{n}:{e:.3e}")).collect();
    Outcome::check(
        study.trend_holds(0.1) && last < first && secs < 600.0,
        format!("mse {} ; inversions {:?}; {secs:.0} s", table.join(" "), study.inversions()),
    )
}

fn error_model() -> Outcome {
    let n = 10_000;
    let point = TypedFeatureSet::new("mast", vec![Geometry::point(CartesianLocation::new(0.0, 0.0))], 1.0).unwrap();
    let grid = GridSpec::new(PolarLocation::new(49.87, 8.65).unwrap(), 1000.0, 1000.0, 5, 5).unwrap();
    let far = cell_center(&grid, 0, 4).unwrap();
    let ensemble = generate_ensemble(&point, &AffineErrorModel::uniform_translation(10.0), n, 42).unwrap();
    let moment = compute_distance_clauses(&ensemble, &grid).unwrap().cells[grid.index(0, 4)];

    // Independent oracle: draw the translations directly.
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let axis = Normal::new(0.0, 10f64.sqrt()).unwrap();
    let d: Vec<f64> = (0..n)
        .map(|_| ((far.east - axis.sample(&mut rng)).powi(2) + (far.north - axis.sample(&mut rng)).powi(2)).sqrt())
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let oracle = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let rel = (moment.variance - oracle).abs() / oracle;

    let exact = generate_ensemble(&point, &AffineErrorModel::uniform_translation(0.0), 20, 42).unwrap();
    let raster = compute_distance_clauses(&exact, &grid).unwrap();
    let deterministic = (0..5).all(|r| {
        (0..5).all(|c| {
            let p = cell_center(&grid, r, c).unwrap();
            let cell = raster.cells[grid.index(r, c)];
            cell.variance == 0.0 && cell.mean == p.east.hypot(p.north)
        })
    });
    Outcome::check(
        rel <= 0.10 && deterministic,
        format!(
            "far-cell variance {:.3} vs Monte Carlo {oracle:.3} ({:.1}% off); zero-error raster exact: {deterministic}",
            moment.variance,
            100.0 * rel
        ),
    )
}

fn scenarios() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in SCENARIOS {
        match ScenarioFixture::builtin(name).and_then(|f| run_scenario(&f, &Default::default())) {
            Ok((_, report)) => {
                let passed = report.outcomes.iter().filter(|o| o.passed).count();
                let mut s = format!("{name} {passed}/{}", report.outcomes.len());
                if let Some(m) = &report.monotone {
                    s.push_str(&format!(" (green signal {:.2} -> {:.2})", m.low_mean, m.high_mean));
                }
                if !report.passed() {
                    s.push_str(&format!(" FAILED:\n{report}"));
                }
                ok &= report.passed();
                parts.push(s);
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome::check(ok, parts.join(", "))
}

fn strip_timestamp(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    v["metadata"].as_object_mut().unwrap().remove("timestamp");
    v
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let park = crate_dir().join("fixtures/scenarios/park");
    let run = |workers: &str, out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_probmission"))
            .arg("compute")
            .arg("--map").arg(park.join("map.geojson"))
            .arg("--mapping").arg(park.join("mapping.json"))
            .arg("--errors").arg(park.join("errors.json"))
            .arg("--rules").arg(park.join("rules.pl"))
            .args(["--origin", "49.87,8.65", "--extent", "400,400", "--resolution", "40,40", "--seed", "7"])
            .args(["--workers", workers])
            .arg("--out").arg(out)
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    };
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    if !(run("1", &a) && run("4", &b)) {
        return Outcome::check(false, "compute exited with an error");
    }
    let (ta, tb) = (read(&a), read(&b));
    let values = |t: &str| serde_json::from_str::<Value>(t).unwrap()["values"].to_string();
    let same_values = values(&ta) == values(&tb);
    let same_rest = strip_timestamp(&ta) == strip_timestamp(&tb);
    Outcome::check(
        same_values && same_rest,
        format!("two 40x40 runs with 1 and 4 workers: values identical {same_values}, all but timestamp identical {same_rest}"),
    )
}

fn parser_corpus() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["listing1.pl", "listing3.pl", "listing4.pl"] {
        let text = read(crate_dir().join("fixtures/listings").join(name));
        match parse_program(&text) {
            Ok(p) => {
                let printed = p.to_string();
                let again = parse_program(&printed);
                let round = again.as_ref().is_ok_and(|q| q.statements == p.statements);
                ok &= round;
                notes.push(format!("{name} {} statements{}", p.statements.len(), if round { "" } else { " (round trip differs)" }));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome::check(ok, notes.join(", "))
}

fn main() -> ExitCode {
    let mut speedup = Outcome {
        verdict: Verdict::Skip,
        detail: "not run".into(),
    };
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Outcome) -> Outcome>)> = vec![
        ("discrete inference matches exact enumeration", Box::new(|_| discrete_inference())),
        ("sampled and analytic exceedance agree", Box::new(|_| cdf_equivalence())),
        ("tiling leaves the landscape bitwise unchanged", Box::new(tiling)),
        ("interpolation error falls with resolution", Box::new(|_| interpolation())),
        ("error-model moments match Monte Carlo", Box::new(|_| error_model())),
        ("scenario manifests hold", Box::new(|_| scenarios())),
        ("repeated compute runs are identical", Box::new(|_| determinism())),
        ("listings parse and round-trip", Box::new(|_| parser_corpus())),
    ];
    let mut failed = 0;
    let mut print = |label: &str, o: &Outcome| {
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("{tag} {label}: {}", o.detail);
    };
    for (label, run) in criteria {
        let start = Instant::now();
        let o = run(&mut speedup);
        log_time(label, start);
        print(label, &o);
        if label.starts_with("tiling") {
            print("tiling speedup (soft)", &speedup);
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn log_time(label: &str, start: Instant) {
    if std::env::var_os("ACCEPTANCE_TIMING").is_some() {
        eprintln!("  {label}: {:.1} s", start.elapsed().as_secs_f64());
    }
}
