use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use probmission::hplp::{parse_program, InferenceParams, DEFAULT_SAMPLE_COUNT};
use probmission::ingest::{fetch_overpass, BoundingBox, FeatureTypeMapping, UreqTransport, DEFAULT_OVERPASS_ENDPOINT};
use probmission::landscape::benchmark_tiling;
use probmission::pcm::{clause_db_from_ensembles, GridSpec};
use probmission::pipeline::{feature_ensembles, run_mission, MapInput, MissionConfig, OutputPaths, DEFAULT_ENSEMBLE_SIZE};
use probmission::scenario::{run_interp_study, run_scenario, ScenarioFixture, SCENARIOS};
use probmission::service::{serve, ServiceConfig, SYNC_CELL_LIMIT};
use probmission::geo::PolarLocation;
use probmission::{Error, Result};

#[derive(Parser)]
#[command(name = "probmission", version, about = "Probabilistic mission landscapes from maps and rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the landscape
    Compute(ComputeArgs),
    /// Check a rules file and list its queries
    Parse {
        #[arg(long)]
        rules: PathBuf,
    },
    /// Time the landscape for several tiling depths and check they agree
    BenchTiling {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        s: Vec<u32>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_parser = pair::<usize>, default_value = "100,100")]
        resolution: (usize, usize),
        #[arg(long)]
        samples: Option<usize>,
        /// Write the timing table as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error of upsampled coarse landscapes against a fine reference
    InterpError {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_delimiter = ',', default_value = "25,50,100,150")]
        resolutions: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        reference: usize,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download map features from Overpass as GeoJSON
    Fetch {
        /// south,west,north,east in degrees
        #[arg(long, allow_hyphen_values = true)]
        bbox: String,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long, default_value = DEFAULT_OVERPASS_ENDPOINT)]
        endpoint: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory for `map_ref` lookups; defaults to the bundled fixtures
        #[arg(long)]
        maps: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long, default_value_t = SYNC_CELL_LIMIT)]
        sync_limit: usize,
    },
    /// Run fixture scenarios and check their manifests
    Scenario {
        /// Fixture names or directories; all bundled fixtures when empty
        names: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Write `<name>.png` heatmaps here
        #[arg(long)]
        png_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Bundled fixture name or fixture directory
    #[arg(long, default_value = "park")]
    scenario: String,
}

impl ScenarioArg {
    fn load(&self) -> Result<ScenarioFixture> {
        load_fixture(&self.scenario)
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// GeoJSON map file
    #[arg(long, required_unless_present = "bbox", conflicts_with = "bbox")]
    map: Option<PathBuf>,
    /// Fetch the map from Overpass instead: south,west,north,east
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<String>,
    #[arg(long, default_value = DEFAULT_OVERPASS_ENDPOINT)]
    endpoint: String,
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    errors: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    /// lat,lon of the grid centre; defaults to the bbox centre
    #[arg(long, value_parser = pair::<f64>, allow_hyphen_values = true)]
    origin: Option<(f64, f64)>,
    /// width,height in metres
    #[arg(long, value_parser = pair::<f64>)]
    extent: (f64, f64),
    /// rows,cols
    #[arg(long, value_parser = pair::<usize>)]
    resolution: (usize, usize),
    #[arg(long, default_value_t = DEFAULT_ENSEMBLE_SIZE)]
    ensemble: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    tiling: u32,
    #[arg(long)]
    workers: Option<usize>,
    /// Landscape JSON; printed to stdout when no output is given
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    png: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Reuse clause databases across runs
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn pair<T: FromStr>(s: &str) -> std::result::Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated values, got `{s}`"))?;
    let parse = |x: &str| x.trim().parse::<T>().map_err(|_| format!("cannot parse `{x}`"));
    Ok((parse(a)?, parse(b)?))
}

fn load_fixture(name: &str) -> Result<ScenarioFixture> {
    if Path::new(name).is_dir() {
        ScenarioFixture::load(name)
    } else {
        ScenarioFixture::builtin(name)
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn compute(a: ComputeArgs) -> Result<()> {
    let (map, bbox) = match (&a.map, &a.bbox) {
        (Some(p), None) => (MapInput::Fixture(p.clone()), None),
        (None, Some(b)) => {
            let bbox = BoundingBox::parse(b)?;
            (
                MapInput::Overpass {
                    bbox,
                    endpoint: a.endpoint.clone(),
                },
                Some(bbox),
            )
        }
        _ => return Err(Error::config("give exactly one of --map and --bbox")),
    };
    let origin = match (a.origin, bbox) {
        (Some((lat, lon)), _) => PolarLocation::new(lat, lon)?,
        (None, Some(b)) => b.center(),
        (None, None) => return Err(Error::config("--origin is required with --map")),
    };
    let config = MissionConfig {
        map,
        mapping: a.mapping,
        errors: a.errors,
        rules: a.rules,
        grid: GridSpec::new(origin, a.extent.0, a.extent.1, a.resolution.0, a.resolution.1)?,
        n_ensemble: a.ensemble,
        params: InferenceParams::sampling(a.samples, a.seed),
        tiling: a.tiling,
        workers: a.workers,
        outputs: OutputPaths {
            pml: a.out.clone(),
            png: a.png.clone(),
            csv: a.csv.clone(),
        },
        cache_dir: a.cache_dir,
    };
    let l = run_mission(&config)?;
    if a.out.is_none() && a.png.is_none() && a.csv.is_none() {
        println!("{}", l.to_json());
    }
    log::info!("{} cells, program {}", l.values.len(), &l.metadata.program_hash[..12]);
    Ok(())
}

fn parse(rules: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(rules)?;
    match parse_program(&text) {
        Ok(p) => {
            for q in p.queries() {
                println!("query {q}");
            }
            Ok(true)
        }
        Err(e) => match e.diagnostics() {
            Some(ds) => {
                for d in ds {
                    eprintln!("{}:{d}", rules.display());
                }
                Ok(false)
            }
            None => Err(e),
        },
    }
}

fn bench_tiling(
    fixture: ScenarioFixture,
    s: &[u32],
    workers: Option<usize>,
    resolution: (usize, usize),
    samples: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let mut inputs = fixture.inputs()?;
    inputs.grid = inputs.grid.with_resolution(resolution.0, resolution.1)?;
    if let Some(n) = samples {
        inputs.params.sample_count = n;
    }
    let db = clause_db_from_ensembles(&feature_ensembles(&inputs)?, &inputs.grid)?;
    let workers = workers.unwrap_or_else(rayon::current_num_threads);
    let (report, _) = benchmark_tiling(&inputs.rules, &db, &inputs.params, s, workers)?;
    write_or_print(out, &report.to_csv())?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match report.best_speedup_ratio() {
        Some(r) => eprintln!(
            "all {} tilings identical; best/s=0 runtime ratio {r:.3} with {workers} workers on {cores} core(s)",
            s.len()
        ),
        None => eprintln!("all tilings identical"),
    }
    Ok(())
}

fn interp_error(
    fixture: ScenarioFixture,
    resolutions: &[usize],
    reference: usize,
    samples: Option<usize>,
    workers: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let mut fixture = fixture;
    if let Some(n) = samples {
        fixture.params.sample_count = n;
    }
    let options = probmission::landscape::ComputeOptions {
        workers,
        ..Default::default()
    };
    let study = run_interp_study(&fixture, resolutions, reference, &options)?;
    write_or_print(out, &study.to_csv())?;
    eprintln!(
        "trend {} (inversions: {:?})",
        if study.trend_holds(0.1) { "holds" } else { "broken" },
        study.inversions()
    );
    Ok(())
}

fn fetch(bbox: &str, mapping: &Path, endpoint: &str, out: Option<&Path>) -> Result<()> {
    let bbox = BoundingBox::parse(bbox)?;
    let mapping = FeatureTypeMapping::from_json(&std::fs::read_to_string(mapping)?)?;
    let doc = fetch_overpass(&UreqTransport::default(), endpoint, &bbox, &mapping, Duration::from_secs(2))?;
    write_or_print(out, &format!("{}\n", serde_json::to_string_pretty(&doc)?))
}

fn scenarios(names: &[String], workers: Option<usize>, png_dir: Option<&Path>) -> Result<bool> {
    let names: Vec<String> = if names.is_empty() {
        SCENARIOS.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    let options = probmission::landscape::ComputeOptions {
        workers,
        ..Default::default()
    };
    let mut ok = true;
    for name in &names {
        let fixture = load_fixture(name)?;
        let (l, report) = run_scenario(&fixture, &options)?;
        print!("{report}");
        ok &= report.passed();
        if let Some(dir) = png_dir {
            l.write_png(&dir.join(format!("{}.png", fixture.name)))?;
        }
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Compute(a) => compute(a).map(|_| true),
        Command::Parse { rules } => parse(&rules),
        Command::BenchTiling {
            scenario,
            s,
            workers,
            resolution,
            samples,
            out,
        } => bench_tiling(scenario.load()?, &s, workers, resolution, samples, out.as_deref()).map(|_| true),
        Command::InterpError {
            scenario,
            resolutions,
            reference,
            samples,
            workers,
            out,
        } => interp_error(scenario.load()?, &resolutions, reference, samples, workers, out.as_deref()).map(|_| true),
        Command::Fetch {
            bbox,
            mapping,
            endpoint,
            out,
        } => fetch(&bbox, &mapping, &endpoint, out.as_deref()).map(|_| true),
        Command::Serve {
            bind,
            maps,
            workers,
            cache_dir,
            sync_limit,
        } => {
            let mut config = ServiceConfig {
                workers,
                cache_dir,
                sync_cell_limit: sync_limit,
                ..Default::default()
            };
            if let Some(m) = maps {
                config.map_dir = m;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(config, bind)).map(|_| true)
        }
        Command::Scenario {
            names,
            workers,
            png_dir,
        } => scenarios(&names, workers, png_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
