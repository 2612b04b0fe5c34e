//! Times the park landscape under several tilings and shows that the values
//! never change.

use probmission::landscape::benchmark_tiling;
use probmission::pcm::clause_db_from_ensembles;
use probmission::pipeline::feature_ensembles;
use probmission::scenario::ScenarioFixture;

fn main() -> probmission::Result<()> {
    let f = ScenarioFixture::builtin("park")?;
    let mut inputs = f.inputs()?;
    inputs.grid = inputs.grid.with_resolution(30, 30)?;
    inputs.params.sample_count = 400;
    let db = clause_db_from_ensembles(&feature_ensembles(&inputs)?, &inputs.grid)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (report, _) = benchmark_tiling(&inputs.rules, &db, &inputs.params, &[0, 1, 2, 3], workers)?;
    print!("{}", report.to_csv());
    println!("best ratio to untiled: {:.3} with {workers} worker(s)", report.best_speedup_ratio().unwrap());
    Ok(())
}
