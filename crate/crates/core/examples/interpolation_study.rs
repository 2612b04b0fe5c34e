//! Compares coarse landscapes, upsampled bilinearly, against a finer
//! reference.

use probmission::scenario::{run_interp_study, ScenarioFixture};

fn main() -> probmission::Result<()> {
    let mut f = ScenarioFixture::builtin("park")?;
    f.params.sample_count = 400;
    let study = run_interp_study(&f, &[10, 20, 30], 40, &Default::default())?;
    print!("{}", study.to_csv());
    println!("inversions: {:?}, trend holds: {}", study.inversions(), study.trend_holds(0.1));
    Ok(())
}
