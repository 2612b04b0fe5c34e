//! Runs a shipped scenario and checks its region assertions.

use probmission::scenario::{run_scenario, ScenarioFixture};

fn main() -> probmission::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "crossing".into());
    let f = ScenarioFixture::builtin(&name)?;
    let (_, report) = run_scenario(&f, &Default::default())?;
    print!("{report}");
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
