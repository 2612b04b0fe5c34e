//! Loads the park fixture, builds the clause database and prints the facts
//! one cell contributes to its program.

use probmission::pcm::{emit_clauses, gaussian_exceedance, render_clauses};
use probmission::pipeline::clause_db;
use probmission::scenario::ScenarioFixture;

fn main() -> probmission::Result<()> {
    let f = ScenarioFixture::builtin("park")?;
    let mut inputs = f.inputs()?;
    inputs.grid = inputs.grid.with_resolution(10, 10)?;
    inputs.n_ensemble = 50;
    let db = clause_db(&inputs, None)?;
    println!("types: {}", db.tags().collect::<Vec<_>>().join(", "));

    let (r, c) = (5, 5);
    print!("{}", render_clauses(&emit_clauses(&db, r, c)?));
    let op = db.distance["operator"].cells[db.grid.index(r, c)];
    println!("P(distance to operator < 250) = {:.4}", 1.0 - gaussian_exceedance(op, 250.0));
    Ok(())
}
