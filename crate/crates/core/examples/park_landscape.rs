//! Computes the park landscape at a coarse resolution, summarizes it and
//! writes it as JSON, CSV and PNG into a temporary directory.

use probmission::landscape::{threshold_mask, ComputeOptions};
use probmission::pipeline::compute_landscape;
use probmission::scenario::ScenarioFixture;

fn main() -> probmission::Result<()> {
    let f = ScenarioFixture::builtin("park")?;
    let mut inputs = f.inputs()?;
    inputs.grid = inputs.grid.with_resolution(20, 20)?;
    inputs.params.sample_count = 500;
    let l = compute_landscape(&inputs, &ComputeOptions::default(), None)?;

    for r in 0..l.grid.rows {
        let row: String = (0..l.grid.cols)
            .map(|c| match l.get(r, c) {
                p if p > 0.9 => '#',
                p if p > 0.5 => '+',
                p if p > 0.1 => '.',
                _ => ' ',
            })
            .collect();
        println!("|{row}|");
    }
    let mask = threshold_mask(&l, 0.9)?;
    println!("{} of {} cells reach 0.9", mask.count(), l.values.len());

    let dir = std::env::temp_dir().join("probmission-park");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("park.json"), l.to_json())?;
    l.write_csv(std::fs::File::create(dir.join("park.csv"))?)?;
    l.write_png(&dir.join("park.png"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
