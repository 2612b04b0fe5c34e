//! Parses rule programs, grounds them and answers their queries exactly and
//! by sampling.

use probmission::hplp::{ground, infer_exact_discrete, infer_sampling, parse_program, InferenceParams};

const WEATHER: &str = "\
0.3::windy.
0.1::rain; 0.2::snow.
grounded :- windy, rain.
grounded :- snow.
0.5::grounded :- windy.
query(grounded).
";

fn main() -> probmission::Result<()> {
    for (name, text) in [("listing 1", include_str!("../fixtures/listings/listing1.pl")), ("weather", WEATHER)] {
        let program = parse_program(text)?;
        let g = ground(&program)?;
        for q in program.queries() {
            let exact = infer_exact_discrete(&g, q)?;
            let sampled = infer_sampling(&g, q, &InferenceParams::sampling(20_000, 1))?;
            println!("{name}: P({q}) = {exact:.4} exact, {sampled:.4} sampled");
        }
    }

    let battery = parse_program("charge ~ normal(40, 25).\nenough :- charge > 30.\nquery(enough).\n")?;
    let p = infer_sampling(&ground(&battery)?, battery.queries().next().unwrap(), &InferenceParams::sampling(50_000, 2))?;
    println!("P(charge > 30) = {p:.4}");

    match parse_program("fly :- clear\nquery(fly).") {
        Err(e) => println!("diagnostic: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
