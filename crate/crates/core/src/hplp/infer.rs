//! Possible worlds, least-model evaluation and the two inference routes:
//! Monte Carlo over sampled worlds, and exact enumeration for small discrete
//! programs (used as a test oracle).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hplp::ast::Atom;
use crate::hplp::ground::{AtomId, GroundLiteral, GroundProgram};
use crate::rng::StreamRng;

const WORLD_DOMAIN: u64 = 0x776f_726c_6473;

/// Exact enumeration refuses programs with more switches than this.
pub const MAX_EXACT_SWITCHES: usize = 24;

/// Per-cell world count used when none is configured.
pub const DEFAULT_SAMPLE_COUNT: usize = 2_500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    #[default]
    Sampling,
    ExactDiscrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct InferenceParams {
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: InferenceMode,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            sample_count: DEFAULT_SAMPLE_COUNT,
            seed: 0,
            mode: InferenceMode::Sampling,
        }
    }
}

impl InferenceParams {
    pub fn sampling(sample_count: usize, seed: u64) -> Self {
        InferenceParams {
            sample_count,
            seed,
            mode: InferenceMode::Sampling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::domain("sample count must be >= 1"));
        }
        Ok(())
    }
}

/// One joint assignment of every random variable of a ground program.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PossibleWorld {
    pub facts: Vec<bool>,
    /// Chosen head per disjunction; `None` is the residual "no head" outcome.
    pub choices: Vec<Option<usize>>,
    pub values: Vec<f64>,
    pub switches: Vec<bool>,
}

impl PossibleWorld {
    fn sized_for(g: &GroundProgram) -> Self {
        PossibleWorld {
            facts: vec![false; g.prob_facts.len()],
            choices: vec![None; g.disjunctions.len()],
            values: vec![0.0; g.values.len()],
            switches: vec![false; g.switches.len()],
        }
    }

    /// Probability mass of this world; continuous values are ignored.
    fn discrete_weight(&self, g: &GroundProgram) -> f64 {
        let mut w = 1.0;
        for (f, &t) in g.prob_facts.iter().zip(&self.facts) {
            w *= if t { f.prob } else { 1.0 - f.prob };
        }
        for (d, c) in g.disjunctions.iter().zip(&self.choices) {
            w *= match c {
                Some(i) => d[*i].0,
                None => 1.0 - d.iter().map(|(p, _)| p).sum::<f64>(),
            };
        }
        for (s, &t) in g.switches.iter().zip(&self.switches) {
            w *= if t { s.prob } else { 1.0 - s.prob };
        }
        w
    }
}

fn fill_world<R: Rng + ?Sized>(g: &GroundProgram, world: &mut PossibleWorld, rng: &mut R) {
    for (slot, f) in world.facts.iter_mut().zip(&g.prob_facts) {
        *slot = rng.random::<f64>() < f.prob;
    }
    for (slot, d) in world.choices.iter_mut().zip(&g.disjunctions) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        *slot = None;
        for (i, (p, _)) in d.iter().enumerate() {
            acc += p;
            if u < acc {
                *slot = Some(i);
                break;
            }
        }
    }
    for (slot, v) in world.values.iter_mut().zip(&g.values) {
        let z: f64 = rng.sample(StandardNormal);
        *slot = v.mean + v.std_dev * z;
    }
    for (slot, s) in world.switches.iter_mut().zip(&g.switches) {
        *slot = rng.random::<f64>() < s.prob;
    }
}

/// Draws every random variable of `g` once.
pub fn sample_world<R: Rng + ?Sized>(g: &GroundProgram, rng: &mut R) -> PossibleWorld {
    let mut w = PossibleWorld::sized_for(g);
    fill_world(g, &mut w, rng);
    w
}

/// Least model of the definite program induced by `world`, written into
/// `truth` (indexed by atom id).
fn least_model(g: &GroundProgram, world: &PossibleWorld, truth: &mut Vec<bool>) {
    truth.clear();
    truth.resize(g.atoms.len(), false);
    for &a in &g.certain {
        truth[a] = true;
    }
    for (f, &t) in g.prob_facts.iter().zip(&world.facts) {
        if t {
            truth[f.atom] = true;
        }
    }
    for (d, c) in g.disjunctions.iter().zip(&world.choices) {
        if let Some(i) = c {
            truth[d[*i].1] = true;
        }
    }
    loop {
        let mut changed = false;
        for r in &g.rules {
            if truth[r.head] {
                continue;
            }
            if let Some(s) = r.switch {
                if !world.switches[s] {
                    continue;
                }
            }
            let fires = r.body.iter().all(|l| match l {
                GroundLiteral::Atom(a) => truth[*a],
                GroundLiteral::Compare(x, op, y) => {
                    op.holds(x.eval(&world.values), y.eval(&world.values))
                }
            });
            if fires {
                truth[r.head] = true;
                changed = true;
            }
        }
        if !changed || g.single_pass {
            break;
        }
    }
}

fn query_id(g: &GroundProgram, query: &Atom) -> Result<Option<AtomId>> {
    if !query.is_ground() {
        return Err(Error::domain(format!("query `{query}` is not ground")));
    }
    Ok(g.atom_id(&query.to_string()))
}

/// Truth of `query` in the least model of `world`.
pub fn evaluate(g: &GroundProgram, world: &PossibleWorld, query: &Atom) -> Result<bool> {
    let Some(q) = query_id(g, query)? else {
        return Ok(false);
    };
    let mut truth = Vec::new();
    least_model(g, world, &mut truth);
    Ok(truth[q])
}

/// Number of sampled worlds in `range` where atom `q` holds. World `i` draws
/// from the stream keyed by `(seed, stream, i)`.
fn count_hits(
    g: &GroundProgram,
    q: AtomId,
    seed: u64,
    stream: u64,
    range: std::ops::Range<usize>,
) -> u64 {
    let mut world = PossibleWorld::sized_for(g);
    let mut truth = Vec::with_capacity(g.atoms.len());
    let mut hits = 0;
    for i in range {
        let mut rng = StreamRng::new(seed, &[WORLD_DOMAIN, stream, i as u64]);
        fill_world(g, &mut world, &mut rng);
        least_model(g, &world, &mut truth);
        hits += u64::from(truth[q]);
    }
    hits
}

/// Monte Carlo estimate on one stream, computed sequentially. Grid cells use
/// their own stream so each cell is reproducible in isolation.
pub fn infer_sampling_stream(
    g: &GroundProgram,
    query: &Atom,
    params: &InferenceParams,
    stream: u64,
) -> Result<f64> {
    params.validate()?;
    let Some(q) = query_id(g, query)? else {
        return Ok(0.0);
    };
    let hits = count_hits(g, q, params.seed, stream, 0..params.sample_count);
    Ok(hits as f64 / params.sample_count as f64)
}

/// Fraction of sampled worlds where `query` holds.
///
/// Worlds are split across the rayon pool; the count does not depend on
/// the split.
pub fn infer_sampling(g: &GroundProgram, query: &Atom, params: &InferenceParams) -> Result<f64> {
    params.validate()?;
    let Some(q) = query_id(g, query)? else {
        return Ok(0.0);
    };
    const CHUNK: usize = 4096;
    let n = params.sample_count;
    let hits: u64 = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| count_hits(g, q, params.seed, 0, k * CHUNK..((k + 1) * CHUNK).min(n)))
        .sum();
    Ok(hits as f64 / n as f64)
}

/// Exact query probability by enumerating every discrete world.
pub fn infer_exact_discrete(g: &GroundProgram, query: &Atom) -> Result<f64> {
    if !g.values.is_empty() {
        return Err(Error::Unsupported(format!(
            "exact inference needs a discrete program; continuous values: {}",
            g.values
                .iter()
                .map(|v| v.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let k = g.switch_count();
    if k > MAX_EXACT_SWITCHES {
        return Err(Error::Capacity {
            found: k,
            limit: MAX_EXACT_SWITCHES,
        });
    }
    let Some(q) = query_id(g, query)? else {
        return Ok(0.0);
    };

    let mut world = PossibleWorld::sized_for(g);
    let mut truth = Vec::new();
    let mut total = 0.0;
    enumerate(g, q, 0, &mut world, &mut truth, &mut total);
    Ok(total)
}

fn enumerate(
    g: &GroundProgram,
    q: AtomId,
    slot: usize,
    world: &mut PossibleWorld,
    truth: &mut Vec<bool>,
    total: &mut f64,
) {
    let (nf, nd) = (g.prob_facts.len(), g.disjunctions.len());
    if slot == nf + nd + g.switches.len() {
        let w = world.discrete_weight(g);
        if w > 0.0 {
            least_model(g, world, truth);
            if truth[q] {
                *total += w;
            }
        }
        return;
    }
    if slot < nf {
        for t in [true, false] {
            world.facts[slot] = t;
            enumerate(g, q, slot + 1, world, truth, total);
        }
    } else if slot < nf + nd {
        let d = slot - nf;
        for c in (0..g.disjunctions[d].len()).map(Some).chain([None]) {
            world.choices[d] = c;
            enumerate(g, q, slot + 1, world, truth, total);
        }
        world.choices[d] = None;
    } else {
        let s = slot - nf - nd;
        for t in [true, false] {
            world.switches[s] = t;
            enumerate(g, q, slot + 1, world, truth, total);
        }
    }
}
