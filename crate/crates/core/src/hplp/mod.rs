//! Hybrid probabilistic logic programs: the mission rule language.
//!
//! Programs mix probabilistic facts (`0.9::over(r0, c0, park).`), annotated
//! disjunctions (`1/10::fog; 9/10::clear.`), distributional facts
//! (`weight ~ normal(2.0, 0.1).`, mean and variance) and negation-free definite
//! rules whose bodies may compare arithmetic over world-valued atoms.
//!
//! Inference is by sampling possible worlds: each probabilistic fact,
//! disjunction, distributional atom and probabilistic-rule instance is drawn
//! once per world, the least model is computed bottom-up, and the query is
//! read off.

mod ast;
mod ground;
mod infer;
mod parser;
mod specialize;

pub use ast::*;
pub use ground::{
    ground, AtomId, GExpr, GroundLiteral, GroundProgram, GroundRule, ProbVar, Switch, ValueVar,
};
pub use infer::{
    evaluate, infer_exact_discrete, infer_sampling, infer_sampling_stream, sample_world,
    InferenceMode, InferenceParams, PossibleWorld, DEFAULT_SAMPLE_COUNT, MAX_EXACT_SWITCHES,
};
pub use parser::parse_program;
pub use specialize::{
    col_const, grid_bindings, grid_query, row_const, specialize, Bindings, SPATIAL_RELATIONS,
};

/// A parsed rule program.
pub type MissionProgram = Program;
