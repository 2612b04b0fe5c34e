use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::hplp::ast::*;

/// Relations filled in per grid cell by the clause modules.
pub const SPATIAL_RELATIONS: [&str; 2] = ["distance", "over"];

/// Variable name → value used to ground query atoms.
pub type Bindings = BTreeMap<String, Term>;

/// Constant naming grid row `r` in clause text (`r0`, `r1`, ...).
pub fn row_const(r: usize) -> String {
    format!("r{r}")
}

pub fn col_const(c: usize) -> String {
    format!("c{c}")
}

/// The first query with two variable arguments, e.g. `landscape(R, C)`.
pub fn grid_query(program: &Program) -> Option<&Atom> {
    program
        .queries()
        .find(|q| q.arity() == 2 && q.args.iter().all(Term::is_var))
}

/// Binds the two variables of a grid query to the constants of cell `(r, c)`.
pub fn grid_bindings(query: &Atom, r: usize, c: usize) -> Result<Bindings> {
    match query.args.as_slice() {
        [Term::Var(rv), Term::Var(cv)] if rv != cv => Ok(Bindings::from([
            (rv.clone(), Term::Const(row_const(r))),
            (cv.clone(), Term::Const(col_const(c))),
        ])),
        _ => Err(Error::domain(format!(
            "query `{query}` does not have a (Row, Col) grid signature"
        ))),
    }
}

fn bind_atom(atom: &Atom, bindings: &Bindings) -> Atom {
    Atom {
        name: atom.name.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
                _ => t.clone(),
            })
            .collect(),
    }
}

fn spatial_tag(atom: &Atom) -> Option<(&str, &str)> {
    if atom.arity() != 3 || !SPATIAL_RELATIONS.contains(&atom.name.as_str()) {
        return None;
    }
    match &atom.args[2] {
        Term::Const(tag) => Some((atom.name.as_str(), tag.as_str())),
        _ => None,
    }
}

fn defined_atoms(s: &Statement) -> Vec<&Atom> {
    match s {
        Statement::ProbFact { atom, .. } | Statement::DistFact { atom, .. } => vec![atom],
        Statement::Rule { head, .. } => vec![head],
        Statement::AnnotatedDisjunction(h) => h.iter().map(|(_, a)| a).collect(),
        Statement::Query(_) => vec![],
    }
}

fn used_atoms(s: &Statement, out: &mut Vec<Atom>) {
    if let Statement::Rule { body, .. } = s {
        for lit in body.iter().flatten() {
            match lit {
                Literal::Call(a) => out.push(a.clone()),
                Literal::Compare(x, _, y) => {
                    x.for_each_ref(&mut |a| out.push(a.clone()));
                    y.for_each_ref(&mut |a| out.push(a.clone()));
                }
                Literal::Is(_, e) => e.for_each_ref(&mut |a| out.push(a.clone())),
            }
        }
    }
}

/// Adds per-cell clause facts to `program` and grounds its queries with
/// `bindings`.
///
/// Fails with [`Error::UnknownAtom`] when the rules use a spatial relation
/// (`distance`/`over`) for a feature type that has no clauses.
pub fn specialize(program: &Program, clauses: &[Statement], bindings: &Bindings) -> Result<Program> {
    let mut known: BTreeSet<(&str, &str)> = BTreeSet::new();
    for s in program.statements.iter().chain(clauses) {
        for a in defined_atoms(s) {
            if let Some(k) = spatial_tag(a) {
                known.insert(k);
            }
        }
    }
    let mut used = Vec::new();
    for s in &program.statements {
        used_atoms(s, &mut used);
    }
    let missing: BTreeSet<String> = used
        .iter()
        .filter_map(spatial_tag)
        .filter(|k| !known.contains(k))
        .map(|(_, tag)| tag.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownAtom(missing.into_iter().collect()));
    }

    let mut statements: Vec<Statement> = program
        .statements
        .iter()
        .map(|s| match s {
            Statement::Query(q) => Statement::Query(bind_atom(q, bindings)),
            other => other.clone(),
        })
        .collect();
    statements.extend(clauses.iter().cloned());
    Ok(Program { statements })
}
