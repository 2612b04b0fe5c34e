//! Grounding: turns a (specialized) program into a propositional program.
//!
//! Ground rule instances are found by a bottom-up fixpoint over the atoms that
//! are *possible*, i.e. true in at least one world (every probabilistic fact
//! and disjunction head assumed true). The result is pruned to what the
//! queries depend on, so sampling only ever draws relevant random variables.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::hplp::ast::*;

pub type AtomId = usize;

/// Ground argument; numbers are compared by bit pattern.
#[derive(Debug, Clone, PartialEq)]
enum GTerm {
    Const(String),
    Num(f64),
}

impl GTerm {
    fn to_term(&self) -> Term {
        match self {
            GTerm::Const(s) => Term::Const(s.clone()),
            GTerm::Num(v) => Term::Num(*v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GExpr {
    Num(f64),
    Value(usize),
    Neg(Box<GExpr>),
    Bin(ArithOp, Box<GExpr>, Box<GExpr>),
}

impl GExpr {
    fn constant(&self) -> Option<f64> {
        match self {
            GExpr::Num(v) => Some(*v),
            GExpr::Value(_) => None,
            GExpr::Neg(e) => e.constant().map(|v| -v),
            GExpr::Bin(op, a, b) => Some(op.apply(a.constant()?, b.constant()?)),
        }
    }

    #[inline]
    pub fn eval(&self, values: &[f64]) -> f64 {
        match self {
            GExpr::Num(v) => *v,
            GExpr::Value(i) => values[*i],
            GExpr::Neg(e) => -e.eval(values),
            GExpr::Bin(op, a, b) => op.apply(a.eval(values), b.eval(values)),
        }
    }

    fn for_each_value(&self, f: &mut impl FnMut(usize)) {
        match self {
            GExpr::Value(i) => f(*i),
            GExpr::Neg(e) => e.for_each_value(f),
            GExpr::Bin(_, a, b) => {
                a.for_each_value(f);
                b.for_each_value(f);
            }
            GExpr::Num(_) => {}
        }
    }

    fn remap_values(&mut self, map: &[usize]) {
        match self {
            GExpr::Value(i) => *i = map[*i],
            GExpr::Neg(e) => e.remap_values(map),
            GExpr::Bin(_, a, b) => {
                a.remap_values(map);
                b.remap_values(map);
            }
            GExpr::Num(_) => {}
        }
    }

    fn key(&self, values: &[ValueVar]) -> String {
        match self {
            GExpr::Num(v) => format!("{v}"),
            GExpr::Value(i) => values[*i].name.clone(),
            GExpr::Neg(e) => format!("-({})", e.key(values)),
            GExpr::Bin(op, a, b) => format!("({} {op:?} {})", a.key(values), b.key(values)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundLiteral {
    Atom(AtomId),
    Compare(GExpr, CmpOp, GExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    pub head: AtomId,
    pub body: Vec<GroundLiteral>,
    /// Index into [`GroundProgram::switches`] for probabilistic rules.
    pub switch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbVar {
    pub prob: f64,
    pub atom: AtomId,
}

/// A continuous random value. Only normals are supported; a point mass is
/// folded into a constant during grounding and never appears here.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVar {
    pub name: String,
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Switch {
    pub prob: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundProgram {
    pub atoms: Vec<String>,
    atom_index: HashMap<String, AtomId>,
    pub certain: Vec<AtomId>,
    pub prob_facts: Vec<ProbVar>,
    pub disjunctions: Vec<Vec<(f64, AtomId)>>,
    pub values: Vec<ValueVar>,
    pub switches: Vec<Switch>,
    pub rules: Vec<GroundRule>,
    pub queries: Vec<String>,
    /// Rules are ordered so that one forward pass reaches the fixpoint.
    pub(crate) single_pass: bool,
}

impl GroundProgram {
    pub fn atom_id(&self, atom: &str) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    /// Number of independent discrete random choices.
    pub fn switch_count(&self) -> usize {
        self.prob_facts.len() + self.disjunctions.len() + self.switches.len()
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Term(GTerm),
    Expr(GExpr),
}

type Subst = BTreeMap<String, Binding>;

struct RuleSrc<'a> {
    stmt: usize,
    prob: Option<f64>,
    head: &'a Atom,
    body: &'a Body,
    text: String,
}

struct Grounder<'a> {
    atoms: Vec<String>,
    atom_index: HashMap<String, AtomId>,
    possible: HashMap<(String, usize), Vec<Vec<GTerm>>>,
    possible_set: HashSet<AtomId>,
    values: Vec<ValueVar>,
    /// Known dist atoms: either a random value or a folded constant.
    value_index: HashMap<String, GExpr>,
    rules: Vec<GroundRule>,
    seen_instances: HashSet<(usize, usize, String)>,
    switch_index: HashMap<(usize, String), usize>,
    switches: Vec<Switch>,
    sources: Vec<RuleSrc<'a>>,
    /// Ground atoms something asks for: queries and body calls of found
    /// instances. Rules whose body leaves head variables free are
    /// instantiated against these.
    demanded: Vec<(String, Vec<GTerm>)>,
    demanded_keys: HashSet<String>,
}

fn ground_args(atom: &Atom, subst: &Subst) -> Option<Vec<GTerm>> {
    atom.args
        .iter()
        .map(|t| match t {
            Term::Const(s) => Some(GTerm::Const(s.clone())),
            Term::Num(v) => Some(GTerm::Num(*v)),
            Term::Var(v) => match subst.get(v) {
                Some(Binding::Term(g)) => Some(g.clone()),
                _ => None,
            },
        })
        .collect()
}

fn atom_key(name: &str, args: &[GTerm]) -> String {
    Atom::new(name, args.iter().map(GTerm::to_term).collect()).to_string()
}

fn require_ground(atom: &Atom, what: &str) -> Result<Vec<GTerm>> {
    ground_args(atom, &Subst::new()).ok_or_else(|| {
        Error::Unsupported(format!("{what} `{atom}` must be ground"))
    })
}

/// Matches `atom` against ground `cand`, extending `subst`. Returns the newly
/// bound variables, or `None` (with `subst` untouched) on mismatch.
fn unify(
    atom: &Atom,
    cand: &[GTerm],
    subst: &mut Subst,
    src: &RuleSrc<'_>,
) -> Result<Option<Vec<String>>> {
    let mut bound: Vec<String> = Vec::new();
    for (t, g) in atom.args.iter().zip(cand) {
        let ok = match t {
            Term::Const(s) => matches!(g, GTerm::Const(c) if c == s),
            Term::Num(v) => matches!(g, GTerm::Num(x) if x.to_bits() == v.to_bits()),
            Term::Var(v) => match subst.get(v) {
                Some(Binding::Term(b)) => b == g,
                Some(Binding::Expr(_)) => {
                    return Err(Error::Unsupported(format!(
                        "`{v}` holds a world-dependent value and cannot be used as an argument in `{}`",
                        src.text
                    )))
                }
                None => {
                    subst.insert(v.clone(), Binding::Term(g.clone()));
                    bound.push(v.clone());
                    true
                }
            },
        };
        if !ok {
            for v in &bound {
                subst.remove(v);
            }
            return Ok(None);
        }
    }
    Ok(Some(bound))
}

/// First value reference in a comparison or `is` that still has a free
/// variable.
fn open_ref<'l>(lit: &'l Literal, subst: &Subst) -> Option<&'l Atom> {
    let mut found = None;
    let mut visit = |a: &'l Atom| {
        if found.is_none()
            && a.args.iter().any(|t| matches!(t, Term::Var(v) if !subst.contains_key(v)))
        {
            found = Some(a);
        }
    };
    match lit {
        Literal::Compare(x, _, y) => {
            x.for_each_ref(&mut visit);
            y.for_each_ref(&mut visit);
        }
        Literal::Is(_, e) => e.for_each_ref(&mut visit),
        Literal::Call(_) => {}
    }
    found
}

/// Whether every head variable is bound by the literals of `branch`.
fn range_restricted(head: &Atom, branch: &[Literal]) -> bool {
    let mut bound: HashSet<&str> = HashSet::new();
    for lit in branch {
        match lit {
            Literal::Call(a) => bound.extend(a.vars()),
            Literal::Is(v, e) => {
                bound.insert(v);
                e.for_each_ref(&mut |a| bound.extend(a.vars()));
            }
            Literal::Compare(x, _, y) => {
                x.for_each_ref(&mut |a| bound.extend(a.vars()));
                y.for_each_ref(&mut |a| bound.extend(a.vars()));
            }
        }
    }
    head.vars().all(|v| bound.contains(v))
}

impl<'a> Grounder<'a> {
    fn demand(&mut self, name: &str, args: Vec<GTerm>) {
        if self.demanded_keys.insert(atom_key(name, &args)) {
            self.demanded.push((name.to_string(), args));
        }
    }

    fn intern(&mut self, key: String) -> AtomId {
        if let Some(&id) = self.atom_index.get(&key) {
            return id;
        }
        let id = self.atoms.len();
        self.atoms.push(key.clone());
        self.atom_index.insert(key, id);
        id
    }

    fn add_possible(&mut self, name: &str, args: Vec<GTerm>) -> AtomId {
        let id = self.intern(atom_key(name, &args));
        if self.possible_set.insert(id) {
            self.possible
                .entry((name.to_string(), args.len()))
                .or_default()
                .push(args);
        }
        id
    }

    fn lower_expr(&self, e: &Expr, subst: &Subst, rule: &str) -> Result<GExpr> {
        Ok(match e {
            Expr::Num(v) => GExpr::Num(*v),
            Expr::Var(v) => match subst.get(v) {
                Some(Binding::Term(GTerm::Num(x))) => GExpr::Num(*x),
                Some(Binding::Term(GTerm::Const(c))) => {
                    return Err(Error::Evaluation {
                        rule: rule.to_string(),
                        message: format!("variable {v} is bound to non-numeric `{c}`"),
                    })
                }
                Some(Binding::Expr(g)) => g.clone(),
                None => {
                    return Err(Error::Evaluation {
                        rule: rule.to_string(),
                        message: format!("unbound variable {v} in arithmetic"),
                    })
                }
            },
            Expr::Ref(atom) => {
                let args = ground_args(atom, subst).ok_or_else(|| Error::Evaluation {
                    rule: rule.to_string(),
                    message: format!("unbound variable in value reference `{atom}`"),
                })?;
                let key = atom_key(&atom.name, &args);
                match self.value_index.get(&key) {
                    Some(g) => g.clone(),
                    None => return Err(Error::UnknownAtom(vec![key])),
                }
            }
            Expr::Neg(inner) => {
                let g = self.lower_expr(inner, subst, rule)?;
                match g.constant() {
                    Some(v) => GExpr::Num(-v),
                    None => GExpr::Neg(Box::new(g)),
                }
            }
            Expr::Bin(op, a, b) => {
                let ga = self.lower_expr(a, subst, rule)?;
                let gb = self.lower_expr(b, subst, rule)?;
                match (ga.constant(), gb.constant()) {
                    (Some(x), Some(y)) => GExpr::Num(op.apply(x, y)),
                    _ => GExpr::Bin(*op, Box::new(ga), Box::new(gb)),
                }
            }
        })
    }

    /// Enumerates substitutions satisfying `lits[i..]` over possible atoms.
    fn solve(
        &self,
        src: &RuleSrc<'_>,
        lits: &[Literal],
        subst: &mut Subst,
        acc: &mut Vec<GroundLiteral>,
        out: &mut Vec<(Subst, Vec<GroundLiteral>)>,
    ) -> Result<()> {
        let Some((lit, rest)) = lits.split_first() else {
            out.push((subst.clone(), acc.clone()));
            return Ok(());
        };
        match lit {
            Literal::Call(atom) => {
                let Some(cands) = self.possible.get(&(atom.name.clone(), atom.arity())) else {
                    return Ok(());
                };
                for cand in cands {
                    if let Some(bound) = unify(atom, cand, subst, src)? {
                        let key = atom_key(&atom.name, cand);
                        let id = self.atom_index[&key];
                        acc.push(GroundLiteral::Atom(id));
                        self.solve(src, rest, subst, acc, out)?;
                        acc.pop();
                        for v in bound {
                            subst.remove(&v);
                        }
                    }
                }
                Ok(())
            }
            Literal::Compare(..) | Literal::Is(..) if open_ref(lit, subst).is_some() => {
                // A value reference with free variables ranges over the
                // distributional atoms that match it.
                let atom = open_ref(lit, subst).unwrap();
                let Some(cands) = self.possible.get(&(atom.name.clone(), atom.arity())) else {
                    return Ok(());
                };
                for cand in cands {
                    if !self.value_index.contains_key(&atom_key(&atom.name, cand)) {
                        continue;
                    }
                    if let Some(bound) = unify(atom, cand, subst, src)? {
                        self.solve(src, lits, subst, acc, out)?;
                        for v in bound {
                            subst.remove(&v);
                        }
                    }
                }
                Ok(())
            }
            Literal::Compare(a, op, b) => {
                let ga = self.lower_expr(a, subst, &src.text)?;
                let gb = self.lower_expr(b, subst, &src.text)?;
                match (ga.constant(), gb.constant()) {
                    (Some(x), Some(y)) => {
                        if op.holds(x, y) {
                            self.solve(src, rest, subst, acc, out)?;
                        }
                    }
                    _ => {
                        acc.push(GroundLiteral::Compare(ga, *op, gb));
                        self.solve(src, rest, subst, acc, out)?;
                        acc.pop();
                    }
                }
                Ok(())
            }
            Literal::Is(v, e) => {
                let g = self.lower_expr(e, subst, &src.text)?;
                match (subst.get(v).cloned(), g.constant()) {
                    (None, Some(x)) => {
                        subst.insert(v.clone(), Binding::Term(GTerm::Num(x)));
                        self.solve(src, rest, subst, acc, out)?;
                        subst.remove(v);
                    }
                    (None, None) => {
                        subst.insert(v.clone(), Binding::Expr(g));
                        self.solve(src, rest, subst, acc, out)?;
                        subst.remove(v);
                    }
                    (Some(Binding::Term(GTerm::Num(x))), Some(y)) => {
                        if x == y {
                            self.solve(src, rest, subst, acc, out)?;
                        }
                    }
                    _ => {
                        return Err(Error::Unsupported(format!(
                            "`{v} is ...` with {v} already bound in `{}`",
                            src.text
                        )))
                    }
                }
                Ok(())
            }
        }
    }

    fn subst_key(&self, subst: &Subst) -> String {
        let mut s = String::new();
        for (k, b) in subst {
            s.push_str(k);
            s.push('=');
            match b {
                Binding::Term(g) => s.push_str(&g.to_term().to_string()),
                Binding::Expr(e) => s.push_str(&e.key(&self.values)),
            }
            s.push(';');
        }
        s
    }

    /// Pushes demand from rule heads to the body calls whose arguments the
    /// head alone determines.
    fn propagate_demand(&mut self) -> Result<()> {
        let mut i = 0;
        while i < self.demanded.len() {
            let (name, args) = self.demanded[i].clone();
            let mut new = Vec::new();
            for src in &self.sources {
                if src.head.name != name || src.head.arity() != args.len() {
                    continue;
                }
                let mut seed = Subst::new();
                if unify(src.head, &args, &mut seed, src)?.is_none() {
                    continue;
                }
                for lit in src.body.iter().flatten() {
                    if let Literal::Call(a) = lit {
                        if let Some(g) = ground_args(a, &seed) {
                            new.push((a.name.clone(), g));
                        }
                    }
                }
            }
            for (n, g) in new {
                self.demand(&n, g);
            }
            i += 1;
        }
        Ok(())
    }

    /// One pass over every rule; returns whether a new instance appeared.
    fn pass(&mut self) -> Result<bool> {
        let demand_before = self.demanded.len();
        self.propagate_demand()?;
        let mut grew = self.demanded.len() > demand_before;
        for si in 0..self.sources.len() {
            let src = &self.sources[si];
            let mut found = Vec::new();
            for (bi, branch) in src.body.iter().enumerate() {
                let mut out = Vec::new();
                if range_restricted(src.head, branch) {
                    self.solve(src, branch, &mut Subst::new(), &mut Vec::new(), &mut out)?;
                } else {
                    for (name, args) in &self.demanded {
                        if *name != src.head.name || args.len() != src.head.arity() {
                            continue;
                        }
                        let mut seed = Subst::new();
                        if unify(src.head, args, &mut seed, src)?.is_some() {
                            self.solve(src, branch, &mut seed, &mut Vec::new(), &mut out)?;
                        }
                    }
                }
                found.extend(out.into_iter().map(|(s, b)| (bi, s, b)));
            }
            let (stmt, prob, head, src_body) = (src.stmt, src.prob, src.head, src.body);
            let text = src.text.clone();
            for (bi, subst, body) in found {
                let key = self.subst_key(&subst);
                if !self.seen_instances.insert((stmt, bi, key.clone())) {
                    continue;
                }
                let args = ground_args(head, &subst).ok_or_else(|| Error::Evaluation {
                    rule: text.clone(),
                    message: "head variable not bound by the body".into(),
                })?;
                let switch = prob.map(|p| {
                    let next = self.switches.len();
                    let label = format!("{}#{key}", text);
                    *self.switch_index.entry((stmt, key)).or_insert_with(|| {
                        self.switches.push(Switch { prob: p, label });
                        next
                    })
                });
                let head_id = self.add_possible(&head.name, args);
                for lit in &src_body[bi] {
                    if let Literal::Call(a) = lit {
                        if let Some(args) = ground_args(a, &subst) {
                            self.demand(&a.name, args);
                        }
                    }
                }
                self.rules.push(GroundRule {
                    head: head_id,
                    body,
                    switch,
                });
                grew = true;
            }
        }
        Ok(grew)
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("probability {p} of {what} outside [0, 1]")))
    }
}

/// Grounds `program` and prunes it to what its queries depend on.
///
/// Queries must be ground; use `specialize` first for grid programs.
pub fn ground(program: &Program) -> Result<GroundProgram> {
    let mut g = Grounder {
        atoms: Vec::new(),
        atom_index: HashMap::new(),
        possible: HashMap::new(),
        possible_set: HashSet::new(),
        values: Vec::new(),
        value_index: HashMap::new(),
        rules: Vec::new(),
        seen_instances: HashSet::new(),
        switch_index: HashMap::new(),
        switches: Vec::new(),
        sources: Vec::new(),
        demanded: Vec::new(),
        demanded_keys: HashSet::new(),
    };
    let mut certain = Vec::new();
    let mut prob_facts = Vec::new();
    let mut disjunctions = Vec::new();
    let mut queries = Vec::new();

    for (si, s) in program.statements.iter().enumerate() {
        match s {
            Statement::Rule { prob, head, body } if body.is_empty() => {
                let args = require_ground(head, "fact")?;
                let id = g.add_possible(&head.name, args);
                match prob {
                    None => certain.push(id),
                    Some(p) => {
                        check_prob(*p, &head.to_string())?;
                        prob_facts.push(ProbVar { prob: *p, atom: id })
                    }
                }
            }
            Statement::Rule { prob, head, body } => {
                if let Some(p) = prob {
                    check_prob(*p, &head.to_string())?;
                }
                g.sources.push(RuleSrc {
                    stmt: si,
                    prob: *prob,
                    head,
                    body,
                    text: s.to_string().replace("\n    ", " "),
                });
            }
            Statement::ProbFact { prob, atom } => {
                check_prob(*prob, &atom.to_string())?;
                let args = require_ground(atom, "probabilistic fact")?;
                let id = g.add_possible(&atom.name, args);
                prob_facts.push(ProbVar { prob: *prob, atom: id });
            }
            Statement::AnnotatedDisjunction(heads) => {
                let mut total = 0.0;
                let mut ad = Vec::new();
                for (p, atom) in heads {
                    check_prob(*p, &atom.to_string())?;
                    total += p;
                    let args = require_ground(atom, "annotated disjunction head")?;
                    ad.push((*p, g.add_possible(&atom.name, args)));
                }
                if total > 1.0 + 1e-9 {
                    return Err(Error::domain(format!(
                        "annotated disjunction weights sum to {total} > 1"
                    )));
                }
                disjunctions.push(ad);
            }
            Statement::DistFact { atom, dist } => {
                let args = require_ground(atom, "distributional fact")?;
                let key = atom_key(&atom.name, &args);
                if g.value_index.contains_key(&key) {
                    return Err(Error::domain(format!(
                        "`{key}` has more than one distribution"
                    )));
                }
                let value = match (dist.family.as_str(), dist.params.as_slice()) {
                    ("normal", [mean, var]) if *var >= 0.0 && !mean.is_nan() => {
                        if *var == 0.0 {
                            GExpr::Num(*mean)
                        } else {
                            g.values.push(ValueVar {
                                name: key.clone(),
                                mean: *mean,
                                std_dev: var.sqrt(),
                            });
                            GExpr::Value(g.values.len() - 1)
                        }
                    }
                    ("normal", _) => {
                        return Err(Error::config(format!(
                            "`{key} ~ {dist}`: normal takes (mean, variance >= 0)"
                        )))
                    }
                    (family, _) => {
                        return Err(Error::config(format!(
                            "unsupported distribution family `{family}` for `{key}`"
                        )))
                    }
                };
                g.value_index.insert(key, value);
                let id = g.add_possible(&atom.name, args);
                certain.push(id);
            }
            Statement::Query(atom) => {
                if !atom.is_ground() {
                    return Err(Error::domain(format!(
                        "query `{atom}` is not ground; bind its variables first"
                    )));
                }
                g.demand(&atom.name, require_ground(atom, "query")?);
                queries.push(atom.to_string());
            }
        }
    }

    while g.pass()? {}

    let query_ids: Vec<AtomId> = queries.iter().map(|q| g.intern(q.clone())).collect();
    Ok(prune(g, certain, prob_facts, disjunctions, queries, &query_ids))
}

fn prune(
    g: Grounder<'_>,
    certain: Vec<AtomId>,
    prob_facts: Vec<ProbVar>,
    disjunctions: Vec<Vec<(f64, AtomId)>>,
    queries: Vec<String>,
    query_ids: &[AtomId],
) -> GroundProgram {
    let n = g.atoms.len();
    let mut rules_by_head: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, r) in g.rules.iter().enumerate() {
        rules_by_head[r.head].push(i);
    }
    let mut relevant = vec![false; n];
    let mut stack: Vec<AtomId> = query_ids.to_vec();
    while let Some(a) = stack.pop() {
        if std::mem::replace(&mut relevant[a], true) {
            continue;
        }
        for &ri in &rules_by_head[a] {
            for lit in &g.rules[ri].body {
                if let GroundLiteral::Atom(b) = lit {
                    if !relevant[*b] {
                        stack.push(*b);
                    }
                }
            }
        }
    }

    let mut value_map = vec![usize::MAX; g.values.len()];
    let mut values = Vec::new();
    let mut switch_map = vec![usize::MAX; g.switches.len()];
    let mut switches = Vec::new();
    let mut rules = Vec::new();
    for r in g.rules.into_iter().filter(|r| relevant[r.head]) {
        let mut r = r;
        for lit in &mut r.body {
            if let GroundLiteral::Compare(a, _, b) = lit {
                let mut visit = |i: usize| {
                    if value_map[i] == usize::MAX {
                        value_map[i] = values.len();
                        values.push(g.values[i].clone());
                    }
                };
                a.for_each_value(&mut visit);
                b.for_each_value(&mut visit);
                a.remap_values(&value_map);
                b.remap_values(&value_map);
            }
        }
        if let Some(s) = r.switch {
            if switch_map[s] == usize::MAX {
                switch_map[s] = switches.len();
                switches.push(g.switches[s].clone());
            }
            r.switch = Some(switch_map[s]);
        }
        rules.push(r);
    }

    // A rule can fire in one forward pass if every derived atom in its body
    // is the head of an earlier rule only.
    let mut last_def = vec![None; n];
    for (i, r) in rules.iter().enumerate() {
        last_def[r.head] = Some(i);
    }
    let single_pass = rules.iter().enumerate().all(|(i, r)| {
        r.body.iter().all(|l| match l {
            GroundLiteral::Atom(a) => last_def[*a].is_none_or(|j| j < i),
            GroundLiteral::Compare(..) => true,
        })
    });

    GroundProgram {
        certain: certain.into_iter().filter(|a| relevant[*a]).collect(),
        prob_facts: prob_facts.into_iter().filter(|p| relevant[p.atom]).collect(),
        disjunctions: disjunctions
            .into_iter()
            .filter(|d| d.iter().any(|(_, a)| relevant[*a]))
            .collect(),
        atoms: g.atoms,
        atom_index: g.atom_index,
        values,
        switches,
        rules,
        queries,
        single_pass,
    }
}
