use std::fmt;

/// Argument of an atom. Nested compound terms are not part of the language.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Const(String),
    Var(String),
    Num(f64),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(s) | Term::Var(s) => f.write_str(s),
            Term::Num(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub name: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(name: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            name: name.into(),
            args,
        }
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Atom::new(name, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_var)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
        }
    }
}

/// Arithmetic over numbers, variables and world-valued atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    /// Value of a distributional atom in the current world.
    Ref(Atom),
    Neg(Box<Expr>),
    Bin(ArithOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.precedence(),
            _ => 3,
        }
    }

    /// Visits every variable name in the expression.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Var(v) => f(v),
            Expr::Ref(a) => a.vars().for_each(f),
            Expr::Neg(e) => e.for_each_var(f),
            Expr::Bin(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Num(_) => {}
        }
    }

    pub fn for_each_ref<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Expr::Ref(a) => f(a),
            Expr::Neg(e) => e.for_each_ref(f),
            Expr::Bin(_, a, b) => {
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
            Expr::Num(_) | Expr::Var(_) => {}
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Ref(a) => write!(f, "{a}"),
            Expr::Neg(e) => {
                if e.precedence() < 3 {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "=<",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Call(Atom),
    Compare(Expr, CmpOp, Expr),
    /// `Var is Expr`
    Is(String, Expr),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Call(a) => write!(f, "{a}"),
            Literal::Compare(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Literal::Is(v, e) => write!(f, "{v} is {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub family: String,
    pub params: Vec<f64>,
}

impl Distribution {
    /// Normal with mean and *variance*.
    pub fn normal(mean: f64, variance: f64) -> Self {
        Distribution {
            family: "normal".into(),
            params: vec![mean, variance],
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// A disjunction of conjunctions.
pub type Body = Vec<Vec<Literal>>;

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    /// `p::atom.`
    ProbFact { prob: f64, atom: Atom },
    /// `atom ~ family(params).`
    DistFact { atom: Atom, dist: Distribution },
    /// `p1::a1; p2::a2; ...` with at least two heads.
    AnnotatedDisjunction(Vec<(f64, Atom)>),
    /// `[p::]head [:- body].` A fact is a rule with an empty body.
    Rule {
        prob: Option<f64>,
        head: Atom,
        body: Body,
    },
    Query(Atom),
}

impl Statement {
    pub fn fact(atom: Atom) -> Self {
        Statement::Rule {
            prob: None,
            head: atom,
            body: Vec::new(),
        }
    }
}

// Probabilities print with `{:?}` so that 0 and 1 keep a decimal point.
impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::ProbFact { prob, atom } => write!(f, "{prob:?}::{atom}."),
            Statement::DistFact { atom, dist } => write!(f, "{atom} ~ {dist}."),
            Statement::AnnotatedDisjunction(heads) => {
                for (i, (p, a)) in heads.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{p:?}::{a}")?;
                }
                f.write_str(".")
            }
            Statement::Rule { prob, head, body } => {
                if let Some(p) = prob {
                    write!(f, "{p:?}::")?;
                }
                write!(f, "{head}")?;
                if !body.is_empty() {
                    f.write_str(" :- ")?;
                    for (i, conj) in body.iter().enumerate() {
                        if i > 0 {
                            f.write_str(";\n    ")?;
                        }
                        for (j, lit) in conj.iter().enumerate() {
                            if j > 0 {
                                f.write_str(", ")?;
                            }
                            write!(f, "{lit}")?;
                        }
                    }
                }
                f.write_str(".")
            }
            Statement::Query(a) => write!(f, "query({a})."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub statements: Vec<Statement>,
}

impl Program {
    pub fn new(statements: Vec<Statement>) -> Self {
        Program { statements }
    }

    pub fn queries(&self) -> impl Iterator<Item = &Atom> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Query(a) => Some(a),
            _ => None,
        })
    }

    pub fn has_dist_facts(&self) -> bool {
        self.statements
            .iter()
            .any(|s| matches!(s, Statement::DistFact { .. }))
    }

    /// Replaces the probability of every probabilistic fact on a 0-ary atom
    /// `name`, or turns a plain fact `name.` into one. Returns how many
    /// statements changed.
    pub fn set_fact_probability(&mut self, name: &str, p: f64) -> usize {
        let mut changed = 0;
        for s in &mut self.statements {
            match s {
                Statement::ProbFact { prob, atom } if atom.name == name && atom.args.is_empty() => {
                    *prob = p;
                    changed += 1;
                }
                Statement::Rule { prob: None, head, body }
                    if body.is_empty() && head.name == name && head.args.is_empty() =>
                {
                    *s = Statement::ProbFact {
                        prob: p,
                        atom: head.clone(),
                    };
                    changed += 1;
                }
                _ => {}
            }
        }
        changed
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
