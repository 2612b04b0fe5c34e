//! Recursive-descent parser for mission rule programs.
//!
//! The surface syntax is ProbLog-like:
//!
//! ```text
//! % comment
//! registered.
//! initial_charge ~ normal(90, 5).
//! 1/10::fog; 9/10::clear.
//! 0.9::over(r0, c0, park).
//! vlos(R, C) :- fog, distance(R, C, operator) < 250;
//!     clear, distance(R, C, operator) < 500.
//! can_return(R, C) :- B is initial_charge, 0 < B + 2 * D.
//! query(landscape(R, C)).
//! ```
//!
//! On a syntax error the parser records a diagnostic, skips to the next
//! statement terminator and keeps going, so one pass reports every broken
//! statement.

use crate::error::{Diagnostic, Error, Result};
use crate::hplp::ast::*;

const PROB_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Var(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Semi,
    End,
    ColonColon,
    Neck,
    Tilde,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(s) => format!("name `{s}`"),
            Tok::Var(s) => format!("variable `{s}`"),
            Tok::Num(v) => format!("number `{v}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::End => "`.`".into(),
            Tok::ColonColon => "`::`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Le => "`=<`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn diag(line: usize, column: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> std::result::Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            bump!();
            continue;
        }
        if ch == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(diag(l0, c0, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }

        let (l0, c0) = (line, col);
        let tok = if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            if ch.is_ascii_uppercase() || ch == '_' {
                Tok::Var(word)
            } else {
                Tok::Name(word)
            }
        } else if ch.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| diag(l0, c0, format!("invalid number `{s}`")))?;
            Tok::Num(v)
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (ch, next) {
                (':', Some(':')) => (Tok::ColonColon, 2),
                (':', Some('-')) => (Tok::Neck, 2),
                ('=', Some('<')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                (';', _) => (Tok::Semi, 1),
                ('.', _) => (Tok::End, 1),
                ('~', _) => (Tok::Tilde, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                _ => return Err(diag(l0, c0, format!("unexpected character `{ch}`"))),
            };
            for _ in 0..len {
                bump!();
            }
            tok
        };
        out.push(Token {
            tok,
            line: l0,
            column: c0,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = std::result::Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, what: &str) -> Diagnostic {
        let t = self.here();
        diag(
            t.line,
            t.column,
            format!("expected {what}, found {}", t.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error_here(what))
        }
    }

    /// Skips past the next `.` outside parentheses (or to end of input).
    fn recover(&mut self) {
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::End => {
                    self.advance();
                    return;
                }
                _ => {
                    self.advance();
                }
            }
        }
    }

    fn program(&mut self) -> std::result::Result<Program, Vec<Diagnostic>> {
        let mut statements = Vec::new();
        let mut diags = Vec::new();
        while *self.peek() != Tok::Eof {
            let start = self.pos;
            match self.statement() {
                Ok(s) => statements.push(s),
                Err(d) => {
                    diags.push(d);
                    if self.pos == start || self.toks[self.pos - 1].tok != Tok::End {
                        self.recover();
                    }
                }
            }
        }
        if diags.is_empty() {
            Ok(Program { statements })
        } else {
            Err(diags)
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        match self.peek() {
            Tok::Num(_) => self.weighted_statement(),
            Tok::Name(n) if n == "query" && *self.peek_at(1) == Tok::LParen => {
                self.advance();
                self.advance();
                let atom = self.atom()?;
                self.expect(Tok::RParen, "`)` closing query")?;
                self.expect(Tok::End, "`.` after query")?;
                Ok(Statement::Query(atom))
            }
            Tok::Name(_) => {
                let head = self.atom()?;
                match self.peek() {
                    Tok::Tilde => {
                        self.advance();
                        let dist = self.distribution()?;
                        self.expect(Tok::End, "`.` after distributional fact")?;
                        Ok(Statement::DistFact { atom: head, dist })
                    }
                    Tok::Neck => {
                        self.advance();
                        let body = self.body()?;
                        self.expect(Tok::End, "`.` at end of rule")?;
                        Ok(Statement::Rule {
                            prob: None,
                            head,
                            body,
                        })
                    }
                    Tok::End => {
                        self.advance();
                        Ok(Statement::fact(head))
                    }
                    _ => Err(self.error_here("`.`, `:-` or `~`")),
                }
            }
            _ => Err(self.error_here("a statement")),
        }
    }

    fn weight(&mut self) -> PResult<f64> {
        let t = self.here().clone();
        let Tok::Num(num) = t.tok else {
            return Err(self.error_here("a probability"));
        };
        self.advance();
        let mut p = num;
        if *self.peek() == Tok::Slash {
            self.advance();
            let d = self.here().clone();
            let Tok::Num(den) = d.tok else {
                return Err(self.error_here("a denominator"));
            };
            self.advance();
            if den == 0.0 {
                return Err(diag(d.line, d.column, "zero denominator in probability"));
            }
            p = num / den;
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(diag(
                t.line,
                t.column,
                format!("probability {p} outside [0, 1]"),
            ));
        }
        Ok(p)
    }

    fn weighted_statement(&mut self) -> PResult<Statement> {
        let start = self.here().clone();
        let mut heads = Vec::new();
        loop {
            let p = self.weight()?;
            self.expect(Tok::ColonColon, "`::` after probability")?;
            let atom = self.atom()?;
            heads.push((p, atom));
            if *self.peek() == Tok::Semi {
                self.advance();
            } else {
                break;
            }
        }
        let total: f64 = heads.iter().map(|(p, _)| p).sum();
        if total > 1.0 + PROB_EPS {
            return Err(diag(
                start.line,
                start.column,
                format!("annotated disjunction weights sum to {total} > 1"),
            ));
        }
        if *self.peek() == Tok::Neck {
            if heads.len() > 1 {
                return Err(diag(
                    start.line,
                    start.column,
                    "annotated disjunctions with a body are not supported",
                ));
            }
            self.advance();
            let body = self.body()?;
            self.expect(Tok::End, "`.` at end of rule")?;
            let (p, head) = heads.pop().expect("one head");
            return Ok(Statement::Rule {
                prob: Some(p),
                head,
                body,
            });
        }
        self.expect(Tok::End, "`.` after probabilistic fact")?;
        if heads.len() == 1 {
            let (prob, atom) = heads.pop().expect("one head");
            Ok(Statement::ProbFact { prob, atom })
        } else {
            Ok(Statement::AnnotatedDisjunction(heads))
        }
    }

    fn distribution(&mut self) -> PResult<Distribution> {
        let family = match self.advance().tok {
            Tok::Name(n) => n,
            _ => {
                self.pos -= 1;
                return Err(self.error_here("a distribution family"));
            }
        };
        self.expect(Tok::LParen, "`(` after distribution family")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.signed_number()?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` closing distribution parameters")?;
        Ok(Distribution { family, params })
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let neg = if *self.peek() == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        let v = match self.peek().clone() {
            Tok::Num(v) => v,
            Tok::Name(n) if n == "inf" => f64::INFINITY,
            _ => return Err(self.error_here("a number")),
        };
        self.advance();
        Ok(if neg { -v } else { v })
    }

    fn atom(&mut self) -> PResult<Atom> {
        let name = match self.peek().clone() {
            Tok::Name(n) => n,
            _ => return Err(self.error_here("an atom")),
        };
        self.advance();
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.advance();
            loop {
                args.push(self.term()?);
                match self.peek() {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RParen => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.error_here("`,` or `)` in argument list")),
                }
            }
        }
        Ok(Atom { name, args })
    }

    fn term(&mut self) -> PResult<Term> {
        let t = match self.peek().clone() {
            Tok::Name(n) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    return Err(self.error_here("a constant (nested terms are not supported)"));
                }
                Term::Const(n)
            }
            Tok::Var(v) => {
                self.advance();
                Term::Var(v)
            }
            Tok::Num(_) | Tok::Minus => Term::Num(self.signed_number()?),
            _ => return Err(self.error_here("a term")),
        };
        Ok(t)
    }

    fn body(&mut self) -> PResult<Body> {
        let mut body = vec![self.conjunction()?];
        while *self.peek() == Tok::Semi {
            self.advance();
            body.push(self.conjunction()?);
        }
        Ok(body)
    }

    fn conjunction(&mut self) -> PResult<Vec<Literal>> {
        let mut lits = vec![self.literal()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            lits.push(self.literal()?);
        }
        Ok(lits)
    }

    fn literal(&mut self) -> PResult<Literal> {
        let start = self.here().clone();
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Lt => Some(CmpOp::Lt),
            Tok::Gt => Some(CmpOp::Gt),
            Tok::Le => Some(CmpOp::Le),
            Tok::Ge => Some(CmpOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let rhs = self.expr()?;
            return Ok(Literal::Compare(lhs, op, rhs));
        }
        if matches!(self.peek(), Tok::Name(n) if n == "is") {
            self.advance();
            let rhs = self.expr()?;
            return match lhs {
                Expr::Var(v) => Ok(Literal::Is(v, rhs)),
                _ => Err(diag(
                    start.line,
                    start.column,
                    "left side of `is` must be a variable",
                )),
            };
        }
        match lhs {
            Expr::Ref(atom) => Ok(Literal::Call(atom)),
            _ => Err(diag(
                start.line,
                start.column,
                "expected a goal, comparison or `is` evaluation",
            )),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Bin(ArithOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.advance();
            if let Tok::Num(v) = *self.peek() {
                self.advance();
                return Ok(Expr::Num(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.advance();
                Ok(Expr::Num(v))
            }
            Tok::Var(v) => {
                self.advance();
                Ok(Expr::Var(v))
            }
            Tok::Name(_) => Ok(Expr::Ref(self.atom()?)),
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.error_here("an expression")),
        }
    }
}

/// Parses rule text, reporting every syntax error with its location.
pub fn parse_program(text: &str) -> Result<Program> {
    let toks = lex(text).map_err(|d| Error::Parse(vec![d]))?;
    let mut p = Parser { toks, pos: 0 };
    p.program().map_err(Error::Parse)
}
