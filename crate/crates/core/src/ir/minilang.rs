//! Structured mini-language front end.
//!
//! ```text
//! program rate_limiter;                 # optional name
//! old = nondet(-10000, 10000);          # range-constrained input
//! x = nondet(-10000, 10000);
//! if (x > old + 10) { x = old + 10; }
//! if (x < old - 10) { cost 4; x = old - 10; } else { cost 2; }
//! for i in 0..3 { x = x + 1; }          # constant trip count
//! while (x > 0) bound 5 { x = x - 1; }  # explicit bound
//! assume(x >= 0);
//! return;
//! ```
//!
//! Statements end with `;`, `#` starts a comment. Expressions are linear
//! integer arithmetic (`+ - *` by constants, comparisons, `! && ||`,
//! `ite(c, a, b)`, `nondet()` / `nondet(lo, hi)`). `cost N;` adds `N`
//! cycles to the block it appears in. Variables are renamed into SSA form
//! while lowering; every `if` produces a decision block, arm blocks and a
//! merge block carrying phis for variables assigned in either arm.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{
    CmpOp, CostModel, Expr, HavocVar, IrError, ParseOptions, Program, RawBlock, RawPhi, RawProgram,
    RawTerm, Type,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MiniError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: type error: {msg}")]
    Type { pos: Pos, msg: String },
    #[error("{pos}: unsupported construct: {msg}")]
    Unsupported { pos: Pos, msg: String },
    #[error("{pos}: undefined variable `{name}`")]
    Undefined { pos: Pos, name: String },
    #[error("{pos}: unreachable statement after return")]
    Unreachable { pos: Pos },
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: [&str; 24] = [
    "..", "<=", ">=", "==", "!=", "&&", "||", ";", "=", "(", ")", "{", "}", ",", "[", "]", "+",
    "-", "*", "/", "%", "<", ">", "!",
];

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, MiniError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| MiniError::Syntax {
                pos,
                msg: format!("integer literal `{s}` out of range"),
            })?;
            col += i - start;
            out.push((Tok::Int(v), pos));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = SYMBOLS
            .iter()
            .find(|s| rest.starts_with(**s))
            .ok_or_else(|| MiniError::Syntax {
                pos,
                msg: format!("unexpected character `{c}`"),
            })?;
        i += sym.len();
        col += sym.len();
        out.push((Tok::Sym(sym), pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ast {
    Int(i64),
    Bool(bool),
    Var(String, Pos),
    Nondet(Option<(i64, i64)>, Pos),
    Ite(Box<Ast>, Box<Ast>, Box<Ast>),
    Unary(&'static str, Box<Ast>, Pos),
    Binary(&'static str, Box<Ast>, Box<Ast>, Pos),
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign(String, Ast, Pos),
    If(Ast, Vec<Stmt>, Option<Vec<Stmt>>),
    For(String, i64, i64, Vec<Stmt>, Pos),
    While(Ast, Option<u32>, Vec<Stmt>),
    Assume(Ast),
    Cost(u64),
    Return(Pos),
}

impl Stmt {
    fn pos_hint(&self) -> Option<Pos> {
        match self {
            Stmt::Assign(_, _, p) | Stmt::For(_, _, _, _, p) | Stmt::Return(p) => Some(*p),
            _ => None,
        }
    }
}

const KEYWORDS: [&str; 14] = [
    "if", "else", "for", "in", "while", "bound", "assume", "cost", "return", "nondet", "ite",
    "true", "false", "program",
];

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, MiniError> {
        Err(MiniError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), MiniError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), MiniError> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, MiniError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    fn signed_int(&mut self) -> Result<i64, MiniError> {
        let neg = self.is_sym("-");
        if neg {
            self.bump();
        }
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            other => self.err(format!("expected integer, found {other}")),
        }
    }

    fn program(&mut self) -> Result<(Option<String>, Vec<Stmt>), MiniError> {
        let mut name = None;
        if self.is_kw("program") {
            self.bump();
            name = Some(self.ident()?);
            self.expect_sym(";")?;
        }
        let mut stmts = Vec::new();
        while *self.peek() != Tok::Eof {
            stmts.push(self.stmt()?);
        }
        Ok((name, stmts))
    }

    fn block(&mut self) -> Result<Vec<Stmt>, MiniError> {
        self.expect_sym("{")?;
        let mut stmts = Vec::new();
        while !self.is_sym("}") {
            if *self.peek() == Tok::Eof {
                return self.err("unexpected end of input, expected `}`");
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, MiniError> {
        let pos = self.pos();
        if self.is_kw("if") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then = self.block()?;
            let els = if self.is_kw("else") {
                self.bump();
                if self.is_kw("if") {
                    Some(vec![self.stmt()?])
                } else {
                    Some(self.block()?)
                }
            } else {
                None
            };
            return Ok(Stmt::If(cond, then, els));
        }
        if self.is_kw("for") {
            self.bump();
            let var = self.ident()?;
            self.expect_kw("in")?;
            let lo = self.signed_int()?;
            self.expect_sym("..")?;
            let hi = self.signed_int()?;
            let body = self.block()?;
            return Ok(Stmt::For(var, lo, hi, body, pos));
        }
        if self.is_kw("while") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let bound = if self.is_kw("bound") {
                self.bump();
                let b = self.signed_int()?;
                Some(u32::try_from(b).or_else(|_| self.err("loop bound must be nonnegative"))?)
            } else {
                None
            };
            let body = self.block()?;
            return Ok(Stmt::While(cond, bound, body));
        }
        if self.is_kw("assume") {
            self.bump();
            self.expect_sym("(")?;
            let c = self.expr()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(Stmt::Assume(c));
        }
        if self.is_kw("cost") {
            self.bump();
            let c = self.signed_int()?;
            let c = u64::try_from(c).or_else(|_| self.err("cost must be nonnegative"))?;
            self.expect_sym(";")?;
            return Ok(Stmt::Cost(c));
        }
        if self.is_kw("return") {
            self.bump();
            self.expect_sym(";")?;
            return Ok(Stmt::Return(pos));
        }
        let name = self.ident()?;
        self.expect_sym("=")?;
        let e = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign(name, e, pos))
    }

    fn expr(&mut self) -> Result<Ast, MiniError> {
        self.binary_level(0)
    }

    fn binary_level(&mut self, level: usize) -> Result<Ast, MiniError> {
        const LEVELS: [&[&str]; 5] = [
            &["||"],
            &["&&"],
            &["==", "!=", "<", "<=", ">", ">="],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Sym(s) if LEVELS[level].contains(s) => *s,
                _ => return Ok(lhs),
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.binary_level(level + 1)?;
            // comparisons do not chain
            if level == 2 {
                return Ok(Ast::Binary(op, Box::new(lhs), Box::new(rhs), pos));
            }
            lhs = Ast::Binary(op, Box::new(lhs), Box::new(rhs), pos);
        }
    }

    fn unary(&mut self) -> Result<Ast, MiniError> {
        let pos = self.pos();
        if self.is_sym("-") || self.is_sym("!") {
            let op = if self.is_sym("-") { "-" } else { "!" };
            self.bump();
            let e = self.unary()?;
            return Ok(Ast::Unary(op, Box::new(e), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ast, MiniError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Ast::Int(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Ast::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "nondet" => {
                self.bump();
                self.expect_sym("(")?;
                let range = if self.is_sym(")") {
                    None
                } else {
                    let lo = self.signed_int()?;
                    self.expect_sym(",")?;
                    let hi = self.signed_int()?;
                    if lo > hi {
                        return Err(MiniError::Type {
                            pos,
                            msg: format!("empty range nondet({lo}, {hi})"),
                        });
                    }
                    Some((lo, hi))
                };
                self.expect_sym(")")?;
                Ok(Ast::Nondet(range, pos))
            }
            Tok::Ident(s) if s == "ite" => {
                self.bump();
                self.expect_sym("(")?;
                let c = self.expr()?;
                self.expect_sym(",")?;
                let a = self.expr()?;
                self.expect_sym(",")?;
                let b = self.expr()?;
                self.expect_sym(")")?;
                Ok(Ast::Ite(Box::new(c), Box::new(a), Box::new(b)))
            }
            Tok::Ident(_) => Ok(Ast::Var(self.ident()?, pos)),
            other => self.err(format!("unexpected {other}")),
        }
    }
}

type Env = BTreeMap<String, String>;

struct Lowerer {
    opts: ParseOptions,
    blocks: Vec<RawBlock>,
    costs: Vec<u64>,
    label_counts: HashMap<&'static str, usize>,
    versions: HashMap<String, usize>,
    types: HashMap<String, Type>,
    inputs: Vec<HavocVar>,
    returns: Vec<usize>,
    fresh: usize,
}

impl Lowerer {
    fn new_block(&mut self, base: &'static str) -> usize {
        let n = self.label_counts.entry(base).or_insert(0);
        let name = if *n == 0 {
            base.to_string()
        } else {
            format!("{base}{n}")
        };
        *n += 1;
        self.blocks.push(RawBlock::new(name));
        self.costs.push(0);
        self.blocks.len() - 1
    }

    fn name(&self, b: usize) -> String {
        self.blocks[b].name.clone()
    }

    /// Next SSA name for a source variable: `x`, `x.1`, `x.2`, ...
    fn ssa(&mut self, var: &str) -> String {
        let n = self.versions.entry(var.to_string()).or_insert(0);
        let name = if *n == 0 {
            var.to_string()
        } else {
            format!("{var}.{n}")
        };
        *n += 1;
        name
    }

    fn havoc(&mut self, name: String, ty: Type, range: Option<(i64, i64)>) {
        self.types.insert(name.clone(), ty);
        self.inputs.push(HavocVar {
            name,
            ty,
            lo: range.map(|r| r.0),
            hi: range.map(|r| r.1),
        });
    }

    fn fresh_havoc(&mut self, ty: Type, range: Option<(i64, i64)>) -> Expr {
        let name = format!("nondet.{}", self.fresh);
        self.fresh += 1;
        self.havoc(name.clone(), ty, range);
        Expr::Var(name)
    }

    fn unsupported(&mut self, pos: Pos, msg: String) -> Result<(Expr, Type), MiniError> {
        if self.opts.havoc_unsupported {
            log::warn!("{pos}: abstracting {msg} by a nondeterministic value");
            Ok((self.fresh_havoc(Type::Int, None), Type::Int))
        } else {
            Err(MiniError::Unsupported { pos, msg })
        }
    }

    fn expr(
        &mut self,
        e: &Ast,
        env: &Env,
        want: Option<Type>,
        pos: Pos,
    ) -> Result<Expr, MiniError> {
        let (x, t) = self.expr_typed(e, env, want)?;
        match want {
            Some(w) if w != t => Err(MiniError::Type {
                pos,
                msg: format!("expected {w} but `{x}` has sort {t}"),
            }),
            _ => Ok(x),
        }
    }

    fn expr_typed(
        &mut self,
        e: &Ast,
        env: &Env,
        want: Option<Type>,
    ) -> Result<(Expr, Type), MiniError> {
        let type_err = |pos: Pos, msg: String| MiniError::Type { pos, msg };
        Ok(match e {
            Ast::Int(v) => (Expr::Int(*v), Type::Int),
            Ast::Bool(b) => (Expr::Bool(*b), Type::Bool),
            Ast::Var(v, pos) => {
                let ssa = env.get(v).ok_or_else(|| MiniError::Undefined {
                    pos: *pos,
                    name: v.clone(),
                })?;
                (Expr::Var(ssa.clone()), self.types[ssa])
            }
            Ast::Nondet(range, pos) => {
                let ty = if range.is_some() {
                    Type::Int
                } else {
                    want.unwrap_or(Type::Int)
                };
                if ty == Type::Bool && range.is_some() {
                    return Err(type_err(*pos, "Boolean nondet takes no range".into()));
                }
                (self.fresh_havoc(ty, *range), ty)
            }
            Ast::Ite(c, a, b) => {
                let c = self.expr(c, env, Some(Type::Bool), pos_of(e))?;
                let (a, ta) = self.expr_typed(a, env, want)?;
                let b = self.expr(b, env, Some(ta), pos_of(e))?;
                (Expr::ite(c, a, b), ta)
            }
            Ast::Unary(op, a, pos) => match *op {
                "-" => match self.expr(a, env, Some(Type::Int), *pos)? {
                    Expr::Int(v) => (Expr::Int(-v), Type::Int),
                    x => (Expr::Neg(Box::new(x)), Type::Int),
                },
                _ => (
                    Expr::not(self.expr(a, env, Some(Type::Bool), *pos)?),
                    Type::Bool,
                ),
            },
            Ast::Binary(op, a, b, pos) => {
                let pos = *pos;
                match *op {
                    "&&" | "||" => {
                        let a = self.expr(a, env, Some(Type::Bool), pos)?;
                        let b = self.expr(b, env, Some(Type::Bool), pos)?;
                        let x = if *op == "&&" {
                            Expr::And(vec![a, b])
                        } else {
                            Expr::Or(vec![a, b])
                        };
                        (x, Type::Bool)
                    }
                    "==" | "!=" => {
                        let (a, ta) = self.expr_typed(a, env, None)?;
                        let b = self.expr(b, env, Some(ta), pos)?;
                        let cmp = if *op == "==" { CmpOp::Eq } else { CmpOp::Ne };
                        (Expr::cmp(cmp, a, b), Type::Bool)
                    }
                    "<" | "<=" | ">" | ">=" => {
                        let a = self.expr(a, env, Some(Type::Int), pos)?;
                        let b = self.expr(b, env, Some(Type::Int), pos)?;
                        let cmp = match *op {
                            "<" => CmpOp::Lt,
                            "<=" => CmpOp::Le,
                            ">" => CmpOp::Gt,
                            _ => CmpOp::Ge,
                        };
                        (Expr::cmp(cmp, a, b), Type::Bool)
                    }
                    "+" | "-" => {
                        let a = self.expr(a, env, Some(Type::Int), pos)?;
                        let b = self.expr(b, env, Some(Type::Int), pos)?;
                        let x = match (&a, &b, *op) {
                            (Expr::Int(x), Expr::Int(y), "+") => Expr::Int(x + y),
                            (Expr::Int(x), Expr::Int(y), _) => Expr::Int(x - y),
                            (Expr::Add(xs), _, "+") => {
                                let mut xs = xs.clone();
                                xs.push(b);
                                Expr::Add(xs)
                            }
                            (_, _, "+") => Expr::Add(vec![a, b]),
                            _ => Expr::sub(a, b),
                        };
                        (x, Type::Int)
                    }
                    "*" => {
                        let a = self.expr(a, env, Some(Type::Int), pos)?;
                        let b = self.expr(b, env, Some(Type::Int), pos)?;
                        match (a, b) {
                            (Expr::Int(x), Expr::Int(y)) => (Expr::Int(x * y), Type::Int),
                            (Expr::Int(k), x) | (x, Expr::Int(k)) => {
                                (Expr::Scale(k, Box::new(x)), Type::Int)
                            }
                            (a, b) => {
                                self.unsupported(pos, format!("non-linear product `{a} * {b}`"))?
                            }
                        }
                    }
                    _ => {
                        let a = self.expr(a, env, Some(Type::Int), pos)?;
                        let b = self.expr(b, env, Some(Type::Int), pos)?;
                        self.unsupported(pos, format!("`{op}` in `{a} {op} {b}`"))?
                    }
                }
            }
        })
    }

    /// Lowers a statement list starting in block `cur`. Returns the block
    /// control falls out of (if any) and the variable environment there.
    fn seq(
        &mut self,
        stmts: &[Stmt],
        mut cur: usize,
        mut env: Env,
    ) -> Result<Option<(usize, Env)>, MiniError> {
        for (i, s) in stmts.iter().enumerate() {
            match self.stmt(s, cur, env)? {
                Some((b, e)) => {
                    cur = b;
                    env = e;
                }
                None => {
                    if let Some(next) = stmts.get(i + 1) {
                        let pos = first_pos(next).unwrap_or(Pos { line: 0, col: 0 });
                        return Err(MiniError::Unreachable { pos });
                    }
                    return Ok(None);
                }
            }
        }
        Ok(Some((cur, env)))
    }

    fn stmt(
        &mut self,
        s: &Stmt,
        cur: usize,
        mut env: Env,
    ) -> Result<Option<(usize, Env)>, MiniError> {
        match s {
            Stmt::Assign(v, Ast::Nondet(range, _), _) => {
                let ssa = self.ssa(v);
                self.havoc(ssa.clone(), Type::Int, *range);
                env.insert(v.clone(), ssa);
                Ok(Some((cur, env)))
            }
            Stmt::Assign(v, e, pos) => {
                let (x, t) = self.expr_typed(e, &env, None)?;
                if let Some(old) = env.get(v) {
                    if self.types[old] != t {
                        return Err(MiniError::Type {
                            pos: *pos,
                            msg: format!("`{v}` changes sort from {} to {t}", self.types[old]),
                        });
                    }
                }
                let ssa = self.ssa(v);
                self.types.insert(ssa.clone(), t);
                self.blocks[cur].assigns.push((ssa.clone(), x));
                env.insert(v.clone(), ssa);
                Ok(Some((cur, env)))
            }
            Stmt::Assume(c) => {
                let c = self.expr(c, &env, Some(Type::Bool), pos_of(c))?;
                self.blocks[cur].assumes.push(c);
                Ok(Some((cur, env)))
            }
            Stmt::Cost(c) => {
                self.costs[cur] += c;
                Ok(Some((cur, env)))
            }
            Stmt::Return(_) => {
                self.returns.push(cur);
                Ok(None)
            }
            Stmt::If(c, then, els) => self.lower_if(c, then, els.as_deref(), cur, env),
            Stmt::For(var, lo, hi, body, _) => {
                let init = self.ssa(var);
                self.types.insert(init.clone(), Type::Int);
                self.blocks[cur]
                    .assigns
                    .push((init.clone(), Expr::Int(*lo)));
                env.insert(var.clone(), init);
                let bound = u32::try_from((hi - lo).max(0)).unwrap_or(u32::MAX);
                let cond = Ast::Binary(
                    "<",
                    Box::new(Ast::Var(var.clone(), Pos { line: 0, col: 0 })),
                    Box::new(Ast::Int(*hi)),
                    Pos { line: 0, col: 0 },
                );
                let step = Stmt::Assign(
                    var.clone(),
                    Ast::Binary(
                        "+",
                        Box::new(Ast::Var(var.clone(), Pos { line: 0, col: 0 })),
                        Box::new(Ast::Int(1)),
                        Pos { line: 0, col: 0 },
                    ),
                    Pos { line: 0, col: 0 },
                );
                let mut body = body.clone();
                body.push(step);
                self.lower_loop(
                    ["for.cond", "for.body", "for.end"],
                    &cond,
                    Some(bound),
                    &body,
                    cur,
                    env,
                )
            }
            Stmt::While(c, bound, body) => self.lower_loop(
                ["while.cond", "while.body", "while.end"],
                c,
                *bound,
                body,
                cur,
                env,
            ),
        }
    }

    fn lower_if(
        &mut self,
        c: &Ast,
        then: &[Stmt],
        els: Option<&[Stmt]>,
        cur: usize,
        env: Env,
    ) -> Result<Option<(usize, Env)>, MiniError> {
        let cond = self.expr(c, &env, Some(Type::Bool), pos_of(c))?;
        let then_b = self.new_block("if.then");
        let else_b = els.map(|_| self.new_block("if.else"));
        let then_out = self.seq(then, then_b, env.clone())?;
        let else_out = match (els, else_b) {
            (Some(stmts), Some(b)) => self.seq(stmts, b, env.clone())?,
            _ => Some((cur, env.clone())),
        };
        let arms: Vec<(usize, Env)> = then_out.into_iter().chain(else_out).collect();
        if arms.is_empty() {
            self.blocks[cur].term = RawTerm::Branch {
                cond,
                then_to: self.name(then_b),
                else_to: self.name(else_b.expect("else arm exists when both arms return")),
            };
            return Ok(None);
        }
        let merge = self.new_block("if.end");
        let else_target = else_b.unwrap_or(merge);
        self.blocks[cur].term = RawTerm::Branch {
            cond,
            then_to: self.name(then_b),
            else_to: self.name(else_target),
        };
        for (b, _) in &arms {
            if *b != cur {
                self.blocks[*b].term = RawTerm::Goto(self.name(merge));
            }
        }
        let env = self.join(merge, &arms);
        Ok(Some((merge, env)))
    }

    /// Places phis in `merge` for variables whose SSA names differ between
    /// the incoming arms; variables missing from some arm go out of scope.
    fn join(&mut self, merge: usize, arms: &[(usize, Env)]) -> Env {
        let mut out = Env::new();
        let Some((_, first)) = arms.first() else {
            return out;
        };
        for (var, name) in first {
            let sources: Option<Vec<(usize, String)>> = arms
                .iter()
                .map(|(b, env)| env.get(var).map(|n| (*b, n.clone())))
                .collect();
            let Some(sources) = sources else { continue };
            if sources.iter().all(|(_, n)| n == name) {
                out.insert(var.clone(), name.clone());
                continue;
            }
            let target = self.ssa(var);
            self.types.insert(target.clone(), self.types[name]);
            let sources = sources
                .into_iter()
                .map(|(b, n)| (self.name(b), Expr::Var(n)))
                .collect();
            self.blocks[merge].phis.push(RawPhi {
                target: target.clone(),
                sources,
            });
            out.insert(var.clone(), target);
        }
        out
    }

    fn lower_loop(
        &mut self,
        labels: [&'static str; 3],
        cond: &Ast,
        bound: Option<u32>,
        body: &[Stmt],
        cur: usize,
        env: Env,
    ) -> Result<Option<(usize, Env)>, MiniError> {
        let header = self.new_block(labels[0]);
        self.blocks[cur].term = RawTerm::Goto(self.name(header));
        self.blocks[header].loop_bound = bound;

        let mut assigned = BTreeSet::new();
        collect_assigned(body, &mut assigned);
        let mut head_env = env.clone();
        let mut carried = Vec::new();
        for var in assigned.iter().filter(|v| env.contains_key(*v)) {
            let target = self.ssa(var);
            self.types.insert(target.clone(), self.types[&env[var]]);
            head_env.insert(var.clone(), target.clone());
            carried.push((var.clone(), target));
        }

        let c = self.expr(cond, &head_env, Some(Type::Bool), pos_of(cond))?;
        let body_b = self.new_block(labels[1]);
        let end_b = self.new_block(labels[2]);
        self.blocks[header].term = RawTerm::Branch {
            cond: c,
            then_to: self.name(body_b),
            else_to: self.name(end_b),
        };
        let latch = self.seq(body, body_b, head_env.clone())?;
        let pre_name = self.name(cur);
        for (var, target) in carried {
            let mut sources = vec![(pre_name.clone(), Expr::Var(env[&var].clone()))];
            if let Some((l, lenv)) = &latch {
                sources.push((self.name(*l), Expr::Var(lenv[&var].clone())));
            }
            self.blocks[header].phis.push(RawPhi { target, sources });
        }
        if let Some((l, _)) = latch {
            self.blocks[l].term = RawTerm::Goto(self.name(header));
        }
        Ok(Some((end_b, head_env)))
    }
}

fn collect_assigned(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Assign(v, _, _) => {
                out.insert(v.clone());
            }
            Stmt::If(_, a, b) => {
                collect_assigned(a, out);
                if let Some(b) = b {
                    collect_assigned(b, out);
                }
            }
            Stmt::For(v, _, _, body, _) => {
                out.insert(v.clone());
                collect_assigned(body, out);
            }
            Stmt::While(_, _, body) => collect_assigned(body, out),
            _ => {}
        }
    }
}

fn pos_of(e: &Ast) -> Pos {
    match e {
        Ast::Var(_, p) | Ast::Nondet(_, p) | Ast::Unary(_, _, p) | Ast::Binary(_, _, _, p) => *p,
        Ast::Ite(c, _, _) => pos_of(c),
        Ast::Int(_) | Ast::Bool(_) => Pos { line: 0, col: 0 },
    }
}

fn first_pos(s: &Stmt) -> Option<Pos> {
    s.pos_hint().or(match s {
        Stmt::If(c, _, _) | Stmt::While(c, _, _) | Stmt::Assume(c) => Some(pos_of(c)),
        _ => None,
    })
}

/// Parses a mini-language program into a CFG (possibly with loops) and
/// its block costs. Edge costs are zero.
pub fn parse_minilang(text: &str) -> Result<(Program, CostModel), MiniError> {
    parse_minilang_with(text, ParseOptions::default())
}

pub fn parse_minilang_with(
    text: &str,
    opts: ParseOptions,
) -> Result<(Program, CostModel), MiniError> {
    let mut parser = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let (name, stmts) = parser.program()?;
    let mut lw = Lowerer {
        opts,
        blocks: Vec::new(),
        costs: Vec::new(),
        label_counts: HashMap::new(),
        versions: HashMap::new(),
        types: HashMap::new(),
        inputs: Vec::new(),
        returns: Vec::new(),
        fresh: 0,
    };
    let entry = lw.new_block("entry");
    if let Some((end, _)) = lw.seq(&stmts, entry, Env::new())? {
        lw.returns.push(end);
    }
    let returns = std::mem::take(&mut lw.returns);
    let exit = match returns.as_slice() {
        [only] => *only,
        many => {
            let exit = lw.new_block("return");
            for &r in many {
                lw.blocks[r].term = RawTerm::Goto(lw.name(exit));
            }
            exit
        }
    };
    lw.blocks[exit].term = RawTerm::Return;
    let block_costs: HashMap<String, u64> = lw
        .blocks
        .iter()
        .zip(&lw.costs)
        .map(|(b, c)| (b.name.clone(), *c))
        .collect();
    let raw = RawProgram {
        name: name.unwrap_or_else(|| "main".to_string()),
        entry: lw.name(entry),
        exit: lw.name(exit),
        blocks: lw.blocks,
        inputs: lw.inputs,
    };
    let program = raw.build()?;
    let mut costs = CostModel::zeros(&program);
    for b in program.block_ids() {
        costs.block[b.0] = block_costs[&program.block(b).name];
    }
    Ok((program, costs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_is_one_block() {
        let (p, _) = parse_minilang("x = 1; return;").unwrap();
        assert_eq!(p.num_blocks(), 1);
        assert_eq!(p.num_edges(), 0);
        assert_eq!(p.block(p.entry()).assigns.len(), 1);
    }

    #[test]
    fn truncated_input_reports_end_of_input() {
        let err = parse_minilang("if (b) { x = ").unwrap_err();
        match err {
            MiniError::Syntax { msg, pos } => {
                assert!(msg.contains("end of input"), "{msg}");
                assert_eq!(pos, Pos { line: 1, col: 14 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn if_else_yields_decision_arms_and_merge_with_phi() {
        let src = "a = nondet(0, 5); x = 0; if (a > 2) { x = 1; } else { x = 2; } y = x + 1;";
        let (p, _) = parse_minilang(src).unwrap();
        let names: Vec<&str> = p.blocks().iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["entry", "if.then", "if.else", "if.end"]);
        let merge = p.block(p.exit());
        assert_eq!(merge.phis.len(), 1);
        assert_eq!(merge.phis[0].sources.len(), 2);
        assert_eq!(merge.assigns[0].1.to_string(), "(+ x.3 1)");
    }

    #[test]
    fn nonlinear_product_needs_havoc_flag() {
        let src = "a = nondet(); b = nondet(); c = a * b;";
        assert!(matches!(
            parse_minilang(src),
            Err(MiniError::Unsupported { .. })
        ));
        let opts = ParseOptions {
            havoc_unsupported: true,
        };
        let (p, _) = parse_minilang_with(src, opts).unwrap();
        assert_eq!(p.inputs().len(), 3);
    }

    #[test]
    fn type_errors_are_positioned() {
        let err = parse_minilang("x = 1;\nif (x) { }").unwrap_err();
        assert!(
            matches!(
                err,
                MiniError::Type {
                    pos: Pos { line: 2, .. },
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn multiple_returns_get_a_single_exit() {
        let src = "a = nondet(); if (a > 0) { cost 3; return; } cost 1;";
        let (p, c) = parse_minilang(src).unwrap();
        assert_eq!(p.block(p.exit()).name, "return");
        assert_eq!(c.block.iter().sum::<u64>(), 4);
    }

    #[test]
    fn statements_after_return_are_rejected() {
        let err = parse_minilang("return; x = 1;").unwrap_err();
        assert!(matches!(err, MiniError::Unreachable { .. }));
    }

    #[test]
    fn for_loop_keeps_its_bound() {
        let (p, _) = parse_minilang("x = 0; for i in 0..3 { x = x + 1; }").unwrap();
        let header = p.find_block("for.cond").unwrap();
        assert_eq!(p.block(header).loop_bound, Some(3));
        assert_eq!(p.block(header).phis.len(), 2);
        assert!(crate::ir::check_loop_free(&p).is_err());
    }
}
