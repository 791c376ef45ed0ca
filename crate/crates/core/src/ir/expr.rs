//! Linear integer / Boolean expressions shared by the program IR and the
//! solver-independent formula.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sexp::Sexp;

/// Value sort of an expression or variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("Int"),
            Type::Bool => f.write_str("Bool"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "distinct",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    fn holds<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

/// Expression tree. Multiplication only by a constant, so every expression
/// stays in linear integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Add(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Scale(i64, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn ty(self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(v),
            Value::Int(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type mismatch in `{0}`")]
    Type(String),
    #[error("integer overflow in `{0}`")]
    Overflow(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprParseError {
    #[error("malformed expression `{0}`")]
    Malformed(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("non-linear term `{0}`")]
    NonLinear(String),
}

// Constructors kept terse; the encoder builds a lot of these.
impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn int(v: i64) -> Expr {
        Expr::Int(v)
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Le, a, b)
    }

    pub fn ge(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Ge, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn ite(c: Expr, a: Expr, b: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Expr {
        match a {
            Expr::Bool(b) => Expr::Bool(!b),
            other => Expr::Not(Box::new(other)),
        }
    }

    /// Conjunction that drops `true` operands and unwraps singletons.
    pub fn and(parts: Vec<Expr>) -> Expr {
        let mut parts: Vec<Expr> = parts
            .into_iter()
            .filter(|e| *e != Expr::Bool(true))
            .collect();
        match parts.len() {
            0 => Expr::Bool(true),
            1 => parts.pop().unwrap(),
            _ => Expr::And(parts),
        }
    }

    /// Disjunction that drops `false` operands and unwraps singletons.
    pub fn or(parts: Vec<Expr>) -> Expr {
        let mut parts: Vec<Expr> = parts
            .into_iter()
            .filter(|e| *e != Expr::Bool(false))
            .collect();
        match parts.len() {
            0 => Expr::Bool(false),
            1 => parts.pop().unwrap(),
            _ => Expr::Or(parts),
        }
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut terms = terms;
        match terms.len() {
            0 => Expr::Int(0),
            1 => terms.pop().unwrap(),
            _ => Expr::Add(terms),
        }
    }

    /// Collects every variable name referenced by the expression.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(v.clone());
            }
        });
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => {}
            Expr::Add(xs) | Expr::And(xs) | Expr::Or(xs) => xs.iter().for_each(|x| x.visit(f)),
            Expr::Sub(a, b) | Expr::Cmp(_, a, b) | Expr::Implies(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Neg(a) | Expr::Scale(_, a) | Expr::Not(a) => a.visit(f),
            Expr::Ite(c, a, b) => {
                c.visit(f);
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Rebuilds the expression with every variable name passed through `f`.
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Expr {
        self.map_vars(&|name| Expr::Var(f(name)))
    }

    /// Rebuilds the expression replacing each variable with `f(name)`.
    pub fn map_vars(&self, f: &dyn Fn(&str) -> Expr) -> Expr {
        let bx = |e: &Expr| Box::new(e.map_vars(f));
        match self {
            Expr::Int(v) => Expr::Int(*v),
            Expr::Bool(v) => Expr::Bool(*v),
            Expr::Var(v) => f(v),
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.map_vars(f)).collect()),
            Expr::And(xs) => Expr::And(xs.iter().map(|x| x.map_vars(f)).collect()),
            Expr::Or(xs) => Expr::Or(xs.iter().map(|x| x.map_vars(f)).collect()),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, bx(a), bx(b)),
            Expr::Implies(a, b) => Expr::Implies(bx(a), bx(b)),
            Expr::Neg(a) => Expr::Neg(bx(a)),
            Expr::Scale(k, a) => Expr::Scale(*k, bx(a)),
            Expr::Not(a) => Expr::Not(bx(a)),
            Expr::Ite(c, a, b) => Expr::Ite(bx(c), bx(a), bx(b)),
        }
    }

    /// Infers the sort of the expression given variable sorts, checking
    /// operand sorts along the way.
    pub fn type_of(&self, lookup: &dyn Fn(&str) -> Option<Type>) -> Result<Type, String> {
        let expect = |e: &Expr, t: Type| -> Result<(), String> {
            let got = e.type_of(lookup)?;
            if got == t {
                Ok(())
            } else {
                Err(format!("expected {t} but `{e}` has sort {got}"))
            }
        };
        match self {
            Expr::Int(_) => Ok(Type::Int),
            Expr::Bool(_) => Ok(Type::Bool),
            Expr::Var(v) => lookup(v).ok_or_else(|| format!("unknown variable `{v}`")),
            Expr::Add(xs) => {
                for x in xs {
                    expect(x, Type::Int)?;
                }
                Ok(Type::Int)
            }
            Expr::Sub(a, b) => {
                expect(a, Type::Int)?;
                expect(b, Type::Int)?;
                Ok(Type::Int)
            }
            Expr::Neg(a) | Expr::Scale(_, a) => {
                expect(a, Type::Int)?;
                Ok(Type::Int)
            }
            Expr::Cmp(op, a, b) => {
                let ta = a.type_of(lookup)?;
                let tb = b.type_of(lookup)?;
                if ta != tb {
                    return Err(format!("comparison of {ta} with {tb} in `{self}`"));
                }
                if ta == Type::Bool && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(format!("ordering comparison on Bool in `{self}`"));
                }
                Ok(Type::Bool)
            }
            Expr::Not(a) => {
                expect(a, Type::Bool)?;
                Ok(Type::Bool)
            }
            Expr::And(xs) | Expr::Or(xs) => {
                for x in xs {
                    expect(x, Type::Bool)?;
                }
                Ok(Type::Bool)
            }
            Expr::Implies(a, b) => {
                expect(a, Type::Bool)?;
                expect(b, Type::Bool)?;
                Ok(Type::Bool)
            }
            Expr::Ite(c, a, b) => {
                expect(c, Type::Bool)?;
                let ta = a.type_of(lookup)?;
                expect(b, ta)?;
                Ok(ta)
            }
        }
    }

    /// Evaluates the expression under a variable assignment.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        let int = |e: &Expr| -> Result<i64, EvalError> {
            e.eval(lookup)?
                .as_int()
                .ok_or_else(|| EvalError::Type(e.to_string()))
        };
        let boolean = |e: &Expr| -> Result<bool, EvalError> {
            e.eval(lookup)?
                .as_bool()
                .ok_or_else(|| EvalError::Type(e.to_string()))
        };
        let overflow = || EvalError::Overflow(self.to_string());
        Ok(match self {
            Expr::Int(v) => Value::Int(*v),
            Expr::Bool(v) => Value::Bool(*v),
            Expr::Var(v) => lookup(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Expr::Add(xs) => {
                let mut acc = 0i64;
                for x in xs {
                    acc = acc.checked_add(int(x)?).ok_or_else(overflow)?;
                }
                Value::Int(acc)
            }
            Expr::Sub(a, b) => Value::Int(int(a)?.checked_sub(int(b)?).ok_or_else(overflow)?),
            Expr::Neg(a) => Value::Int(int(a)?.checked_neg().ok_or_else(overflow)?),
            Expr::Scale(k, a) => Value::Int(int(a)?.checked_mul(*k).ok_or_else(overflow)?),
            Expr::Cmp(op, a, b) => match (a.eval(lookup)?, b.eval(lookup)?) {
                (Value::Int(x), Value::Int(y)) => Value::Bool(op.holds(x, y)),
                (Value::Bool(x), Value::Bool(y)) if matches!(op, CmpOp::Eq | CmpOp::Ne) => {
                    Value::Bool(op.holds(x, y))
                }
                _ => return Err(EvalError::Type(self.to_string())),
            },
            Expr::Not(a) => Value::Bool(!boolean(a)?),
            Expr::And(xs) => {
                let mut acc = true;
                for x in xs {
                    acc &= boolean(x)?;
                }
                Value::Bool(acc)
            }
            Expr::Or(xs) => {
                let mut acc = false;
                for x in xs {
                    acc |= boolean(x)?;
                }
                Value::Bool(acc)
            }
            Expr::Implies(a, b) => Value::Bool(!boolean(a)? || boolean(b)?),
            Expr::Ite(c, a, b) => {
                if boolean(c)? {
                    a.eval(lookup)?
                } else {
                    b.eval(lookup)?
                }
            }
        })
    }

    /// Writes the expression in SMT-LIB prefix syntax, mapping variable
    /// names through `name`.
    pub fn write_prefix(
        &self,
        out: &mut impl fmt::Write,
        name: &dyn Fn(&str) -> String,
    ) -> fmt::Result {
        let nary = |out: &mut dyn fmt::Write, op: &str, xs: &[&Expr]| -> fmt::Result {
            write!(out, "({op}")?;
            for x in xs {
                out.write_char(' ')?;
                let mut s = String::new();
                x.write_prefix(&mut s, name)?;
                out.write_str(&s)?;
            }
            out.write_char(')')
        };
        match self {
            Expr::Int(v) if *v < 0 => write!(out, "(- {})", v.unsigned_abs()),
            Expr::Int(v) => write!(out, "{v}"),
            Expr::Bool(v) => write!(out, "{v}"),
            Expr::Var(v) => out.write_str(&name(v)),
            Expr::Add(xs) => nary(out, "+", &xs.iter().collect::<Vec<_>>()),
            Expr::And(xs) => nary(out, "and", &xs.iter().collect::<Vec<_>>()),
            Expr::Or(xs) => nary(out, "or", &xs.iter().collect::<Vec<_>>()),
            Expr::Sub(a, b) => nary(out, "-", &[a, b]),
            Expr::Neg(a) => nary(out, "-", &[a]),
            Expr::Scale(k, a) => {
                let k = Expr::Int(*k);
                nary(out, "*", &[&k, a])
            }
            Expr::Cmp(op, a, b) => nary(out, op.symbol(), &[a, b]),
            Expr::Not(a) => nary(out, "not", &[a]),
            Expr::Implies(a, b) => nary(out, "=>", &[a, b]),
            Expr::Ite(c, a, b) => nary(out, "ite", &[c, a, b]),
        }
    }

    pub fn to_prefix(&self, name: &dyn Fn(&str) -> String) -> String {
        let mut s = String::new();
        self.write_prefix(&mut s, name)
            .expect("writing to a String");
        s
    }

    /// Parses prefix notation, e.g. `(+ x_call 10)`.
    pub fn parse_prefix(text: &str) -> Result<Expr, ExprParseError> {
        let sexp = crate::sexp::parse_one(text)
            .map_err(|e| ExprParseError::Malformed(format!("{text}: {e}")))?;
        Expr::from_sexp(&sexp)
    }

    pub fn from_sexp(s: &Sexp) -> Result<Expr, ExprParseError> {
        let malformed = || ExprParseError::Malformed(s.to_string());
        match s {
            Sexp::Atom(a) => Ok(match a.as_str() {
                "true" => Expr::Bool(true),
                "false" => Expr::Bool(false),
                _ => match a.parse::<i64>() {
                    Ok(v) => Expr::Int(v),
                    Err(_) if is_identifier(a) => Expr::Var(a.clone()),
                    Err(_) => return Err(malformed()),
                },
            }),
            Sexp::List(items) => {
                let (head, args) = items.split_first().ok_or_else(malformed)?;
                let op = head.as_atom().ok_or_else(malformed)?;
                let args: Vec<Expr> = args.iter().map(Expr::from_sexp).collect::<Result<_, _>>()?;
                let arity = |n: usize| {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(malformed())
                    }
                };
                let mut it = args.clone().into_iter();
                let mut next = || Box::new(it.next().expect("arity checked"));
                Ok(match op {
                    "+" if !args.is_empty() => Expr::Add(args),
                    "-" if args.len() == 1 => match &args[0] {
                        Expr::Int(v) => Expr::Int(-v),
                        _ => Expr::Neg(next()),
                    },
                    "-" => {
                        arity(2)?;
                        Expr::Sub(next(), next())
                    }
                    "*" => {
                        arity(2)?;
                        match (&args[0], &args[1]) {
                            (Expr::Int(k), e) | (e, Expr::Int(k)) => {
                                Expr::Scale(*k, Box::new(e.clone()))
                            }
                            _ => return Err(ExprParseError::NonLinear(s.to_string())),
                        }
                    }
                    "<" | "<=" | ">" | ">=" | "=" | "distinct" | "!=" => {
                        arity(2)?;
                        let op = match op {
                            "<" => CmpOp::Lt,
                            "<=" => CmpOp::Le,
                            ">" => CmpOp::Gt,
                            ">=" => CmpOp::Ge,
                            "=" => CmpOp::Eq,
                            _ => CmpOp::Ne,
                        };
                        Expr::Cmp(op, next(), next())
                    }
                    "not" => {
                        arity(1)?;
                        Expr::Not(next())
                    }
                    "and" => Expr::And(args),
                    "or" => Expr::Or(args),
                    "=>" => {
                        arity(2)?;
                        Expr::Implies(next(), next())
                    }
                    "ite" => {
                        arity(3)?;
                        Expr::Ite(next(), next(), next())
                    }
                    "div" | "mod" | "/" | "%" => {
                        return Err(ExprParseError::NonLinear(s.to_string()))
                    }
                    other => return Err(ExprParseError::UnknownOperator(other.to_string())),
                })
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prefix(f, &|n| n.to_string())
    }
}

/// Identifier syntax accepted for program variables and block names.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env<'a>(pairs: &'a [(&'a str, Value)]) -> impl Fn(&str) -> Option<Value> + 'a {
        move |n| pairs.iter().find(|(k, _)| *k == n).map(|(_, v)| *v)
    }

    #[test]
    fn eval_ite_and_sums() {
        let e = Expr::parse_prefix("(ite b 2 3)").unwrap();
        assert_eq!(e.eval(&env(&[("b", Value::Bool(true))])), Ok(Value::Int(2)));
        let e = Expr::parse_prefix("(+ x y)").unwrap();
        let m = [("x", Value::Int(5)), ("y", Value::Int(-5))];
        assert_eq!(e.eval(&env(&m)), Ok(Value::Int(0)));
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = Expr::parse_prefix("(+ x 1)").unwrap();
        assert_eq!(e.eval(&env(&[])), Err(EvalError::Unbound("x".into())));
    }

    #[test]
    fn prefix_round_trip_keeps_negative_constants() {
        let text = "(and (<= (- 10000) x_call) (=> b (= y (ite c (* 3 z) (- z)))))";
        let e = Expr::parse_prefix(text).unwrap();
        assert_eq!(e.to_string(), text);
        assert_eq!(Expr::parse_prefix(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn nonlinear_products_are_rejected() {
        assert!(matches!(
            Expr::parse_prefix("(* x y)"),
            Err(ExprParseError::NonLinear(_))
        ));
    }

    #[test]
    fn typing_catches_mixed_sorts() {
        let e = Expr::parse_prefix("(+ x b)").unwrap();
        let look = |n: &str| match n {
            "x" => Some(Type::Int),
            "b" => Some(Type::Bool),
            _ => None,
        };
        assert!(e.type_of(&look).is_err());
        let ok = Expr::parse_prefix("(ite b x 0)").unwrap();
        assert_eq!(ok.type_of(&look), Ok(Type::Int));
    }
}
