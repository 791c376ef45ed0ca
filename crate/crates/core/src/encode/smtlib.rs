//! SMT-LIB v2 rendering of formulas.

use std::fmt::Write as _;

use super::{Formula, Section};
use crate::ir::{Expr, Type};

fn sort(t: Type) -> &'static str {
    match t {
        Type::Int => "Int",
        Type::Bool => "Bool",
    }
}

fn write_assert(out: &mut String, e: &Expr, note: Option<&str>) {
    // top-level conjunctions become separate assertions
    if let Expr::And(parts) = e {
        for (i, part) in parts.iter().enumerate() {
            write_assert(out, part, if i == 0 { note } else { None });
        }
        return;
    }
    let _ = write!(out, "(assert {e})");
    if let Some(n) = note {
        let _ = write!(out, " ; {n}");
    }
    out.push('\n');
}

/// One `assert` command per top-level conjunct of `e`.
pub fn emit_assertion(e: &Expr) -> String {
    let mut out = String::new();
    write_assert(&mut out, e, None);
    out
}

/// Options, logic, declarations and assertions, without any query.
pub fn emit_prelude(f: &Formula) -> String {
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n(set-logic QF_LIA)\n");
    for d in &f.decls {
        let _ = writeln!(out, "(declare-fun {} () {})", d.name, sort(d.ty));
    }
    let mut section = None;
    for a in &f.asserts {
        if section != Some(a.section) {
            section = Some(a.section);
            out.push_str(match a.section {
                Section::Semantics => "; semantics\n",
                Section::Timing => "; timing\n",
                Section::Cuts => "; cuts\n",
            });
        }
        write_assert(&mut out, &a.expr, a.note.as_deref());
    }
    out
}

/// `check-sat` under an optional extra assertion, followed by `get-value`
/// of every declared symbol.
pub fn emit_query(f: &Formula, extra: Option<&Expr>) -> String {
    let mut out = String::new();
    if let Some(e) = extra {
        out.push_str("; query\n");
        write_assert(&mut out, e, None);
    }
    out.push_str("(check-sat)\n");
    if !f.decls.is_empty() {
        out.push_str("(get-value (");
        for (i, d) in f.decls.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&d.name);
        }
        out.push_str("))\n");
    }
    out
}

/// Complete deterministic script: prelude, the optional extra assertion,
/// `check-sat`, `get-value` of all symbols and `exit`.
pub fn emit_smtlib(f: &Formula, extra: Option<&Expr>) -> String {
    let mut out = emit_prelude(f);
    out.push_str(&emit_query(f, extra));
    out.push_str("(exit)\n");
    out
}
