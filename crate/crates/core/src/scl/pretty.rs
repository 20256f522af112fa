//! Canonical SCL text for a syntax tree. Reparsing the output yields a
//! structurally identical tree.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(ast: &DesignAst) -> String {
    let mut out = String::new();
    for m in &ast.modules {
        module(&mut out, m);
        out.push('\n');
    }
    for i in &ast.instances {
        let _ = writeln!(out, "instance {}: {};", i.name, i.module);
    }
    for b in &ast.binds {
        let _ = writeln!(out, "bind {} -> {};", b.from, b.to);
    }
    if (!ast.binds.is_empty() || !ast.instances.is_empty()) && !ast.properties.is_empty() {
        out.push('\n');
    }
    for p in &ast.properties {
        match &p.kind {
            PropertyKind::Ltl(f) => {
                let _ = writeln!(out, "ltl {} {{ {} }}", p.name, ltl_to_string(f));
            }
            PropertyKind::Invariant(e) => {
                let _ = writeln!(out, "invariant {} {{ {} }}", p.name, expr_to_string(e));
            }
        }
    }
    out
}

pub fn type_to_string(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Bool => "bool".into(),
        TypeExpr::Int { lo, hi } => format!("int[{lo}..{hi}]"),
        TypeExpr::Enum(labels) => format!("enum {{ {} }}", labels.join(", ")),
    }
}

fn module(out: &mut String, m: &ModuleDecl) {
    let _ = writeln!(out, "module {} {{", m.name);
    for p in &m.ports {
        let _ = writeln!(out, "    {} {}: {};", p.dir, p.name, type_to_string(&p.ty));
    }
    for s in &m.signals {
        let _ = writeln!(out, "    signal {}: {} = {};", s.name, type_to_string(&s.ty), s.init);
    }
    for v in &m.vars {
        let _ = writeln!(out, "    var {}: {} = {};", v.name, type_to_string(&v.ty), v.init);
    }
    for e in &m.events {
        let _ = writeln!(out, "    event {};", e.name);
    }
    for p in &m.processes {
        let _ = writeln!(out, "    process {} {{", p.name);
        stmts(out, &p.body, 2);
        out.push_str("    }\n");
    }
    out.push_str("}\n");
}

fn stmts(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let indent = "    ".repeat(depth);
    out.push_str(&indent);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{target} = {};", expr_to_string(value));
        }
        StmtKind::Write { target, value } => {
            let _ = writeln!(out, "{target} <= {};", expr_to_string(value));
        }
        StmtKind::If { cond, then_body, else_body } => {
            let _ = writeln!(out, "if {} {{", expr_to_string(cond));
            stmts(out, then_body, depth + 1);
            out.push_str(&indent);
            match else_body {
                Some(e) => {
                    out.push_str("} else {\n");
                    stmts(out, e, depth + 1);
                    out.push_str(&indent);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while {} {{", expr_to_string(cond));
            stmts(out, body, depth + 1);
            out.push_str(&indent);
            out.push_str("}\n");
        }
        StmtKind::Wait(w) => {
            let arg = match w {
                WaitAst::Time(n) => format!("time {n}"),
                WaitAst::Change(s) => format!("change {s}"),
                WaitAst::Event(e) => format!("event {e}"),
            };
            let _ = writeln!(out, "wait({arg});");
        }
        StmtKind::Notify { event, when } => {
            let _ = match when {
                NotifyAst::Immediate => writeln!(out, "notify({event});"),
                NotifyAst::Delta => writeln!(out, "notify({event}, delta);"),
                NotifyAst::Time(n) => writeln!(out, "notify({event}, time {n});"),
            };
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "assert({});", expr_to_string(e));
        }
        StmtKind::Skip => out.push_str("skip;\n"),
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, 0);
    s
}

fn expr(out: &mut String, e: &Expr, ctx: u8) {
    match &e.kind {
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Name(parts) => out.push_str(&parts.join(".")),
        ExprKind::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            expr(out, inner, 6);
        }
        ExprKind::Binary(op, l, r) => {
            let prec = op.precedence();
            let paren = prec < ctx;
            if paren {
                out.push('(');
            }
            // Left-associative: the right operand needs parentheses at equal
            // precedence; comparisons never chain, so both sides do.
            let lctx = if op.is_comparison() { prec + 1 } else { prec };
            expr(out, l, lctx);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, r, prec + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn ltl_to_string(f: &LtlAst) -> String {
    let mut s = String::new();
    ltl(&mut s, f, 0);
    s
}

fn ltl_prec(f: &LtlAst) -> u8 {
    match f {
        LtlAst::Implies(..) => 1,
        LtlAst::Or(..) => 2,
        LtlAst::And(..) => 3,
        LtlAst::Until(..) | LtlAst::Release(..) => 4,
        LtlAst::Not(_) | LtlAst::Next(_) | LtlAst::Finally(_) | LtlAst::Globally(_) => 5,
        LtlAst::Const(_) | LtlAst::Atom { .. } => 6,
    }
}

fn ltl(out: &mut String, f: &LtlAst, ctx: u8) {
    let prec = ltl_prec(f);
    let paren = prec < ctx;
    if paren {
        out.push('(');
    }
    match f {
        LtlAst::Const(b) => {
            let _ = write!(out, "{b}");
        }
        LtlAst::Atom { name, cmp, .. } => {
            out.push_str(&name.join("."));
            if let Some((op, lit)) = cmp {
                let _ = write!(out, " {} {lit}", op.symbol());
            }
        }
        LtlAst::Not(a) => {
            out.push('!');
            ltl(out, a, 5);
        }
        LtlAst::Next(a) | LtlAst::Finally(a) | LtlAst::Globally(a) => {
            out.push_str(match f {
                LtlAst::Next(_) => "X ",
                LtlAst::Finally(_) => "F ",
                _ => "G ",
            });
            ltl(out, a, 5);
        }
        // right-associative binary operators
        LtlAst::Implies(a, b) | LtlAst::Until(a, b) | LtlAst::Release(a, b) => {
            ltl(out, a, prec + 1);
            out.push_str(match f {
                LtlAst::Implies(..) => " -> ",
                LtlAst::Until(..) => " U ",
                _ => " R ",
            });
            ltl(out, b, prec);
        }
        // left-associative
        LtlAst::And(a, b) | LtlAst::Or(a, b) => {
            ltl(out, a, prec);
            out.push_str(if matches!(f, LtlAst::And(..)) { " && " } else { " || " });
            ltl(out, b, prec + 1);
        }
    }
    if paren {
        out.push(')');
    }
}
