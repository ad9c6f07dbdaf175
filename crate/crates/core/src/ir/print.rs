use std::fmt::Write;

use super::{Attr, Function, Module, Opcode, Terminator, ValueId};

/// Renders a module in the normative `.dfir` form. Parsing the output yields
/// a structurally equal module.
pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    for e in &m.externs {
        let params: Vec<String> = e.sig.params.iter().map(ToString::to_string).collect();
        let _ = write!(out, "extern @{}({})", e.name, params.join(", "));
        if let Some(r) = e.sig.ret {
            let _ = write!(out, " -> {r}");
        }
        out.push('\n');
    }
    for (i, f) in m.functions.iter().enumerate() {
        if i > 0 || !m.externs.is_empty() {
            out.push('\n');
        }
        print_function(f, &mut out);
    }
    out
}

fn names(f: &Function, vs: &[ValueId]) -> String {
    vs.iter()
        .map(|v| format!("%{}", f.name_of(*v)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn typed(f: &Function, vs: &[ValueId]) -> String {
    vs.iter()
        .map(|v| format!("%{}: {}", f.name_of(*v), f.ty(*v)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn print_function(f: &Function, out: &mut String) {
    let _ = write!(out, "func @{}({})", f.name, typed(f, &f.params));
    if let Some(r) = f.ret {
        let _ = write!(out, " -> {r}");
    }
    out.push_str(" {\n");
    for b in &f.blocks {
        if b.args.is_empty() {
            let _ = writeln!(out, "^{}:", b.label);
        } else {
            let _ = writeln!(out, "^{}({}):", b.label, typed(f, &b.args));
        }
        for &op in &b.ops {
            let op = f.op(op);
            out.push_str("  ");
            if !op.results.is_empty() {
                let _ = write!(out, "{} = ", names(f, &op.results));
            }
            out.push_str(op.opcode.mnemonic());
            match (&op.attr, op.opcode) {
                (Attr::Const(c), _) => {
                    let _ = write!(out, " {c}");
                }
                (Attr::Offset(o), _) => {
                    let _ = write!(out, " {}, {o}", names(f, &op.operands));
                }
                (Attr::Callee(c), _) => {
                    let _ = write!(out, " @{c}({})", names(f, &op.operands));
                }
                (Attr::None, _) if !op.operands.is_empty() => {
                    let _ = write!(out, " {}", names(f, &op.operands));
                }
                (Attr::None, _) => {}
            }
            if op.opcode == Opcode::Load {
                let _ = write!(out, " : {}", f.ty(op.results[0]));
            }
            out.push('\n');
        }
        let label = |t: super::BlockId| &f.block(t).label;
        match &b.term {
            Terminator::Return(None) => out.push_str("  return\n"),
            Terminator::Return(Some(v)) => {
                let _ = writeln!(out, "  return %{}", f.name_of(*v));
            }
            Terminator::Br { target, args } => {
                let _ = writeln!(out, "  br ^{}({})", label(*target), names(f, args));
            }
            Terminator::CondBr {
                cond,
                then_target,
                then_args,
                else_target,
                else_args,
            } => {
                let _ = writeln!(
                    out,
                    "  cond_br %{}, ^{}({}), ^{}({})",
                    f.name_of(*cond),
                    label(*then_target),
                    names(f, then_args),
                    label(*else_target),
                    names(f, else_args)
                );
            }
        }
    }
    out.push_str("}\n");
}
