use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{
    BlockId, DominatorTree, Function, Module, Opcode, Terminator, Type, Use, ValueDef, ValueId,
};

/// A structural problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub function: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}: {}", self.function, self.message)
    }
}

/// Checks types, arities, SSA dominance and branch-argument agreement.
/// An empty result means the module is well formed.
pub fn validate(m: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = HashSet::new();
    for e in &m.externs {
        if !seen.insert(e.name.as_str()) {
            diags.push(Diagnostic {
                function: e.name.clone(),
                message: "duplicate function name".into(),
            });
        }
    }
    for f in &m.functions {
        if !seen.insert(f.name.as_str()) {
            diags.push(Diagnostic {
                function: f.name.clone(),
                message: "duplicate function name".into(),
            });
        }
        let mut d = Checker {
            m,
            f,
            out: Vec::new(),
        };
        d.run();
        diags.extend(d.out.into_iter().map(|message| Diagnostic {
            function: f.name.clone(),
            message,
        }));
    }
    diags
}

struct Checker<'a> {
    m: &'a Module,
    f: &'a Function,
    out: Vec<String>,
}

impl Checker<'_> {
    fn err(&mut self, msg: String) {
        self.out.push(msg);
    }

    fn name(&self, v: ValueId) -> String {
        format!("%{}", self.f.name_of(v))
    }

    fn run(&mut self) {
        let f = self.f;
        if f.blocks.is_empty() {
            self.err("function has no blocks".into());
            return;
        }
        let nvals = f.values.len();
        let in_range = |v: &ValueId| v.index() < nvals;
        let all_operands_valid = f.ops.iter().all(|o| o.operands.iter().all(in_range) && o.results.iter().all(in_range))
            && f.blocks.iter().all(|b| b.term.operands().iter().all(in_range) && b.args.iter().all(in_range));
        if !all_operands_valid {
            self.err("operand refers to a value outside the function".into());
            return;
        }
        self.check_definitions();
        self.check_ops();
        self.check_terminators();
        self.check_dominance();
        if f.compute_uses() != (0..nvals).map(|i| f.uses(ValueId(i as u32)).to_vec()).collect::<Vec<_>>() {
            self.err("stored use lists are stale".into());
        }
    }

    /// Every value has exactly one definition site and it agrees with `def`.
    fn check_definitions(&mut self) {
        let f = self.f;
        let mut count = vec![0u32; f.values.len()];
        let mut names = HashSet::new();
        for v in &f.values {
            if !names.insert(v.name.as_str()) {
                self.err(format!("value name `%{}` is defined more than once", v.name));
            }
        }
        for (i, p) in f.params.iter().enumerate() {
            count[p.index()] += 1;
            if f.value(*p).def != ValueDef::Param(i as u32) {
                self.err(format!("parameter {} has inconsistent definition", self.name(*p)));
            }
        }
        let placed: HashSet<_> = f.blocks.iter().flat_map(|b| b.ops.iter().copied()).collect();
        for (bi, b) in f.blocks.iter().enumerate() {
            for (ai, a) in b.args.iter().enumerate() {
                count[a.index()] += 1;
                if f.value(*a).def != ValueDef::BlockArg(BlockId(bi as u32), ai as u32) {
                    self.err(format!("block argument {} has inconsistent definition", self.name(*a)));
                }
            }
            for &op in &b.ops {
                for (ri, r) in f.op(op).results.iter().enumerate() {
                    count[r.index()] += 1;
                    if f.value(*r).def != ValueDef::Result(op, ri as u32) {
                        self.err(format!("result {} has inconsistent definition", self.name(*r)));
                    }
                }
            }
        }
        if placed.len() != f.blocks.iter().map(|b| b.ops.len()).sum::<usize>() {
            self.err("an operation appears in more than one position".into());
        }
        for (i, c) in count.iter().enumerate() {
            if *c != 1 {
                let v = ValueId(i as u32);
                self.err(format!("value {} has {c} definitions", self.name(v)));
            }
        }
    }

    fn check_ops(&mut self) {
        let f = self.f;
        for (_, op_id) in f.ops_in_order() {
            let op = f.op(op_id);
            let mn = op.opcode.mnemonic();
            let ins: Vec<Type> = op.operands.iter().map(|v| f.ty(*v)).collect();
            let outs: Vec<Type> = op.results.iter().map(|v| f.ty(*v)).collect();
            let want = |ins_ok: bool, outs_ok: bool, this: &mut Self, shape: &str| {
                if !ins_ok || !outs_ok {
                    this.err(format!("`{mn}` expects {shape}, found {ins:?} -> {outs:?}"));
                }
            };
            use Type::{Int, Ptr};
            match op.opcode {
                Opcode::Const => want(ins.is_empty(), outs == [Int], self, "() -> int"),
                Opcode::Add | Opcode::Mul => {
                    want(ins == [Int, Int], outs == [Int], self, "(int, int) -> int")
                }
                Opcode::Alloca => want(ins.is_empty(), outs == [Ptr], self, "() -> ptr"),
                Opcode::Load => want(ins == [Ptr], outs.len() == 1, self, "(ptr) -> value"),
                Opcode::Store => want(
                    ins.len() == 2 && ins[1] == Ptr,
                    outs.is_empty(),
                    self,
                    "(value, ptr) -> ()",
                ),
                Opcode::DfiStore => want(
                    ins.len() == 2 && ins[1] == Ptr,
                    outs == [Ptr],
                    self,
                    "(value, ptr) -> ptr",
                ),
                Opcode::Gep => want(ins == [Ptr], outs == [Ptr], self, "(ptr) -> ptr"),
                Opcode::Call | Opcode::DfiCall => self.check_call(op_id),
            }
            let attr_ok = matches!(
                (op.opcode, &op.attr),
                (Opcode::Const, super::Attr::Const(_))
                    | (Opcode::Gep, super::Attr::Offset(_))
                    | (Opcode::Call | Opcode::DfiCall, super::Attr::Callee(_))
                    | (
                        Opcode::Add
                            | Opcode::Mul
                            | Opcode::Alloca
                            | Opcode::Load
                            | Opcode::Store
                            | Opcode::DfiStore,
                        super::Attr::None
                    )
            );
            if !attr_ok {
                self.err(format!("`{mn}` has a malformed attribute"));
            }
        }
    }

    fn check_call(&mut self, op_id: super::OpId) {
        let f = self.f;
        let op = f.op(op_id);
        let Some(callee) = op.callee() else {
            return;
        };
        let Some(sig) = self.m.signature(callee) else {
            self.err(format!("call to unknown function `@{callee}`"));
            return;
        };
        if op.operands.len() != sig.params.len() {
            self.err(format!(
                "call to `@{callee}` passes {} argument(s), expected {}",
                op.operands.len(),
                sig.params.len()
            ));
            return;
        }
        for (i, (a, t)) in op.operands.iter().zip(&sig.params).enumerate() {
            if f.ty(*a) != *t {
                self.err(format!(
                    "argument {i} of call to `@{callee}` has type {}, expected {t}",
                    f.ty(*a)
                ));
            }
        }
        let outs: Vec<Type> = op.results.iter().map(|v| f.ty(*v)).collect();
        let mut want: Vec<Type> = sig.ret.into_iter().collect();
        if op.opcode == Opcode::DfiCall {
            want.extend(std::iter::repeat_n(Type::Ptr, sig.ptr_param_count()));
        }
        if outs != want {
            self.err(format!(
                "`{}` to `@{callee}` has results {outs:?}, expected {want:?}",
                op.opcode.mnemonic()
            ));
        }
    }

    fn check_terminators(&mut self) {
        let f = self.f;
        if !f.predecessors()[0].is_empty() {
            self.err("entry block has predecessors".into());
        }
        if !f.blocks[0].args.is_empty() {
            self.err("entry block takes arguments".into());
        }
        for b in &f.blocks {
            match &b.term {
                Terminator::Return(v) => match (v, f.ret) {
                    (None, None) => {}
                    (Some(v), Some(t)) if f.ty(*v) == t => {}
                    (Some(v), Some(t)) => self.err(format!(
                        "`^{}` returns {} of type {}, expected {t}",
                        b.label,
                        self.name(*v),
                        f.ty(*v)
                    )),
                    (Some(_), None) => {
                        self.err(format!("`^{}` returns a value from a void function", b.label))
                    }
                    (None, Some(_)) => self.err(format!("`^{}` returns no value", b.label)),
                },
                Terminator::CondBr { cond, .. } if f.ty(*cond) != Type::Int => {
                    self.err(format!("`^{}` branches on a pointer", b.label));
                }
                _ => {}
            }
            for (target, args) in b.term.successors() {
                let Some(tb) = f.blocks.get(target.index()) else {
                    self.err(format!("`^{}` branches to a missing block", b.label));
                    continue;
                };
                if tb.args.len() != args.len() {
                    self.err(format!(
                        "`^{}` passes {} argument(s) to `^{}`, which takes {}",
                        b.label,
                        args.len(),
                        tb.label,
                        tb.args.len()
                    ));
                    continue;
                }
                for (a, p) in args.iter().zip(&tb.args) {
                    if f.ty(*a) != f.ty(*p) {
                        self.err(format!(
                            "`^{}` passes {} of type {} to {} of type {}",
                            b.label,
                            self.name(*a),
                            f.ty(*a),
                            self.name(*p),
                            f.ty(*p)
                        ));
                    }
                }
            }
        }
    }

    fn check_dominance(&mut self) {
        let f = self.f;
        let dom = DominatorTree::compute(f);
        // (block, position) of each definition; params and block args at -1.
        let mut pos: Vec<(BlockId, isize)> = vec![(BlockId(0), -1); f.values.len()];
        for (bi, b) in f.blocks.iter().enumerate() {
            for a in &b.args {
                pos[a.index()] = (BlockId(bi as u32), -1);
            }
            for (oi, op) in b.ops.iter().enumerate() {
                for r in &f.op(*op).results {
                    pos[r.index()] = (BlockId(bi as u32), oi as isize);
                }
            }
        }
        for v in f.value_ids() {
            let (db, di) = pos[v.index()];
            for u in f.compute_uses()[v.index()].iter() {
                let (ub, ui) = match *u {
                    Use::Op(op, _) => {
                        let (b, i) = f
                            .blocks
                            .iter()
                            .enumerate()
                            .find_map(|(bi, b)| {
                                b.ops.iter().position(|o| *o == op).map(|i| (bi, i))
                            })
                            .unwrap_or((0, 0));
                        (BlockId(b as u32), i as isize)
                    }
                    Use::Term(b, _) => (b, isize::MAX),
                };
                let ok = if db == ub { di < ui } else { dom.dominates(db, ub) };
                if !ok {
                    self.err(format!(
                        "use of {} in `^{}` is not dominated by its definition",
                        self.name(v),
                        f.block(ub).label
                    ));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    fn diags(src: &str) -> Vec<String> {
        validate(&parse_module(src).unwrap())
            .into_iter()
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn clean_module() {
        assert!(diags("func @f(%p: ptr) -> int {\n  %v = load %p : int\n  return %v\n}\n").is_empty());
    }

    #[test]
    fn store_to_int() {
        let d = diags("func @f(%a: int) {\n  store %a, %a\n  return\n}\n");
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("`store` expects"));
    }

    #[test]
    fn cond_br_argument_count() {
        let d = diags(
            "func @f(%c: int) {\n  cond_br %c, ^a(%c), ^b()\n^a:\n  return\n^b:\n  return\n}\n",
        );
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("passes 1 argument(s)"));
    }

    #[test]
    fn non_dominating_definition() {
        let d = diags(
            "func @f(%c: int) -> int {\n  cond_br %c, ^a(), ^b()\n^a:\n  %x = const 1\n  br ^j()\n^b:\n  br ^j()\n^j:\n  return %x\n}\n",
        );
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("not dominated"));
    }

    #[test]
    fn call_arity() {
        let d = diags("extern @g(int)\nfunc @f(%a: int) {\n  call @g(%a, %a)\n  return\n}\n");
        assert!(d.iter().any(|m| m.contains("passes 2 argument(s)")), "{d:?}");
    }

    #[test]
    fn return_type_mismatch() {
        let d = diags("func @f(%p: ptr) -> int {\n  return %p\n}\n");
        assert_eq!(d.len(), 1, "{d:?}");
    }
}
