//! Rewrites `store` into `dfi_store` and `call` into `dfi_call`, renaming the
//! affected pointer at every use it dominates so that memory side effects
//! become ordinary SSA def-use edges.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::ir::{BlockId, DominatorTree, Function, Module, OpId, Opcode, Type, ValueDef, ValueId};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("@{function}: call to unknown function `@{callee}`")]
    UnknownCallee { function: String, callee: String },
    #[error("@{function}: call to `@{callee}` passes {found} argument(s), expected {expected}")]
    ArityMismatch {
        function: String,
        callee: String,
        expected: usize,
        found: usize,
    },
}

/// Scoped map from a pointer as written to its current renamed version.
/// Entries pushed while visiting a dominator subtree are undone on exit.
#[derive(Default, Debug)]
pub struct RenameMap {
    current: HashMap<ValueId, ValueId>,
    undo: Vec<(ValueId, Option<ValueId>)>,
}

impl RenameMap {
    pub fn get(&self, v: ValueId) -> ValueId {
        self.current.get(&v).copied().unwrap_or(v)
    }

    pub fn set(&mut self, from: ValueId, to: ValueId) {
        let old = self.current.insert(from, to);
        self.undo.push((from, old));
    }

    pub fn mark(&self) -> usize {
        self.undo.len()
    }

    pub fn rollback(&mut self, mark: usize) {
        while self.undo.len() > mark {
            let (k, old) = self.undo.pop().unwrap();
            match old {
                Some(v) => self.current.insert(k, v),
                None => self.current.remove(&k),
            };
        }
    }
}

/// Replaces every `store` with a `dfi_store` producing a fresh pointer that
/// supersedes the destination at all uses the store dominates.
pub fn expand_stores(f: &Function) -> Function {
    let mut out = f.clone();
    let mut taken = HashSet::new();
    let mut rewritten: HashMap<OpId, Vec<(ValueId, ValueId)>> = HashMap::new();
    let order: Vec<OpId> = f.ops_in_order().map(|(_, op)| op).collect();
    for op_id in order {
        if out.op(op_id).opcode != Opcode::Store {
            continue;
        }
        let dest = out.op(op_id).operands[1];
        let base = out.name_of(out.ptr_root(dest, None)).to_string();
        let name = out.fresh_name(&base, &mut taken);
        let fresh = out.add_value(name, Type::Ptr, ValueDef::Result(op_id, 0));
        let op = &mut out.ops[op_id.index()];
        op.opcode = Opcode::DfiStore;
        op.results = vec![fresh];
        rewritten.insert(op_id, vec![(dest, fresh)]);
    }
    if rewritten.is_empty() {
        return out;
    }
    rename_dominated(&mut out, &rewritten);
    out
}

/// Replaces every `call` with a `dfi_call` whose results are the original
/// return value (if any) followed by one fresh pointer per pointer argument.
pub fn expand_calls(f: &Function, m: &Module) -> Result<Function, PreprocessError> {
    let mut out = f.clone();
    let mut taken = HashSet::new();
    let mut rewritten: HashMap<OpId, Vec<(ValueId, ValueId)>> = HashMap::new();
    let order: Vec<OpId> = f.ops_in_order().map(|(_, op)| op).collect();
    for op_id in order {
        if out.op(op_id).opcode != Opcode::Call {
            continue;
        }
        let callee = out.op(op_id).callee().unwrap_or_default().to_string();
        let sig = m.signature(&callee).ok_or_else(|| PreprocessError::UnknownCallee {
            function: f.name.clone(),
            callee: callee.clone(),
        })?;
        let args = out.op(op_id).operands.clone();
        if args.len() != sig.params.len() {
            return Err(PreprocessError::ArityMismatch {
                function: f.name.clone(),
                callee,
                expected: sig.params.len(),
                found: args.len(),
            });
        }
        let mut results = out.op(op_id).results.clone();
        let mut pairs = Vec::new();
        for (a, t) in args.iter().zip(&sig.params) {
            if *t != Type::Ptr {
                continue;
            }
            let base = out.name_of(out.ptr_root(*a, Some(m))).to_string();
            let name = out.fresh_name(&base, &mut taken);
            let idx = results.len() as u32;
            let fresh = out.add_value(name, Type::Ptr, ValueDef::Result(op_id, idx));
            results.push(fresh);
            pairs.push((*a, fresh));
        }
        let op = &mut out.ops[op_id.index()];
        op.opcode = Opcode::DfiCall;
        op.results = results;
        rewritten.insert(op_id, pairs);
    }
    if rewritten.is_empty() {
        return Ok(out);
    }
    rename_dominated(&mut out, &rewritten);
    Ok(out)
}

/// Walks the dominator tree in preorder, rewriting operands through the
/// scoped rename map. After a rewritten op, each `(written, fresh)` pair
/// redirects later dominated uses of `written` to `fresh`.
fn rename_dominated(f: &mut Function, rewritten: &HashMap<OpId, Vec<(ValueId, ValueId)>>) {
    let dom = DominatorTree::compute(f);
    let mut map = RenameMap::default();
    // Stack entries: (block, rollback mark to restore after its subtree).
    enum Step {
        Enter(BlockId),
        Exit(usize),
    }
    let mut stack = vec![Step::Enter(BlockId(0))];
    while let Some(step) = stack.pop() {
        let b = match step {
            Step::Exit(mark) => {
                map.rollback(mark);
                continue;
            }
            Step::Enter(b) => b,
        };
        let mark = map.mark();
        let ops = f.block(b).ops.clone();
        for op_id in ops {
            let op = &mut f.ops[op_id.index()];
            for v in op.operands.iter_mut() {
                *v = map.get(*v);
            }
            // Pairs hold the pointer as written in the input, so later uses
            // spelled the same way pick up the fresh version.
            for (written, fresh) in rewritten.get(&op_id).into_iter().flatten() {
                map.set(*written, *fresh);
            }
        }
        for v in f.blocks[b.index()].term.operands_mut() {
            *v = map.get(*v);
        }
        stack.push(Step::Exit(mark));
        for &c in dom.children(b).iter().rev() {
            stack.push(Step::Enter(c));
        }
    }
    f.rebuild_uses();
}

/// Runs both rewrites over every function. Functions are independent and
/// are processed in parallel.
pub fn preprocess_module(m: &Module) -> Result<Module, PreprocessError> {
    let functions: Result<Vec<Function>, PreprocessError> = m
        .functions
        .par_iter()
        .map(|f| expand_calls(&expand_stores(f), m))
        .collect();
    let mut out = Module::new();
    for e in &m.externs {
        out.add_extern(e.clone());
    }
    for f in functions? {
        out.add_function(f);
    }
    Ok(out)
}
