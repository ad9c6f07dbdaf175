//! The `.dfir` mini SSA representation.
//!
//! A [`Module`] holds functions and external declarations. Each [`Function`]
//! owns three arenas (values, operations, blocks); ids are plain indices into
//! them. Block arguments play the role of phi nodes. Only two types exist:
//! `int` and `ptr`.

mod dom;
mod parse;
mod print;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

pub use dom::DominatorTree;
pub use parse::{parse_module, ParseError};
pub use print::print_module;
pub use validate::{validate, Diagnostic};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Index of a value within its function.
    ValueId
);
id_type!(
    /// Index of an operation within its function's op arena.
    OpId
);
id_type!(
    /// Index of a block within its function.
    BlockId
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Ptr,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Ptr => "ptr",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Opcode {
    Const,
    Add,
    Mul,
    Alloca,
    Load,
    Store,
    DfiStore,
    Gep,
    Call,
    DfiCall,
}

impl Opcode {
    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Const => "const",
            Opcode::Add => "add",
            Opcode::Mul => "mul",
            Opcode::Alloca => "alloca",
            Opcode::Load => "load",
            Opcode::Store => "store",
            Opcode::DfiStore => "dfi_store",
            Opcode::Gep => "gep",
            Opcode::Call => "call",
            Opcode::DfiCall => "dfi_call",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        Some(match s {
            "const" => Opcode::Const,
            "add" => Opcode::Add,
            "mul" => Opcode::Mul,
            "alloca" => Opcode::Alloca,
            "load" => Opcode::Load,
            "store" => Opcode::Store,
            // `dfi.store` / `dfi.call` are accepted as aliases.
            "dfi_store" | "dfi.store" => Opcode::DfiStore,
            "gep" => Opcode::Gep,
            "call" => Opcode::Call,
            "dfi_call" | "dfi.call" => Opcode::DfiCall,
            _ => return None,
        })
    }

    /// Opcodes produced by preprocessing.
    pub fn is_dfi(self) -> bool {
        matches!(self, Opcode::DfiStore | Opcode::DfiCall)
    }

    pub fn is_call(self) -> bool {
        matches!(self, Opcode::Call | Opcode::DfiCall)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Opcode-specific payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Attr {
    None,
    Const(i64),
    Offset(i64),
    Callee(String),
}

#[derive(Clone, Debug)]
pub struct Operation {
    pub opcode: Opcode,
    pub operands: Vec<ValueId>,
    pub results: Vec<ValueId>,
    pub attr: Attr,
}

impl Operation {
    pub fn callee(&self) -> Option<&str> {
        match &self.attr {
            Attr::Callee(name) => Some(name),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Terminator {
    Return(Option<ValueId>),
    Br {
        target: BlockId,
        args: Vec<ValueId>,
    },
    CondBr {
        cond: ValueId,
        then_target: BlockId,
        then_args: Vec<ValueId>,
        else_target: BlockId,
        else_args: Vec<ValueId>,
    },
}

impl Terminator {
    /// All value operands in textual order.
    pub fn operands(&self) -> Vec<ValueId> {
        match self {
            Terminator::Return(v) => v.iter().copied().collect(),
            Terminator::Br { args, .. } => args.clone(),
            Terminator::CondBr {
                cond,
                then_args,
                else_args,
                ..
            } => std::iter::once(*cond)
                .chain(then_args.iter().copied())
                .chain(else_args.iter().copied())
                .collect(),
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut ValueId> {
        match self {
            Terminator::Return(v) => v.iter_mut().collect(),
            Terminator::Br { args, .. } => args.iter_mut().collect(),
            Terminator::CondBr {
                cond,
                then_args,
                else_args,
                ..
            } => std::iter::once(cond)
                .chain(then_args.iter_mut())
                .chain(else_args.iter_mut())
                .collect(),
        }
    }

    /// Outgoing edges as `(target, args)`.
    pub fn successors(&self) -> Vec<(BlockId, &[ValueId])> {
        match self {
            Terminator::Return(_) => Vec::new(),
            Terminator::Br { target, args } => vec![(*target, args.as_slice())],
            Terminator::CondBr {
                then_target,
                then_args,
                else_target,
                else_args,
                ..
            } => vec![
                (*then_target, then_args.as_slice()),
                (*else_target, else_args.as_slice()),
            ],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Block {
    pub label: String,
    pub args: Vec<ValueId>,
    pub ops: Vec<OpId>,
    pub term: Terminator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueDef {
    Param(u32),
    BlockArg(BlockId, u32),
    Result(OpId, u32),
}

#[derive(Clone, Debug)]
pub struct ValueData {
    pub name: String,
    pub ty: Type,
    pub def: ValueDef,
}

/// One occurrence of a value as an operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Use {
    Op(OpId, u32),
    Term(BlockId, u32),
}

/// Callee signature as seen from a call site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub params: Vec<Type>,
    pub ret: Option<Type>,
}

impl Signature {
    pub fn ptr_param_count(&self) -> usize {
        self.params.iter().filter(|t| **t == Type::Ptr).count()
    }

    /// Number of results a `dfi_call` to this signature carries: the return
    /// value first, then one per pointer parameter.
    pub fn dfi_result_count(&self) -> usize {
        usize::from(self.ret.is_some()) + self.ptr_param_count()
    }

    /// Result index of the `k`-th parameter's output, if it is a pointer.
    pub fn output_index(&self, param: usize) -> Option<usize> {
        if self.params.get(param) != Some(&Type::Ptr) {
            return None;
        }
        let before = self.params[..param]
            .iter()
            .filter(|t| **t == Type::Ptr)
            .count();
        Some(usize::from(self.ret.is_some()) + before)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternDecl {
    pub name: String,
    pub sig: Signature,
}

#[derive(Clone, Debug)]
pub struct Function {
    pub name: String,
    pub params: Vec<ValueId>,
    pub ret: Option<Type>,
    pub blocks: Vec<Block>,
    pub ops: Vec<Operation>,
    pub values: Vec<ValueData>,
    uses: Vec<Vec<Use>>,
}

impl Function {
    pub fn new(name: impl Into<String>, ret: Option<Type>) -> Self {
        Function {
            name: name.into(),
            params: Vec::new(),
            ret,
            blocks: Vec::new(),
            ops: Vec::new(),
            values: Vec::new(),
            uses: Vec::new(),
        }
    }

    pub fn value(&self, v: ValueId) -> &ValueData {
        &self.values[v.index()]
    }

    pub fn op(&self, op: OpId) -> &Operation {
        &self.ops[op.index()]
    }

    pub fn block(&self, b: BlockId) -> &Block {
        &self.blocks[b.index()]
    }

    pub fn ty(&self, v: ValueId) -> Type {
        self.values[v.index()].ty
    }

    pub fn name_of(&self, v: ValueId) -> &str {
        &self.values[v.index()].name
    }

    pub fn value_count(&self) -> usize {
        self.values.len()
    }

    pub fn value_ids(&self) -> impl Iterator<Item = ValueId> + '_ {
        (0..self.values.len() as u32).map(ValueId)
    }

    pub fn find_value(&self, name: &str) -> Option<ValueId> {
        let name = name.strip_prefix('%').unwrap_or(name);
        self.values
            .iter()
            .position(|v| v.name == name)
            .map(|i| ValueId(i as u32))
    }

    pub fn signature(&self) -> Signature {
        Signature {
            params: self.params.iter().map(|p| self.ty(*p)).collect(),
            ret: self.ret,
        }
    }

    /// Uses of `v`, kept in sync by [`Function::rebuild_uses`].
    pub fn uses(&self, v: ValueId) -> &[Use] {
        self.uses.get(v.index()).map_or(&[], Vec::as_slice)
    }

    /// Recomputes every use list from the operand lists.
    pub fn rebuild_uses(&mut self) {
        self.uses = self.compute_uses();
    }

    /// Use lists derived from scratch, in textual order.
    pub fn compute_uses(&self) -> Vec<Vec<Use>> {
        let mut uses = vec![Vec::new(); self.values.len()];
        for (bi, block) in self.blocks.iter().enumerate() {
            for &op in &block.ops {
                for (i, v) in self.ops[op.index()].operands.iter().enumerate() {
                    uses[v.index()].push(Use::Op(op, i as u32));
                }
            }
            for (i, v) in block.term.operands().into_iter().enumerate() {
                uses[v.index()].push(Use::Term(BlockId(bi as u32), i as u32));
            }
        }
        uses
    }

    pub fn add_value(&mut self, name: impl Into<String>, ty: Type, def: ValueDef) -> ValueId {
        let id = ValueId(self.values.len() as u32);
        self.values.push(ValueData {
            name: name.into(),
            ty,
            def,
        });
        self.uses.push(Vec::new());
        id
    }

    /// Returns a name derived from `base` that no value in the function uses.
    pub fn fresh_name(&self, base: &str, taken: &mut std::collections::HashSet<String>) -> String {
        if taken.is_empty() {
            taken.extend(self.values.iter().map(|v| v.name.clone()));
        }
        let mut n = 0usize;
        loop {
            let candidate = format!("{base}{n}");
            if !taken.contains(&candidate) {
                taken.insert(candidate.clone());
                return candidate;
            }
            n += 1;
        }
    }

    /// Operations in textual order together with their block.
    pub fn ops_in_order(&self) -> impl Iterator<Item = (BlockId, OpId)> + '_ {
        self.blocks.iter().enumerate().flat_map(|(bi, b)| {
            b.ops.iter().map(move |op| (BlockId(bi as u32), *op))
        })
    }

    /// Values used by `return` terminators.
    pub fn return_values(&self) -> Vec<ValueId> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if let Terminator::Return(Some(v)) = b.term {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Blocks ending in `return`.
    pub fn return_blocks(&self) -> Vec<BlockId> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(b.term, Terminator::Return(_)))
            .map(|(i, _)| BlockId(i as u32))
            .collect()
    }

    /// Predecessor lists indexed by block.
    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            for (t, _) in b.term.successors() {
                if let Some(p) = preds.get_mut(t.index()) {
                    p.push(BlockId(bi as u32));
                }
            }
        }
        preds
    }

    /// The pointer a renamed pointer was derived from: the destination of a
    /// `dfi_store`, or the matching argument of a `dfi_call` output.
    pub fn ptr_origin(&self, v: ValueId, module: Option<&Module>) -> Option<ValueId> {
        let ValueDef::Result(op, idx) = self.value(v).def else {
            return None;
        };
        let op = self.op(op);
        match op.opcode {
            Opcode::DfiStore => op.operands.get(1).copied(),
            Opcode::DfiCall => {
                let ptr_args: Vec<ValueId> = op
                    .operands
                    .iter()
                    .copied()
                    .filter(|a| self.ty(*a) == Type::Ptr)
                    .collect();
                // Without a module the return slot is inferred from the count.
                let has_ret = match module.and_then(|m| m.signature(op.callee()?)) {
                    Some(sig) => sig.ret.is_some(),
                    None => op.results.len() > ptr_args.len(),
                };
                let first_ptr = usize::from(has_ret);
                (idx as usize)
                    .checked_sub(first_ptr)
                    .and_then(|k| ptr_args.get(k).copied())
            }
            _ => None,
        }
    }

    /// Follows [`Function::ptr_origin`] to the pointer that was originally
    /// written in the source.
    pub fn ptr_root(&self, mut v: ValueId, module: Option<&Module>) -> ValueId {
        let mut steps = 0;
        while let Some(o) = self.ptr_origin(v, module) {
            v = o;
            steps += 1;
            if steps > self.values.len() {
                break;
            }
        }
        v
    }

    /// For pointer parameter `param`, the renamed versions of it that are
    /// current at each `return`. A parameter never renamed on the way to a
    /// return is its own exit version.
    pub fn exit_versions(&self, param: ValueId, module: Option<&Module>) -> Vec<ValueId> {
        let dom = DominatorTree::compute(self);
        let mut out = Vec::new();
        for rb in self.return_blocks() {
            if !dom.is_reachable(rb) {
                continue;
            }
            let mut found = None;
            let mut cur = Some(rb);
            'walk: while let Some(b) = cur {
                for &op in self.block(b).ops.iter().rev() {
                    for &r in self.op(op).results.iter().rev() {
                        if self.ty(r) == Type::Ptr
                            && self.ptr_origin(r, module).is_some()
                            && self.ptr_root(r, module) == param
                        {
                            found = Some(r);
                            break 'walk;
                        }
                    }
                }
                cur = dom.idom(b);
            }
            let v = found.unwrap_or(param);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

/// Structural equality: same names, types, op sequences, and terminators,
/// independent of arena order.
impl PartialEq for Function {
    fn eq(&self, other: &Self) -> bool {
        let vals_eq = |a: &[ValueId], b: &[ValueId]| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| {
                    self.name_of(*x) == other.name_of(*y) && self.ty(*x) == other.ty(*y)
                })
        };
        let label = |f: &Function, b: BlockId| f.block(b).label.clone();
        if self.name != other.name
            || self.ret != other.ret
            || !vals_eq(&self.params, &other.params)
            || self.blocks.len() != other.blocks.len()
        {
            return false;
        }
        for (ba, bb) in self.blocks.iter().zip(&other.blocks) {
            if ba.label != bb.label || !vals_eq(&ba.args, &bb.args) || ba.ops.len() != bb.ops.len()
            {
                return false;
            }
            for (oa, ob) in ba.ops.iter().zip(&bb.ops) {
                let (oa, ob) = (self.op(*oa), other.op(*ob));
                if oa.opcode != ob.opcode
                    || oa.attr != ob.attr
                    || !vals_eq(&oa.operands, &ob.operands)
                    || !vals_eq(&oa.results, &ob.results)
                {
                    return false;
                }
            }
            let same_term = match (&ba.term, &bb.term) {
                (Terminator::Return(x), Terminator::Return(y)) => match (x, y) {
                    (None, None) => true,
                    (Some(x), Some(y)) => vals_eq(&[*x], &[*y]),
                    _ => false,
                },
                (Terminator::Br { target: t1, args: a1 }, Terminator::Br { target: t2, args: a2 }) => {
                    label(self, *t1) == label(other, *t2) && vals_eq(a1, a2)
                }
                (
                    Terminator::CondBr {
                        cond: c1,
                        then_target: t1,
                        then_args: ta1,
                        else_target: e1,
                        else_args: ea1,
                    },
                    Terminator::CondBr {
                        cond: c2,
                        then_target: t2,
                        then_args: ta2,
                        else_target: e2,
                        else_args: ea2,
                    },
                ) => {
                    vals_eq(&[*c1], &[*c2])
                        && label(self, *t1) == label(other, *t2)
                        && label(self, *e1) == label(other, *e2)
                        && vals_eq(ta1, ta2)
                        && vals_eq(ea1, ea2)
                }
                _ => false,
            };
            if !same_term {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug, Default)]
pub struct Module {
    pub functions: Vec<Function>,
    pub externs: Vec<ExternDecl>,
    index: HashMap<String, usize>,
}

impl PartialEq for Module {
    fn eq(&self, other: &Self) -> bool {
        self.functions == other.functions && self.externs == other.externs
    }
}

impl Module {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_function(&mut self, f: Function) {
        self.index.insert(f.name.clone(), self.functions.len());
        self.functions.push(f);
    }

    pub fn add_extern(&mut self, decl: ExternDecl) {
        self.externs.push(decl);
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        let name = name.strip_prefix('@').unwrap_or(name);
        self.index.get(name).copied()
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.function_index(name).map(|i| &self.functions[i])
    }

    pub fn extern_decl(&self, name: &str) -> Option<&ExternDecl> {
        let name = name.strip_prefix('@').unwrap_or(name);
        self.externs.iter().find(|e| e.name == name)
    }

    pub fn signature(&self, name: &str) -> Option<Signature> {
        self.function(name)
            .map(Function::signature)
            .or_else(|| self.extern_decl(name).map(|e| e.sig.clone()))
    }

    /// Total number of operations, terminators excluded.
    pub fn op_count(&self) -> usize {
        self.functions
            .iter()
            .map(|f| f.blocks.iter().map(|b| b.ops.len()).sum::<usize>())
            .sum()
    }

    /// Whether any `dfi_store` or `dfi_call` is present.
    pub fn has_dfi_forms(&self) -> bool {
        self.functions
            .iter()
            .any(|f| f.ops_in_order().any(|(_, op)| f.op(op).opcode.is_dfi()))
    }

    /// Whether any plain `store` or `call` is left to rewrite.
    pub fn has_raw_memory_forms(&self) -> bool {
        self.functions.iter().any(|f| {
            f.ops_in_order()
                .any(|(_, op)| matches!(f.op(op).opcode, Opcode::Store | Opcode::Call))
        })
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
    }
}
