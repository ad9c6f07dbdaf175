//! Bounded inlining of `dfi_call`s to defined functions.
//!
//! A call is replaced by a clone of the callee's body: parameters become the
//! actual arguments, every `return` branches to a continuation block whose
//! arguments are the call's former results (return value first, then the
//! exit version of each pointer parameter in order).

use dfi_core::ir::{
    Block, BlockId, Function, Module, OpId, Opcode, Operation, Terminator, ValueDef, ValueId,
};

use crate::dom::{dominator_sets, version_at_end};

/// A module after inlining, with the provenance of every value.
#[derive(Clone, Debug)]
pub struct Inlined {
    pub module: Module,
    /// `origin[f][v]` is the function index and value in the input module
    /// that value `v` of function `f` was copied from.
    pub origin: Vec<Vec<(usize, ValueId)>>,
}

/// Inlines calls to defined functions `depth` levels deep. Calls still
/// present afterwards (recursion, or deeper chains) are left in place.
pub fn inline_expand(m: &Module, depth: usize) -> Module {
    inline_expand_traced(m, depth).module
}

pub fn inline_expand_traced(m: &Module, depth: usize) -> Inlined {
    let n = m.functions.len();
    let mut funcs = m.functions.clone();
    let mut origin: Vec<Vec<(usize, ValueId)>> = funcs
        .iter()
        .enumerate()
        .map(|(fi, f)| f.value_ids().map(|v| (fi, v)).collect())
        .collect();
    let doms: Vec<Vec<Vec<bool>>> = m.functions.iter().map(dominator_sets).collect();
    let mut counters = vec![0usize; n];
    for _ in 0..depth {
        let mut changed = false;
        for fi in 0..n {
            if let Some((nf, no)) = inline_calls(&funcs[fi], &origin[fi], m, &doms, &mut counters[fi]) {
                funcs[fi] = nf;
                origin[fi] = no;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut module = m.clone();
    module.functions = funcs;
    Inlined { module, origin }
}

fn is_inlinable(op: &Operation, m: &Module) -> Option<usize> {
    if op.opcode != Opcode::DfiCall {
        return None;
    }
    m.function_index(op.callee()?)
}

fn push_op(nf: &mut Function, block: &mut Block, op: Operation) {
    let id = OpId(nf.ops.len() as u32);
    for (i, r) in op.results.iter().enumerate() {
        nf.values[r.index()].def = ValueDef::Result(id, i as u32);
    }
    nf.ops.push(op);
    block.ops.push(id);
}

fn map_term(t: &Terminator, block: impl Fn(BlockId) -> BlockId, val: impl Fn(ValueId) -> ValueId) -> Terminator {
    match t {
        Terminator::Return(v) => Terminator::Return(v.map(&val)),
        Terminator::Br { target, args } => Terminator::Br {
            target: block(*target),
            args: args.iter().map(|a| val(*a)).collect(),
        },
        Terminator::CondBr {
            cond,
            then_target,
            then_args,
            else_target,
            else_args,
        } => Terminator::CondBr {
            cond: val(*cond),
            then_target: block(*then_target),
            then_args: then_args.iter().map(|a| val(*a)).collect(),
            else_target: block(*else_target),
            else_args: else_args.iter().map(|a| val(*a)).collect(),
        },
    }
}

/// One level of inlining over every inlinable call of `f`; `None` when
/// there is nothing to inline.
fn inline_calls(
    f: &Function,
    origin: &[(usize, ValueId)],
    m: &Module,
    doms: &[Vec<Vec<bool>>],
    next: &mut usize,
) -> Option<(Function, Vec<(usize, ValueId)>)> {
    // Index of the first block each original block turns into.
    let mut first = Vec::with_capacity(f.blocks.len());
    let mut count = 0usize;
    let mut any = false;
    for b in &f.blocks {
        first.push(BlockId(count as u32));
        count += 1;
        for &op in &b.ops {
            if let Some(ci) = is_inlinable(f.op(op), m) {
                count += m.functions[ci].blocks.len() + 1;
                any = true;
            }
        }
    }
    if !any {
        return None;
    }
    let mut nf = Function::new(f.name.clone(), f.ret);
    nf.params = f.params.clone();
    nf.values = f.values.clone();
    for v in nf.values.iter_mut() {
        if let ValueDef::BlockArg(b, i) = v.def {
            v.def = ValueDef::BlockArg(first[b.index()], i);
        }
    }
    let mut origin = origin.to_vec();
    for b in &f.blocks {
        let mut cur = Block {
            label: b.label.clone(),
            args: b.args.clone(),
            ops: Vec::new(),
            term: Terminator::Return(None),
        };
        for &op in &b.ops {
            let call = f.op(op);
            let Some(ci) = is_inlinable(call, m) else {
                push_op(&mut nf, &mut cur, call.clone());
                continue;
            };
            let g = &m.functions[ci];
            let tag = format!("{}_{}_", g.name, *next);
            *next += 1;
            let entry = nf.blocks.len() + 1;
            let cont = BlockId((entry + g.blocks.len()) as u32);
            cur.term = Terminator::Br {
                target: BlockId(entry as u32),
                args: Vec::new(),
            };
            nf.blocks.push(cur);

            let mut vmap = vec![ValueId(u32::MAX); g.value_count()];
            for (i, p) in g.params.iter().enumerate() {
                vmap[p.index()] = call.operands[i];
            }
            for v in g.value_ids() {
                let d = g.value(v);
                let def = match d.def {
                    ValueDef::Param(_) => continue,
                    ValueDef::BlockArg(gb, i) => ValueDef::BlockArg(BlockId((entry + gb.index()) as u32), i),
                    ValueDef::Result(..) => ValueDef::Result(OpId(u32::MAX), 0),
                };
                vmap[v.index()] = nf.add_value(format!("{tag}{}", d.name), d.ty, def);
                origin.push((ci, v));
            }
            let val = |v: ValueId| vmap[v.index()];
            let ptr_params: Vec<ValueId> = g
                .params
                .iter()
                .copied()
                .filter(|p| g.ty(*p) == dfi_core::ir::Type::Ptr)
                .collect();
            for (gbi, gb) in g.blocks.iter().enumerate() {
                let mut nb = Block {
                    label: format!("{tag}{}", gb.label),
                    args: gb.args.iter().map(|a| val(*a)).collect(),
                    ops: Vec::new(),
                    term: Terminator::Return(None),
                };
                for &gop in &gb.ops {
                    let mut o = g.op(gop).clone();
                    o.operands.iter_mut().for_each(|a| *a = val(*a));
                    o.results.iter_mut().for_each(|r| *r = val(*r));
                    push_op(&mut nf, &mut nb, o);
                }
                nb.term = match &gb.term {
                    Terminator::Return(r) => {
                        let mut args: Vec<ValueId> = r.iter().map(|v| val(*v)).collect();
                        for &p in &ptr_params {
                            let v = version_at_end(g, m, &doms[ci], BlockId(gbi as u32), p);
                            args.push(val(v));
                        }
                        Terminator::Br { target: cont, args }
                    }
                    t => map_term(t, |b| BlockId((entry + b.index()) as u32), val),
                };
                nf.blocks.push(nb);
            }
            for (i, r) in call.results.iter().enumerate() {
                nf.values[r.index()].def = ValueDef::BlockArg(cont, i as u32);
            }
            cur = Block {
                label: format!("{tag}ret"),
                args: call.results.clone(),
                ops: Vec::new(),
                term: Terminator::Return(None),
            };
        }
        cur.term = map_term(&b.term, |t| first[t.index()], |v| v);
        nf.blocks.push(cur);
    }
    debug_assert_eq!(nf.blocks.len(), count);
    nf.rebuild_uses();
    Some((nf, origin))
}
