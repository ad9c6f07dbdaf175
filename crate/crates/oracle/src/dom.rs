//! Set-based dominators and renamed-pointer bookkeeping, written without
//! the engine's helpers.

use dfi_core::ir::{BlockId, Function, Module, Opcode, Terminator, Type, ValueDef, ValueId};

/// `dom[b]` lists every block dominating `b` (itself included); empty for
/// unreachable blocks. Iterates the textbook equations to a fixpoint.
pub fn dominator_sets(f: &Function) -> Vec<Vec<bool>> {
    let n = f.blocks.len();
    let reachable = reachable_blocks(f);
    let mut preds = vec![Vec::new(); n];
    for (bi, b) in f.blocks.iter().enumerate() {
        for (t, _) in b.term.successors() {
            preds[t.index()].push(bi);
        }
    }
    let mut dom: Vec<Vec<bool>> = (0..n)
        .map(|b| {
            if b == 0 {
                (0..n).map(|x| x == 0).collect()
            } else {
                reachable.clone()
            }
        })
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for b in 1..n {
            if !reachable[b] {
                continue;
            }
            let mut next = reachable.clone();
            for &p in preds[b].iter().filter(|p| reachable[**p]) {
                for x in 0..n {
                    next[x] &= dom[p][x];
                }
            }
            next[b] = true;
            if next != dom[b] {
                dom[b] = next;
                changed = true;
            }
        }
    }
    for (b, d) in dom.iter_mut().enumerate() {
        if !reachable[b] {
            d.iter_mut().for_each(|x| *x = false);
        }
    }
    dom
}

pub fn reachable_blocks(f: &Function) -> Vec<bool> {
    let mut seen = vec![false; f.blocks.len()];
    if f.blocks.is_empty() {
        return seen;
    }
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(b) = stack.pop() {
        for (t, _) in f.blocks[b].term.successors() {
            if !seen[t.index()] {
                seen[t.index()] = true;
                stack.push(t.index());
            }
        }
    }
    seen
}

/// Dominators of `b` from `b` itself up to the entry.
pub fn dominator_chain(dom: &[Vec<bool>], b: usize) -> Vec<usize> {
    let mut chain: Vec<usize> = (0..dom.len()).filter(|x| dom[b][*x]).collect();
    // A block's dominators are themselves totally ordered by domination;
    // the nearer a dominator, the more dominators it has.
    chain.sort_by_key(|x| std::cmp::Reverse(dom[*x].iter().filter(|y| **y).count()));
    chain
}

/// The pointer written in place of `v` before renaming, one step back.
pub fn renamed_from(f: &Function, m: &Module, v: ValueId) -> Option<ValueId> {
    let ValueDef::Result(op, idx) = f.values[v.index()].def else {
        return None;
    };
    let op = &f.ops[op.index()];
    match op.opcode {
        Opcode::DfiStore => Some(op.operands[1]),
        Opcode::DfiCall => {
            let has_ret = m.signature(op.callee()?)?.ret.is_some();
            let k = (idx as usize).checked_sub(usize::from(has_ret))?;
            op.operands
                .iter()
                .copied()
                .filter(|a| f.values[a.index()].ty == Type::Ptr)
                .nth(k)
        }
        _ => None,
    }
}

fn renames(f: &Function, m: &Module, mut v: ValueId, target: ValueId) -> bool {
    for _ in 0..=f.values.len() {
        match renamed_from(f, m, v) {
            Some(o) if o == target => return true,
            Some(o) => v = o,
            None => return false,
        }
    }
    false
}

/// The version of pointer parameter `param` live at the end of block `b`:
/// the latest renaming on the dominator chain, else `param` itself.
pub fn version_at_end(f: &Function, m: &Module, dom: &[Vec<bool>], b: BlockId, param: ValueId) -> ValueId {
    for blk in dominator_chain(dom, b.index()) {
        for &op in f.blocks[blk].ops.iter().rev() {
            for &r in f.ops[op.index()].results.iter().rev() {
                if renames(f, m, r, param) {
                    return r;
                }
            }
        }
    }
    param
}

/// Exit versions of pointer parameter `param`, one per reachable `return`,
/// deduplicated in block order.
pub fn exit_versions(f: &Function, m: &Module, param: ValueId) -> Vec<ValueId> {
    let dom = dominator_sets(f);
    let mut out = Vec::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        if matches!(b.term, Terminator::Return(_)) && dom[bi][bi] {
            let v = version_at_end(f, m, &dom, BlockId(bi as u32), param);
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}
