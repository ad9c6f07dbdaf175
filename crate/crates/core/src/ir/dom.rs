use super::{BlockId, Function};

const UNDEF: u32 = u32::MAX;

/// Block-level dominator tree, computed with the iterative algorithm of
/// Cooper, Harvey and Kennedy over a reverse postorder.
#[derive(Clone, Debug)]
pub struct DominatorTree {
    idom: Vec<u32>,
    rpo_index: Vec<u32>,
    rpo: Vec<BlockId>,
    children: Vec<Vec<BlockId>>,
}

impl DominatorTree {
    pub fn compute(f: &Function) -> Self {
        let n = f.blocks.len();
        let rpo = reverse_postorder(f);
        let mut rpo_index = vec![UNDEF; n];
        for (i, b) in rpo.iter().enumerate() {
            rpo_index[b.index()] = i as u32;
        }
        let preds = f.predecessors();
        let mut idom = vec![UNDEF; n];
        if n > 0 {
            idom[0] = 0;
        }

        let intersect = |idom: &[u32], mut a: u32, mut b: u32| {
            while a != b {
                while rpo_index[a as usize] > rpo_index[b as usize] {
                    a = idom[a as usize];
                }
                while rpo_index[b as usize] > rpo_index[a as usize] {
                    b = idom[b as usize];
                }
            }
            a
        };

        let mut changed = true;
        while changed {
            changed = false;
            for &b in rpo.iter().skip(1) {
                let mut new_idom = UNDEF;
                for p in &preds[b.index()] {
                    if idom[p.index()] == UNDEF {
                        continue;
                    }
                    new_idom = if new_idom == UNDEF {
                        p.0
                    } else {
                        intersect(&idom, p.0, new_idom)
                    };
                }
                if new_idom != UNDEF && idom[b.index()] != new_idom {
                    idom[b.index()] = new_idom;
                    changed = true;
                }
            }
        }

        let mut children = vec![Vec::new(); n];
        for &b in rpo.iter().skip(1) {
            let d = idom[b.index()];
            if d != UNDEF {
                children[d as usize].push(b);
            }
        }
        DominatorTree {
            idom,
            rpo_index,
            rpo,
            children,
        }
    }

    pub fn is_reachable(&self, b: BlockId) -> bool {
        self.rpo_index[b.index()] != UNDEF
    }

    /// Immediate dominator; `None` for the entry and for unreachable blocks.
    pub fn idom(&self, b: BlockId) -> Option<BlockId> {
        if b.0 == 0 || !self.is_reachable(b) {
            return None;
        }
        Some(BlockId(self.idom[b.index()]))
    }

    /// Whether `a` dominates `b` (reflexive). Unreachable blocks are
    /// dominated by everything.
    pub fn dominates(&self, a: BlockId, b: BlockId) -> bool {
        if !self.is_reachable(b) {
            return true;
        }
        if !self.is_reachable(a) {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            match self.idom(cur) {
                Some(d) => cur = d,
                None => return false,
            }
        }
    }

    pub fn children(&self, b: BlockId) -> &[BlockId] {
        &self.children[b.index()]
    }

    pub fn reverse_postorder(&self) -> &[BlockId] {
        &self.rpo
    }
}

fn reverse_postorder(f: &Function) -> Vec<BlockId> {
    let n = f.blocks.len();
    if n == 0 {
        return Vec::new();
    }
    let mut seen = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut stack: Vec<(BlockId, usize)> = vec![(BlockId(0), 0)];
    seen[0] = true;
    while let Some((b, next)) = stack.last_mut() {
        let succs = f.block(*b).term.successors();
        if let Some((s, _)) = succs.get(*next) {
            *next += 1;
            let s = *s;
            if s.index() < n && !seen[s.index()] {
                seen[s.index()] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(*b);
            stack.pop();
        }
    }
    post.reverse();
    post
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    #[test]
    fn diamond() {
        let m = parse_module(
            "func @f(%c: int) {\n^entry:\n  cond_br %c, ^l(), ^r()\n^l:\n  br ^j()\n^r:\n  br ^j()\n^j:\n  return\n}\n",
        )
        .unwrap();
        let dom = DominatorTree::compute(&m.functions[0]);
        let (e, l, r, j) = (BlockId(0), BlockId(1), BlockId(2), BlockId(3));
        assert_eq!(dom.idom(j), Some(e));
        assert_eq!(dom.idom(l), Some(e));
        assert!(dom.dominates(e, j));
        assert!(!dom.dominates(l, j));
        assert!(!dom.dominates(r, l));
        assert_eq!(dom.children(e).len(), 3);
    }
}
