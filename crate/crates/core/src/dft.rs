//! Reversed depth-first-tree labelling of a function's value-flow graph.
//!
//! Edges point from a use to the definition it reads (the reverse of value
//! flow). A DFS assigns each vertex a `<discover, finish>` interval; non-tree
//! edges are then folded in by merging interval sets until every vertex's set
//! covers the sets of all its out-neighbours. `b` reaching `a` along edges
//! therefore implies `Π_b ⊇ Π_a`, which is the reachability test.

use std::fmt::Write;

use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

use crate::clients::ClientAnalysis;
use crate::interval::{set_subsumes, Interval, IntervalSet};
use crate::ir::{Function, Module, OpId, ValueId};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DftError {
    #[error("@{function}: edge references value #{value}, which is not in the function")]
    UnknownValue { function: String, value: u32 },
    #[error("value #{0} is not in the function")]
    NotInFunction(u32),
}

/// Use→def value-flow graph over a function's values.
#[derive(Clone, Debug, Default)]
pub struct VfGraph {
    succ: Vec<SmallVec<[u32; 4]>>,
    roots: Vec<ValueId>,
    cover_all: bool,
    edges: usize,
}

impl VfGraph {
    /// Graph on `n` isolated vertices. With `cover_all`, traversal continues
    /// past the given roots until every vertex is labelled.
    pub fn new(n: usize, roots: Vec<ValueId>, cover_all: bool) -> Self {
        VfGraph {
            succ: vec![SmallVec::new(); n],
            roots,
            cover_all,
            edges: 0,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn roots(&self) -> &[ValueId] {
        &self.roots
    }

    pub fn covers_all_vertices(&self) -> bool {
        self.cover_all
    }

    pub fn successors(&self, v: ValueId) -> impl Iterator<Item = ValueId> + '_ {
        self.succ[v.index()].iter().map(|w| ValueId(*w))
    }

    /// All edges in insertion order per source vertex.
    pub fn edges(&self) -> impl Iterator<Item = (ValueId, ValueId)> + '_ {
        self.succ.iter().enumerate().flat_map(|(u, ws)| {
            ws.iter().map(move |w| (ValueId(u as u32), ValueId(*w)))
        })
    }

    /// Adds `from → to` unless present; returns whether it was new.
    pub fn add_edge(&mut self, from: ValueId, to: ValueId) -> bool {
        let out = &mut self.succ[from.index()];
        if out.contains(&to.0) {
            return false;
        }
        out.push(to.0);
        self.edges += 1;
        true
    }
}

/// Builds the graph from the client's transfer functions over every
/// operation and terminator.
pub fn build_graph(
    f: &Function,
    m: &Module,
    client: &dyn ClientAnalysis,
) -> Result<VfGraph, DftError> {
    build_graph_filtered(f, m, client, |_| true)
}

/// Like [`build_graph`], consulting the client only for ops accepted by
/// `keep`.
pub fn build_graph_filtered(
    f: &Function,
    m: &Module,
    client: &dyn ClientAnalysis,
    keep: impl Fn(OpId) -> bool,
) -> Result<VfGraph, DftError> {
    let n = f.value_count();
    let roots = client.choose_roots(f, m);
    let bad = |v: ValueId| DftError::UnknownValue {
        function: f.name.clone(),
        value: v.0,
    };
    if let Some(r) = roots.iter().find(|r| r.index() >= n) {
        return Err(bad(*r));
    }
    let mut g = VfGraph::new(n, roots, client.covers_all_vertices());
    let mut buf = Vec::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        for &op in &b.ops {
            if keep(op) {
                client.transfer(f, op, &mut buf);
            }
        }
        client.transfer_terminator(f, crate::ir::BlockId(bi as u32), &mut buf);
        for (u, w) in buf.drain(..) {
            if u.index() >= n {
                return Err(bad(u));
            }
            if w.index() >= n {
                return Err(bad(w));
            }
            g.add_edge(u, w);
        }
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    Cross,
    Back,
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonTreeEdge {
    pub src: ValueId,
    pub dst: ValueId,
    pub class: EdgeClass,
}

/// Classifies a non-tree edge `k → l` from the tree intervals of its ends.
pub fn classify(k: Interval, l: Interval) -> EdgeClass {
    if k.disjoint(l) {
        EdgeClass::Cross
    } else if l.subsumes(k) {
        EdgeClass::Back
    } else {
        EdgeClass::Forward
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DftStats {
    /// Edges examined by the traversal.
    pub visited_edges: usize,
    /// Vertices labelled with a non-empty interval set.
    pub visited_vertices: usize,
    pub tree_edges: usize,
    pub cross_edges: usize,
    pub back_edges: usize,
    pub forward_edges: usize,
    /// Individual interval-set growth steps during merging.
    pub merges: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Discover(ValueId, u32),
    Finish(ValueId, u32),
    /// An edge examined by the traversal.
    Edge(ValueId, ValueId),
    /// `Π` of the first vertex grew while folding in the second's set.
    Merge(ValueId, ValueId),
}

#[derive(Clone, Debug)]
struct Sccs {
    comp: Vec<u32>,
    members: Vec<Vec<u32>>,
}

/// Per-vertex interval sets and the tree they were derived from.
#[derive(Clone, Debug, Default)]
pub struct IntervalMap {
    pi: Vec<IntervalSet>,
    start: Vec<u32>,
    tree: Vec<Option<Interval>>,
    parent: Vec<u32>,
    nontree: Vec<NonTreeEdge>,
    nontree_in: Vec<SmallVec<[u32; 2]>>,
    sccs: Option<Sccs>,
    next_time: u32,
    stats: DftStats,
    trace: Option<Vec<TraceEvent>>,
    queued: Vec<bool>,
}

/// Labels `g` and folds in all non-tree edges.
pub fn build_intervals(g: &VfGraph) -> IntervalMap {
    IntervalMap::build(g, false)
}

/// [`build_intervals`] that also records every traversal step.
pub fn build_intervals_traced(g: &VfGraph) -> IntervalMap {
    IntervalMap::build(g, true)
}

/// `a ⇝ b`: a value defined at `a` flows to `b`.
pub fn can_reach(im: &IntervalMap, a: ValueId, b: ValueId) -> bool {
    im.can_reach(a, b)
}

impl IntervalMap {
    fn build(g: &VfGraph, traced: bool) -> Self {
        let n = g.vertex_count();
        let mut im = IntervalMap {
            pi: vec![IntervalSet::new(); n],
            start: vec![NONE; n],
            tree: vec![None; n],
            parent: vec![NONE; n],
            nontree: Vec::new(),
            nontree_in: vec![SmallVec::new(); n],
            sccs: None,
            next_time: 0,
            stats: DftStats::default(),
            trace: traced.then(Vec::new),
            queued: vec![false; n],
        };
        let mut pending = Vec::new();
        for r in g.roots() {
            im.dfs(g, r.0, &mut pending);
        }
        if g.covers_all_vertices() {
            // Stand-in for a pseudo root linked to every vertex: sources
            // first, then whatever is left (vertices only on cycles).
            let mut indeg = vec![0u32; n];
            for (_, w) in g.edges() {
                indeg[w.index()] += 1;
            }
            for v in 0..n as u32 {
                if indeg[v as usize] == 0 {
                    im.dfs(g, v, &mut pending);
                }
            }
            for v in 0..n as u32 {
                im.dfs(g, v, &mut pending);
            }
        }
        let fresh = im.register(&pending);
        im.settle(g, &fresh);
        im
    }

    fn trace(&mut self, e: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(e);
        }
    }

    fn visited(&self, v: u32) -> bool {
        self.start[v as usize] != NONE
    }

    /// Iterative DFS from `root` if it is not yet labelled. Edges reaching
    /// already discovered vertices are collected into `pending`.
    fn dfs(&mut self, g: &VfGraph, root: u32, pending: &mut Vec<(u32, u32)>) {
        if self.visited(root) {
            return;
        }
        self.discover(root);
        let mut stack: Vec<(u32, u32)> = vec![(root, 0)];
        while let Some(top) = stack.last_mut() {
            let (v, i) = *top;
            if let Some(&w) = g.succ[v as usize].get(i as usize) {
                top.1 += 1;
                self.stats.visited_edges += 1;
                self.trace(TraceEvent::Edge(ValueId(v), ValueId(w)));
                if self.visited(w) {
                    pending.push((v, w));
                } else {
                    self.parent[w as usize] = v;
                    self.stats.tree_edges += 1;
                    self.discover(w);
                    stack.push((w, 0));
                }
            } else {
                stack.pop();
                let t = self.next_time;
                self.next_time += 1;
                let iv = Interval::new(self.start[v as usize], t);
                self.tree[v as usize] = Some(iv);
                self.pi[v as usize] = IntervalSet::single(iv);
                self.trace(TraceEvent::Finish(ValueId(v), t));
            }
        }
    }

    fn discover(&mut self, v: u32) {
        let t = self.next_time;
        self.next_time += 1;
        self.start[v as usize] = t;
        self.stats.visited_vertices += 1;
        self.trace(TraceEvent::Discover(ValueId(v), t));
    }

    /// Classifies and records non-tree edges; returns the indices of those
    /// that need merging.
    fn register(&mut self, edges: &[(u32, u32)]) -> Vec<u32> {
        let mut out = Vec::new();
        for &(k, l) in edges {
            let (Some(ik), Some(il)) = (self.tree[k as usize], self.tree[l as usize]) else {
                continue;
            };
            let class = classify(ik, il);
            match class {
                EdgeClass::Cross => self.stats.cross_edges += 1,
                EdgeClass::Back => self.stats.back_edges += 1,
                EdgeClass::Forward => self.stats.forward_edges += 1,
            }
            let idx = self.nontree.len() as u32;
            self.nontree.push(NonTreeEdge {
                src: ValueId(k),
                dst: ValueId(l),
                class,
            });
            // Forward edges are covered by tree nesting and stay covered,
            // because growth at a vertex always propagates to its ancestors.
            if class != EdgeClass::Forward {
                self.nontree_in[l as usize].push(idx);
                out.push(idx);
            }
        }
        out
    }

    /// Applies the given non-tree edges, then re-applies the in-edges of
    /// every vertex whose set grows until nothing changes.
    fn settle(&mut self, g: &VfGraph, edges: &[u32]) -> bool {
        let mut work: Vec<u32> = Vec::new();
        let mut changed = false;
        for &e in edges {
            changed |= self.apply(g, e, &mut work);
        }
        while let Some(x) = work.pop() {
            self.queued[x as usize] = false;
            let ins = self.nontree_in[x as usize].clone();
            for e in ins {
                changed |= self.apply(g, e, &mut work);
            }
        }
        changed
    }

    fn apply(&mut self, g: &VfGraph, e: u32, work: &mut Vec<u32>) -> bool {
        let NonTreeEdge { src, dst, class } = self.nontree[e as usize];
        let x = self.pi[dst.index()].clone();
        let mut changed = self.merge_up(src.0, dst, &x, work);
        if class == EdgeClass::Back {
            if self.sccs.is_none() {
                self.sccs = Some(tarjan(g));
            }
            let sccs = self.sccs.as_ref().unwrap();
            let members = sccs.members[sccs.comp[src.index()] as usize].clone();
            for m in members {
                changed |= self.merge_up(m, dst, &x, work);
            }
        }
        changed
    }

    /// Merges `x` into `v` and its tree ancestors, stopping at the first
    /// one that already covers it.
    fn merge_up(&mut self, v: u32, from: ValueId, x: &IntervalSet, work: &mut Vec<u32>) -> bool {
        let mut cur = v;
        let mut changed = false;
        loop {
            if !self.pi[cur as usize].merge_in(x) {
                break;
            }
            changed = true;
            self.stats.merges += 1;
            self.trace(TraceEvent::Merge(ValueId(cur), from));
            if !self.queued[cur as usize] {
                self.queued[cur as usize] = true;
                work.push(cur);
            }
            match self.parent[cur as usize] {
                NONE => break,
                p => cur = p,
            }
        }
        changed
    }

    /// Adds edges to `g` and folds them into the labelling. Targets not yet
    /// labelled are traversed as new trees with timestamps continuing after
    /// the existing ones. Returns whether any interval set changed.
    pub fn extend(&mut self, g: &mut VfGraph, edges: &[(ValueId, ValueId)]) -> bool {
        let mut pending = Vec::new();
        let mut grew = false;
        let mut added = false;
        for &(u, w) in edges {
            if !g.add_edge(u, w) {
                continue;
            }
            added = true;
            if !self.visited(u.0) {
                continue;
            }
            self.stats.visited_edges += 1;
            self.trace(TraceEvent::Edge(u, w));
            if !self.visited(w.0) {
                self.dfs(g, w.0, &mut pending);
                grew = true;
            }
            pending.push((u.0, w.0));
        }
        if added {
            self.sccs = None;
        }
        let fresh = self.register(&pending);
        self.settle(g, &fresh) || grew
    }

    pub fn can_reach(&self, a: ValueId, b: ValueId) -> bool {
        let (pa, pb) = (&self.pi[a.index()], &self.pi[b.index()]);
        !pa.is_empty() && !pb.is_empty() && set_subsumes(pb, pa)
    }

    /// [`IntervalMap::can_reach`] with range checking.
    pub fn try_can_reach(&self, a: ValueId, b: ValueId) -> Result<bool, DftError> {
        for v in [a, b] {
            if v.index() >= self.pi.len() {
                return Err(DftError::NotInFunction(v.0));
            }
        }
        Ok(self.can_reach(a, b))
    }

    pub fn vertex_count(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self, v: ValueId) -> &IntervalSet {
        &self.pi[v.index()]
    }

    pub fn tree_interval(&self, v: ValueId) -> Option<Interval> {
        self.tree[v.index()]
    }

    pub fn parent(&self, v: ValueId) -> Option<ValueId> {
        match self.parent[v.index()] {
            NONE => None,
            p => Some(ValueId(p)),
        }
    }

    pub fn non_tree_edges(&self) -> &[NonTreeEdge] {
        &self.nontree
    }

    pub fn stats(&self) -> DftStats {
        self.stats
    }

    pub fn trace_log(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    /// Interval-set sizes of all labelled vertices.
    pub fn set_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.pi.iter().filter(|p| !p.is_empty()).map(IntervalSet::len)
    }

    /// One line per value: `%v: {<s,e>} parent=%p in=[cross:%k]`.
    pub fn dump(&self, f: &Function) -> String {
        let mut out = String::new();
        let name = |v: ValueId| {
            f.values
                .get(v.index())
                .map_or_else(|| format!("#{}", v.0), |d| format!("%{}", d.name))
        };
        let mut ins: Vec<Vec<String>> = vec![Vec::new(); self.pi.len()];
        for e in &self.nontree {
            let class = match e.class {
                EdgeClass::Cross => "cross",
                EdgeClass::Back => "back",
                EdgeClass::Forward => "forward",
            };
            ins[e.dst.index()].push(format!("{class}:{}", name(e.src)));
        }
        for (v, (pi, ins)) in self.pi.iter().zip(&ins).enumerate() {
            let id = ValueId(v as u32);
            let parent = self.parent(id).map_or_else(|| "-".to_string(), name);
            let _ = writeln!(
                out,
                "{}: {} parent={} in=[{}]",
                name(id),
                pi,
                parent,
                ins.join(", ")
            );
        }
        out
    }
}

/// Iterative Tarjan strongly-connected components.
fn tarjan(g: &VfGraph) -> Sccs {
    let n = g.vertex_count();
    let mut index = vec![NONE; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut comp = vec![NONE; n];
    let mut members: Vec<Vec<u32>> = Vec::new();
    let mut counter = 0u32;
    let mut call: Vec<(u32, u32)> = Vec::new();
    for root in 0..n as u32 {
        if index[root as usize] != NONE {
            continue;
        }
        call.push((root, 0));
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(top) = call.last_mut() {
            let (v, i) = *top;
            if let Some(&w) = g.succ[v as usize].get(i as usize) {
                top.1 += 1;
                if index[w as usize] == NONE {
                    index[w as usize] = counter;
                    low[w as usize] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p as usize] = low[p as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    let id = members.len() as u32;
                    let mut group = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp[w as usize] = id;
                        group.push(w);
                        if w == v {
                            break;
                        }
                    }
                    members.push(group);
                }
            }
        }
    }
    Sccs { comp, members }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(u32, u32)], roots: &[u32]) -> VfGraph {
        let mut g = VfGraph::new(n, roots.iter().map(|r| ValueId(*r)).collect(), true);
        for &(u, w) in edges {
            g.add_edge(ValueId(u), ValueId(w));
        }
        g
    }

    fn iv(s: u32, e: u32) -> IntervalSet {
        IntervalSet::single(Interval::new(s, e))
    }

    #[test]
    fn chain_nests() {
        let im = build_intervals(&graph(3, &[(0, 1), (1, 2)], &[0]));
        assert_eq!(im.pi(ValueId(0)), &iv(0, 5));
        assert_eq!(im.pi(ValueId(1)), &iv(1, 4));
        assert_eq!(im.pi(ValueId(2)), &iv(2, 3));
        assert!(im.can_reach(ValueId(2), ValueId(0)));
        assert!(!im.can_reach(ValueId(0), ValueId(2)));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(Interval::new(6, 7), Interval::new(2, 3)), EdgeClass::Cross);
        assert_eq!(classify(Interval::new(3, 4), Interval::new(0, 9)), EdgeClass::Back);
        assert_eq!(classify(Interval::new(0, 9), Interval::new(3, 4)), EdgeClass::Forward);
    }

    #[test]
    fn cross_edge_merges_into_ancestors() {
        // A=0 B=1 C=2 D=3 E=4: A→B→D, A→C→E, E→D.
        let im = build_intervals(&graph(5, &[(0, 1), (1, 3), (0, 2), (2, 4), (4, 3)], &[0]));
        let d = im.tree_interval(ValueId(3)).unwrap();
        assert_eq!(d, Interval::new(2, 3));
        for v in [4, 2, 0] {
            assert!(im.pi(ValueId(v)).contains_interval(d), "{v}");
        }
        assert!(!im.pi(ValueId(1)).contains_interval(Interval::new(6, 7)));
    }

    #[test]
    fn back_edge_merges_scc() {
        // A→B→C→D, D→A, C→E.
        let im = build_intervals(&graph(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 4)], &[0]));
        let a = im.tree_interval(ValueId(0)).unwrap();
        assert_eq!(a, Interval::new(0, 9));
        for v in [1, 2, 3] {
            assert!(im.pi(ValueId(v)).contains_interval(a));
        }
        assert!(!im.pi(ValueId(4)).contains_interval(a));
    }

    #[test]
    fn uncovered_vertices_stay_empty() {
        let mut g = VfGraph::new(3, vec![ValueId(0)], false);
        g.add_edge(ValueId(0), ValueId(1));
        let im = build_intervals(&g);
        assert!(im.pi(ValueId(2)).is_empty());
        assert!(!im.can_reach(ValueId(2), ValueId(2)));
        assert!(im.can_reach(ValueId(1), ValueId(0)));
        assert_eq!(im.stats().visited_vertices, 2);
    }

    #[test]
    fn extend_labels_new_targets() {
        let mut g = VfGraph::new(4, vec![ValueId(0)], false);
        g.add_edge(ValueId(0), ValueId(1));
        g.add_edge(ValueId(2), ValueId(3));
        let mut im = build_intervals(&g);
        assert!(!im.can_reach(ValueId(3), ValueId(0)));
        assert!(im.extend(&mut g, &[(ValueId(1), ValueId(2))]));
        assert!(im.can_reach(ValueId(3), ValueId(0)));
        assert!(im.can_reach(ValueId(3), ValueId(1)));
        assert!(!im.can_reach(ValueId(0), ValueId(3)));
    }

    #[test]
    fn trace_counts_visited_edges() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 0), (3, 2)], &[]);
        let im = build_intervals_traced(&g);
        let edges = im
            .trace_log()
            .unwrap()
            .iter()
            .filter(|e| matches!(e, TraceEvent::Edge(..)))
            .count();
        assert_eq!(edges, im.stats().visited_edges);
        assert_eq!(edges, g.edge_count());
    }

    #[test]
    fn scc_groups() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 3)], &[]);
        let s = tarjan(&g);
        assert_eq!(s.comp[0], s.comp[1]);
        assert_eq!(s.comp[1], s.comp[2]);
        assert_eq!(s.comp[3], s.comp[4]);
        assert_ne!(s.comp[0], s.comp[3]);
    }
}
