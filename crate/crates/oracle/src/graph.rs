//! Explicit adjacency-list graphs with plain search and a bitset
//! transitive closure.

use dfi_core::dft::VfGraph;
use dfi_core::ir::ValueId;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExplicitGraph {
    pub adj: Vec<Vec<usize>>,
}

impl ExplicitGraph {
    pub fn new(n: usize) -> Self {
        ExplicitGraph {
            adj: vec![Vec::new(); n],
        }
    }

    /// Copies the vertex and edge sets of `g`.
    pub fn from_vf(g: &VfGraph) -> Self {
        let mut out = ExplicitGraph::new(g.vertex_count());
        for (u, w) in g.edges() {
            out.adj[u.index()].push(w.index());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn add_edge(&mut self, u: usize, w: usize) {
        if !self.adj[u].contains(&w) {
            self.adj[u].push(w);
        }
    }

    /// All vertices reachable from `from` along edges, `from` included.
    pub fn reachable_set(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// `a` flows to `b`: some path leads from `b` to `a` along use→def
    /// edges. Every vertex reaches itself.
    pub fn reach(&self, a: usize, b: usize) -> bool {
        self.reachable_set(b)[a]
    }

    /// Reflexive transitive closure by Floyd–Warshall over bit rows;
    /// `closure[u]` holds every vertex reachable from `u`.
    pub fn closure(&self) -> Vec<Vec<bool>> {
        let n = self.adj.len();
        let words = n.div_ceil(64);
        let mut rows = vec![vec![0u64; words]; n];
        for (u, row) in rows.iter_mut().enumerate() {
            row[u / 64] |= 1 << (u % 64);
            for &w in &self.adj[u] {
                row[w / 64] |= 1 << (w % 64);
            }
        }
        for k in 0..n {
            let via = rows[k].clone();
            for row in rows.iter_mut() {
                if row[k / 64] >> (k % 64) & 1 == 1 {
                    for (x, y) in row.iter_mut().zip(&via) {
                        *x |= *y;
                    }
                }
            }
        }
        rows.iter()
            .map(|r| (0..n).map(|v| r[v / 64] >> (v % 64) & 1 == 1).collect())
            .collect()
    }

    /// Whether the graph has no directed cycle.
    pub fn is_acyclic(&self) -> bool {
        let n = self.adj.len();
        let mut indeg = vec![0usize; n];
        for w in self.adj.iter().flatten() {
            indeg[*w] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|v| indeg[*v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = ready.pop() {
            seen += 1;
            for &w in &self.adj[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        seen == n
    }

    pub fn to_vf(&self, roots: Vec<ValueId>, cover_all: bool) -> VfGraph {
        let mut g = VfGraph::new(self.adj.len(), roots, cover_all);
        for (u, ws) in self.adj.iter().enumerate() {
            for &w in ws {
                g.add_edge(ValueId(u as u32), ValueId(w as u32));
            }
        }
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphShape {
    /// Arbitrary edges, cycles included.
    Cyclic,
    /// Acyclic, every vertex entered by at most one edge: a forest, which
    /// corresponds to SSA values with at most one use.
    SingleUseForest,
}

/// Random graph on `n` vertices with about `n * density` edges.
pub fn random_graph(seed: u64, n: usize, density: f64, shape: GraphShape) -> ExplicitGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ExplicitGraph::new(n);
    if n == 0 {
        return g;
    }
    match shape {
        GraphShape::Cyclic => {
            let m = (n as f64 * density).round() as usize;
            for _ in 0..m {
                let u = rng.random_range(0..n);
                // Mostly local edges, so cycles stay small and varied.
                let w = if rng.random_bool(0.7) {
                    let span = rng.random_range(1..=8usize);
                    (u + n - span.min(n - 1).max(1)) % n
                } else {
                    rng.random_range(0..n)
                };
                if u != w || rng.random_bool(0.05) {
                    g.add_edge(u, w);
                }
            }
        }
        GraphShape::SingleUseForest => {
            // A vertex points to lower-numbered vertices that have no
            // incoming edge yet.
            let mut entered = vec![false; n];
            for u in 1..n {
                for _ in 0..rng.random_range(0..3) {
                    let w = rng.random_range(0..u);
                    if !entered[w] {
                        entered[w] = true;
                        g.add_edge(u, w);
                    }
                }
            }
        }
    }
    g
}
