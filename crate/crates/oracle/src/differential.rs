//! Randomized comparisons between the engine and the reference
//! implementations. Each trial is deterministic in its seed.

use std::collections::{BTreeSet, HashSet};
use std::ops::AddAssign;

use dfi_core::clients::{roarg_report, RoArgClient, TaintClient, Verdict};
use dfi_core::dft::{build_graph, build_intervals};
use dfi_core::interproc::solve_module;
use dfi_core::ir::{Module, ValueId};
use dfi_core::preprocess::{expand_stores, preprocess_module};
use dfi_core::synth::{generate, straight_line, CallGraph, SynthConfig};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{random_graph, ExplicitGraph, GraphShape};
use crate::inline::inline_expand_traced;
use crate::interp::interpret;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairTally {
    pub pairs: usize,
    /// Pairs the oracle says are connected.
    pub positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
}

impl PairTally {
    pub fn false_positive_rate(&self) -> f64 {
        let negatives = self.pairs - self.positives;
        if negatives == 0 {
            0.0
        } else {
            self.false_positives as f64 / negatives as f64
        }
    }

    fn record(&mut self, truth: bool, got: bool) {
        self.pairs += 1;
        self.positives += usize::from(truth);
        self.false_negatives += usize::from(truth && !got);
        self.false_positives += usize::from(!truth && got);
    }
}

impl AddAssign for PairTally {
    fn add_assign(&mut self, o: Self) {
        self.pairs += o.pairs;
        self.positives += o.positives;
        self.false_negatives += o.false_negatives;
        self.false_positives += o.false_positives;
    }
}

/// Labels a random graph of at most `max_n` vertices and compares
/// `can_reach` with the transitive closure on every ordered pair.
pub fn intraproc_trial(seed: u64, max_n: usize, shape: GraphShape) -> PairTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let n = rng.random_range(1..=max_n);
    let density = rng.random_range(0.3..2.5);
    let g = random_graph(seed, n, density, shape);
    // Forests are traversed from their tree roots; other graphs from a few
    // random vertices, the rest being covered in index order.
    let roots: Vec<ValueId> = match shape {
        GraphShape::SingleUseForest => {
            let mut entered = vec![false; n];
            g.adj.iter().flatten().for_each(|w| entered[*w] = true);
            (0..n).filter(|v| !entered[*v]).map(|v| ValueId(v as u32)).collect()
        }
        GraphShape::Cyclic => (0..rng.random_range(0..4usize))
            .map(|_| ValueId(rng.random_range(0..n) as u32))
            .collect(),
    };
    let im = build_intervals(&g.to_vf(roots, true));
    let closure = g.closure();
    let mut t = PairTally::default();
    for a in 0..n {
        for (b, row) in closure.iter().enumerate() {
            t.record(row[a], im.can_reach(ValueId(a as u32), ValueId(b as u32)));
        }
    }
    t
}

/// Same comparison on the taint graphs of a synthetic module's functions.
pub fn function_graph_trial(seed: u64) -> PairTally {
    let cfg = SynthConfig {
        functions: 3,
        ops_per_function: 40,
        ..SynthConfig::default()
    };
    let m = preprocess_module(&generate(&cfg, seed)).expect("synthetic modules preprocess");
    let client = TaintClient::new();
    let mut t = PairTally::default();
    for f in &m.functions {
        let vf = build_graph(f, &m, &client).expect("client edges stay in the function");
        let g = ExplicitGraph::from_vf(&vf);
        let im = build_intervals(&vf);
        let closure = g.closure();
        for a in 0..g.len() {
            for (b, row) in closure.iter().enumerate() {
                t.record(row[a], im.can_reach(ValueId(a as u32), ValueId(b as u32)));
            }
        }
    }
    t
}

/// Small random module without recursion: up to `max_functions`
/// functions in four layers, so call chains are at most three deep.
pub fn layered_module(seed: u64, max_functions: usize) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SynthConfig {
        functions: rng.random_range(2..=max_functions.max(2)),
        ops_per_function: rng.random_range(6..=20),
        call_rate: rng.random_range(0.05..0.3),
        call_graph: CallGraph::Layered { levels: 4 },
        branch_rate: 0.2,
        loop_rate: 0.1,
        ..SynthConfig::default()
    };
    preprocess_module(&generate(&cfg, seed)).expect("synthetic modules preprocess")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowTally {
    /// `(source, destination)` flows seen in the inlined bodies.
    pub oracle_flows: usize,
    pub missed: usize,
    /// Flows the analysis reports from original values, restricted to the
    /// functions inlined into the source's body.
    pub reported: usize,
    pub confirmed: usize,
    pub first_miss: Option<String>,
}

impl FlowTally {
    pub fn precision(&self) -> f64 {
        if self.reported == 0 {
            1.0
        } else {
            self.confirmed as f64 / self.reported as f64
        }
    }
}

impl AddAssign for FlowTally {
    fn add_assign(&mut self, o: Self) {
        self.oracle_flows += o.oracle_flows;
        self.missed += o.missed;
        self.reported += o.reported;
        self.confirmed += o.confirmed;
        if self.first_miss.is_none() {
            self.first_miss = o.first_miss;
        }
    }
}

/// Compares the taint solution of `m` with flows inside every function
/// after inlining `depth` levels. A flow `a → b` between values of the
/// inlined body, mapped back to the values they were copied from, must be
/// reported by the analysis.
pub fn interproc_trial(m: &Module, depth: usize) -> FlowTally {
    let client = TaintClient::new();
    let sol = solve_module(m, &client).expect("preprocessed modules solve");
    let inl = inline_expand_traced(m, depth);
    let mut t = FlowTally::default();
    for (fi, f) in inl.module.functions.iter().enumerate() {
        let vf = build_graph(f, &inl.module, &client).expect("client edges stay in the function");
        let g = ExplicitGraph::from_vf(&vf);
        let mut rev = ExplicitGraph::new(g.len());
        for (u, ws) in g.adj.iter().enumerate() {
            for &w in ws {
                rev.add_edge(w, u);
            }
        }
        let origin = &inl.origin[fi];
        let present: HashSet<usize> = origin.iter().map(|(g, _)| *g).collect();
        let mut checked: HashSet<((usize, ValueId), (usize, ValueId))> = HashSet::new();
        for a in 0..g.len() {
            let (sf, sv) = origin[a];
            let reported: BTreeSet<(usize, ValueId)> = sol
                .reachable_from(m, sf, sv)
                .into_iter()
                .flat_map(|(h, vs)| vs.into_iter().map(move |v| (h, v)))
                .collect();
            // Everything `a` flows to: vertices with a path back to `a`.
            let flows_to = rev.reachable_set(a);
            let mut truth: BTreeSet<(usize, ValueId)> = BTreeSet::new();
            for (b, hit) in flows_to.iter().enumerate() {
                if !hit {
                    continue;
                }
                let dst = origin[b];
                truth.insert(dst);
                if !checked.insert(((sf, sv), dst)) {
                    continue;
                }
                t.oracle_flows += 1;
                if !reported.contains(&dst) {
                    t.missed += 1;
                    if t.first_miss.is_none() {
                        t.first_miss = Some(format!(
                            "@{}:%{} -> @{}:%{} (inlined into @{})",
                            m.functions[sf].name,
                            m.functions[sf].name_of(sv),
                            m.functions[dst.0].name,
                            m.functions[dst.0].name_of(dst.1),
                            f.name
                        ));
                    }
                }
            }
            if sf == fi {
                let in_scope: Vec<&(usize, ValueId)> =
                    reported.iter().filter(|(h, _)| present.contains(h)).collect();
                t.reported += in_scope.len();
                t.confirmed += in_scope.iter().filter(|d| truth.contains(d)).count();
            }
        }
    }
    t
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerdictTally {
    pub verdicts: usize,
    /// Pointer arguments the inlined bodies show as written from another
    /// argument.
    pub modified_by_oracle: usize,
    pub missed: usize,
    pub first_miss: Option<String>,
}

/// Read-only argument verdicts against inlining: whenever another argument
/// flows into a call's output for `p` in the inlined caller, the verdict
/// for `p` must be `modified`.
pub fn roarg_trial(m: &Module, depth: usize) -> VerdictTally {
    let sol = solve_module(m, &RoArgClient).expect("preprocessed modules solve");
    let report = roarg_report(m, &sol);
    let inl = inline_expand_traced(m, depth);
    let mut t = VerdictTally {
        verdicts: report.verdicts.len(),
        ..Default::default()
    };
    for (fi, f) in m.functions.iter().enumerate() {
        let inlined = &inl.module.functions[fi];
        let vf = build_graph(inlined, &inl.module, &RoArgClient).expect("client edges stay in the function");
        let g = ExplicitGraph::from_vf(&vf);
        let calls = f.ops_in_order().filter(|(_, o)| f.op(*o).opcode.is_call());
        for (k, (_, op)) in calls.enumerate() {
            let op = f.op(op);
            let Some(sig) = m.signature(op.callee().unwrap_or_default()) else {
                continue;
            };
            for (j, &p) in op.operands.iter().enumerate() {
                let Some(out) = sig.output_index(j) else {
                    continue;
                };
                let r = op.results[out];
                let reach = g.reachable_set(r.index());
                let written = op
                    .operands
                    .iter()
                    .enumerate()
                    .any(|(q, &a)| q != j && a != p && reach[a.index()]);
                if !written {
                    continue;
                }
                t.modified_by_oracle += 1;
                if report.get(&f.name, k, j) != Some(Verdict::Modified) {
                    t.missed += 1;
                    t.first_miss.get_or_insert_with(|| format!("@{} call#{k} arg#{j}", f.name));
                }
            }
        }
    }
    t
}

/// Runs a random straight-line program before and after store renaming
/// and reports any difference in return value or final memory.
pub fn preprocess_trial(seed: u64) -> Result<(), String> {
    let m = straight_line(seed, 30, 3);
    let f = &m.functions[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let args: Vec<i64> = (0..3).map(|_| rng.random_range(-20..20)).collect();
    let before = interpret(f, &args).map_err(|e| format!("seed {seed}: original traps: {e}"))?;
    let after = interpret(&expand_stores(f), &args).map_err(|e| format!("seed {seed}: rewritten traps: {e}"))?;
    if before != after {
        return Err(format!("seed {seed}: {before:?} != {after:?}"));
    }
    Ok(())
}
