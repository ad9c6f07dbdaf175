//! Function summaries, their propagation to call sites, reachable-endpoint
//! sets, and cross-function queries.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clients::ClientAnalysis;
use crate::dft::{build_graph_filtered, build_intervals, DftError, DftStats, IntervalMap, VfGraph};
use crate::ir::{Function, Module, OpId, Type, ValueId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("module still contains plain `store`/`call`; preprocess it first")]
    NotPreprocessed,
    #[error(transparent)]
    Graph(#[from] DftError),
    #[error("@{caller}: call to `@{callee}` has no result #{index} required by its summary")]
    SummaryArity {
        caller: String,
        callee: String,
        index: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown function `@{0}`")]
    UnknownFunction(String),
    #[error("`@{0}` has no value `%{1}`")]
    UnknownValue(String, String),
}

/// Value-flow summary: `(src, dst)` means argument `src` flows to result
/// `dst` of a `dfi_call` to the function. Result 0 is the return value when
/// the function has one; the rest are pointer-argument outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub func: String,
    pub has_ret: bool,
    pub pairs: BTreeSet<(u32, u32)>,
}

impl Summary {
    pub fn empty(func: impl Into<String>, has_ret: bool) -> Self {
        Summary {
            func: func.into(),
            has_ret,
            pairs: BTreeSet::new(),
        }
    }

    /// Pairs targeting the return value.
    pub fn ret_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let has_ret = self.has_ret;
        self.pairs.iter().copied().filter(move |p| has_ret && p.1 == 0)
    }

    /// Pairs targeting pointer-argument outputs.
    pub fn out_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let has_ret = self.has_ret;
        self.pairs.iter().copied().filter(move |p| !(has_ret && p.1 == 0))
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |it: &mut dyn Iterator<Item = (u32, u32)>| {
            it.map(|(a, b)| format!("{a}->{b}")).collect::<Vec<_>>().join(",")
        };
        write!(
            f,
            "@{}: R{{{}}} P{{{}}}",
            self.func,
            join(&mut self.ret_pairs()),
            join(&mut self.out_pairs())
        )
    }
}

/// The `index`-th argument of `func`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Endpoint {
    pub func: String,
    pub index: u32,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.func, self.index)
    }
}

/// For each endpoint, the endpoints its value transitively reaches through
/// actual arguments of calls.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReachableFunctionSummary {
    pub map: BTreeMap<Endpoint, BTreeSet<Endpoint>>,
}

impl ReachableFunctionSummary {
    pub fn get(&self, func: &str, index: u32) -> Option<&BTreeSet<Endpoint>> {
        self.map.get(&Endpoint {
            func: func.to_string(),
            index,
        })
    }

    /// One line per endpoint: `f#0 -> {g#0, f#1, k#2}`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (e, set) in &self.map {
            let items: Vec<String> = set.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{e} -> {{{}}}", items.join(", "));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Callee {
    Defined(usize),
    External(usize),
}

#[derive(Clone, Debug)]
pub struct CallSite {
    pub caller: usize,
    pub op: OpId,
    /// Position among the caller's calls, in textual order.
    pub ordinal: usize,
    pub callee: Callee,
}

/// Per-function graph and labelling.
#[derive(Clone, Debug)]
pub struct FunctionState {
    pub graph: VfGraph,
    pub intervals: IntervalMap,
    /// Exit versions of each parameter; empty for integer parameters.
    exits: Vec<Vec<ValueId>>,
}

impl FunctionState {
    pub fn exit_versions(&self, param: usize) -> &[ValueId] {
        &self.exits[param]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    /// Functions popped from the worklist.
    pub iterations: usize,
    /// Summary propagations into callers.
    pub propagations: usize,
    /// Traversal counters summed over functions.
    pub dft: DftStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Also compute reachable-endpoint sets after summaries converge.
    pub reachable_summaries: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            reachable_summaries: true,
        }
    }
}

/// Endpoints as `(function index, endpoint index)`.
type EndpointSet = BTreeSet<(u32, u32)>;

/// Converged analysis state of a module.
#[derive(Debug)]
pub struct Solution {
    pub functions: Vec<FunctionState>,
    pub summaries: Vec<Summary>,
    pub sites: Vec<CallSite>,
    sites_in: Vec<Vec<usize>>,
    sites_to: Vec<Vec<usize>>,
    psi: Option<Vec<Vec<EndpointSet>>>,
    pub stats: SolveStats,
}

fn call_sites(m: &Module) -> Vec<CallSite> {
    let mut out = Vec::new();
    for (fi, f) in m.functions.iter().enumerate() {
        let calls = f.ops_in_order().filter(|(_, op)| f.op(*op).opcode.is_call());
        for (k, (_, op)) in calls.enumerate() {
            let name = f.op(op).callee().unwrap_or_default();
            let callee = match m.function_index(name) {
                Some(i) => Callee::Defined(i),
                None => Callee::External(
                    m.externs.iter().position(|e| e.name == name).unwrap_or(usize::MAX),
                ),
            };
            out.push(CallSite {
                caller: fi,
                op,
                ordinal: k,
                callee,
            });
        }
    }
    out
}

fn exits_of(f: &Function, m: &Module) -> Vec<Vec<ValueId>> {
    f.params
        .iter()
        .map(|&p| {
            if f.ty(p) == Type::Ptr {
                f.exit_versions(p, Some(m))
            } else {
                Vec::new()
            }
        })
        .collect()
}

/// Summary of `f` from its labelling:
/// - a parameter reaching a returned value flows to result 0;
/// - two pointer parameters reaching a common root flow into each other's
///   outputs, and every pointer parameter flows into its own output;
/// - a parameter reaching an exit version of pointer parameter `k` flows
///   into the output of `k`.
pub fn compute_summary(f: &Function, m: &Module, im: &IntervalMap, roots: &[ValueId]) -> Summary {
    summarize(f, im, roots, &exits_of(f, m))
}

fn summarize(f: &Function, im: &IntervalMap, roots: &[ValueId], exits: &[Vec<ValueId>]) -> Summary {
    let sig = f.signature();
    let mut s = Summary::empty(f.name.clone(), f.ret.is_some());
    if f.ret.is_some() {
        let rets = f.return_values();
        for (i, &p) in f.params.iter().enumerate() {
            if rets.iter().any(|r| im.can_reach(p, *r)) {
                s.pairs.insert((i as u32, 0));
            }
        }
    }
    let ptrs: Vec<(usize, u32)> = (0..f.params.len())
        .filter_map(|i| sig.output_index(i).map(|o| (i, o as u32)))
        .collect();
    let reached: Vec<Vec<bool>> = ptrs
        .iter()
        .map(|&(i, _)| roots.iter().map(|t| im.can_reach(f.params[i], *t)).collect())
        .collect();
    for (a, &(p, op)) in ptrs.iter().enumerate() {
        s.pairs.insert((p as u32, op));
        for (b, &(k, ok)) in ptrs.iter().enumerate().skip(a + 1) {
            if reached[a].iter().zip(&reached[b]).any(|(x, y)| *x && *y) {
                s.pairs.insert((p as u32, ok));
                s.pairs.insert((k as u32, op));
            }
        }
    }
    for (i, &a) in f.params.iter().enumerate() {
        for &(k, ok) in &ptrs {
            if exits[k].iter().any(|x| im.can_reach(a, *x)) {
                s.pairs.insert((i as u32, ok));
            }
        }
    }
    s
}

/// Adds the summary's edges at every call to `s.func` in `caller`, from
/// the call result to the actual argument, and folds them into the
/// caller's labelling. Returns whether any interval set grew.
pub fn propagate_summary(
    s: &Summary,
    m: &Module,
    caller: usize,
    sites: &[&CallSite],
    state: &mut FunctionState,
) -> Result<bool, SolveError> {
    let f = &m.functions[caller];
    let mut edges = Vec::new();
    for site in sites {
        let op = f.op(site.op);
        if op.callee() != Some(s.func.as_str()) {
            continue;
        }
        for &(src, dst) in &s.pairs {
            let (Some(r), Some(a)) = (op.results.get(dst as usize), op.operands.get(src as usize))
            else {
                return Err(SolveError::SummaryArity {
                    caller: f.name.clone(),
                    callee: s.func.clone(),
                    index: dst.max(src),
                });
            };
            edges.push((*r, *a));
        }
    }
    Ok(state.intervals.extend(&mut state.graph, &edges))
}

/// Solves `m` with the default options.
pub fn solve_module(m: &Module, client: &dyn ClientAnalysis) -> Result<Solution, SolveError> {
    solve_module_with(m, client, SolveOptions::default())
}

/// Builds every function's labelling, then iterates summaries to a fixpoint
/// with a FIFO worklist. Calls to defined functions contribute only summary
/// edges; calls to external declarations keep the client's local rule.
pub fn solve_module_with(
    m: &Module,
    client: &dyn ClientAnalysis,
    opts: SolveOptions,
) -> Result<Solution, SolveError> {
    if m.has_raw_memory_forms() {
        return Err(SolveError::NotPreprocessed);
    }
    let n = m.functions.len();
    let sites = call_sites(m);
    let mut sites_in = vec![Vec::new(); n];
    let mut sites_to = vec![Vec::new(); n];
    let mut callers_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, s) in sites.iter().enumerate() {
        sites_in[s.caller].push(i);
        if let Callee::Defined(c) = s.callee {
            sites_to[c].push(i);
            if !callers_of[c].contains(&s.caller) {
                callers_of[c].push(s.caller);
            }
        }
    }

    let states: Vec<FunctionState> = m
        .functions
        .par_iter()
        .enumerate()
        .map(|(fi, f)| {
            let defined: Vec<OpId> = sites_in[fi]
                .iter()
                .filter(|s| matches!(sites[**s].callee, Callee::Defined(_)))
                .map(|s| sites[*s].op)
                .collect();
            let graph = build_graph_filtered(f, m, client, |op| !defined.contains(&op))?;
            let intervals = build_intervals(&graph);
            Ok(FunctionState {
                graph,
                intervals,
                exits: exits_of(f, m),
            })
        })
        .collect::<Result<_, DftError>>()?;
    let states: Vec<Mutex<FunctionState>> = states.into_iter().map(Mutex::new).collect();

    let mut summaries: Vec<Summary> = m
        .functions
        .iter()
        .map(|f| Summary::empty(f.name.clone(), f.ret.is_some()))
        .collect();
    let mut stats = SolveStats::default();
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut queued = vec![true; n];
    while let Some(fi) = queue.pop_front() {
        queued[fi] = false;
        stats.iterations += 1;
        let fresh = {
            let st = states[fi].lock().unwrap();
            summarize(&m.functions[fi], &st.intervals, st.graph.roots(), &st.exits)
        };
        let old = &summaries[fi];
        if fresh.pairs.is_subset(&old.pairs) {
            continue;
        }
        // Existential subsumption is not monotone under coalescing, so
        // summaries accumulate instead of being replaced.
        let mut merged = old.clone();
        merged.pairs.extend(fresh.pairs);
        debug_assert!(old.pairs.is_subset(&merged.pairs));
        summaries[fi] = merged;
        let s = &summaries[fi];
        let results: Vec<Result<bool, SolveError>> = callers_of[fi]
            .par_iter()
            .map(|&c| {
                let here: Vec<&CallSite> = sites_in[c]
                    .iter()
                    .map(|i| &sites[*i])
                    .filter(|site| site.callee == Callee::Defined(fi))
                    .collect();
                let mut st = states[c].lock().unwrap();
                propagate_summary(s, m, c, &here, &mut st)
            })
            .collect();
        for r in results {
            r?;
        }
        stats.propagations += callers_of[fi].len();
        for &c in &callers_of[fi] {
            if !queued[c] {
                queued[c] = true;
                queue.push_back(c);
            }
        }
    }

    let functions: Vec<FunctionState> = states
        .into_iter()
        .map(|s| s.into_inner().unwrap())
        .collect();
    for st in &functions {
        let d = st.intervals.stats();
        stats.dft.visited_edges += d.visited_edges;
        stats.dft.visited_vertices += d.visited_vertices;
        stats.dft.tree_edges += d.tree_edges;
        stats.dft.cross_edges += d.cross_edges;
        stats.dft.back_edges += d.back_edges;
        stats.dft.forward_edges += d.forward_edges;
        stats.dft.merges += d.merges;
    }
    let mut sol = Solution {
        functions,
        summaries,
        sites,
        sites_in,
        sites_to,
        psi: None,
        stats,
    };
    if opts.reachable_summaries {
        sol.psi = Some(sol.compute_psi(m, &callers_of));
    }
    Ok(sol)
}

/// Reachable-endpoint sets of a solved module.
pub fn compute_reachable_summaries(m: &Module, sol: &Solution) -> ReachableFunctionSummary {
    let raw = match &sol.psi {
        Some(p) => p.clone(),
        None => sol.compute_psi(m, &sol.callers_of()),
    };
    sol.named_psi(m, &raw)
}

impl Solution {
    fn callers_of(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.functions.len()];
        for s in &self.sites {
            if let Callee::Defined(c) = s.callee {
                if !out[c].contains(&s.caller) {
                    out[c].push(s.caller);
                }
            }
        }
        out
    }

    /// Endpoint ids: defined functions first, then external declarations.
    fn callee_id(&self, c: Callee) -> u32 {
        match c {
            Callee::Defined(i) => i as u32,
            Callee::External(i) => (self.functions.len() + i) as u32,
        }
    }

    fn compute_psi(&self, m: &Module, callers_of: &[Vec<usize>]) -> Vec<Vec<EndpointSet>> {
        let n = self.functions.len();
        // Direct endpoints: parameter `i` of `f` reaching actual `j` of a call.
        let direct: Vec<Vec<EndpointSet>> = (0..n)
            .map(|fi| {
                let f = &m.functions[fi];
                let im = &self.functions[fi].intervals;
                f.params
                    .iter()
                    .map(|&p| {
                        let mut set = BTreeSet::new();
                        for &si in &self.sites_in[fi] {
                            let site = &self.sites[si];
                            for (j, a) in f.op(site.op).operands.iter().enumerate() {
                                if im.can_reach(p, *a) {
                                    set.insert((self.callee_id(site.callee), j as u32));
                                }
                            }
                        }
                        set
                    })
                    .collect()
            })
            .collect();
        let mut psi = direct.clone();
        let mut queue: VecDeque<usize> = (0..n).collect();
        let mut queued = vec![true; n];
        while let Some(fi) = queue.pop_front() {
            queued[fi] = false;
            let mut changed = false;
            for i in 0..psi[fi].len() {
                let mut acc = psi[fi][i].clone();
                for &(c, j) in &direct[fi][i] {
                    if (c as usize) < n {
                        acc.extend(psi[c as usize][j as usize].iter().copied());
                    }
                }
                debug_assert!(psi[fi][i].is_subset(&acc));
                if acc.len() != psi[fi][i].len() {
                    psi[fi][i] = acc;
                    changed = true;
                }
            }
            if changed {
                for &c in &callers_of[fi] {
                    if !queued[c] {
                        queued[c] = true;
                        queue.push_back(c);
                    }
                }
            }
        }
        psi
    }

    fn endpoint_name(&self, m: &Module, id: u32) -> String {
        let n = self.functions.len();
        if (id as usize) < n {
            m.functions[id as usize].name.clone()
        } else {
            m.externs
                .get(id as usize - n)
                .map_or_else(|| "?".to_string(), |e| e.name.clone())
        }
    }

    fn named_psi(&self, m: &Module, raw: &[Vec<EndpointSet>]) -> ReachableFunctionSummary {
        let mut map = BTreeMap::new();
        for (fi, per) in raw.iter().enumerate() {
            for (i, set) in per.iter().enumerate() {
                let key = Endpoint {
                    func: m.functions[fi].name.clone(),
                    index: i as u32,
                };
                let vals = set
                    .iter()
                    .map(|&(c, j)| Endpoint {
                        func: self.endpoint_name(m, c),
                        index: j,
                    })
                    .collect();
                map.insert(key, vals);
            }
        }
        ReachableFunctionSummary { map }
    }

    /// Reachable-endpoint sets, if computed during solving.
    pub fn reachable_summaries(&self, m: &Module) -> Option<ReachableFunctionSummary> {
        self.psi.as_ref().map(|raw| self.named_psi(m, raw))
    }

    pub fn summary(&self, func: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.func == func)
    }

    pub fn intervals(&self, func: usize) -> &IntervalMap {
        &self.functions[func].intervals
    }

    /// One `@f: R{..} P{..}` line per function.
    pub fn summary_dump(&self) -> String {
        let mut out = String::new();
        for s in &self.summaries {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    /// Entry points `(function, value, may_return)` whose intraprocedural
    /// reach sets together make up everything `v` in `f` flows to. Flow may
    /// first leave through returns, outputs, or pointer parameters into any
    /// caller, then descend into callees through actual arguments; once it
    /// descends it no longer returns, since flows back out to the same call
    /// are already captured by the caller's summary edges.
    fn entries(&self, m: &Module, f: usize, v: ValueId) -> HashMap<(usize, ValueId), bool> {
        let mut best: HashMap<(usize, ValueId), bool> = HashMap::new();
        let mut queue: VecDeque<(usize, ValueId, bool)> = VecDeque::new();
        let push = |best: &mut HashMap<(usize, ValueId), bool>,
                        queue: &mut VecDeque<(usize, ValueId, bool)>,
                        g: usize,
                        x: ValueId,
                        up: bool| {
            match best.get(&(g, x)) {
                Some(&prev) if prev || !up => {}
                _ => {
                    best.insert((g, x), up);
                    queue.push_back((g, x, up));
                }
            }
        };
        push(&mut best, &mut queue, f, v, true);
        let n = self.functions.len();
        while let Some((g, x, up)) = queue.pop_front() {
            if best.get(&(g, x)) != Some(&up) {
                continue;
            }
            let fg = &m.functions[g];
            let im = &self.functions[g].intervals;
            if im.pi(x).is_empty() {
                continue;
            }
            for &si in &self.sites_in[g] {
                let site = &self.sites[si];
                let Callee::Defined(e) = site.callee else {
                    continue;
                };
                for (j, a) in fg.op(site.op).operands.iter().enumerate() {
                    if !im.can_reach(x, *a) {
                        continue;
                    }
                    let fe = &m.functions[e];
                    push(&mut best, &mut queue, e, fe.params[j], false);
                    if let Some(psi) = &self.psi {
                        for &(c, jj) in &psi[e][j] {
                            if (c as usize) < n {
                                let pc = m.functions[c as usize].params[jj as usize];
                                push(&mut best, &mut queue, c as usize, pc, false);
                            }
                        }
                    }
                }
            }
            if !up || self.sites_to[g].is_empty() {
                continue;
            }
            let sig = fg.signature();
            let via_params: Vec<usize> = (0..fg.params.len())
                .filter(|&i| im.can_reach(x, fg.params[i]))
                .collect();
            let via_ret = fg.ret.is_some()
                && fg.return_values().iter().any(|r| im.can_reach(x, *r));
            let via_out: Vec<usize> = (0..fg.params.len())
                .filter(|&k| {
                    self.functions[g].exits[k]
                        .iter()
                        .any(|e| im.can_reach(x, *e))
                })
                .filter_map(|k| sig.output_index(k))
                .collect();
            for &si in &self.sites_to[g] {
                let site = &self.sites[si];
                let c = site.caller;
                let op = m.functions[c].op(site.op);
                for &i in &via_params {
                    push(&mut best, &mut queue, c, op.operands[i], true);
                }
                if via_ret {
                    push(&mut best, &mut queue, c, op.results[0], true);
                }
                for &o in &via_out {
                    push(&mut best, &mut queue, c, op.results[o], true);
                }
            }
        }
        best
    }

    /// Whether `a` in function `f` flows to `b` in function `g`.
    pub fn query(&self, m: &Module, f: usize, a: ValueId, g: usize, b: ValueId) -> bool {
        if self.functions[f].intervals.pi(a).is_empty() {
            return false;
        }
        if f == g && self.functions[f].intervals.can_reach(a, b) {
            return true;
        }
        let im = &self.functions[g].intervals;
        self.entries(m, f, a)
            .keys()
            .any(|&(h, x)| h == g && im.can_reach(x, b))
    }

    /// Every value, per function, that `v` in `f` flows to.
    pub fn reachable_from(&self, m: &Module, f: usize, v: ValueId) -> Vec<(usize, Vec<ValueId>)> {
        let mut per: BTreeMap<usize, BTreeSet<ValueId>> = BTreeMap::new();
        for (g, x) in self.entries(m, f, v).into_keys() {
            let im = &self.functions[g].intervals;
            let set = per.entry(g).or_default();
            for w in m.functions[g].value_ids() {
                if im.can_reach(x, w) {
                    set.insert(w);
                }
            }
        }
        per.into_iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(g, s)| (g, s.into_iter().collect()))
            .collect()
    }
}

/// Name-based front end to [`Solution::query`]: does `from` flow to `to`?
pub fn query_interproc(
    m: &Module,
    sol: &Solution,
    from: (&str, &str),
    to: (&str, &str),
) -> Result<bool, QueryError> {
    let resolve = |(func, val): (&str, &str)| {
        let fi = m
            .function_index(func)
            .ok_or_else(|| QueryError::UnknownFunction(func.trim_start_matches('@').to_string()))?;
        let v = m.functions[fi].find_value(val).ok_or_else(|| {
            QueryError::UnknownValue(
                func.trim_start_matches('@').to_string(),
                val.trim_start_matches('%').to_string(),
            )
        })?;
        Ok::<_, QueryError>((fi, v))
    };
    let (f, a) = resolve(from)?;
    let (g, b) = resolve(to)?;
    Ok(sol.query(m, f, a, g, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::TaintClient;
    use crate::ir::parse_module;
    use crate::preprocess::preprocess_module;

    fn solve(src: &str) -> (Module, Solution) {
        let m = preprocess_module(&parse_module(src).unwrap()).unwrap();
        let sol = solve_module(&m, &TaintClient::new()).unwrap();
        (m, sol)
    }

    #[test]
    fn summary_display() {
        let mut s = Summary::empty("f", true);
        s.pairs.extend([(2, 0), (0, 1), (0, 2)]);
        assert_eq!(s.to_string(), "@f: R{2->0} P{0->1,0->2}");
    }

    #[test]
    fn leaf_without_params_has_empty_summary() {
        let (_, sol) = solve("func @f() -> int {\n  %c = const 1\n  return %c\n}\n");
        assert!(sol.summaries[0].pairs.is_empty());
        assert_eq!(sol.stats.propagations, 0);
    }

    #[test]
    fn flow_through_callee_return() {
        let (m, sol) = solve(
            "func @id(%x: int) -> int {\n  return %x\n}\nfunc @main(%a: int) -> int {\n  %r = call @id(%a)\n  %s = add %r, 1\n  return %s\n}\n",
        );
        assert!(query_interproc(&m, &sol, ("main", "a"), ("main", "s")).unwrap());
        assert!(query_interproc(&m, &sol, ("id", "x"), ("main", "s")).unwrap());
        assert!(query_interproc(&m, &sol, ("main", "a"), ("id", "x")).unwrap());
        assert!(!query_interproc(&m, &sol, ("main", "s"), ("id", "x")).unwrap());
        assert!(query_interproc(&m, &sol, ("nope", "a"), ("main", "s")).is_err());
    }

    #[test]
    fn self_recursion_terminates() {
        let (_, sol) = solve(
            "func @f(%x: int, %p: ptr) -> int {\n  %y = add %x, 1\n  store %y, %p\n  %r = call @f(%y, %p)\n  return %r\n}\n",
        );
        let s = &sol.summaries[0];
        assert!(s.pairs.contains(&(1, 1)));
        assert!(s.pairs.contains(&(0, 1)));
    }
}
