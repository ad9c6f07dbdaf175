//! Client analyses: the transfer functions and root choices that shape the
//! value-flow graph, plus taint and read-only-argument drivers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::interproc::{solve_module, Solution, SolveError};
use crate::ir::{BlockId, Function, Module, OpId, Opcode, Type, ValueDef, ValueId};

/// A reversed edge `use → def`.
pub type Edge = (ValueId, ValueId);

pub trait ClientAnalysis: Sync {
    fn name(&self) -> &'static str;

    /// Reversed roots of the traversal, in priority order.
    fn choose_roots(&self, f: &Function, m: &Module) -> Vec<ValueId>;

    /// Appends the reversed edges contributed by `op`.
    fn transfer(&self, f: &Function, op: OpId, out: &mut Vec<Edge>);

    /// Appends edges for a block's terminator. By default each successor
    /// block argument depends on the value passed for it.
    fn transfer_terminator(&self, f: &Function, b: BlockId, out: &mut Vec<Edge>) {
        for (target, args) in f.block(b).term.successors() {
            for (param, arg) in f.block(target).args.iter().zip(args) {
                if !is_const(f, *arg) {
                    out.push((*param, *arg));
                }
            }
        }
    }

    /// Whether every vertex must be labelled, not only those reachable from
    /// the chosen roots. Needed for arbitrary reachability queries.
    fn covers_all_vertices(&self) -> bool {
        true
    }
}

/// Constants carry no flow of interest and are left out of the graph.
pub fn is_const(f: &Function, v: ValueId) -> bool {
    matches!(f.value(v).def, ValueDef::Result(op, _) if f.op(op).opcode == Opcode::Const)
}

fn push_to_operands(f: &Function, from: ValueId, operands: &[ValueId], out: &mut Vec<Edge>) {
    for &a in operands {
        if !is_const(f, a) {
            out.push((from, a));
        }
    }
}

/// Shared rules; `store_to_ptr` and `gep_back` select the client variant.
fn common_transfer(f: &Function, op_id: OpId, out: &mut Vec<Edge>, store_to_ptr: bool, gep_back: bool) {
    let op = f.op(op_id);
    match op.opcode {
        Opcode::Const | Opcode::Alloca | Opcode::Store => {}
        Opcode::Add | Opcode::Mul | Opcode::Load => {
            push_to_operands(f, op.results[0], &op.operands, out)
        }
        Opcode::DfiStore => {
            let q = op.results[0];
            push_to_operands(f, q, &op.operands[..1], out);
            if store_to_ptr {
                push_to_operands(f, q, &op.operands[1..], out);
            }
        }
        Opcode::Gep => {
            let (p, q) = (op.operands[0], op.results[0]);
            out.push((q, p));
            if gep_back {
                out.push((p, q));
            }
        }
        Opcode::Call | Opcode::DfiCall => {
            for &r in &op.results {
                push_to_operands(f, r, &op.operands, out);
            }
        }
    }
}

fn push_unique(out: &mut Vec<ValueId>, seen: &mut HashSet<ValueId>, v: ValueId) {
    if seen.insert(v) {
        out.push(v);
    }
}

/// Renamed versions of each pointer parameter live at the returns,
/// excluding the parameter itself.
fn renamed_exit_versions(f: &Function, m: &Module) -> Vec<ValueId> {
    let mut out = Vec::new();
    for &p in &f.params {
        if f.ty(p) == Type::Ptr {
            out.extend(f.exit_versions(p, Some(m)).into_iter().filter(|x| *x != p));
        }
    }
    out
}

/// Forward taint: a value is tainted if anything it is computed from is.
#[derive(Clone, Debug, Default)]
pub struct TaintClient {
    sinks: HashMap<String, Vec<ValueId>>,
}

impl TaintClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Uses the operands of the configured sinks as the first roots.
    pub fn with_config(cfg: &ResolvedTaintConfig, m: &Module) -> Self {
        let mut sinks: HashMap<String, Vec<ValueId>> = HashMap::new();
        for s in &cfg.sinks {
            sinks
                .entry(m.functions[s.function].name.clone())
                .or_default()
                .extend(s.operands.iter().copied());
        }
        TaintClient { sinks }
    }
}

impl ClientAnalysis for TaintClient {
    fn name(&self) -> &'static str {
        "taint"
    }

    fn choose_roots(&self, f: &Function, m: &Module) -> Vec<ValueId> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for v in self.sinks.get(&f.name).into_iter().flatten() {
            push_unique(&mut out, &mut seen, *v);
        }
        for v in f.return_values() {
            push_unique(&mut out, &mut seen, v);
        }
        for (_, op) in f.ops_in_order() {
            if f.op(op).opcode.is_call() {
                for a in &f.op(op).operands {
                    push_unique(&mut out, &mut seen, *a);
                }
            }
        }
        for v in renamed_exit_versions(f, m) {
            push_unique(&mut out, &mut seen, v);
        }
        for v in f.value_ids() {
            if f.uses(v).is_empty() && !is_const(f, v) {
                push_unique(&mut out, &mut seen, v);
            }
        }
        out
    }

    fn transfer(&self, f: &Function, op: OpId, out: &mut Vec<Edge>) {
        common_transfer(f, op, out, false, true);
    }
}

/// Read-only argument analysis: follows pointers through their def-use
/// chains and through the values stored into them.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoArgClient;

impl ClientAnalysis for RoArgClient {
    fn name(&self) -> &'static str {
        "roarg"
    }

    fn choose_roots(&self, f: &Function, m: &Module) -> Vec<ValueId> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for v in renamed_exit_versions(f, m) {
            push_unique(&mut out, &mut seen, v);
        }
        for v in f.return_values() {
            push_unique(&mut out, &mut seen, v);
        }
        for (_, op) in f.ops_in_order() {
            if f.op(op).opcode.is_call() {
                for r in &f.op(op).results {
                    push_unique(&mut out, &mut seen, *r);
                }
            }
        }
        out
    }

    fn transfer(&self, f: &Function, op: OpId, out: &mut Vec<Edge>) {
        common_transfer(f, op, out, true, false);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TaintConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config line {line}: unknown function `@{function}`")]
    UnknownFunction { line: usize, function: String },
    #[error("config line {line}: `@{function}` has no value `%{value}`")]
    UnknownValue {
        line: usize,
        function: String,
        value: String,
    },
    #[error("config line {line}: `@{function}` has no op#{op}")]
    UnknownOp {
        line: usize,
        function: String,
        op: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaintEntry {
    Source { function: String, value: String },
    Sink { function: String, op: usize },
}

/// Parsed sidecar file: `source @f %v` and `sink @f op#K` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaintConfig {
    pub entries: Vec<(usize, TaintEntry)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedSink {
    pub function: usize,
    pub op: usize,
    pub operands: Vec<ValueId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResolvedTaintConfig {
    pub sources: Vec<(usize, ValueId)>,
    pub sinks: Vec<ResolvedSink>,
}

impl TaintConfig {
    pub fn parse(text: &str) -> Result<Self, TaintConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let words: Vec<&str> = raw.split_whitespace().collect();
            if words.is_empty() || words[0].starts_with('#') {
                continue;
            }
            let syntax = |message: &str| TaintConfigError::Syntax {
                line,
                message: message.to_string(),
            };
            if words.len() != 3 || !words[1].starts_with('@') {
                return Err(syntax("expected `source @f %v` or `sink @f op#K`"));
            }
            let function = words[1][1..].to_string();
            let entry = match words[0] {
                "source" => {
                    let value = words[2]
                        .strip_prefix('%')
                        .ok_or_else(|| syntax("source value must be written `%name`"))?;
                    TaintEntry::Source {
                        function,
                        value: value.to_string(),
                    }
                }
                "sink" => {
                    let op = words[2]
                        .strip_prefix("op#")
                        .and_then(|k| k.parse().ok())
                        .ok_or_else(|| syntax("sink must be written `op#K`"))?;
                    TaintEntry::Sink { function, op }
                }
                _ => return Err(syntax("expected `source` or `sink`")),
            };
            entries.push((line, entry));
        }
        Ok(TaintConfig { entries })
    }

    pub fn resolve(&self, m: &Module) -> Result<ResolvedTaintConfig, TaintConfigError> {
        let mut out = ResolvedTaintConfig::default();
        for (line, e) in &self.entries {
            let (TaintEntry::Source { function, .. } | TaintEntry::Sink { function, .. }) = e;
            let fi = m
                .function_index(function)
                .ok_or_else(|| TaintConfigError::UnknownFunction {
                    line: *line,
                    function: function.clone(),
                })?;
            let f = &m.functions[fi];
            match e {
                TaintEntry::Source { value, .. } => {
                    let v = f.find_value(value).ok_or_else(|| TaintConfigError::UnknownValue {
                        line: *line,
                        function: function.clone(),
                        value: value.clone(),
                    })?;
                    out.sources.push((fi, v));
                }
                TaintEntry::Sink { op, .. } => {
                    let operands =
                        op_operands(f, *op).ok_or_else(|| TaintConfigError::UnknownOp {
                            line: *line,
                            function: function.clone(),
                            op: *op,
                        })?;
                    out.sinks.push(ResolvedSink {
                        function: fi,
                        op: *op,
                        operands,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Operands of the `k`-th operation in printed order, counting each
/// block's terminator after its body. Inline literals are `const`
/// operations of their own, as `dfi preprocess` shows them.
pub fn op_operands(f: &Function, k: usize) -> Option<Vec<ValueId>> {
    let mut i = 0;
    for b in &f.blocks {
        for &op in &b.ops {
            if i == k {
                return Some(f.op(op).operands.clone());
            }
            i += 1;
        }
        if i == k {
            return Some(b.term.operands());
        }
        i += 1;
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ValueRef {
    pub function: String,
    pub value: String,
}

impl fmt::Display for ValueRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}:%{}", self.function, self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SinkHit {
    pub function: String,
    pub op: usize,
    pub operand: String,
    pub sources: Vec<ValueRef>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TaintReport {
    /// Values reached by some source, sources themselves excluded.
    pub tainted: Vec<ValueRef>,
    pub sink_hits: Vec<SinkHit>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Config(#[from] TaintConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Solves `m` under the taint client and reports every value each source
/// flows to, within and across functions.
pub fn run_taint(m: &Module, cfg: &TaintConfig) -> Result<(TaintReport, Solution), ClientError> {
    let resolved = cfg.resolve(m)?;
    let client = TaintClient::with_config(&resolved, m);
    let sol = solve_module(m, &client)?;
    let report = taint_report(m, &sol, &resolved);
    Ok((report, sol))
}

/// Builds the taint report from an already solved module.
pub fn taint_report(m: &Module, sol: &Solution, cfg: &ResolvedTaintConfig) -> TaintReport {
    let vref = |fi: usize, v: ValueId| ValueRef {
        function: m.functions[fi].name.clone(),
        value: m.functions[fi].name_of(v).to_string(),
    };
    let sources: HashSet<(usize, ValueId)> = cfg.sources.iter().copied().collect();
    let mut tainted = BTreeSet::new();
    let mut reached_by: HashMap<(usize, ValueId), BTreeSet<ValueRef>> = HashMap::new();
    for &(fi, v) in &cfg.sources {
        for (gi, vals) in sol.reachable_from(m, fi, v) {
            for w in vals {
                reached_by.entry((gi, w)).or_default().insert(vref(fi, v));
                if !sources.contains(&(gi, w)) {
                    tainted.insert(vref(gi, w));
                }
            }
        }
    }
    let mut sink_hits = Vec::new();
    for s in &cfg.sinks {
        for &o in &s.operands {
            if let Some(srcs) = reached_by.get(&(s.function, o)) {
                sink_hits.push(SinkHit {
                    function: m.functions[s.function].name.clone(),
                    op: s.op,
                    operand: m.functions[s.function].name_of(o).to_string(),
                    sources: srcs.iter().cloned().collect(),
                });
            }
        }
    }
    TaintReport {
        tainted: tainted.into_iter().collect(),
        sink_hits,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ReadOnly,
    Modified,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ReadOnly => "read_only",
            Verdict::Modified => "modified",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArgVerdict {
    pub function: String,
    /// Ordinal of the call among the function's calls, in textual order.
    pub call: usize,
    pub callee: String,
    /// Argument position.
    pub arg: usize,
    pub verdict: Verdict,
}

impl fmt::Display for ArgVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "@{} call#{} arg#{}: {}",
            self.function, self.call, self.arg, self.verdict
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoArgReport {
    pub verdicts: Vec<ArgVerdict>,
}

impl RoArgReport {
    pub fn get(&self, function: &str, call: usize, arg: usize) -> Option<Verdict> {
        self.verdicts
            .iter()
            .find(|v| v.function == function && v.call == call && v.arg == arg)
            .map(|v| v.verdict)
    }
}

/// Solves `m` under the read-only-argument client and classifies every
/// pointer argument of every call.
pub fn run_roarg(m: &Module) -> Result<(RoArgReport, Solution), ClientError> {
    let sol = solve_module(m, &RoArgClient)?;
    let report = roarg_report(m, &sol);
    Ok((report, sol))
}

/// A pointer argument is modified at a call when some other argument value
/// flows into the call's output for it.
pub fn roarg_report(m: &Module, sol: &Solution) -> RoArgReport {
    let mut verdicts = Vec::new();
    for (fi, f) in m.functions.iter().enumerate() {
        let im = &sol.functions[fi].intervals;
        let calls = f
            .ops_in_order()
            .filter(|(_, op)| f.op(*op).opcode.is_call());
        for (k, (_, op_id)) in calls.enumerate() {
            let op = f.op(op_id);
            let callee = op.callee().unwrap_or_default();
            let Some(sig) = m.signature(callee) else {
                continue;
            };
            for (j, &p) in op.operands.iter().enumerate() {
                let Some(out_idx) = sig.output_index(j) else {
                    continue;
                };
                let modified = op.operands.iter().enumerate().any(|(q, &a)| {
                    q != j
                        && a != p
                        && op
                            .results
                            .get(out_idx)
                            .is_some_and(|r| im.can_reach(a, *r))
                });
                verdicts.push(ArgVerdict {
                    function: f.name.clone(),
                    call: k,
                    callee: callee.to_string(),
                    arg: j,
                    verdict: if modified {
                        Verdict::Modified
                    } else {
                        Verdict::ReadOnly
                    },
                });
            }
        }
    }
    RoArgReport { verdicts }
}

/// Groups tainted values by function for display.
pub fn group_by_function(values: &[ValueRef]) -> BTreeMap<&str, Vec<&str>> {
    let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for v in values {
        out.entry(v.function.as_str()).or_default().push(v.value.as_str());
    }
    out
}
