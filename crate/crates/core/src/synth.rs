//! Seeded generator of synthetic `.dfir` modules.
//!
//! Operand selection prefers the most recently defined value that has no
//! use yet, so most values end up with at most one use, which is the shape
//! of real SSA code. Control flow mixes straight-line runs, diamonds joined
//! through a block argument, and single-block loops.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{parse_module, Module};

/// Which functions a function may call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CallGraph {
    /// Functions are split into `levels` layers; calls only go to deeper
    /// layers, so call chains are at most `levels - 1` deep.
    Layered { levels: usize },
    /// Any function may call any other, itself included.
    Any,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub functions: usize,
    /// Approximate number of operations per function body.
    pub ops_per_function: usize,
    pub max_int_params: usize,
    pub max_ptr_params: usize,
    /// Chance that an operation slot becomes a call.
    pub call_rate: f64,
    pub call_graph: CallGraph,
    /// Chance that a region is an if/else diamond.
    pub branch_rate: f64,
    /// Chance that a region is a loop.
    pub loop_rate: f64,
    /// Chance that an operand is the latest value without uses.
    pub fresh_bias: f64,
    /// Declare and occasionally call a few external functions.
    pub externs: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            functions: 8,
            ops_per_function: 40,
            max_int_params: 2,
            max_ptr_params: 2,
            call_rate: 0.06,
            call_graph: CallGraph::Layered { levels: 4 },
            branch_rate: 0.15,
            loop_rate: 0.05,
            fresh_bias: 0.8,
            externs: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Layered call graph with sparse calls.
    Default,
    /// Many calls per function to arbitrary callees, recursion included.
    DenseCallgraph,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Default => "default",
            Preset::DenseCallgraph => "dense-callgraph",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "default" => Some(Preset::Default),
            "dense-callgraph" | "dense" => Some(Preset::DenseCallgraph),
            _ => None,
        }
    }

    /// Configuration producing roughly `ops` operations in total.
    pub fn config(self, ops: usize) -> SynthConfig {
        let per = 50;
        let functions = (ops / per).max(1);
        match self {
            Preset::Default => SynthConfig {
                functions,
                ops_per_function: per,
                call_graph: CallGraph::Layered { levels: 6 },
                ..SynthConfig::default()
            },
            Preset::DenseCallgraph => SynthConfig {
                functions,
                ops_per_function: per,
                call_rate: 0.25,
                call_graph: CallGraph::Any,
                ..SynthConfig::default()
            },
        }
    }
}

const EXTERNS: &[(&str, &[&str], Option<&str>)] = &[
    ("ext_read", &["ptr"], Some("int")),
    ("ext_write", &["ptr", "int"], None),
    ("ext_sink", &["int"], None),
];

struct Sig {
    params: Vec<&'static str>,
    ret: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Ptr,
}

struct Val {
    name: String,
    ty: Ty,
    uses: u32,
}

struct FnGen<'a> {
    rng: &'a mut ChaCha8Rng,
    cfg: &'a SynthConfig,
    out: String,
    vals: Vec<Val>,
    /// Indices into `vals` currently in scope.
    scope: Vec<usize>,
    next: usize,
    blocks: usize,
    emitted: usize,
}

impl FnGen<'_> {
    fn fresh(&mut self, ty: Ty) -> usize {
        let prefix = if ty == Ty::Int { "v" } else { "q" };
        let name = format!("{prefix}{}", self.next);
        self.next += 1;
        self.vals.push(Val { name, ty, uses: 0 });
        let id = self.vals.len() - 1;
        self.scope.push(id);
        id
    }

    fn label(&mut self, base: &str) -> String {
        self.blocks += 1;
        format!("{base}{}", self.blocks)
    }

    fn name(&self, id: usize) -> String {
        format!("%{}", self.vals[id].name)
    }

    /// An in-scope value of type `ty`, preferring the latest unused one.
    fn pick(&mut self, ty: Ty) -> Option<usize> {
        let candidates: Vec<usize> = self
            .scope
            .iter()
            .copied()
            .filter(|v| self.vals[*v].ty == ty)
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let id = if self.rng.random_bool(self.cfg.fresh_bias) {
            // Without an unused candidate the caller materializes a new
            // value (a literal or an alloca) instead of adding a use.
            candidates
                .iter()
                .rev()
                .take(12)
                .copied()
                .find(|v| self.vals[*v].uses == 0)?
        } else {
            *candidates.choose(self.rng).unwrap()
        };
        self.vals[id].uses += 1;
        Some(id)
    }

    fn int_operand(&mut self) -> String {
        if self.rng.random_bool(0.1) {
            return self.rng.random_range(0..100).to_string();
        }
        match self.pick(Ty::Int) {
            Some(v) => self.name(v),
            None => self.rng.random_range(0..100).to_string(),
        }
    }

    fn ptr_operand(&mut self) -> String {
        match self.pick(Ty::Ptr) {
            Some(v) => self.name(v),
            None => {
                let q = self.fresh(Ty::Ptr);
                let _ = writeln!(self.out, "  {} = alloca", self.name(q));
                self.emitted += 1;
                self.vals[q].uses += 1;
                self.name(q)
            }
        }
    }

    fn op(&mut self, sigs: &[(String, Sig)], callees: &[usize]) {
        self.emitted += 1;
        let roll: f64 = self.rng.random();
        if roll < self.cfg.call_rate && !callees.is_empty() {
            let (name, sig) = &sigs[*callees.choose(self.rng).unwrap()];
            let args: Vec<String> = sig
                .params
                .iter()
                .map(|t| {
                    if *t == "int" {
                        self.int_operand()
                    } else {
                        self.ptr_operand()
                    }
                })
                .collect();
            if sig.ret {
                let r = self.fresh(Ty::Int);
                let _ = writeln!(self.out, "  {} = call @{name}({})", self.name(r), args.join(", "));
            } else {
                let _ = writeln!(self.out, "  call @{name}({})", args.join(", "));
            }
            return;
        }
        let roll = self.rng.random_range(0..100);
        match roll {
            0..=7 => {
                let r = self.fresh(Ty::Int);
                let c = self.rng.random_range(-50..50);
                let _ = writeln!(self.out, "  {} = const {c}", self.name(r));
            }
            8..=44 => {
                let a = self.int_operand();
                let b = self.int_operand();
                let r = self.fresh(Ty::Int);
                let opc = if self.rng.random_bool(0.6) { "add" } else { "mul" };
                let _ = writeln!(self.out, "  {} = {opc} {a}, {b}", self.name(r));
            }
            45..=49 => {
                let r = self.fresh(Ty::Ptr);
                let _ = writeln!(self.out, "  {} = alloca", self.name(r));
            }
            50..=69 => {
                let p = self.ptr_operand();
                let (ty, tn) = if self.rng.random_bool(0.1) {
                    (Ty::Ptr, "ptr")
                } else {
                    (Ty::Int, "int")
                };
                let r = self.fresh(ty);
                let _ = writeln!(self.out, "  {} = load {p} : {tn}", self.name(r));
            }
            70..=89 => {
                let v = if self.rng.random_bool(0.1) {
                    self.ptr_operand()
                } else {
                    self.int_operand()
                };
                let p = self.ptr_operand();
                let _ = writeln!(self.out, "  store {v}, {p}");
            }
            _ => {
                let p = self.ptr_operand();
                let r = self.fresh(Ty::Ptr);
                let off = self.rng.random_range(0..4) * 8;
                let _ = writeln!(self.out, "  {} = gep {p}, {off}", self.name(r));
            }
        }
    }

    fn straight(&mut self, n: usize, sigs: &[(String, Sig)], callees: &[usize]) {
        for _ in 0..n {
            self.op(sigs, callees);
        }
    }

    fn region(&mut self, sigs: &[(String, Sig)], callees: &[usize]) {
        let roll: f64 = self.rng.random();
        if roll < self.cfg.branch_rate {
            let cond = self.int_operand();
            let (t, e, j) = (self.label("then"), self.label("else"), self.label("join"));
            let _ = writeln!(self.out, "  cond_br {cond}, ^{t}(), ^{e}()");
            let mark = self.scope.len();
            let mut incoming = Vec::new();
            for l in [&t, &e] {
                let _ = writeln!(self.out, "^{l}:");
                let n = self.rng.random_range(1..5);
                self.straight(n, sigs, callees);
                incoming.push(self.int_operand());
                self.scope.truncate(mark);
                let _ = writeln!(self.out, "  br ^{j}({})", incoming.last().unwrap());
            }
            let m = self.fresh(Ty::Int);
            let _ = writeln!(self.out, "^{j}({}: int):", self.name(m));
        } else if roll < self.cfg.branch_rate + self.cfg.loop_rate {
            let init = self.int_operand();
            let (h, x) = (self.label("loop"), self.label("exit"));
            let _ = writeln!(self.out, "  br ^{h}({init})");
            let i = self.fresh(Ty::Int);
            let _ = writeln!(self.out, "^{h}({}: int):", self.name(i));
            let n = self.rng.random_range(2..6);
            self.straight(n, sigs, callees);
            let next = self.int_operand();
            let cond = self.int_operand();
            let _ = writeln!(self.out, "  cond_br {cond}, ^{h}({next}), ^{x}()");
            let _ = writeln!(self.out, "^{x}:");
        } else {
            let n = self.rng.random_range(3..9);
            self.straight(n, sigs, callees);
        }
    }
}

/// Generates a module from `cfg` and `seed`. The result parses and
/// validates; it still contains plain `store`/`call`.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Module {
    let text = generate_text(cfg, seed);
    parse_module(&text).unwrap_or_else(|e| panic!("generated module does not parse: {e}\n{text}"))
}

/// Textual form of [`generate`].
pub fn generate_text(cfg: &SynthConfig, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.functions.max(1);
    let mut sigs: Vec<(String, Sig)> = Vec::new();
    for i in 0..n {
        let ints = rng.random_range(0..=cfg.max_int_params);
        let ptrs = rng.random_range(0..=cfg.max_ptr_params);
        let mut params: Vec<&'static str> = std::iter::repeat_n("int", ints)
            .chain(std::iter::repeat_n("ptr", ptrs))
            .collect();
        if params.is_empty() {
            params.push("int");
        }
        shuffle(&mut params, &mut rng);
        sigs.push((format!("f{i}"), Sig { params, ret: rng.random_bool(0.7) }));
    }
    let mut text = String::new();
    if cfg.externs {
        for (name, params, ret) in EXTERNS {
            let _ = write!(text, "extern @{name}({})", params.join(", "));
            if let Some(r) = ret {
                let _ = write!(text, " -> {r}");
            }
            text.push('\n');
            sigs.push((
                name.to_string(),
                Sig {
                    params: params.to_vec(),
                    ret: ret.is_some(),
                },
            ));
        }
    }
    for i in 0..n {
        let callees: Vec<usize> = (0..sigs.len())
            .filter(|&c| {
                if c >= n {
                    return true;
                }
                match cfg.call_graph {
                    CallGraph::Any => true,
                    CallGraph::Layered { levels } => {
                        let levels = levels.max(1);
                        c * levels / n > i * levels / n
                    }
                }
            })
            .collect();
        let mut g = FnGen {
            rng: &mut rng,
            cfg,
            out: String::new(),
            vals: Vec::new(),
            scope: Vec::new(),
            next: 0,
            blocks: 0,
            emitted: 0,
        };
        let (name, sig) = &sigs[i];
        let mut header = Vec::new();
        for (k, t) in sig.params.iter().enumerate() {
            let ty = if *t == "int" { Ty::Int } else { Ty::Ptr };
            g.vals.push(Val {
                name: format!("a{k}"),
                ty,
                uses: 0,
            });
            g.scope.push(g.vals.len() - 1);
            header.push(format!("%a{k}: {t}"));
        }
        while g.emitted < cfg.ops_per_function {
            g.region(&sigs, &callees);
        }
        if sig.ret {
            let r = g.int_operand();
            let _ = writeln!(g.out, "  return {r}");
        } else {
            let _ = writeln!(g.out, "  return");
        }
        let ret = if sig.ret { " -> int" } else { "" };
        let _ = writeln!(text, "\nfunc @{name}({}){ret} {{\n^entry:", header.join(", "));
        text.push_str(&g.out);
        text.push_str("}\n");
    }
    text
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Module of roughly `ops` operations for the given preset.
pub fn generate_sized(preset: Preset, ops: usize, seed: u64) -> Module {
    generate(&preset.config(ops), seed)
}

/// A single straight-line function `@main` over integer parameters whose
/// loads only read cells stored earlier. Suitable for concrete execution.
pub fn straight_line(seed: u64, ops: usize, int_params: usize) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    let params: Vec<String> = (0..int_params).map(|i| format!("%x{i}: int")).collect();
    let _ = writeln!(text, "func @main({}) -> int {{", params.join(", "));
    let mut ints: Vec<String> = (0..int_params).map(|i| format!("%x{i}")).collect();
    // Pointer values with the cell they address: (alloca number, offset).
    let mut ptrs: Vec<(String, (usize, i64))> = Vec::new();
    let mut initialized: Vec<(usize, i64)> = Vec::new();
    let mut allocas = 0;
    let mut next = 0;
    let mut fresh = |prefix: &str| {
        next += 1;
        format!("%{prefix}{next}")
    };
    for _ in 0..ops {
        let roll = rng.random_range(0..100);
        let int_or_lit = |rng: &mut ChaCha8Rng, ints: &[String]| {
            if ints.is_empty() || rng.random_bool(0.15) {
                rng.random_range(-9..10).to_string()
            } else {
                ints.choose(rng).unwrap().clone()
            }
        };
        match roll {
            0..=39 => {
                let a = int_or_lit(&mut rng, &ints);
                let b = int_or_lit(&mut rng, &ints);
                let r = fresh("v");
                let opc = if rng.random_bool(0.6) { "add" } else { "mul" };
                let _ = writeln!(text, "  {r} = {opc} {a}, {b}");
                ints.push(r);
            }
            40..=49 => {
                let r = fresh("q");
                let _ = writeln!(text, "  {r} = alloca");
                ptrs.push((r, (allocas, 0)));
                allocas += 1;
            }
            50..=57 if !ptrs.is_empty() => {
                let (p, (a, off)) = ptrs.choose(&mut rng).unwrap().clone();
                let k = rng.random_range(0..3);
                let r = fresh("q");
                let _ = writeln!(text, "  {r} = gep {p}, {k}");
                ptrs.push((r, (a, off + k)));
            }
            58..=79 if !ptrs.is_empty() => {
                let v = int_or_lit(&mut rng, &ints);
                let (p, cell) = ptrs.choose(&mut rng).unwrap().clone();
                let _ = writeln!(text, "  store {v}, {p}");
                if !initialized.contains(&cell) {
                    initialized.push(cell);
                }
            }
            80..=99 => {
                let readable: Vec<&(String, (usize, i64))> =
                    ptrs.iter().filter(|(_, c)| initialized.contains(c)).collect();
                if let Some((p, _)) = readable.choose(&mut rng) {
                    let r = fresh("v");
                    let _ = writeln!(text, "  {r} = load {p} : int");
                    ints.push(r);
                }
            }
            _ => {}
        }
    }
    let ret = ints.last().cloned().unwrap_or_else(|| "0".to_string());
    let _ = writeln!(text, "  return {ret}\n}}");
    parse_module(&text).unwrap_or_else(|e| panic!("straight-line program does not parse: {e}\n{text}"))
}

/// Fraction of values with at most one use.
pub fn single_use_fraction(m: &Module) -> f64 {
    let (mut total, mut low) = (0usize, 0usize);
    for f in &m.functions {
        for v in f.value_ids() {
            total += 1;
            if f.uses(v).len() <= 1 {
                low += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        low as f64 / total as f64
    }
}
