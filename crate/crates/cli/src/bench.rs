//! Scaling benchmark over synthetic modules.

use std::fmt::Write;
use std::time::Instant;

use dfi_core::clients::TaintClient;
use dfi_core::interproc::solve_module;
use dfi_core::preprocess::preprocess_module;
use dfi_core::stats::{self, millis, Histogram};
use dfi_core::synth::{generate_sized, single_use_fraction, Preset};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    /// Requested size.
    pub target: usize,
    /// Operations after preprocessing.
    pub instructions: usize,
    pub functions: usize,
    pub single_use_fraction: f64,
    pub visited_vertices: usize,
    pub visited_edges: usize,
    /// Fastest of the repetitions, solve only.
    pub analysis_ms: f64,
    /// Heap growth at the peak of one solve, when the counting allocator
    /// is installed.
    pub peak_memory_bytes: Option<usize>,
    pub interval_sizes: Histogram,
}

/// Generates a module of about `ops` operations and times the taint solve.
pub fn bench_one(preset: Preset, ops: usize, seed: u64, repeats: usize) -> BenchRow {
    let raw = generate_sized(preset, ops, seed);
    let m = preprocess_module(&raw).expect("generated modules preprocess");
    let client = TaintClient::new();
    let mut best = f64::INFINITY;
    let mut peak = None;
    let mut row = None;
    for _ in 0..repeats.max(1) {
        let base = stats::current_bytes();
        stats::reset_peak();
        let t = Instant::now();
        let sol = solve_module(&m, &client).expect("generated modules solve");
        best = best.min(millis(t.elapsed()));
        if stats::allocator_installed() {
            peak = Some(stats::peak_bytes().saturating_sub(base));
        }
        row.get_or_insert_with(|| {
            let sizes = sol.functions.iter().flat_map(|s| s.intervals.set_sizes());
            (
                sol.stats.dft.visited_vertices,
                sol.stats.dft.visited_edges,
                Histogram::from_sizes(sizes),
            )
        });
    }
    let (visited_vertices, visited_edges, interval_sizes) = row.unwrap();
    BenchRow {
        target: ops,
        instructions: m.op_count(),
        functions: m.functions.len(),
        single_use_fraction: single_use_fraction(&raw),
        visited_vertices,
        visited_edges,
        analysis_ms: best,
        peak_memory_bytes: peak,
        interval_sizes,
    }
}

pub fn run(sizes: &[usize], seed: u64, preset: Preset, repeats: usize) -> Vec<BenchRow> {
    sizes
        .iter()
        .map(|&n| bench_one(preset, n, seed, repeats))
        .collect()
}

/// Growth of time and memory between consecutive rows, normalized to one
/// doubling of visited vertices: `(y2/y1)^(1/log2(v2/v1))`.
pub fn growth_per_doubling(rows: &[BenchRow]) -> Vec<(f64, Option<f64>)> {
    rows.windows(2)
        .map(|w| {
            let d = (w[1].visited_vertices as f64 / w[0].visited_vertices as f64).log2();
            let norm = |a: f64, b: f64| (b / a).powf(1.0 / d);
            let mem = match (w[0].peak_memory_bytes, w[1].peak_memory_bytes) {
                (Some(a), Some(b)) if a > 0 => Some(norm(a as f64, b as f64)),
                _ => None,
            };
            (norm(w[0].analysis_ms, w[1].analysis_ms), mem)
        })
        .collect()
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>10} {:>9} {:>10} {:>10} {:>12} {:>12} {:>7} {:>6}",
        "#instr", "#func", "#V-Vertex", "#V-Edge", "analysis ms", "peak KiB", "≤1 use", "median"
    );
    for r in rows {
        let peak = r
            .peak_memory_bytes
            .map(|b| format!("{:.1}", b as f64 / 1024.0))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>10} {:>9} {:>10} {:>10} {:>12.3} {:>12} {:>6.1}% {:>6}",
            r.instructions,
            r.functions,
            r.visited_vertices,
            r.visited_edges,
            r.analysis_ms,
            peak,
            r.single_use_fraction * 100.0,
            r.interval_sizes.median
        );
    }
    out
}
