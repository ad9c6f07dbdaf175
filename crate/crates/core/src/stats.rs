//! Analysis statistics: visited counts, interval-set size distribution,
//! phase timings and an allocation-counting global allocator for peak
//! memory estimates.

use std::alloc::{GlobalAlloc, Layout, System};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::Serialize;

use crate::interproc::Solution;

/// Five-number summary of interval-set sizes over labelled vertices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Histogram {
    pub count: usize,
    pub min: usize,
    pub q1: usize,
    pub median: usize,
    pub q3: usize,
    pub max: usize,
}

impl Histogram {
    /// Quartiles use the lower nearest rank `sorted[floor((n-1)·p)]`.
    pub fn from_sizes(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = sizes.into_iter().collect();
        if v.is_empty() {
            return Histogram::default();
        }
        v.sort_unstable();
        let at = |p: f64| v[((v.len() - 1) as f64 * p).floor() as usize];
        Histogram {
            count: v.len(),
            min: v[0],
            q1: at(0.25),
            median: at(0.5),
            q3: at(0.75),
            max: v[v.len() - 1],
        }
    }
}

impl fmt::Display for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} min={} q1={} median={} q3={} max={}",
            self.count, self.min, self.q1, self.median, self.q3, self.max
        )
    }
}

/// Wall time per pipeline phase, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub parse: f64,
    pub verification: f64,
    pub preprocess: f64,
    pub analysis: f64,
    pub output: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.parse + self.verification + self.preprocess + self.analysis + self.output
    }
}

pub fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StatsReport {
    pub target: String,
    pub instructions: usize,
    /// Edges examined by the traversals (#V-Edge).
    pub visited_edges: usize,
    /// Vertices with a non-empty interval set (#V-Vertex).
    pub visited_vertices: usize,
    pub summary_iterations: usize,
    pub analysis_ms: f64,
    pub total_ms: f64,
    /// Peak bytes live on the heap, when an allocator hook is installed.
    pub peak_memory_bytes: Option<usize>,
    pub interval_sizes: Histogram,
    pub phases: PhaseTimes,
}

impl StatsReport {
    /// Counts and distribution taken from a solved module; timings are
    /// filled in by the caller.
    pub fn from_solution(target: impl Into<String>, instructions: usize, sol: &Solution) -> Self {
        let sizes = sol
            .functions
            .iter()
            .flat_map(|s| s.intervals.set_sizes());
        StatsReport {
            target: target.into(),
            instructions,
            visited_edges: sol.stats.dft.visited_edges,
            visited_vertices: sol.stats.dft.visited_vertices,
            summary_iterations: sol.stats.iterations,
            interval_sizes: Histogram::from_sizes(sizes),
            ..Default::default()
        }
    }

    pub fn with_phases(mut self, phases: PhaseTimes) -> Self {
        self.analysis_ms = phases.analysis;
        self.total_ms = phases.total();
        self.phases = phases;
        self
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target: {}", self.target)?;
        writeln!(f, "instructions: {}", self.instructions)?;
        writeln!(f, "#V-Edge: {}", self.visited_edges)?;
        writeln!(f, "#V-Vertex: {}", self.visited_vertices)?;
        writeln!(f, "summary iterations: {}", self.summary_iterations)?;
        writeln!(f, "analysis time: {:.3} ms", self.analysis_ms)?;
        writeln!(f, "total time: {:.3} ms", self.total_ms)?;
        match self.peak_memory_bytes {
            Some(b) => writeln!(f, "peak memory: {:.1} KiB", b as f64 / 1024.0)?,
            None => writeln!(f, "peak memory: unavailable")?,
        }
        writeln!(f, "interval-set sizes: {}", self.interval_sizes)?;
        let p = &self.phases;
        write!(
            f,
            "phases (ms): parse={:.3} verification={:.3} preprocess={:.3} analysis={:.3} output={:.3}",
            p.parse, p.verification, p.preprocess, p.analysis, p.output
        )
    }
}

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static INSTALLED: AtomicUsize = AtomicUsize::new(0);

/// System allocator that tracks live and peak heap bytes. Install with
/// `#[global_allocator] static A: CountingAlloc = CountingAlloc;`.
pub struct CountingAlloc;

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            grow(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                grow(new_size - layout.size());
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

fn grow(n: usize) {
    INSTALLED.store(1, Ordering::Relaxed);
    let now = CURRENT.fetch_add(n, Ordering::Relaxed) + n;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

/// Whether [`CountingAlloc`] is the active global allocator.
pub fn allocator_installed() -> bool {
    INSTALLED.load(Ordering::Relaxed) == 1
}

pub fn current_bytes() -> usize {
    CURRENT.load(Ordering::Relaxed)
}

pub fn peak_bytes() -> usize {
    PEAK.load(Ordering::Relaxed)
}

/// Restarts peak tracking from the current live size.
pub fn reset_peak() {
    PEAK.store(CURRENT.load(Ordering::Relaxed), Ordering::Relaxed);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let h = Histogram::from_sizes([1, 1, 1, 2, 3, 4, 9]);
        assert_eq!((h.count, h.min, h.q1, h.median, h.q3, h.max), (7, 1, 1, 2, 3, 9));
        assert_eq!(Histogram::from_sizes([]), Histogram::default());
    }

    #[test]
    fn report_counts_match_labelled_vertices() {
        use crate::clients::TaintClient;
        use crate::interproc::solve_module;
        use crate::preprocess::preprocess_module;
        use crate::synth::{generate_sized, Preset};
        let m = preprocess_module(&generate_sized(Preset::Default, 2000, 3)).unwrap();
        let sol = solve_module(&m, &TaintClient::new()).unwrap();
        let r = StatsReport::from_solution("synthetic", m.op_count(), &sol);
        assert_eq!(r.interval_sizes.count, r.visited_vertices);
    }
}
