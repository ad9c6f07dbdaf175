//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its
//! measurements; the process fails if any criterion does.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use dfi_cli::bench::{self, BenchRow};
use dfi_core::clients::{run_taint, ClientAnalysis, RoArgClient, TaintClient, TaintConfig};
use dfi_core::dft::{build_intervals, VfGraph};
use dfi_core::interproc::{compute_reachable_summaries, solve_module, Endpoint};
use dfi_core::interval::{merge, set_subsumes, set_subsumes_pairwise, Interval, IntervalSet};
use dfi_core::ir::{parse_module, print_module, Module, ValueId};
use dfi_core::preprocess::preprocess_module;
use dfi_core::stats::CountingAlloc;
use dfi_core::synth::{generate_sized, generate_text, Preset};
use dfi_oracle::differential::{
    interproc_trial, intraproc_trial, layered_module, FlowTally, PairTally,
};
use dfi_oracle::GraphShape;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestError, TestRunner};

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

const GOLDEN_LIMIT: Duration = Duration::from_secs(1);
const INTRAPROC_GRAPHS: u64 = 1000;
const INTRAPROC_MAX_VERTICES: usize = 200;
const INTRAPROC_LIMIT: Duration = Duration::from_secs(120);
const INTERPROC_MODULES: u64 = 200;
const INTERPROC_MAX_FUNCTIONS: usize = 20;
const INLINE_DEPTH: usize = 3;
const INTERPROC_LIMIT: Duration = Duration::from_secs(300);
const TERMINATION_LIMIT: Duration = Duration::from_secs(120);
const ALGEBRA_CASES_PER_LAW: u32 = 25_000;
const ALGEBRA_LAWS: u32 = 5;
const ALGEBRA_LIMIT: Duration = Duration::from_secs(60);
const SCALE_SIZES: [usize; 6] = [10_000, 20_000, 40_000, 80_000, 160_000, 320_000];
const SCALE_SEED: u64 = 1;
const SCALE_REPEATS: usize = 3;
const MAX_GROWTH_PER_DOUBLING: f64 = 2.5;
const SINGLE_USE_RANGE: (f64, f64) = (0.80, 0.90);
const SCALE_LIMIT: Duration = Duration::from_secs(600);
const MAX_MEDIAN_SET_SIZE: usize = 4;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn golden(name: &str) -> String {
    let path = format!("{}/../core/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<String, String> {
    let t = start.elapsed();
    ensure(t <= limit, format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(format!("{t:.2?}"))
}

fn single(s: u32, e: u32) -> IntervalSet {
    IntervalSet::single(Interval::new(s, e))
}

fn value(m: &Module, f: &str, v: &str) -> ValueId {
    m.function(f).unwrap().find_value(v).unwrap()
}

fn golden_preprocessing() -> Outcome {
    let t = Instant::now();
    for (input, expected) in [
        ("store_renaming.dfir", "store_renaming.expected.dfir"),
        ("call_outputs.dfir", "call_outputs.expected.dfir"),
    ] {
        let out = preprocess_module(&parse_module(&golden(input)).unwrap()).unwrap();
        let want = golden(expected);
        ensure(print_module(&out) == want, format!("{input} differs from {expected}"))?;
        ensure(out == parse_module(&want).unwrap(), format!("{input}: structure differs"))?;
    }
    within(t, GOLDEN_LIMIT).map(|t| format!("2 golden modules match, {t}"))
}

fn golden_intervals() -> Outcome {
    let t = Instant::now();
    let m = preprocess_module(&parse_module(&golden("taint_walkthrough.dfir")).unwrap()).unwrap();
    let (report, sol) = run_taint(&m, &TaintConfig::parse(&golden("taint_walkthrough.cfg")).unwrap()).unwrap();
    let names: Vec<String> = report.tainted.iter().map(ToString::to_string).collect();
    ensure(names == ["@demo:%1", "@demo:%3"], format!("tainted {names:?}"))?;
    let im = sol.intervals(0);
    let id = |n: &str| value(&m, "demo", n);
    ensure(im.can_reach(id("p"), id("3")), "%p does not reach %3")?;
    ensure(!im.can_reach(id("p"), id("0")), "%p reaches %0")?;
    within(t, GOLDEN_LIMIT).map(|t| format!("tainted {{%1, %3}}, %0 clean, {t}"))
}

fn golden_non_tree() -> Outcome {
    let t = Instant::now();
    let (a, b, c, d, e) = (0, 1, 2, 3, 4);
    let mut g = VfGraph::new(5, vec![ValueId(a)], false);
    for (x, y) in [(a, b), (b, d), (a, c), (c, e), (e, d)] {
        g.add_edge(ValueId(x), ValueId(y));
    }
    let im = build_intervals(&g);
    let target = im.pi(ValueId(d)).clone();
    for x in [e, c, a] {
        ensure(set_subsumes(im.pi(ValueId(x)), &target), format!("cross: Π_{x} misses {target}"))?;
    }
    let mut g = VfGraph::new(5, vec![ValueId(a)], false);
    for (x, y) in [(a, b), (b, c), (c, d), (d, a), (c, e)] {
        g.add_edge(ValueId(x), ValueId(y));
    }
    let im = build_intervals(&g);
    let target = im.pi(ValueId(a)).clone();
    ensure(target == single(0, 9), format!("back: Π_A = {target}"))?;
    for x in [b, c, d] {
        ensure(set_subsumes(im.pi(ValueId(x)), &target), format!("back: Π_{x} misses {target}"))?;
    }
    ensure(!set_subsumes(im.pi(ValueId(e)), &target), "back: Π_E subsumes Π_A")?;
    within(t, GOLDEN_LIMIT).map(|t| format!("cross and back merges hold, {t}"))
}

fn golden_summaries() -> Outcome {
    let t = Instant::now();
    let load = |n: &str| preprocess_module(&parse_module(&golden(n)).unwrap()).unwrap();
    let pairs = |p: &[(u32, u32)]| p.iter().copied().collect::<BTreeSet<_>>();

    let m = load("return_summary.dfir");
    let s = solve_module(&m, &TaintClient::new()).unwrap();
    let got = &s.summary("f").unwrap().pairs;
    ensure(*got == pairs(&[(0, 0), (2, 0)]), format!("S_f = {got:?}"))?;

    let m = load("output_arg_summary.dfir");
    let s = solve_module(&m, &RoArgClient).unwrap();
    let got = &s.summary("g").unwrap().pairs;
    ensure(*got == pairs(&[(0, 0), (0, 1), (1, 0), (1, 1)]), format!("S^P_g = {got:?}"))?;

    let m = load("reachable_endpoints.dfir");
    let s = solve_module(&m, &TaintClient::new()).unwrap();
    let psi = compute_reachable_summaries(&m, &s);
    let ep = |f: &str, i| Endpoint {
        func: f.to_string(),
        index: i,
    };
    let want: BTreeSet<Endpoint> = [ep("g", 0), ep("f", 1), ep("k", 2)].into_iter().collect();
    ensure(psi.get("f", 0) == Some(&want), format!("Ψ(f#0) = {:?}", psi.get("f", 0)))?;
    within(t, GOLDEN_LIMIT).map(|t| format!("S_f, S^P_g and Ψ(f#0) exact, {t}"))
}

fn intraprocedural_soundness() -> Outcome {
    let t = Instant::now();
    let (mut cyclic, mut forest) = (PairTally::default(), PairTally::default());
    for seed in 0..INTRAPROC_GRAPHS {
        cyclic += intraproc_trial(seed, INTRAPROC_MAX_VERTICES, GraphShape::Cyclic);
        forest += intraproc_trial(seed, INTRAPROC_MAX_VERTICES, GraphShape::SingleUseForest);
    }
    let detail = format!(
        "{} cyclic graphs: {} pairs, {} FN, FP rate {:.4}; {} forests: {} FN, {} FP",
        INTRAPROC_GRAPHS,
        cyclic.pairs,
        cyclic.false_negatives,
        cyclic.false_positive_rate(),
        INTRAPROC_GRAPHS,
        forest.false_negatives,
        forest.false_positives
    );
    ensure(cyclic.false_negatives + forest.false_negatives == 0, detail.clone())?;
    ensure(forest.false_positives == 0, detail.clone())?;
    within(t, INTRAPROC_LIMIT).map(|t| format!("{detail}, {t}"))
}

fn interprocedural_soundness() -> Outcome {
    let t = Instant::now();
    let mut tally = FlowTally::default();
    for seed in 0..INTERPROC_MODULES {
        tally += interproc_trial(&layered_module(seed, INTERPROC_MAX_FUNCTIONS), INLINE_DEPTH);
    }
    let detail = format!(
        "{INTERPROC_MODULES} modules: {} oracle flows, {} missed, precision {:.3}",
        tally.oracle_flows,
        tally.missed,
        tally.precision()
    );
    ensure(tally.oracle_flows > 0, "oracle found no flows")?;
    ensure(tally.missed == 0, format!("{detail}; first: {:?}", tally.first_miss))?;
    within(t, INTERPROC_LIMIT).map(|t| format!("{detail}, {t}"))
}

const SELF_RECURSIVE: &str = "\
func @r(%p: ptr, %n: int) -> int {
  %v = load %p : int
  %s = add %v, %n
  store %s, %p
  %x = call @r(%p, %s)
  return %x
}
";

const MUTUALLY_RECURSIVE: &str = "\
func @even(%p: ptr, %q: ptr, %n: int) -> int {
  %v = load %q : int
  store %v, %p
  %x = call @odd(%q, %p, %n)
  return %x
}

func @odd(%p: ptr, %q: ptr, %n: int) -> int {
  %m = add %n, -1
  store %m, %q
  %x = call @even(%p, %q, %m)
  %y = add %x, %n
  return %y
}
";

fn termination() -> Outcome {
    let t = Instant::now();
    let mut suite: Vec<Module> = [SELF_RECURSIVE, MUTUALLY_RECURSIVE]
        .iter()
        .map(|s| preprocess_module(&parse_module(s).unwrap()).unwrap())
        .collect();
    for seed in 0..4 {
        suite.push(preprocess_module(&generate_sized(Preset::DenseCallgraph, 5_000, seed)).unwrap());
    }
    let mut iterations = 0;
    for m in &suite {
        for c in [&TaintClient::new() as &dyn ClientAnalysis, &RoArgClient] {
            // Monotonicity of summaries and Ψ is asserted inside the solver
            // in debug builds; a violation panics here.
            let sol = solve_module(m, c).map_err(|e| e.to_string())?;
            compute_reachable_summaries(m, &sol);
            iterations += sol.stats.iterations;
        }
    }
    let checked = if cfg!(debug_assertions) { "on" } else { "off" };
    within(t, TERMINATION_LIMIT).map(|t| {
        format!("{} modules x 2 clients, {iterations} summary iterations, monotonicity checks {checked}, {t}", suite.len())
    })
}

fn interval_set() -> impl Strategy<Value = IntervalSet> {
    prop::collection::vec((0u32..200, 1u32..30), 0..6)
        .prop_map(|v| IntervalSet::from_intervals(v.into_iter().map(|(s, l)| Interval::new(s, s + l))))
}

fn law<T: std::fmt::Debug>(name: &str, r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| format!("{name}: {e}"))
}

fn interval_algebra() -> Outcome {
    let t = Instant::now();
    let cfg = Config {
        cases: ALGEBRA_CASES_PER_LAW,
        failure_persistence: None,
        ..Config::default()
    };
    let pair = (interval_set(), interval_set());
    let mut runner = TestRunner::new(cfg.clone());
    law("commutativity", runner.run(&pair, |(a, b)| {
        prop_assert_eq!(merge(&a, &b), merge(&b, &a));
        Ok(())
    }))?;
    let mut runner = TestRunner::new(cfg.clone());
    law("associativity", runner.run(&(interval_set(), interval_set(), interval_set()), |(a, b, c)| {
        prop_assert_eq!(merge(&merge(&a, &b), &c), merge(&a, &merge(&b, &c)));
        Ok(())
    }))?;
    let mut runner = TestRunner::new(cfg.clone());
    law("idempotence", runner.run(&interval_set(), |a| {
        prop_assert_eq!(merge(&a, &a), a);
        Ok(())
    }))?;
    let mut runner = TestRunner::new(cfg.clone());
    law("separation", runner.run(&pair, |(a, b)| {
        prop_assert!(merge(&a, &b).is_canonical());
        Ok(())
    }))?;
    let mut runner = TestRunner::new(cfg);
    law("subsumption", runner.run(&pair, |(a, b)| {
        prop_assert_eq!(set_subsumes(&a, &b), set_subsumes_pairwise(&a, &b));
        Ok(())
    }))?;
    within(t, ALGEBRA_LIMIT).map(|t| {
        format!("{} cases over {ALGEBRA_LAWS} laws, {t}", ALGEBRA_CASES_PER_LAW * ALGEBRA_LAWS)
    })
}

fn scalability(rows: &[BenchRow], elapsed: Duration) -> Outcome {
    let mut detail = String::new();
    let mut ok = elapsed <= SCALE_LIMIT;
    for (w, (time, mem)) in rows.windows(2).zip(bench::growth_per_doubling(rows)) {
        let mem_ok = mem.is_some_and(|m| m <= MAX_GROWTH_PER_DOUBLING);
        ok &= time <= MAX_GROWTH_PER_DOUBLING && mem_ok;
        let mem = mem.map_or("n/a".to_string(), |m| format!("{m:.2}"));
        let _ = write!(
            detail,
            " {}->{}: time x{time:.2} mem x{mem};",
            w[0].visited_vertices, w[1].visited_vertices
        );
    }
    for r in rows {
        let (lo, hi) = SINGLE_USE_RANGE;
        ok &= (lo..=hi).contains(&r.single_use_fraction);
    }
    let uses: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.single_use_fraction)).collect();
    let msg = format!(
        "per doubling of #V-Vertex (bound {MAX_GROWTH_PER_DOUBLING}):{detail} single-use [{}], {elapsed:.2?}",
        uses.join(", ")
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn stats_histogram_via_cli() -> Result<String, String> {
    let dir = std::env::temp_dir().join(format!("dfi-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg = Preset::Default.config(5_000);
    let text = generate_text(&cfg, SCALE_SEED);
    let m = parse_module(&text).unwrap();
    let f = m.functions.iter().find(|f| !f.params.is_empty()).unwrap();
    let module: PathBuf = dir.join("corpus.dfir");
    let config: PathBuf = dir.join("corpus.cfg");
    std::fs::write(&module, &text).map_err(|e| e.to_string())?;
    std::fs::write(&config, format!("source @{} %{}\n", f.name, f.name_of(f.params[0])))
        .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_dfi"))
        .arg("analyze")
        .arg(&module)
        .arg("--config")
        .arg(&config)
        .arg("--stats")
        .output()
        .map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    let stdout = String::from_utf8_lossy(&out.stdout);
    stdout
        .lines()
        .find(|l| l.starts_with("interval-set sizes: n="))
        .map(str::to_string)
        .ok_or_else(|| format!("no histogram in --stats output (exit {:?})", out.status.code()))
}

fn set_size_distribution(rows: &[BenchRow]) -> Outcome {
    let medians: Vec<usize> = rows.iter().map(|r| r.interval_sizes.median).collect();
    let worst = medians.iter().copied().max().unwrap_or(0);
    let line = stats_histogram_via_cli()?;
    let largest = rows.last().map(|r| r.interval_sizes.to_string()).unwrap_or_default();
    let msg = format!("medians {medians:?} (bound {MAX_MEDIAN_SET_SIZE}); largest corpus {largest}; --stats emits `{line}`");
    if worst <= MAX_MEDIAN_SET_SIZE {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn report(n: usize, name: &str, outcome: std::thread::Result<Outcome>) -> bool {
    let outcome = outcome.unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(d) => {
            println!("criterion {n:>2} PASS  {name}: {d}");
            true
        }
        Err(d) => {
            println!("criterion {n:>2} FAIL  {name}: {d}");
            false
        }
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden preprocessing", golden_preprocessing),
        ("golden intervals", golden_intervals),
        ("golden non-tree handling", golden_non_tree),
        ("golden summaries", golden_summaries),
        ("intraprocedural soundness", intraprocedural_soundness),
        ("interprocedural soundness", interprocedural_soundness),
        ("fixpoint termination", termination),
        ("interval-set algebra", interval_algebra),
    ];
    let mut passed = 0;
    let mut total = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        total += 1;
        passed += usize::from(report(i + 1, name, catch_unwind(run)));
    }

    let t = Instant::now();
    let rows = catch_unwind(|| bench::run(&SCALE_SIZES, SCALE_SEED, Preset::Default, SCALE_REPEATS));
    let elapsed = t.elapsed();
    match rows {
        Ok(rows) => {
            print!("{}", bench::format_table(&rows));
            total += 2;
            passed += usize::from(report(9, "scalability shape", Ok(scalability(&rows, elapsed))));
            passed += usize::from(report(
                10,
                "interval-set size distribution",
                catch_unwind(AssertUnwindSafe(|| set_size_distribution(&rows))),
            ));
        }
        Err(_) => {
            total += 2;
            println!("criterion  9 FAIL  scalability shape: benchmark panicked");
            println!("criterion 10 FAIL  interval-set size distribution: benchmark panicked");
        }
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}
