//! Hand-checked examples: preprocessing output, interval labels, summaries
//! and reachable endpoints.

use std::collections::BTreeSet;

use dfi_core::clients::{run_roarg, run_taint, RoArgClient, TaintClient, TaintConfig, Verdict};
use dfi_core::dft::{build_intervals, VfGraph};
use dfi_core::interproc::{compute_reachable_summaries, query_interproc, solve_module, Endpoint};
use dfi_core::interval::{set_subsumes, Interval, IntervalSet};
use dfi_core::ir::{parse_module, print_module, validate, Module, ValueId};
use dfi_core::preprocess::preprocess_module;

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn load(name: &str) -> Module {
    let m = parse_module(&golden(name)).unwrap();
    assert!(validate(&m).is_empty(), "{:?}", validate(&m));
    m
}

fn solved(name: &str) -> Module {
    preprocess_module(&load(name)).unwrap()
}

fn v(m: &Module, f: &str, name: &str) -> ValueId {
    m.function(f).unwrap().find_value(name).unwrap()
}

fn single(s: u32, e: u32) -> IntervalSet {
    IntervalSet::single(Interval::new(s, e))
}

fn pairs(p: &[(u32, u32)]) -> BTreeSet<(u32, u32)> {
    p.iter().copied().collect()
}

#[test]
fn store_renaming_matches_expected_text() {
    let out = preprocess_module(&load("store_renaming.dfir")).unwrap();
    let expected = golden("store_renaming.expected.dfir");
    assert_eq!(print_module(&out), expected);
    assert_eq!(out, parse_module(&expected).unwrap());
    // Each load reads the version produced by the store before it.
    let f = &out.functions[0];
    let load_src: Vec<&str> = f
        .ops_in_order()
        .map(|(_, o)| f.op(o))
        .filter(|o| o.opcode == dfi_core::ir::Opcode::Load)
        .map(|o| f.name_of(o.operands[0]))
        .collect();
    assert_eq!(load_src, ["p0", "p1"]);
}

#[test]
fn call_outputs_match_expected_text() {
    let out = preprocess_module(&load("call_outputs.dfir")).unwrap();
    let expected = golden("call_outputs.expected.dfir");
    assert_eq!(print_module(&out), expected);
    assert!(validate(&out).is_empty());
}

#[test]
fn expected_files_print_to_themselves() {
    for name in ["store_renaming.expected.dfir", "call_outputs.expected.dfir"] {
        let text = golden(name);
        assert_eq!(print_module(&parse_module(&text).unwrap()), text);
    }
}

#[test]
fn walkthrough_intervals_on_forward_graph() {
    // Def→use edges, traversed from %p then %a.
    let m = load("taint_walkthrough.dfir");
    let id = |n: &str| v(&m, "demo", n);
    let mut g = VfGraph::new(m.functions[0].value_count(), vec![id("p"), id("a")], false);
    for (d, u) in [("a", "0"), ("p", "1"), ("1", "3"), ("2", "3")] {
        g.add_edge(id(d), id(u));
    }
    let im = build_intervals(&g);
    for (n, s, e) in [("p", 0, 5), ("1", 1, 4), ("3", 2, 3), ("a", 6, 9), ("0", 7, 8)] {
        assert_eq!(im.pi(id(n)), &single(s, e), "%{n}");
    }
}

#[test]
fn walkthrough_taint_reaches_load_and_sum_only() {
    let m = solved("taint_walkthrough.dfir");
    let cfg = TaintConfig::parse(&golden("taint_walkthrough.cfg")).unwrap();
    let (report, sol) = run_taint(&m, &cfg).unwrap();
    let names: Vec<String> = report.tainted.iter().map(ToString::to_string).collect();
    assert_eq!(names, ["@demo:%1", "@demo:%3"]);
    let im = sol.intervals(0);
    let id = |n: &str| v(&m, "demo", n);
    assert!(im.can_reach(id("p"), id("1")));
    assert!(im.can_reach(id("p"), id("3")));
    assert!(!im.can_reach(id("p"), id("0")));
}

#[test]
fn cross_edge_extends_source_and_ancestors() {
    let (a, b, c, d, e) = (0, 1, 2, 3, 4);
    let mut g = VfGraph::new(5, vec![ValueId(a)], false);
    for (x, y) in [(a, b), (b, d), (a, c), (c, e), (e, d)] {
        g.add_edge(ValueId(x), ValueId(y));
    }
    let im = build_intervals(&g);
    assert_eq!(im.pi(ValueId(d)), &single(2, 3));
    for x in [e, c, a] {
        assert!(set_subsumes(im.pi(ValueId(x)), &single(2, 3)), "{x}");
    }
}

#[test]
fn back_edge_extends_cycle_members() {
    let (a, b, c, d, e) = (0, 1, 2, 3, 4);
    let mut g = VfGraph::new(5, vec![ValueId(a)], false);
    for (x, y) in [(a, b), (b, c), (c, d), (d, a), (c, e)] {
        g.add_edge(ValueId(x), ValueId(y));
    }
    let im = build_intervals(&g);
    assert_eq!(im.tree_interval(ValueId(a)), Some(Interval::new(0, 9)));
    for x in [b, c, d] {
        assert!(set_subsumes(im.pi(ValueId(x)), &single(0, 9)), "{x}");
    }
    assert!(!set_subsumes(im.pi(ValueId(e)), &single(0, 9)));
}

#[test]
fn return_summary() {
    let m = solved("return_summary.dfir");
    let sol = solve_module(&m, &TaintClient::new()).unwrap();
    let im = sol.intervals(0);
    for (n, s, e) in [("r", 0, 7), ("t", 1, 6), ("a", 2, 3), ("c", 4, 5)] {
        assert_eq!(im.pi(v(&m, "f", n)), &single(s, e), "%{n}");
    }
    assert_eq!(sol.summary("f").unwrap().pairs, pairs(&[(0, 0), (2, 0)]));
}

#[test]
fn output_argument_summary() {
    let m = load("output_arg_summary.dfir");
    let sol = solve_module(&m, &RoArgClient).unwrap();
    let im = sol.intervals(0);
    for (n, s, e) in [("t1", 0, 7), ("t0", 1, 4), ("k", 2, 3), ("r", 5, 6)] {
        assert_eq!(im.pi(v(&m, "g", n)), &single(s, e), "%{n}");
    }
    let s = sol.summary("g").unwrap();
    assert_eq!(s.pairs, pairs(&[(0, 0), (0, 1), (1, 0), (1, 1)]));
    assert_eq!(s.to_string(), "@g: R{} P{0->0,0->1,1->0,1->1}");
}

#[test]
fn output_argument_modified_at_call_site() {
    let src = format!(
        "{}\nfunc @h(%x: ptr, %y: ptr) {{\n  call @g(%x, %y)\n  return\n}}\n",
        golden("output_arg_summary.dfir")
    );
    let m = preprocess_module(&parse_module(&src).unwrap()).unwrap();
    let (report, _) = run_roarg(&m).unwrap();
    assert_eq!(report.get("h", 0, 1), Some(Verdict::Modified));
    assert_eq!(report.get("h", 0, 0), Some(Verdict::Modified));
}

#[test]
fn summary_propagation_into_caller() {
    let m = solved("summary_propagation.dfir");
    let sol = solve_module(&m, &TaintClient::new()).unwrap();
    assert_eq!(sol.summary("f").unwrap().pairs, pairs(&[(0, 1), (1, 0), (1, 1)]));
    let q = |a: &str, b: &str| query_interproc(&m, &sol, ("g", a), ("g", b)).unwrap();
    assert!(q("a", "s1"));
    assert!(q("a", "s2"));
    assert!(q("a", "s3"));
    assert!(q("b", "s2"));
    assert!(!q("b", "s1"));
}

#[test]
fn reachable_endpoints() {
    let m = solved("reachable_endpoints.dfir");
    let sol = solve_module(&m, &TaintClient::new()).unwrap();
    let psi = compute_reachable_summaries(&m, &sol);
    let ep = |f: &str, i: u32| Endpoint {
        func: f.to_string(),
        index: i,
    };
    let expected: BTreeSet<Endpoint> = [ep("g", 0), ep("f", 1), ep("k", 2)].into_iter().collect();
    assert_eq!(psi.get("f", 0), Some(&expected));
    assert!(query_interproc(&m, &sol, ("f", "x"), ("k", "c")).unwrap());
    assert!(!query_interproc(&m, &sol, ("f", "x"), ("k", "a")).unwrap());
}
