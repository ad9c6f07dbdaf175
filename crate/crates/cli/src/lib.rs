//! Command implementations behind the `dfi` binary.
//!
//! Exit codes: 0 on success, 1 for unusable input (parse, validation,
//! configuration or symbol errors), 2 for I/O failures.

pub mod bench;

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::time::Instant;

use dfi_core::clients::{
    roarg_report, taint_report, ClientAnalysis, RoArgClient, TaintClient, TaintConfig,
};
use dfi_core::interproc::{query_interproc, solve_module, Solution};
use dfi_core::ir::{parse_module, print_module, validate, Module};
use dfi_core::preprocess::preprocess_module;
use dfi_core::stats::{self, millis, PhaseTimes, StatsReport};
use serde_json::json;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ClientKind {
    Taint,
    Roarg,
}

impl ClientKind {
    fn name(self) -> &'static str {
        match self {
            ClientKind::Taint => "taint",
            ClientKind::Roarg => "roarg",
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn check(m: &Module, path: &Path) -> Result<(), CliError> {
    let diags = validate(m);
    if diags.is_empty() {
        return Ok(());
    }
    let mut msg = format!("{}: invalid module", path.display());
    for d in diags {
        let _ = write!(msg, "\n  @{}: {}", d.function, d.message);
    }
    Err(CliError::input(msg))
}

/// A module ready for solving, with the time spent getting it there.
pub struct Loaded {
    pub module: Module,
    pub phases: PhaseTimes,
}

/// Parses and validates `path`, preprocessing it when plain `store` or
/// `call` operations remain.
pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = read(path)?;
    let mut phases = PhaseTimes::default();
    let t = Instant::now();
    let m = parse_module(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    phases.parse = millis(t.elapsed());
    let t = Instant::now();
    check(&m, path)?;
    phases.verification = millis(t.elapsed());
    let m = if m.has_raw_memory_forms() {
        let t = Instant::now();
        let p = preprocess_module(&m).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        phases.preprocess = millis(t.elapsed());
        p
    } else {
        m
    };
    Ok(Loaded { module: m, phases })
}

/// Rewrites `input` into preprocessed form and returns the printed module.
pub fn cmd_preprocess(input: &Path) -> Result<String, CliError> {
    let text = read(input)?;
    let m = parse_module(&text).map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    check(&m, input)?;
    if m.has_dfi_forms() {
        return Err(CliError::input(format!("{}: dfi forms present", input.display())));
    }
    let p = preprocess_module(&m).map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    Ok(print_module(&p))
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions<'a> {
    pub client: ClientKind,
    pub config: Option<&'a Path>,
    pub stats: bool,
    pub json: bool,
    pub dump: bool,
}

enum Report {
    Taint(dfi_core::clients::TaintReport),
    RoArg(dfi_core::clients::RoArgReport),
}

fn solve_with(
    m: &Module,
    kind: ClientKind,
    config: Option<&Path>,
) -> Result<(Solution, Option<dfi_core::clients::ResolvedTaintConfig>), CliError> {
    let (client, resolved): (Box<dyn ClientAnalysis>, _) = match kind {
        ClientKind::Taint => {
            let cfg = match config {
                Some(p) => TaintConfig::parse(&read(p)?)
                    .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
                None => TaintConfig::default(),
            };
            let resolved = cfg.resolve(m).map_err(|e| {
                let path = config.map(|p| p.display().to_string()).unwrap_or_default();
                CliError::input(format!("{path}: {e}"))
            })?;
            (Box::new(TaintClient::with_config(&resolved, m)), Some(resolved))
        }
        ClientKind::Roarg => (Box::new(RoArgClient), None),
    };
    let sol = solve_module(m, client.as_ref()).map_err(|e| CliError::input(e.to_string()))?;
    Ok((sol, resolved))
}

/// Solves `input` under the chosen client and renders the report.
pub fn cmd_analyze(input: &Path, opts: &AnalyzeOptions) -> Result<String, CliError> {
    let total = Instant::now();
    let Loaded { module: m, mut phases } = load(input)?;
    if opts.client == ClientKind::Taint && opts.config.is_none() {
        return Err(CliError::input("taint analysis needs --config naming its sources"));
    }
    let base = stats::current_bytes();
    stats::reset_peak();
    let t = Instant::now();
    let (sol, resolved) = solve_with(&m, opts.client, opts.config)?;
    let report = match &resolved {
        Some(cfg) => Report::Taint(taint_report(&m, &sol, cfg)),
        None => Report::RoArg(roarg_report(&m, &sol)),
    };
    phases.analysis = millis(t.elapsed());
    let peak = stats::allocator_installed().then(|| stats::peak_bytes().saturating_sub(base));

    let t = Instant::now();
    let mut out = String::new();
    let mut st = StatsReport::from_solution(input.display().to_string(), m.op_count(), &sol);
    st.peak_memory_bytes = peak;
    if opts.json {
        let mut doc = json!({
            "client": opts.client.name(),
            "summaries": sol.summaries,
        });
        match &report {
            Report::Taint(r) => doc["taint"] = json!(r),
            Report::RoArg(r) => doc["roarg"] = json!(r),
        }
        if opts.stats {
            phases.output = millis(t.elapsed());
            let mut st = st.clone().with_phases(phases);
            st.total_ms = millis(total.elapsed());
            doc["stats"] = json!(st);
        }
        out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        return Ok(out);
    }
    match &report {
        Report::Taint(r) => {
            let _ = writeln!(out, "tainted values: {}", r.tainted.len());
            for v in &r.tainted {
                let _ = writeln!(out, "  {v}");
            }
            for h in &r.sink_hits {
                let srcs: Vec<String> = h.sources.iter().map(ToString::to_string).collect();
                let _ = writeln!(
                    out,
                    "sink @{} op#{} %{} <- {}",
                    h.function,
                    h.op,
                    h.operand,
                    srcs.join(", ")
                );
            }
        }
        Report::RoArg(r) => {
            for v in &r.verdicts {
                let _ = writeln!(out, "{v}");
            }
        }
    }
    if opts.dump {
        out.push_str("\nsummaries:\n");
        out.push_str(&sol.summary_dump());
        if let Some(psi) = sol.reachable_summaries(&m) {
            out.push_str("reachable endpoints:\n");
            out.push_str(&psi.dump());
        }
        for (fi, f) in m.functions.iter().enumerate() {
            let _ = writeln!(out, "\nintervals @{}:", f.name);
            out.push_str(&sol.intervals(fi).dump(f));
        }
    }
    if opts.stats {
        phases.output = millis(t.elapsed());
        let mut st = st.with_phases(phases);
        st.total_ms = millis(total.elapsed());
        let _ = writeln!(out, "\n{st}");
    }
    Ok(out)
}

/// Splits `@f:%v` into its function and value names.
pub fn parse_endpoint(s: &str) -> Result<(&str, &str), CliError> {
    let bad = || CliError::input(format!("`{s}`: expected `@function:%value`"));
    let (f, v) = s.split_once(':').ok_or_else(bad)?;
    let f = f.strip_prefix('@').ok_or_else(bad)?;
    let v = v.strip_prefix('%').ok_or_else(bad)?;
    if f.is_empty() || v.is_empty() {
        return Err(bad());
    }
    Ok((f, v))
}

/// Whether the value `from` flows to the value `to`.
pub fn cmd_query(
    input: &Path,
    from: &str,
    to: &str,
    client: ClientKind,
    config: Option<&Path>,
) -> Result<bool, CliError> {
    let (from, to) = (parse_endpoint(from)?, parse_endpoint(to)?);
    let m = load(input)?.module;
    let (sol, _) = solve_with(&m, client, config)?;
    query_interproc(&m, &sol, from, to).map_err(|e| CliError::input(e.to_string()))
}

/// Runs `f` on a pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
