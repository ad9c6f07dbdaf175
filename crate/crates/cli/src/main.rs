use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dfi_cli::{bench, cmd_analyze, cmd_preprocess, cmd_query, with_threads, AnalyzeOptions, CliError, ClientKind};
use dfi_core::stats::CountingAlloc;
use dfi_core::synth::Preset;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

#[derive(Parser)]
#[command(name = "dfi", version, about = "Sparse value-flow analysis over .dfir modules")]
struct Cli {
    /// Worker threads for per-function phases.
    #[arg(long, global = true, env = "DFI_THREADS", default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rewrite stores and calls into their renaming forms.
    Preprocess {
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve a module and report the client's findings.
    Analyze {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "taint")]
        client: ClientKind,
        /// Taint sources and sinks: `source @f %v` / `sink @f op#K` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        json: bool,
        /// Print summaries and per-value interval sets.
        #[arg(long)]
        dump: bool,
    },
    /// Does one value flow to another?
    Query {
        input: PathBuf,
        /// Source value, `@f:%v`.
        #[arg(long)]
        from: String,
        /// Destination value, `@g:%w`.
        #[arg(long)]
        to: String,
        #[arg(long, value_enum, default_value = "taint")]
        client: ClientKind,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Time the taint solve on synthetic modules of increasing size.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [10_000, 20_000, 40_000, 80_000, 160_000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `default` or `dense-callgraph`.
        #[arg(long, default_value = "default")]
        preset: String,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.cmd {
        Cmd::Preprocess { input, output } => {
            let text = cmd_preprocess(&input)?;
            match output {
                Some(p) => std::fs::write(&p, text)
                    .map(|_| String::new())
                    .map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
                None => Ok(text),
            }
        }
        Cmd::Analyze {
            input,
            client,
            config,
            stats,
            json,
            dump,
        } => cmd_analyze(
            &input,
            &AnalyzeOptions {
                client,
                config: config.as_deref(),
                stats,
                json,
                dump,
            },
        ),
        Cmd::Query {
            input,
            from,
            to,
            client,
            config,
        } => cmd_query(&input, &from, &to, client, config.as_deref())
            .map(|r| if r { "reachable\n" } else { "unreachable\n" }.to_string()),
        Cmd::Bench {
            sizes,
            seed,
            preset,
            repeat,
            json,
        } => {
            let preset = Preset::from_name(&preset)
                .ok_or_else(|| CliError::input(format!("unknown preset `{preset}`")))?;
            let rows = bench::run(&sizes, seed, preset, repeat);
            if json {
                Ok(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n")
            } else {
                Ok(bench::format_table(&rows))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, || run(cli)) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
