use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use epike_harness::generator::{generate, TaskParams};
use epike_harness::scenario::Scenario;
use epike_harness::sim::{run_pair, AgentKind, RunConfig};
use epike_harness::suite::{run_suite, write_csv, SuiteGrid};

#[derive(Parser)]
#[command(name = "epike", version, about = "Epistemic plan execution for human-robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario and print a model report.
    Check {
        /// Scenario file or built-in name.
        scenario: String,
    },
    /// Run a team of agents on a scenario.
    Run {
        scenario: String,
        /// Comma-separated agent kinds, one per agent: epike or pike.
        #[arg(long, default_value = "epike,epike")]
        agents: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Search time budget per decision.
        #[arg(long)]
        timeout_ms: Option<u64>,
        /// Search iteration cap per decision.
        #[arg(long, default_value_t = 1000)]
        iterations: u32,
        /// Index of the agent polled first.
        #[arg(long, default_value_t = 0)]
        ego: usize,
        #[arg(long, default_value_t = 64)]
        max_actions: usize,
        /// Write the trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Record elapsed_ms as 0 for byte-identical traces.
        #[arg(long)]
        no_timing: bool,
        /// Let a waiting agent take its next best action.
        #[arg(long)]
        prefer_action: bool,
        /// Poll agents in a seeded random order.
        #[arg(long)]
        random_order: bool,
    },
    /// Generate a random task as a scenario file.
    Generate {
        #[arg(long, default_value_t = 3)]
        num_variables: usize,
        #[arg(long, default_value_t = 2)]
        num_orders: usize,
        #[arg(long, default_value_t = 3)]
        num_constraints: usize,
        #[arg(long, default_value_t = 0)]
        diff: usize,
        #[arg(long, default_value_t = 2)]
        domain_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a grid of random tasks and write per-condition rates.
    Suite {
        /// JSON grid file; defaults are used for missing fields.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Runs per task, overriding the grid.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Serve the interactive session API on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// List built-in scenarios.
    List,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Check { scenario } => {
            let s = Scenario::load(&scenario)?;
            print!("{}", s.report());
        }
        Command::Run {
            scenario,
            agents,
            seed,
            timeout_ms,
            iterations,
            ego,
            max_actions,
            trace,
            no_timing,
            prefer_action,
            random_order,
        } => {
            let s = Scenario::load(&scenario)?;
            let kinds = agents
                .split(',')
                .map(|k| k.trim().parse::<AgentKind>())
                .collect::<Result<Vec<_>, _>>()?;
            let mut cfg = RunConfig {
                seed,
                ego,
                max_actions,
                record_timing: !no_timing,
                random_order,
                ..RunConfig::default()
            };
            cfg.session.iteration_cap = iterations;
            cfg.session.time_budget = timeout_ms.map(Duration::from_millis);
            cfg.session.prefer_action = prefer_action;
            let out = run_pair(&s, &kinds, &cfg)?;
            for r in &out.trace {
                println!("{:>3}  {}", r.seq, r.describe());
            }
            if let Some(note) = &out.note {
                println!("note: {note}");
            }
            println!("verdict: {}", out.verdict);
            if let Some(path) = trace {
                fs::write(&path, out.trace_jsonl()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Generate {
            num_variables,
            num_orders,
            num_constraints,
            diff,
            domain_size,
            seed,
            out,
        } => {
            let file = generate(&TaskParams {
                num_variables,
                num_orders,
                num_constraints,
                diff,
                domain_size,
                seed,
            })?;
            let text = serde_json::to_string_pretty(&file)? + "\n";
            match out {
                Some(path) => fs::write(path, text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Suite { grid, reps, out } => {
            let mut g: SuiteGrid = match grid {
                Some(path) => serde_json::from_str(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?,
                None => SuiteGrid::default(),
            };
            if let Some(r) = reps {
                g.reps = r;
            }
            if g.conditions().is_empty() {
                bail!("the grid has no valid condition");
            }
            let rows = run_suite(&g, |r| {
                eprintln!(
                    "{:<6} v={} o={} c={} diff={}  success {:.2}  failure {:.2}  hang {:.2}  {:.1} ms/callback",
                    r.agents,
                    r.num_variables,
                    r.num_orders,
                    r.num_constraints,
                    r.diff,
                    r.success_rate,
                    r.failure_rate,
                    r.hang_rate,
                    r.mean_callback_ms
                )
            })?;
            write_csv(&rows, fs::File::create(&out)?)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://127.0.0.1:{port}");
            rt.block_on(epike_harness::service::serve(port))?;
        }
        Command::List => {
            for name in Scenario::builtin_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}
