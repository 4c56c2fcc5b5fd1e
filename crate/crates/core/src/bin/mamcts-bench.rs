use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mamcts::bench::{
    self, parse_sweep_range, run_instances, run_time_accuracy_sweep, suite_instances, summarize, RunSettings,
    SuiteSpec,
};
use mamcts::engine::SearchBudget;
use mamcts::scenario::read_instance;
use mamcts::value::{Alpha, UpdateRule};

/// Multi-agent MCTS task assignment benchmark.
///
/// Without --sweep-t-final, runs the full-accuracy protocol and writes one
/// CSV row per run. With it, writes mean success rate per horizon.
#[derive(Debug, Parser)]
#[command(name = "mamcts-bench", version)]
struct Cli {
    /// Grid side lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    grid_size: Vec<u16>,
    /// Agent counts, comma separated; combined with every grid size.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    agents: Vec<usize>,
    /// Instances per (grid size, agents) pair.
    #[arg(long, default_value_t = 1)]
    instances: u32,
    /// Instance files to run instead of generated instances.
    #[arg(long)]
    instance_file: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    iterations: u32,
    /// Horizon; defaults to 3N.
    #[arg(long)]
    t_final: Option<u32>,
    /// Self-capture penalty: 0, 0.5 or 1.
    #[arg(long, default_value = "0")]
    alpha: Alpha,
    /// Value update rule: mean or max.
    #[arg(long, default_value = "mean")]
    update: UpdateRule,
    #[arg(long, default_value_t = SearchBudget::DEFAULT_EXPLORATION)]
    exploration_c: f64,
    /// Repetitions (planner seeds) per instance.
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    /// Horizon sweep as start:end:step (inclusive).
    #[arg(long)]
    sweep_t_final: Option<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare against the exhaustive oracle where the instance is small enough.
    #[arg(long)]
    oracle_check: bool,
    /// Skip generated instances where some goal can never be captured.
    #[arg(long)]
    feasible_only: bool,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Plan the agents of one time step concurrently.
    #[arg(long)]
    parallel_planning: bool,
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let settings = RunSettings {
        iterations: cli.iterations,
        alpha: cli.alpha,
        update_rule: cli.update,
        exploration_c: cli.exploration_c,
        parallel_planning: cli.parallel_planning,
    };
    SearchBudget::with_exploration(cli.iterations, 1, cli.exploration_c)?;
    let spec = SuiteSpec {
        sizes: cli
            .grid_size
            .iter()
            .flat_map(|&n| cli.agents.iter().map(move |&a| (n, a)))
            .collect(),
        instances: cli.instances,
        seed: cli.seed,
        t_final: cli.t_final,
        repeats: cli.repeats,
        settings,
        oracle_check: cli.oracle_check,
        feasible_only: cli.feasible_only,
    };
    let instances = if cli.instance_file.is_empty() {
        suite_instances(&spec)?
    } else {
        cli.instance_file
            .iter()
            .map(|p| read_instance(p))
            .collect::<Result<Vec<_>, _>>()?
    };
    let out: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    match &cli.sweep_t_final {
        Some(range) => {
            let horizons = parse_sweep_range(range)?;
            let points = run_time_accuracy_sweep(&instances, &horizons, &settings, cli.repeats, cli.seed)?;
            bench::write_sweep_csv(out, &points)?;
        }
        None => {
            let records = run_instances(&instances, &spec)?;
            bench::write_records_csv(out, &records)?;
            let mut err = io::stderr().lock();
            writeln!(
                err,
                "{:<10} {:>4} {:>4} {:>10} {:>5} {:>8} {:>10} {:>10} {:>10} {:>9}",
                "instance", "N", "N_A", "space", "runs", "success", "total_s", "avg_s", "max_s", "max_steps"
            )?;
            for row in summarize(&records) {
                writeln!(
                    err,
                    "{:<10} {:>4} {:>4} {:>10} {:>5} {:>8.3} {:>10.3} {:>10.3} {:>10.3} {:>9}",
                    row.instance,
                    row.n,
                    row.n_agents,
                    format!("4^{}", row.search_space_exponent),
                    row.runs,
                    row.mean_success_rate,
                    row.mean_total_time_s,
                    row.mean_avg_agent_time_s,
                    row.mean_max_agent_time_s,
                    row.max_makespan
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mamcts-bench: {e}");
            ExitCode::FAILURE
        }
    }
}
