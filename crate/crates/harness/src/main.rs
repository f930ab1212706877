use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vrpg_harness::constants::{constants_report, ConstantsInput};
use vrpg_harness::verify::{Suite, VerifyOptions};
use vrpg_harness::{cmd_grid, cmd_train, cmd_verify, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "vrpg", version, about = "Variance-reduced policy gradient experiments")]
struct Cli {
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration and $VRPG_OUT_DIR.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a configuration and write per-run and aggregate CSVs.
    Train { config: PathBuf },
    /// Run an invariant suite: gradients, unbiasedness, variance, reductions, accounting or all.
    Verify {
        suite: String,
        /// Smaller Monte-Carlo and accounting sample sizes.
        #[arg(long)]
        quick: bool,
    },
    /// Print the theory constants and the recommended step size and switch probability.
    Constants {
        #[arg(short = 'G', long = "score-bound")]
        g: f64,
        #[arg(short = 'M', long = "hessian-bound")]
        m: f64,
        #[arg(short = 'R', long = "reward-bound")]
        r: f64,
        #[arg(short = 'W', long = "weight-variance")]
        w: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(short = 'B', long = "small-batch")]
        small_batch: usize,
        #[arg(short = 'N', long = "large-batch")]
        large_batch: usize,
        /// Check this step size as well.
        #[arg(long)]
        eta: Option<f64>,
        /// Switch probability for --eta and --iterations (default: the recommendation).
        #[arg(long)]
        p: Option<f64>,
        /// Report the average sample count over this many iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Run every combination of the [grid] value lists and report the best.
    Grid { config: PathBuf },
}

fn fail(err: HarnessError) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_usage() {
        ExitCode::from(2)
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides { seed: cli.seed, out_dir: cli.out_dir };

    match cli.command {
        Command::Train { config } => match cmd_train(&config, &overrides) {
            Ok(report) => {
                for run in &report.runs {
                    let last = run.records.last();
                    println!(
                        "run {:>3}: {} estimates, {} episodes, last batch return {}{}",
                        run.run_id,
                        run.records.len(),
                        run.cum_episodes(),
                        last.map_or(f64::NAN, |r| r.avg_return),
                        if run.diverged { " (diverged)" } else { "" }
                    );
                }
                println!("wrote {}", report.out_dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { suite, quick } => {
            let mut opts = VerifyOptions { seed: overrides.seed.unwrap_or(0), ..VerifyOptions::default() };
            if quick {
                opts.mc_samples = 20_000;
                opts.accounting_runs = 40;
            }
            let suites: Vec<String> =
                if suite == "all" { Suite::ALL.iter().map(|s| s.name().to_string()).collect() } else { vec![suite] };
            let mut failed = 0;
            for name in suites {
                match cmd_verify(&name, &opts) {
                    Ok(checks) => {
                        for c in &checks {
                            println!("{c}");
                        }
                        failed += checks.iter().filter(|c| !c.passed).count();
                    }
                    Err(e) => return fail(e),
                }
            }
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                eprintln!("{failed} check(s) failed");
                ExitCode::FAILURE
            }
        }
        Command::Constants { g, m, r, w, gamma, small_batch, large_batch, eta, p, iterations } => {
            let input = ConstantsInput { g, m, r, w, gamma, small_batch, large_batch, eta, p, iterations };
            match constants_report(&input) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Grid { config } => match cmd_grid(&config, &overrides) {
            Ok(report) => {
                for r in &report.results {
                    println!(
                        "point {:>3}  {:<40}  final return {}  episodes {}  diverged {}",
                        r.point.index,
                        r.point.label(),
                        r.mean_final_return,
                        r.mean_cum_episodes,
                        r.diverged_runs
                    );
                }
                let best = report.best();
                println!("best: point {} ({})", best.point.index, best.point.label());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
