use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand};
use memplan::{hardness, plan, PlanConfig, Semantics};
use memplan_cli::analyze::analyze;
use memplan_cli::bench::{run_benchmark, rows_to_csv, BenchSettings, RunOutcome};
use memplan_cli::format::{
    parse_instance_str_with, parse_solution, write_instance, write_solution, ParsedInstance,
};
use memplan_cli::score::{parse_results, score_tournament};

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_INVALID_SOLUTION: i32 = 2;
const EXIT_TIMEOUT: i32 = 3;

/// Static memory planner: assigns offsets to buffers with known sizes and
/// lifetimes, minimizing total address-space usage. All sizes are bytes,
/// all durations microseconds.
#[derive(Parser)]
#[command(name = "memplan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan an instance and emit a solution file.
    Plan {
        instance: PathBuf,
        /// Solution file destination; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Upper bound on box-unbox-place iterations.
        #[arg(long, default_value_t = 100)]
        iterations: u32,
        /// Stop early once fragmentation falls to this many bytes.
        #[arg(long, default_value_t = 0)]
        frag_target: u64,
        /// Base address; overrides the instance header.
        #[arg(long)]
        start_address: Option<u64>,
        /// Seed for reproducible runs.
        #[arg(long)]
        seed: Option<u64>,
        /// Treat the instance as this semantics, overriding its header.
        #[arg(long)]
        semantics: Option<Semantics>,
        /// Maximum concurrent tasks.
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Validate a solution against its instance and report statistics.
    Analyze {
        instance: PathBuf,
        solution: PathBuf,
    },
    /// Rewrite an instance under different lifetime semantics.
    Convert {
        instance: PathBuf,
        /// Source semantics; the instance header when absent.
        #[arg(long)]
        from: Option<Semantics>,
        /// Target semantics.
        #[arg(long)]
        to: Semantics,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time repeated planning runs and emit CSV rows.
    Bench {
        instances: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        repeats: u32,
        /// Wall-clock budget per run, in milliseconds.
        #[arg(long = "timeout", default_value_t = 900_000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = 100)]
        iterations: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Grade allocators from a results CSV (benchmark,allocator,fragmentation).
    Score { results: PathBuf },
    /// Fragmentation left by the size-then-lifespan first-fit baseline.
    Hardness {
        instance: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    std::process::exit(run(Cli::parse()));
}

fn read_instance(path: &PathBuf, semantics: Option<Semantics>) -> Result<ParsedInstance, i32> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return Err(EXIT_VALIDATION);
        }
    };
    parse_instance_str_with(&text, semantics).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_VALIDATION
    })
}

fn emit(output: Option<PathBuf>, contents: &str) -> i32 {
    match output {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, contents) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_VALIDATION;
            }
            EXIT_OK
        }
        None => {
            print!("{contents}");
            EXIT_OK
        }
    }
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Plan {
            instance,
            output,
            iterations,
            frag_target,
            start_address,
            seed,
            semantics,
            parallelism,
        } => {
            let parsed = match read_instance(&instance, semantics) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let config = PlanConfig {
                max_iterations: iterations,
                frag_target,
                start_address: start_address.unwrap_or(parsed.start_address),
                seed,
                parallelism,
            };
            match plan(&parsed.jobs, &config) {
                Ok(result) => {
                    eprintln!(
                        "makespan={} max_load={} fragmentation={} iterations={} bootstrap={}",
                        result.placement.makespan,
                        result.placement.makespan - result.fragmentation,
                        result.fragmentation,
                        result.iterations_used,
                        result.bootstrap_makespan,
                    );
                    emit(
                        output,
                        &write_solution(&result.placement.offsets, result.placement.makespan),
                    )
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_VALIDATION
                }
            }
        }
        Command::Analyze { instance, solution } => {
            let parsed = match read_instance(&instance, None) {
                Ok(p) => p,
                Err(code) => return code,
            };
            let sol = match parse_solution(&solution) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {}: {e}", solution.display());
                    return EXIT_VALIDATION;
                }
            };
            match analyze(
                &parsed.jobs,
                &sol.offsets,
                sol.reported_makespan,
                parsed.start_address,
            ) {
                Ok(report) => {
                    println!("max_load={}", report.max_load);
                    println!("makespan={}", report.makespan);
                    println!("fragmentation={}", report.fragmentation);
                    println!("conflicts={}", report.conflicts);
                    println!("valid={}", report.valid);
                    for v in &report.violations {
                        println!("violation: {v}");
                    }
                    if report.valid {
                        EXIT_OK
                    } else {
                        EXIT_INVALID_SOLUTION
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_INVALID_SOLUTION
                }
            }
        }
        Command::Convert {
            instance,
            from,
            to,
            output,
        } => {
            let parsed = match read_instance(&instance, from) {
                Ok(p) => p,
                Err(code) => return code,
            };
            match write_instance(&parsed.jobs, to, parsed.start_address) {
                Ok(text) => emit(output, &text),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_VALIDATION
                }
            }
        }
        Command::Bench {
            instances,
            repeats,
            timeout_ms,
            iterations,
            seed,
            parallelism,
            csv_out,
        } => {
            if instances.is_empty() {
                eprintln!("error: no instances given");
                return EXIT_VALIDATION;
            }
            let mut parsed = Vec::new();
            for path in &instances {
                match read_instance(path, None) {
                    Ok(p) => parsed.push((
                        path.file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_else(|| path.display().to_string()),
                        p.jobs,
                        p.start_address,
                    )),
                    Err(code) => return code,
                }
            }
            let settings = BenchSettings {
                repeats,
                timeout: Duration::from_millis(timeout_ms),
                iterations,
                frag_target: 0,
                parallelism,
                seed,
            };
            let rows = run_benchmark(&parsed, &settings);
            let timed_out = rows
                .iter()
                .any(|r| matches!(r.outcome, RunOutcome::TimedOut));
            let code = emit(csv_out, &rows_to_csv(&rows));
            if code != EXIT_OK {
                code
            } else if timed_out {
                EXIT_TIMEOUT
            } else {
                EXIT_OK
            }
        }
        Command::Score { results } => {
            let text = match std::fs::read_to_string(&results) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", results.display());
                    return EXIT_VALIDATION;
                }
            };
            let rows = match parse_results(&text) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
            };
            match score_tournament(&rows) {
                Ok(board) => {
                    println!("benchmark,{}", board.allocators.join(","));
                    for (bench, points) in &board.per_benchmark {
                        let cells: Vec<String> = points.iter().map(|p| p.to_string()).collect();
                        println!("{bench},{}", cells.join(","));
                    }
                    let cells: Vec<String> = board.totals.iter().map(|p| p.to_string()).collect();
                    println!("TOTAL,{}", cells.join(","));
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_VALIDATION
                }
            }
        }
        Command::Hardness { instance, seed } => {
            let parsed = match read_instance(&instance, None) {
                Ok(p) => p,
                Err(code) => return code,
            };
            match hardness(&parsed.jobs, seed) {
                Ok(bytes) => {
                    println!("{bytes}");
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_VALIDATION
                }
            }
        }
    }
}
