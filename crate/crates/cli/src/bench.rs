//! Benchmark harness: repeated, timed planning runs with fresh seeds and a
//! wall-clock timeout, emitting histogram-ready CSV rows.

use std::fmt::Write as _;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use memplan::{plan, Job, PlanConfig};

#[derive(Clone, Debug)]
pub struct BenchSettings {
    pub repeats: u32,
    pub timeout: Duration,
    pub iterations: u32,
    pub frag_target: u64,
    pub parallelism: usize,
    /// Base seed; run `k` derives `seed + k`. Entropy when absent.
    pub seed: Option<u64>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            repeats: 10,
            timeout: Duration::from_secs(15 * 60),
            iterations: 100,
            frag_target: 0,
            parallelism: 1,
            seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Finished {
        makespan: u64,
        fragmentation: u64,
        iterations: u32,
    },
    TimedOut,
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub benchmark: String,
    pub run: u32,
    pub outcome: RunOutcome,
    /// Planning time, parse and serialization excluded.
    pub micros: u128,
}

/// Runs `repeats` planning passes over each named instance. The clock wraps
/// the planner call only. A run past the timeout is recorded as failed; its
/// worker is left to finish in the background.
pub fn run_benchmark(
    instances: &[(String, Vec<Job>, u64)],
    settings: &BenchSettings,
) -> Vec<BenchRow> {
    let mut rows = Vec::with_capacity(instances.len() * settings.repeats as usize);
    for (name, jobs, start_address) in instances {
        for run in 0..settings.repeats {
            let config = PlanConfig {
                max_iterations: settings.iterations,
                frag_target: settings.frag_target,
                start_address: *start_address,
                seed: settings.seed.map(|s| s.wrapping_add(run as u64)),
                parallelism: settings.parallelism,
            };
            let (tx, rx) = mpsc::channel();
            let thread_jobs = jobs.clone();
            let started = Instant::now();
            std::thread::spawn(move || {
                let outcome = plan(&thread_jobs, &config);
                let _ = tx.send(outcome);
            });
            let row = match rx.recv_timeout(settings.timeout) {
                Ok(Ok(res)) => BenchRow {
                    benchmark: name.clone(),
                    run,
                    outcome: RunOutcome::Finished {
                        makespan: res.placement.makespan,
                        fragmentation: res.fragmentation,
                        iterations: res.iterations_used,
                    },
                    micros: started.elapsed().as_micros(),
                },
                // Invalid inputs surface before benchmarking; a planner
                // error mid-run counts as a failure like any crash.
                Ok(Err(_)) | Err(mpsc::RecvTimeoutError::Disconnected) => BenchRow {
                    benchmark: name.clone(),
                    run,
                    outcome: RunOutcome::TimedOut,
                    micros: started.elapsed().as_micros(),
                },
                Err(mpsc::RecvTimeoutError::Timeout) => BenchRow {
                    benchmark: name.clone(),
                    run,
                    outcome: RunOutcome::TimedOut,
                    micros: started.elapsed().as_micros(),
                },
            };
            rows.push(row);
        }
    }
    rows
}

/// CSV columns: benchmark, run, makespan, fragmentation, micros, iterations.
/// Failed runs carry `FAILED` in the makespan and fragmentation columns.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("benchmark,run,makespan,fragmentation,micros,iterations\n");
    for row in rows {
        match row.outcome {
            RunOutcome::Finished {
                makespan,
                fragmentation,
                iterations,
            } => {
                let _ = writeln!(
                    out,
                    "{},{},{makespan},{fragmentation},{},{iterations}",
                    row.benchmark, row.run, row.micros
                );
            }
            RunOutcome::TimedOut => {
                let _ = writeln!(
                    out,
                    "{},{},FAILED,FAILED,{},0",
                    row.benchmark, row.run, row.micros
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elementary() -> Vec<Job> {
        vec![Job::buffer(1, 4, 0, 3), Job::buffer(2, 8, 3, 9)]
    }

    #[test]
    fn one_row_per_repeat() {
        let settings = BenchSettings {
            repeats: 10,
            seed: Some(1),
            ..BenchSettings::default()
        };
        let rows = run_benchmark(&[("tiny".into(), elementary(), 0)], &settings);
        assert_eq!(rows.len(), 10);
        for row in &rows {
            match row.outcome {
                RunOutcome::Finished {
                    fragmentation,
                    iterations,
                    ..
                } => {
                    assert_eq!(fragmentation, 0);
                    assert_eq!(iterations, 0);
                }
                RunOutcome::TimedOut => panic!("elementary instance timed out"),
            }
        }
    }

    #[test]
    fn hopeless_timeouts_become_failed_rows() {
        // A zero timeout fails immediately regardless of instance size.
        let settings = BenchSettings {
            repeats: 1,
            timeout: Duration::from_millis(0),
            seed: Some(1),
            ..BenchSettings::default()
        };
        let jobs: Vec<Job> = (0..500)
            .map(|i| Job::buffer(i, 1 + i % 17, i % 97, (i % 97) + 2 + i % 13))
            .collect();
        let rows = run_benchmark(&[("big".into(), jobs, 0)], &settings);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].outcome, RunOutcome::TimedOut);
        let csv = rows_to_csv(&rows);
        assert!(csv.contains("FAILED"));
    }
}
