//! Tournament scoring: each benchmark is a race, finishing ahead of a
//! competitor earns a point, failing forfeits one per finisher.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RaceOutcome {
    /// Finished with this much fragmentation, in bytes.
    Fragmentation(u64),
    /// Crashed or timed out.
    Failed,
}

#[derive(Clone, Debug)]
pub struct RaceResult {
    pub benchmark: String,
    pub allocator: String,
    pub outcome: RaceOutcome,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("allocator `{allocator}` has no result for benchmark `{benchmark}`")]
    MissingEntry {
        allocator: String,
        benchmark: String,
    },
    #[error("allocator `{allocator}` appears twice in benchmark `{benchmark}`")]
    DuplicateEntry {
        allocator: String,
        benchmark: String,
    },
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("no results")]
    Empty,
}

/// Scores per benchmark and in total, allocators in first-appearance order.
#[derive(Clone, Debug)]
pub struct Scoreboard {
    pub allocators: Vec<String>,
    pub per_benchmark: Vec<(String, Vec<i64>)>,
    pub totals: Vec<i64>,
}

/// Applies the grading scheme: a failed allocator loses as many points as
/// there are finishers; a finisher earns one point per strictly worse
/// finisher plus one per failure. Exact ties earn nothing off each other.
pub fn score_tournament(results: &[RaceResult]) -> Result<Scoreboard, ScoreError> {
    if results.is_empty() {
        return Err(ScoreError::Empty);
    }
    let mut allocators: Vec<String> = Vec::new();
    let mut benchmarks: Vec<String> = Vec::new();
    let mut table: HashMap<(String, String), RaceOutcome> = HashMap::new();
    for r in results {
        if !allocators.contains(&r.allocator) {
            allocators.push(r.allocator.clone());
        }
        if !benchmarks.contains(&r.benchmark) {
            benchmarks.push(r.benchmark.clone());
        }
        if table
            .insert((r.benchmark.clone(), r.allocator.clone()), r.outcome)
            .is_some()
        {
            return Err(ScoreError::DuplicateEntry {
                allocator: r.allocator.clone(),
                benchmark: r.benchmark.clone(),
            });
        }
    }

    let mut per_benchmark = Vec::with_capacity(benchmarks.len());
    let mut totals = vec![0i64; allocators.len()];
    for bench in &benchmarks {
        let outcomes: Vec<RaceOutcome> = allocators
            .iter()
            .map(|a| {
                table
                    .get(&(bench.clone(), a.clone()))
                    .copied()
                    .ok_or_else(|| ScoreError::MissingEntry {
                        allocator: a.clone(),
                        benchmark: bench.clone(),
                    })
            })
            .collect::<Result<_, _>>()?;
        let finishers: Vec<u64> = outcomes
            .iter()
            .filter_map(|o| match o {
                RaceOutcome::Fragmentation(f) => Some(*f),
                RaceOutcome::Failed => None,
            })
            .collect();
        let failures = (outcomes.len() - finishers.len()) as i64;
        let points: Vec<i64> = outcomes
            .iter()
            .map(|o| match o {
                RaceOutcome::Failed => -(finishers.len() as i64),
                RaceOutcome::Fragmentation(f) => {
                    let beaten = finishers.iter().filter(|&&g| g > *f).count() as i64;
                    beaten + failures
                }
            })
            .collect();
        for (t, p) in totals.iter_mut().zip(&points) {
            *t += p;
        }
        per_benchmark.push((bench.clone(), points));
    }
    Ok(Scoreboard {
        allocators,
        per_benchmark,
        totals,
    })
}

/// Parses a results CSV: `benchmark,allocator,fragmentation` per line, with
/// `FAILED` marking crashes and timeouts. A `benchmark,allocator,...` header
/// row is tolerated.
pub fn parse_results(text: &str) -> Result<Vec<RaceResult>, ScoreError> {
    let mut out = Vec::new();
    for (line, text) in text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(ScoreError::MalformedLine {
                line,
                detail: format!("expected benchmark,allocator,fragmentation, got `{text}`"),
            });
        }
        if line == 1 && fields[2].eq_ignore_ascii_case("fragmentation") {
            continue;
        }
        let outcome = if fields[2].eq_ignore_ascii_case("FAILED") {
            RaceOutcome::Failed
        } else {
            RaceOutcome::Fragmentation(fields[2].parse().map_err(|_| {
                ScoreError::MalformedLine {
                    line,
                    detail: format!("fragmentation `{}` is not bytes or FAILED", fields[2]),
                }
            })?)
        };
        out.push(RaceResult {
            benchmark: fields[0].to_string(),
            allocator: fields[1].to_string(),
            outcome,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn race(bench: &str, alloc: &str, outcome: RaceOutcome) -> RaceResult {
        RaceResult {
            benchmark: bench.to_string(),
            allocator: alloc.to_string(),
            outcome,
        }
    }

    #[test]
    fn one_race_distributes_points_by_rank_and_failure() {
        use RaceOutcome::*;
        let results = vec![
            race("g", "a", Fragmentation(57_566_822)), // 54.9 MiB
            race("g", "b", Fragmentation(0)),
            race("g", "c", Fragmentation(8 << 20)),
            race("g", "d", Failed),
            race("g", "e", Fragmentation(81 << 10)),
        ];
        let board = score_tournament(&results).unwrap();
        assert_eq!(board.per_benchmark[0].1, vec![1, 4, 2, -4, 3]);
    }

    #[test]
    fn universal_failure_scores_zero() {
        use RaceOutcome::*;
        let results = vec![race("x", "a", Failed), race("x", "b", Failed)];
        let board = score_tournament(&results).unwrap();
        assert_eq!(board.totals, vec![0, 0]);
    }

    #[test]
    fn exact_ties_outperform_nobody() {
        use RaceOutcome::*;
        let results = vec![
            race("x", "a", Fragmentation(5)),
            race("x", "b", Fragmentation(5)),
            race("x", "c", Fragmentation(9)),
        ];
        let board = score_tournament(&results).unwrap();
        assert_eq!(board.per_benchmark[0].1, vec![1, 1, 0]);
    }

    #[test]
    fn missing_entries_are_rejected() {
        use RaceOutcome::*;
        let results = vec![
            race("x", "a", Fragmentation(5)),
            race("x", "b", Fragmentation(6)),
            race("y", "a", Fragmentation(7)),
        ];
        assert!(matches!(
            score_tournament(&results).unwrap_err(),
            ScoreError::MissingEntry { .. }
        ));
    }

    #[test]
    fn csv_rows_parse_both_ways() {
        let rows = parse_results("bench1,me,1024\nbench1,them,FAILED\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].outcome, RaceOutcome::Fragmentation(1024));
        assert_eq!(rows[1].outcome, RaceOutcome::Failed);
    }
}
