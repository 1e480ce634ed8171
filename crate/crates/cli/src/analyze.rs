//! Solution analyzer: recomputes instance statistics from scratch and
//! validates a solution against them.

use std::collections::HashMap;

use memplan::{count_conflicts, profile, Job, JobId};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Two jobs live together occupy intersecting address ranges.
    SpatialOverlap { a: JobId, b: JobId },
    /// A job's final address misses its alignment.
    Misaligned { id: JobId },
    /// The solution trailer disagrees with the recomputed makespan.
    MakespanMismatch { reported: u64, computed: u64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SpatialOverlap { a, b } => {
                write!(f, "jobs {a} and {b} overlap in time and share addresses")
            }
            Violation::Misaligned { id } => write!(f, "job {id} breaks its alignment"),
            Violation::MakespanMismatch { reported, computed } => {
                write!(f, "reported makespan {reported} != computed {computed}")
            }
        }
    }
}

#[derive(Clone, Debug, Error)]
#[error("solution ids do not match the instance (missing {missing:?}, unknown {unknown:?})")]
pub struct IdMismatch {
    pub missing: Vec<JobId>,
    pub unknown: Vec<JobId>,
}

/// Everything the analyzer reports about one instance/solution pair.
#[derive(Clone, Debug)]
pub struct Report {
    pub max_load: u64,
    pub makespan: u64,
    pub fragmentation: u64,
    pub conflicts: u64,
    pub valid: bool,
    pub violations: Vec<Violation>,
}

/// Validates `offsets` against `jobs` (exclusive semantics) and recomputes
/// max load, conflicts and fragmentation.
pub fn analyze(
    jobs: &[Job],
    offsets: &HashMap<JobId, u64>,
    reported_makespan: u64,
    start_address: u64,
) -> Result<Report, IdMismatch> {
    let mut missing: Vec<JobId> = jobs
        .iter()
        .map(|j| j.id)
        .filter(|id| !offsets.contains_key(id))
        .collect();
    let known: std::collections::HashSet<JobId> = jobs.iter().map(|j| j.id).collect();
    let mut unknown: Vec<JobId> = offsets
        .keys()
        .copied()
        .filter(|id| !known.contains(id))
        .collect();
    if !missing.is_empty() || !unknown.is_empty() {
        missing.sort_unstable();
        unknown.sort_unstable();
        return Err(IdMismatch { missing, unknown });
    }

    let profile = profile(jobs).expect("analyze needs a non-empty instance");
    let conflicts = count_conflicts(jobs);
    let by_id: HashMap<JobId, &Job> = jobs.iter().map(|j| (j.id, j)).collect();

    let mut violations = Vec::new();
    let makespan = jobs
        .iter()
        .map(|j| offsets[&j.id] + j.size)
        .max()
        .unwrap_or(0);

    for job in jobs {
        if let Some(a) = job.alignment {
            if !(start_address + offsets[&job.id]).is_multiple_of(a) {
                violations.push(Violation::Misaligned { id: job.id });
            }
        }
    }
    for (id, neighbors) in &profile.interference {
        let a = by_id[id];
        let oa = offsets[id];
        for other in neighbors {
            if other <= id {
                continue;
            }
            let b = by_id[other];
            let ob = offsets[other];
            let disjoint = oa + a.size <= ob || ob + b.size <= oa;
            if !disjoint {
                violations.push(Violation::SpatialOverlap { a: *id, b: *other });
            }
        }
    }
    if reported_makespan != makespan {
        violations.push(Violation::MakespanMismatch {
            reported: reported_makespan,
            computed: makespan,
        });
    }

    Ok(Report {
        max_load: profile.max_load,
        makespan,
        fragmentation: makespan.saturating_sub(profile.max_load),
        conflicts,
        valid: violations.is_empty(),
        violations,
    })
}
