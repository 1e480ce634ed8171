//! Baseline placement machinery: greedy interval graph coloring and the
//! sort-then-fit heuristic family.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;

use crate::instance::{Job, JobId, Placement, Semantics};
use crate::sweep::InstanceProfile;

/// Orderings used by the sort-then-fit heuristics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortStrategy {
    /// Decreasing size, ties broken at random.
    SizeFirst,
    /// Uniformly random permutation.
    RandomShuffle,
    /// Decreasing size, ties by decreasing lifespan, rest at random.
    SizeThenLifespan,
    /// Increasing previously assigned offset.
    ByOffset,
}

/// Returns `jobs` rearranged according to `strategy`.
///
/// `offsets` is consulted only by [`SortStrategy::ByOffset`].
pub fn order_jobs<R: Rng>(
    jobs: &[Job],
    strategy: SortStrategy,
    rng: &mut R,
    offsets: Option<&HashMap<JobId, u64>>,
) -> Vec<Job> {
    let mut keyed: Vec<(u64, u64, u64, &Job)> = jobs
        .iter()
        .map(|j| {
            let jitter: u64 = rng.random();
            match strategy {
                SortStrategy::SizeFirst => (u64::MAX - j.size, 0, jitter, j),
                SortStrategy::RandomShuffle => (jitter, 0, 0, j),
                SortStrategy::SizeThenLifespan => {
                    (u64::MAX - j.size, u64::MAX - j.lifespan(), jitter, j)
                }
                SortStrategy::ByOffset => {
                    let off = offsets
                        .and_then(|m| m.get(&j.id))
                        .copied()
                        .expect("ByOffset ordering needs an offset per job");
                    (off, 0, jitter, j)
                }
            }
        })
        .collect();
    keyed.sort_unstable_by_key(|&(a, b, c, _)| (a, b, c));
    keyed.into_iter().map(|(_, _, _, j)| j.clone()).collect()
}

/// One row of an interval-graph coloring: pairwise non-overlapping jobs.
#[derive(Clone, Debug)]
pub struct Row {
    pub index: usize,
    pub members: Vec<Job>,
}

/// Greedy interval graph coloring over intervals given as `(start, end)`
/// pairs. Returns the member indices of each row, lowest row first. On every
/// allocation the lowest free row is reused before a new one opens.
pub(crate) fn igc_core(intervals: &[(u64, u64)]) -> Vec<Vec<usize>> {
    let mut events: Vec<(u64, bool, usize)> = Vec::with_capacity(intervals.len() * 2);
    for (idx, &(s, e)) in intervals.iter().enumerate() {
        events.push((s, true, idx));
        events.push((e, false, idx));
    }
    // Dealloc (false) before alloc at equal times.
    events.sort_unstable_by_key(|&(t, alloc, _)| (t, alloc));

    let mut free: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut assigned: Vec<usize> = vec![usize::MAX; intervals.len()];
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (_, alloc, idx) in events {
        if alloc {
            let row = match free.pop() {
                Some(Reverse(r)) => r,
                None => {
                    rows.push(Vec::new());
                    rows.len() - 1
                }
            };
            assigned[idx] = row;
            rows[row].push(idx);
        } else {
            free.push(Reverse(assigned[idx]));
        }
    }
    rows
}

/// Interval graph coloring over whole jobs. Optimal for uniform sizes: the
/// row count equals the maximum number of concurrently live jobs.
pub fn igc(jobs: Vec<Job>) -> Vec<Row> {
    let intervals: Vec<(u64, u64)> = jobs.iter().map(|j| (j.start, j.end)).collect();
    let rows = igc_core(&intervals);
    let mut slots: Vec<Option<Job>> = jobs.into_iter().map(Some).collect();
    rows.into_iter()
        .enumerate()
        .map(|(index, members)| Row {
            index,
            members: members
                .into_iter()
                .map(|i| slots[i].take().expect("job assigned twice"))
                .collect(),
        })
        .collect()
}

/// Smallest offset at or above `v` whose final address honors `alignment`.
pub(crate) fn align_up(start_address: u64, v: u64, alignment: Option<u64>) -> u64 {
    match alignment {
        None | Some(1) => v,
        Some(a) => {
            let rem = ((start_address as u128 + v as u128) % a as u128) as u64;
            if rem == 0 {
                v
            } else {
                v + (a - rem)
            }
        }
    }
}

/// Signal that a placement ran past the current makespan record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exceeded;

// Address bands of already-placed jobs conflicting with `job`, in ascending
// offset order.
fn conflict_bands(
    job: &Job,
    interference: &HashMap<JobId, Vec<JobId>>,
    placed: &HashMap<JobId, (u64, u64)>,
) -> Vec<(u64, u64)> {
    let mut bands: Vec<(u64, u64)> = interference
        .get(&job.id)
        .map(|ids| ids.iter().filter_map(|id| placed.get(id)).copied().collect())
        .unwrap_or_default();
    bands.sort_unstable();
    bands
}

/// First-fit placement of `jobs` in the given traversal order.
///
/// Each job gets the lowest aligned offset whose address range dodges every
/// already-placed conflicting job. When `cap` is given and a job would push
/// the makespan past it, the scan aborts with [`Exceeded`].
pub fn first_fit(
    jobs: &[Job],
    interference: &HashMap<JobId, Vec<JobId>>,
    start_address: u64,
    cap: Option<u64>,
) -> Result<Placement, Exceeded> {
    let mut placed: HashMap<JobId, (u64, u64)> = HashMap::with_capacity(jobs.len());
    let mut offsets: HashMap<JobId, u64> = HashMap::with_capacity(jobs.len());
    let mut makespan = 0u64;
    for job in jobs {
        let mut run = align_up(start_address, 0, job.alignment);
        for &(off, end) in &conflict_bands(job, interference, &placed) {
            if off >= run && off - run >= job.size {
                break;
            }
            if end > run {
                run = align_up(start_address, end, job.alignment);
            }
        }
        let top = run + job.size;
        if let Some(cap) = cap {
            if top > cap {
                return Err(Exceeded);
            }
        }
        placed.insert(job.id, (run, top));
        offsets.insert(job.id, run);
        makespan = makespan.max(top);
    }
    Ok(Placement {
        offsets,
        start_address,
        makespan,
        semantics: Semantics::Ex,
    })
}

/// Best-fit placement: each job lands in the feasible gap leaving the least
/// slack, ties resolved toward the lowest offset.
pub fn best_fit(
    jobs: &[Job],
    interference: &HashMap<JobId, Vec<JobId>>,
    start_address: u64,
) -> Placement {
    let mut placed: HashMap<JobId, (u64, u64)> = HashMap::with_capacity(jobs.len());
    let mut offsets: HashMap<JobId, u64> = HashMap::with_capacity(jobs.len());
    let mut makespan = 0u64;
    for job in jobs {
        let mut best: Option<(u64, u64)> = None; // (leftover, offset)
        let mut run = align_up(start_address, 0, job.alignment);
        for &(off, end) in &conflict_bands(job, interference, &placed) {
            if off >= run && off - run >= job.size {
                let leftover = (off - run) - job.size;
                if best.is_none_or(|b| (leftover, run) < b) {
                    best = Some((leftover, run));
                }
            }
            if end > run {
                run = align_up(start_address, end, job.alignment);
            }
        }
        let offset = best.map(|(_, off)| off).unwrap_or(run);
        placed.insert(job.id, (offset, offset + job.size));
        offsets.insert(job.id, offset);
        makespan = makespan.max(offset + job.size);
    }
    Placement {
        offsets,
        start_address,
        makespan,
        semantics: Semantics::Ex,
    }
}

/// The bootstrap heuristic: sort by decreasing size, break ties by decreasing
/// lifespan, then first-fit. Deterministic up to size-and-lifespan ties,
/// which draw from `rng`.
pub fn size_lifespan_first_fit<R: Rng>(
    jobs: &[Job],
    profile: &InstanceProfile,
    start_address: u64,
    rng: &mut R,
) -> Placement {
    let ordered = order_jobs(jobs, SortStrategy::SizeThenLifespan, rng, None);
    first_fit(&ordered, &profile.interference, start_address, None)
        .expect("first fit without a cap cannot exceed")
}
