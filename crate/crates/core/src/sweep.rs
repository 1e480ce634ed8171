//! Single-pass event traversal: max load, height extrema, elementary-case
//! classification and the interference graph, all gathered in one sweep.
//!
//! The underlying principle is that nothing changes between consecutive
//! events, so every instance-wide statistic can be read off a priority queue
//! of 2N allocation/deallocation events.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::instance::{Job, JobId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Deallocations take precedence over allocations at equal timestamps.
    Dealloc,
    Alloc,
}

#[derive(Clone, Copy, Debug)]
pub struct Event<'a> {
    pub time: u64,
    pub kind: EventKind,
    pub job: &'a Job,
}

impl PartialEq for Event<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.kind == other.kind
    }
}
impl Eq for Event<'_> {}

impl Ord for Event<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the max-heap pops the earliest event; Dealloc < Alloc.
        // Equal (time, kind) pairs compare equal on purpose: their pop order
        // is left to the heap.
        let own = (self.time, self.kind == EventKind::Alloc);
        let theirs = (other.time, other.kind == EventKind::Alloc);
        theirs.cmp(&own)
    }
}
impl PartialOrd for Event<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Priority queue over the instance's events.
pub struct EventQueue<'a> {
    heap: BinaryHeap<Event<'a>>,
}

impl<'a> EventQueue<'a> {
    pub fn pop(&mut self) -> Option<Event<'a>> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Builds the 2N-event queue for `jobs`.
pub fn build_events(jobs: &[Job]) -> EventQueue<'_> {
    let mut heap = BinaryHeap::with_capacity(jobs.len() * 2);
    for job in jobs {
        heap.push(Event {
            time: job.start,
            kind: EventKind::Alloc,
            job,
        });
        heap.push(Event {
            time: job.end,
            kind: EventKind::Dealloc,
            job,
        });
    }
    EventQueue { heap }
}

/// How an instance can be solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    /// No two jobs are ever live together: everything goes to offset zero.
    NoOverlaps,
    /// All sizes equal and at least one overlap: row stacking is optimal.
    UniformSize,
    General,
}

/// Results of the prelude analysis.
#[derive(Clone, Debug)]
pub struct InstanceProfile {
    pub max_load: u64,
    pub h_min: u64,
    pub h_max: u64,
    pub classification: Classification,
    /// For each job, the ids of jobs live together with it at some moment.
    pub interference: HashMap<JobId, Vec<JobId>>,
    /// Largest number of concurrently live jobs.
    pub max_live: usize,
}

impl InstanceProfile {
    /// Max-to-min height ratio.
    pub fn height_ratio(&self) -> f64 {
        self.h_max as f64 / self.h_min as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("profile of an empty instance")]
pub struct EmptyInput;

/// Computes the instance profile in one event traversal.
pub fn profile(jobs: &[Job]) -> Result<InstanceProfile, EmptyInput> {
    if jobs.is_empty() {
        return Err(EmptyInput);
    }
    let mut events = build_events(jobs);
    let mut live: HashMap<JobId, &Job> = HashMap::new();
    let mut interference: HashMap<JobId, Vec<JobId>> =
        jobs.iter().map(|j| (j.id, Vec::new())).collect();
    let mut live_size: u128 = 0;
    let mut max_load: u128 = 0;
    let mut max_live = 0usize;
    let mut h_min = u64::MAX;
    let mut h_max = 0u64;

    for job in jobs {
        h_min = h_min.min(job.size);
        h_max = h_max.max(job.size);
    }

    while let Some(ev) = events.pop() {
        match ev.kind {
            EventKind::Dealloc => {
                if live.remove(&ev.job.id).is_some() {
                    live_size -= ev.job.size as u128;
                }
            }
            EventKind::Alloc => {
                for other in live.keys() {
                    interference.get_mut(other).unwrap().push(ev.job.id);
                    interference.get_mut(&ev.job.id).unwrap().push(*other);
                }
                live.insert(ev.job.id, ev.job);
                live_size += ev.job.size as u128;
                max_load = max_load.max(live_size);
                max_live = max_live.max(live.len());
            }
        }
    }

    let classification = if max_live <= 1 {
        Classification::NoOverlaps
    } else if h_min == h_max {
        Classification::UniformSize
    } else {
        Classification::General
    };

    Ok(InstanceProfile {
        max_load: u64::try_from(max_load).expect("total live size exceeds u64"),
        h_min,
        h_max,
        classification,
        interference,
        max_live,
    })
}

/// Number of unordered pairs of overlapping jobs.
pub fn count_conflicts(jobs: &[Job]) -> u64 {
    let mut events = build_events(jobs);
    let mut live = 0u64;
    let mut pairs = 0u64;
    while let Some(ev) = events.pop() {
        match ev.kind {
            EventKind::Dealloc => live -= 1,
            EventKind::Alloc => {
                pairs += live;
                live += 1;
            }
        }
    }
    pairs
}

/// Event times at which at least one job is live, sorted ascending.
///
/// A moment `t` qualifies when some job satisfies `start < t < end`; during
/// the sweep that is exactly the state after the deallocations of `t` and
/// before its allocations.
pub fn live_event_points(jobs: &[Job]) -> Vec<u64> {
    let mut times: Vec<(u64, bool)> = Vec::with_capacity(jobs.len() * 2);
    for j in jobs {
        times.push((j.start, true));
        times.push((j.end, false));
    }
    times.sort_unstable();
    let mut out = Vec::new();
    let mut live: i64 = 0;
    let mut idx = 0;
    while idx < times.len() {
        let t = times[idx].0;
        // Deallocations at t first.
        while idx < times.len() && times[idx].0 == t && !times[idx].1 {
            live -= 1;
            idx += 1;
        }
        if live > 0 && out.last() != Some(&t) {
            out.push(t);
        }
        while idx < times.len() && times[idx].0 == t && times[idx].1 {
            live += 1;
            idx += 1;
        }
    }
    out
}
