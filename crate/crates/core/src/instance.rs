//! Core domain types: jobs, lifetime semantics and placements.
//!
//! A job is live on the *open* interval `(start, end)`. Internally every
//! computation runs on exclusive (`Ex`) semantics; [`convert`] adapts inputs
//! expressed with inclusive endpoints.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Identifier of a job. Box jobs created during planning draw their ids from
/// a reserved countdown range so they never shadow user ids in practice.
pub type JobId = u64;

static NEXT_BOX_ID: AtomicU64 = AtomicU64::new(u64::MAX - 1);

/// A buffer to place, or a box produced while planning.
///
/// Original input buffers have empty `contents`; boxes carry the jobs they
/// enclose. Both are represented by the same struct so the planning core can
/// treat a box exactly like a job.
#[derive(Clone, Debug)]
pub struct Job {
    pub id: JobId,
    /// Allocated size in bytes. Never zero.
    pub size: u64,
    /// Requested size in bytes. Kept for trace fidelity, never used while
    /// planning.
    pub req_size: u64,
    /// Allocation time. The job is *not* live at this moment.
    pub start: u64,
    /// Deallocation time. The job is *not* live at this moment.
    pub end: u64,
    /// If set, the final address (start address + offset) must be a multiple
    /// of this value.
    pub alignment: Option<u64>,
    /// Enclosed jobs; empty for original buffers.
    pub contents: Vec<Job>,
}

impl Job {
    /// A plain buffer with `req_size == size` and no alignment.
    pub fn buffer(id: JobId, size: u64, start: u64, end: u64) -> Self {
        Job {
            id,
            size,
            req_size: size,
            start,
            end,
            alignment: None,
            contents: Vec::new(),
        }
    }

    pub fn with_alignment(mut self, alignment: u64) -> Self {
        self.alignment = Some(alignment);
        self
    }

    /// Wraps `contents` into a box of the given height. The box's endpoints
    /// hull the contents. Panics if the contents' load exceeds the height at
    /// any moment; the check stays on in release builds because a box that
    /// cannot hold its contents poisons every later planning stage.
    pub fn boxed(height: u64, contents: Vec<Job>) -> Self {
        assert!(!contents.is_empty(), "box without contents");
        let mut start = u64::MAX;
        let mut end = 0;
        for j in &contents {
            start = start.min(j.start);
            end = end.max(j.end);
        }
        let load = max_load_of(&contents);
        assert!(
            load <= height,
            "box of height {height} cannot hold load {load}"
        );
        Job {
            id: NEXT_BOX_ID.fetch_sub(1, Ordering::Relaxed),
            size: height,
            req_size: height,
            start,
            end,
            alignment: None,
            contents,
        }
    }

    /// True for original buffers, false for boxes.
    pub fn is_buffer(&self) -> bool {
        self.contents.is_empty()
    }

    /// Number of discrete time units at which the job is live. Zero for
    /// back-to-back lifetimes like `(t, t+1)`.
    pub fn lifespan(&self) -> u64 {
        self.end - self.start - 1
    }

    /// True iff the job is live at moment `t` (open-interval reading).
    pub fn is_live_at(&self, t: u64) -> bool {
        self.start < t && self.end > t
    }

    /// True iff the whole lifetime fits inside `(lo, hi)`.
    pub fn lives_within(&self, lo: u64, hi: u64) -> bool {
        self.start >= lo && self.end <= hi
    }
}

/// True iff the two jobs' lifetimes intersect as open intervals.
pub fn overlaps(a: &Job, b: &Job) -> bool {
    b.end > a.start && b.start < a.end
}

/// Maximum over time of the summed size of live jobs.
///
/// Implemented as one event sweep; deallocations are processed before
/// allocations that share a timestamp, so jobs meeting end-to-start never
/// count as concurrent.
pub fn max_load_of(jobs: &[Job]) -> u64 {
    let mut events: Vec<(u64, bool, u64)> = Vec::with_capacity(jobs.len() * 2);
    for j in jobs {
        // false sorts before true: dealloc first.
        events.push((j.start, true, j.size));
        events.push((j.end, false, j.size));
    }
    events.sort_unstable_by_key(|&(t, alloc, _)| (t, alloc));
    let mut live: u128 = 0;
    let mut max: u128 = 0;
    for (_, alloc, size) in events {
        if alloc {
            live += size as u128;
            max = max.max(live);
        } else {
            live -= size as u128;
        }
    }
    u64::try_from(max).expect("total live size exceeds u64")
}

/// Interpretation of a job's interval endpoints.
///
/// `Ex` is the internal interpretation: live strictly between the endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Semantics {
    /// Live at both endpoints.
    In,
    /// Live at the start, dead at the end.
    InEx,
    /// Dead at both endpoints.
    Ex,
}

impl Semantics {
    pub fn as_str(&self) -> &'static str {
        match self {
            Semantics::In => "In",
            Semantics::InEx => "InEx",
            Semantics::Ex => "Ex",
        }
    }
}

impl std::str::FromStr for Semantics {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "In" | "in" => Ok(Semantics::In),
            "InEx" | "inex" => Ok(Semantics::InEx),
            "Ex" | "ex" => Ok(Semantics::Ex),
            other => Err(format!("unknown semantics `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("size must be positive")]
    ZeroSize,
    #[error("start must precede end")]
    NonPositiveLifetime,
    #[error("alignment, when present, must be positive")]
    ZeroAlignment,
    #[error("input jobs must not carry contents")]
    NonEmptyContents,
    #[error("allocated size must not undercut requested size")]
    AllocatedLtRequested,
}

/// Checks the invariants of a single input job. The first violated rule wins.
pub fn validate_job(j: &Job) -> Result<(), ValidationError> {
    if j.size == 0 || j.req_size == 0 {
        return Err(ValidationError::ZeroSize);
    }
    if j.start >= j.end {
        return Err(ValidationError::NonPositiveLifetime);
    }
    if j.alignment == Some(0) {
        return Err(ValidationError::ZeroAlignment);
    }
    if !j.contents.is_empty() {
        return Err(ValidationError::NonEmptyContents);
    }
    if j.size < j.req_size {
        return Err(ValidationError::AllocatedLtRequested);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error("job {id}: inclusive end would collapse the lifetime")]
    DegenerateLifetime { id: JobId },
    #[error("job {id}: end time overflows the representation")]
    EndOverflow { id: JobId },
}

/// Rewrites the jobs' endpoints from one lifetime interpretation to another.
///
/// `In -> InEx` adds one to each end; the reverse subtracts one. `InEx` and
/// `Ex` share the same overlap predicate, so that leg is the identity.
pub fn convert(jobs: &[Job], from: Semantics, to: Semantics) -> Result<Vec<Job>, ConversionError> {
    let delta: i64 = end_shift(to) - end_shift(from);
    let mut out = Vec::with_capacity(jobs.len());
    for j in jobs {
        let mut nj = j.clone();
        if delta > 0 {
            nj.end = nj
                .end
                .checked_add(delta as u64)
                .ok_or(ConversionError::EndOverflow { id: j.id })?;
        } else if delta < 0 {
            let nd = nj.end - (-delta) as u64;
            if nd <= nj.start {
                return Err(ConversionError::DegenerateLifetime { id: j.id });
            }
            nj.end = nd;
        }
        out.push(nj);
    }
    Ok(out)
}

// Normalized end-point shift relative to the inclusive reading.
fn end_shift(s: Semantics) -> i64 {
    match s {
        Semantics::In => 0,
        Semantics::InEx | Semantics::Ex => 1,
    }
}

/// A complete offset assignment for an instance.
#[derive(Clone, Debug)]
pub struct Placement {
    pub offsets: HashMap<JobId, u64>,
    pub start_address: u64,
    /// `max(offset + size)` over all jobs.
    pub makespan: u64,
    pub semantics: Semantics,
}
