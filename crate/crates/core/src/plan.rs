//! The public planning entry point: prelude analysis, elementary shortcuts,
//! the bootstrap record, and the stochastic box-unbox-place loop with early
//! stopping.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::boxing::{build_box_hierarchy, calibrate_epsilon, ensure_height_spread};
use crate::heuristics::{align_up, igc, size_lifespan_first_fit};
use crate::instance::{validate_job, Job, JobId, Placement, Semantics, ValidationError};
use crate::sweep::{profile, Classification, InstanceProfile};
use crate::unbox::{squeeze, unbox_all, Watermark};

/// User-facing parameters of a planning run.
#[derive(Clone, Debug)]
pub struct PlanConfig {
    /// Upper bound on box-unbox-place iterations.
    pub max_iterations: u32,
    /// Stop as soon as fragmentation drops to this many bytes. Zero demands
    /// an optimal placement.
    pub frag_target: u64,
    /// Base address all offsets refer to.
    pub start_address: u64,
    /// Seed for the pseudorandom stream; entropy when absent.
    pub seed: Option<u64>,
    /// Maximum concurrently running tasks.
    pub parallelism: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            max_iterations: 100,
            frag_target: 0,
            start_address: 0,
            seed: None,
            parallelism: 1,
        }
    }
}

/// Outcome of a planning run.
#[derive(Clone, Debug)]
pub struct PlanResult {
    pub placement: Placement,
    /// Makespan minus max load, in bytes.
    pub fragmentation: u64,
    /// Box-unbox-place iterations actually executed.
    pub iterations_used: u32,
    pub bootstrap_makespan: u64,
    /// Makespans of the iterations that produced a candidate, when the run
    /// got that far.
    pub per_iteration_makespans: Option<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("job {id}: {source}")]
    Validation {
        id: JobId,
        source: ValidationError,
    },
    #[error("nothing to plan")]
    EmptyInput,
}

fn validate_all(jobs: &[Job]) -> Result<(), PlanError> {
    for j in jobs {
        validate_job(j).map_err(|source| PlanError::Validation { id: j.id, source })?;
    }
    Ok(())
}

fn placement_from(
    offsets: HashMap<JobId, u64>,
    jobs: &[Job],
    start_address: u64,
) -> Placement {
    let makespan = jobs
        .iter()
        .map(|j| offsets[&j.id] + j.size)
        .max()
        .unwrap_or(0);
    Placement {
        offsets,
        start_address,
        makespan,
        semantics: Semantics::Ex,
    }
}

// Non-overlapping jobs all sit at the lowest aligned offset.
fn place_no_overlaps(jobs: &[Job], start_address: u64) -> Placement {
    let offsets = jobs
        .iter()
        .map(|j| (j.id, align_up(start_address, 0, j.alignment)))
        .collect();
    placement_from(offsets, jobs, start_address)
}

// Uniform sizes stack as coloring rows. Each row owns the band between the
// previous row's tip and its own, so per-job alignment can only pad bands,
// never collide them.
fn place_uniform(jobs: &[Job], start_address: u64) -> Placement {
    let rows = igc(jobs.to_vec());
    let mut offsets = HashMap::with_capacity(jobs.len());
    let mut base = 0u64;
    for row in rows {
        let mut tip = base;
        for job in row.members {
            let off = align_up(start_address, base, job.alignment);
            tip = tip.max(off + job.size);
            offsets.insert(job.id, off);
        }
        base = tip;
    }
    placement_from(offsets, jobs, start_address)
}

/// Plans an offset assignment for `jobs`.
///
/// Elementary instances are solved directly. General instances bootstrap a
/// makespan record with the size-then-lifespan first fit, then iterate the
/// boxing pipeline, keeping the best placement seen. Iterations stop early
/// once fragmentation reaches `config.frag_target`; the result is never
/// worse than the bootstrap.
pub fn plan(jobs: &[Job], config: &PlanConfig) -> Result<PlanResult, PlanError> {
    validate_all(jobs)?;
    let profile = profile(jobs).map_err(|_| PlanError::EmptyInput)?;
    let start_address = config.start_address;

    match profile.classification {
        Classification::NoOverlaps => {
            let placement = place_no_overlaps(jobs, start_address);
            return Ok(finish(placement, &profile, 0, None, Some(Vec::new())));
        }
        Classification::UniformSize => {
            let placement = place_uniform(jobs, start_address);
            return Ok(finish(placement, &profile, 0, None, Some(Vec::new())));
        }
        Classification::General => {}
    }

    let mut rng = match config.seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_os_rng(),
    };
    let bootstrap = size_lifespan_first_fit(jobs, &profile, start_address, &mut rng);
    let bootstrap_makespan = bootstrap.makespan;
    if bootstrap_makespan - profile.max_load <= config.frag_target {
        return Ok(finish(
            bootstrap,
            &profile,
            0,
            Some(bootstrap_makespan),
            Some(Vec::new()),
        ));
    }

    let (augmented, dummy) = ensure_height_spread(jobs.to_vec(), &profile);
    let epsilon = calibrate_epsilon(&augmented);

    let max_iterations = config.max_iterations.max(1);
    // Per-iteration streams derive from one base draw, so no storage scales
    // with the iteration budget.
    let seed_base: u64 = rng.random();
    let iteration_seed = move |i: u32| {
        (seed_base ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_add(i as u64)
    };

    let record = AtomicU64::new(bootstrap_makespan);
    let best: Mutex<Placement> = Mutex::new(bootstrap);
    let stop = AtomicBool::new(false);
    let executed = AtomicU32::new(0);
    let candidate_makespans: Mutex<Vec<u64>> = Mutex::new(Vec::new());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        (0..max_iterations).into_par_iter().for_each(|i| {
            if stop.load(Ordering::Relaxed) {
                return;
            }
            executed.fetch_add(1, Ordering::Relaxed);
            let mut rng = ChaCha8Rng::seed_from_u64(iteration_seed(i));
            // A failed boxing pass simply yields no candidate; the record
            // from the bootstrap stands.
            let set = match build_box_hierarchy(augmented.clone(), epsilon, &mut rng) {
                Ok((set, _)) => set,
                Err(_) => return,
            };
            let sparse = unbox_all(&set.boxes, Watermark(0), dummy);
            let cap = record.load(Ordering::Relaxed);
            let placed = match squeeze(
                jobs,
                &sparse,
                &profile.interference,
                start_address,
                Some(cap),
                &mut rng,
            ) {
                Ok(p) => p,
                Err(_) => return,
            };
            candidate_makespans.lock().unwrap().push(placed.makespan);
            let mut guard = best.lock().unwrap();
            if placed.makespan < guard.makespan {
                record.store(placed.makespan, Ordering::Relaxed);
                let frag = placed.makespan - profile.max_load;
                *guard = placed;
                if frag <= config.frag_target {
                    stop.store(true, Ordering::Relaxed);
                }
            }
        });
    });

    let placement = best.into_inner().unwrap();
    let makespans = candidate_makespans.into_inner().unwrap();
    Ok(finish(
        placement,
        &profile,
        executed.into_inner(),
        Some(bootstrap_makespan),
        Some(makespans),
    ))
}

fn finish(
    placement: Placement,
    profile: &InstanceProfile,
    iterations_used: u32,
    bootstrap_makespan: Option<u64>,
    per_iteration_makespans: Option<Vec<u64>>,
) -> PlanResult {
    let fragmentation = placement.makespan - profile.max_load;
    PlanResult {
        bootstrap_makespan: bootstrap_makespan.unwrap_or(placement.makespan),
        fragmentation,
        iterations_used,
        per_iteration_makespans,
        placement,
    }
}

/// Instance hardness: the fragmentation the size-then-lifespan first fit
/// leaves behind. Zero means the big-rocks-first strategy already packs the
/// instance tight.
pub fn hardness(jobs: &[Job], seed: Option<u64>) -> Result<u64, PlanError> {
    validate_all(jobs)?;
    let profile = profile(jobs).map_err(|_| PlanError::EmptyInput)?;
    let mut rng = match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_os_rng(),
    };
    let placement = size_lifespan_first_fit(jobs, &profile, 0, &mut rng);
    Ok(placement.makespan - profile.max_load)
}
