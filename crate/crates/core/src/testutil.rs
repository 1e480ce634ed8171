//! Shared helpers for the crate's own tests. Oracles here stay independent
//! of the production code paths they check: validity is established by
//! brute-force pairwise comparison, not by the sweep or the fitters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{overlaps, Job, Placement};

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn random_jobs(seed: u64, n: usize, horizon: u64, max_size: u64) -> Vec<Job> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|i| {
            let start = rng.random_range(0..horizon - 1);
            let end = rng.random_range(start + 1..=horizon);
            let size = rng.random_range(1..=max_size);
            Job::buffer(i as u64, size, start, end)
        })
        .collect()
}

pub(crate) fn assert_valid_placement(jobs: &[Job], placement: &Placement) {
    for job in jobs {
        let off = *placement
            .offsets
            .get(&job.id)
            .unwrap_or_else(|| panic!("job {} missing from placement", job.id));
        if let Some(a) = job.alignment {
            assert_eq!(
                (placement.start_address + off) % a,
                0,
                "job {} breaks its alignment",
                job.id
            );
        }
        assert!(
            off + job.size <= placement.makespan,
            "job {} sticks out of the makespan",
            job.id
        );
    }
    for i in 0..jobs.len() {
        for j in i + 1..jobs.len() {
            let (a, b) = (&jobs[i], &jobs[j]);
            if !overlaps(a, b) {
                continue;
            }
            let (oa, ob) = (placement.offsets[&a.id], placement.offsets[&b.id]);
            let disjoint = oa + a.size <= ob || ob + b.size <= oa;
            assert!(
                disjoint,
                "jobs {} and {} overlap in time and space",
                a.id, b.id
            );
        }
    }
}
