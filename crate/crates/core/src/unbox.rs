//! Diffuses the row-derived offsets of top-level boxes down through the box
//! hierarchy, then squeezes the sparse result into a compact placement with
//! one final first-fit pass.

use std::collections::HashMap;

use rand::Rng;

use crate::heuristics::{first_fit, igc_core, order_jobs, Exceeded, SortStrategy};
use crate::instance::{Job, JobId, Placement};

/// Base offset placement starts from at the current recursion level. Never
/// decreases while one run of same-size rows is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Watermark(pub u64);

struct Unboxer {
    offsets: HashMap<JobId, u64>,
    dummy: Option<JobId>,
}

/// Assigns a sparse offset to every buffer reachable through `jobs`.
///
/// Same-size levels are laid out as coloring rows, each row's contents at the
/// running watermark and the watermark bumped to the row's tip. Levels of
/// non-overlapping elements all open at the same watermark. Mixed levels are
/// partitioned by size, each partition placed above the previous one's
/// maximum address. The dummy job, when present, receives no offset and
/// contributes nothing to any watermark.
pub fn unbox_all(jobs: &[Job], watermark: Watermark, dummy: Option<JobId>) -> HashMap<JobId, u64> {
    let mut ctx = Unboxer {
        offsets: HashMap::new(),
        dummy,
    };
    let refs: Vec<&Job> = jobs.iter().collect();
    ctx.place_level(&refs, watermark.0);
    ctx.offsets
}

/// Lays out one run of same-size elements via coloring rows, starting at
/// `watermark`. Exposed for uniform-size instances, which it solves with
/// zero fragmentation.
pub fn place_same_sizes(
    jobs: &[Job],
    watermark: Watermark,
    dummy: Option<JobId>,
) -> HashMap<JobId, u64> {
    let mut ctx = Unboxer {
        offsets: HashMap::new(),
        dummy,
    };
    let refs: Vec<&Job> = jobs.iter().collect();
    ctx.place_rows(&refs, watermark.0);
    ctx.offsets
}

impl Unboxer {
    // Returns the maximum address this level placed, or `w` if it placed
    // nothing.
    fn place_level(&mut self, elems: &[&Job], w: u64) -> u64 {
        if elems.is_empty() {
            return w;
        }
        let size = elems[0].size;
        if elems.iter().all(|e| e.size == size) {
            return self.place_rows(elems, w);
        }
        if !any_overlap(elems) {
            let mut max_addr = w;
            for e in elems {
                max_addr = max_addr.max(self.open(e, w));
            }
            return max_addr;
        }
        // Mixed sizes with conflicts: big rocks first, partitions stacked.
        let mut partitions: HashMap<u64, Vec<&Job>> = HashMap::new();
        for &e in elems {
            partitions.entry(e.size).or_default().push(e);
        }
        let mut sizes: Vec<u64> = partitions.keys().copied().collect();
        sizes.sort_unstable_by_key(|&s| std::cmp::Reverse(s));
        let mut base = w;
        for s in sizes {
            base = self.place_rows(&partitions[&s], base);
        }
        base
    }

    fn place_rows(&mut self, elems: &[&Job], w: u64) -> u64 {
        let intervals: Vec<(u64, u64)> = elems.iter().map(|e| (e.start, e.end)).collect();
        let mut watermark = w;
        for row in igc_core(&intervals) {
            let mut tip = watermark;
            for idx in row {
                tip = tip.max(self.open(elems[idx], watermark));
            }
            watermark = tip;
        }
        watermark
    }

    fn open(&mut self, e: &Job, w: u64) -> u64 {
        if e.is_buffer() {
            if Some(e.id) == self.dummy {
                return w;
            }
            self.offsets.insert(e.id, w);
            return w + e.size;
        }
        let refs: Vec<&Job> = e.contents.iter().collect();
        self.place_level(&refs, w)
    }
}

fn any_overlap(elems: &[&Job]) -> bool {
    let mut events: Vec<(u64, bool)> = Vec::with_capacity(elems.len() * 2);
    for e in elems {
        events.push((e.start, true));
        events.push((e.end, false));
    }
    events.sort_unstable();
    let mut live = 0u32;
    for (_, alloc) in events {
        if alloc {
            live += 1;
            if live > 1 {
                return true;
            }
        } else {
            live -= 1;
        }
    }
    false
}

/// Compacts a sparse placement: first-fit over the jobs in ascending sparse
/// offset order, honoring alignment and the start address. `cap` carries the
/// current makespan record for early stopping.
pub fn squeeze<R: Rng>(
    jobs: &[Job],
    sparse: &HashMap<JobId, u64>,
    interference: &HashMap<JobId, Vec<JobId>>,
    start_address: u64,
    cap: Option<u64>,
    rng: &mut R,
) -> Result<Placement, Exceeded> {
    let ordered = order_jobs(jobs, SortStrategy::ByOffset, rng, Some(sparse));
    first_fit(&ordered, interference, start_address, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxing::{build_box_hierarchy, calibrate_epsilon, ensure_height_spread};
    use crate::instance::overlaps;
    use crate::sweep::profile;
    use crate::testutil::{assert_valid_placement, random_jobs, seeded_rng};

    fn sparse_makespan(jobs: &[Job], sparse: &HashMap<JobId, u64>) -> u64 {
        jobs.iter()
            .filter_map(|j| sparse.get(&j.id).map(|o| o + j.size))
            .max()
            .unwrap_or(0)
    }

    fn assert_collision_free(jobs: &[Job], sparse: &HashMap<JobId, u64>) {
        for i in 0..jobs.len() {
            for j in i + 1..jobs.len() {
                let (a, b) = (&jobs[i], &jobs[j]);
                if !overlaps(a, b) {
                    continue;
                }
                let (oa, ob) = (sparse[&a.id], sparse[&b.id]);
                assert!(
                    oa + a.size <= ob || ob + b.size <= oa,
                    "sparse collision between {} and {}",
                    a.id,
                    b.id
                );
            }
        }
    }

    #[test]
    fn single_buffer_lands_on_the_watermark() {
        let b = Job::boxed(4, vec![Job::buffer(7, 3, 1, 5)]);
        let offsets = unbox_all(std::slice::from_ref(&b), Watermark(0), None);
        assert_eq!(offsets[&7], 0);
        let offsets = unbox_all(std::slice::from_ref(&b), Watermark(10), None);
        assert_eq!(offsets[&7], 10);
    }

    #[test]
    fn disjoint_same_size_boxes_share_a_band() {
        let b1 = Job::boxed(3, vec![Job::buffer(1, 3, 0, 2)]);
        let b2 = Job::boxed(3, vec![Job::buffer(2, 3, 5, 9)]);
        let offsets = unbox_all(&[b1, b2], Watermark(0), None);
        assert_eq!(offsets[&1], 0);
        assert_eq!(offsets[&2], 0);
    }

    #[test]
    fn overlapping_same_size_buffers_stack_one_row_apiece() {
        let jobs: Vec<Job> = (0..4).map(|i| Job::buffer(i, 5, 0, 10)).collect();
        let offsets = place_same_sizes(&jobs, Watermark(0), None);
        let mut offs: Vec<u64> = offsets.values().copied().collect();
        offs.sort_unstable();
        assert_eq!(offs, vec![0, 5, 10, 15]);
    }

    #[test]
    fn uniform_random_instances_unbox_with_zero_fragmentation() {
        let jobs: Vec<Job> = random_jobs(0xf1a7, 80, 200, 1)
            .into_iter()
            .map(|mut j| {
                j.size = 16;
                j.req_size = 16;
                j
            })
            .collect();
        let p = profile(&jobs).unwrap();
        let offsets = place_same_sizes(&jobs, Watermark(0), None);
        let makespan = sparse_makespan(&jobs, &offsets);
        assert_eq!(makespan, p.max_load);
        assert_collision_free(&jobs, &offsets);
    }

    #[test]
    fn nested_hierarchy_unboxes_collision_free() {
        let jobs = random_jobs(0x0b3d, 20, 60, 12);
        let p = profile(&jobs).unwrap();
        let (augmented, dummy) = ensure_height_spread(jobs.clone(), &p);
        let eps = calibrate_epsilon(&augmented);
        let (set, _) = build_box_hierarchy(augmented, eps, &mut seeded_rng(21)).unwrap();
        let sparse = unbox_all(&set.boxes, Watermark(0), dummy);
        // Every real buffer got an offset; the dummy got none.
        assert_eq!(sparse.len(), jobs.len());
        if let Some(d) = dummy {
            assert!(!sparse.contains_key(&d));
        }
        assert_collision_free(&jobs, &sparse);
    }

    #[test]
    fn squeeze_is_noop_on_compact_and_improves_gapped_offsets() {
        let jobs = vec![Job::buffer(1, 4, 0, 10), Job::buffer(2, 3, 2, 8)];
        let p = profile(&jobs).unwrap();
        let compact: HashMap<JobId, u64> = [(1, 0u64), (2, 4u64)].into();
        let sq = squeeze(&jobs, &compact, &p.interference, 0, None, &mut seeded_rng(0)).unwrap();
        assert_eq!(sq.makespan, 7);

        let gapped: HashMap<JobId, u64> = [(1, 0u64), (2, 40u64)].into();
        let sq = squeeze(&jobs, &gapped, &p.interference, 0, None, &mut seeded_rng(0)).unwrap();
        assert_eq!(sq.makespan, 7);
        assert!(sq.makespan <= sparse_makespan(&jobs, &gapped));
    }

    #[test]
    fn full_pipeline_squeeze_never_worsens_the_sparse_makespan() {
        let jobs = random_jobs(0x100f, 100, 300, 24);
        let p = profile(&jobs).unwrap();
        let (augmented, dummy) = ensure_height_spread(jobs.clone(), &p);
        let eps = calibrate_epsilon(&augmented);
        let (set, _) = build_box_hierarchy(augmented, eps, &mut seeded_rng(33)).unwrap();
        let sparse = unbox_all(&set.boxes, Watermark(0), dummy);
        let before = sparse_makespan(&jobs, &sparse);
        let sq = squeeze(&jobs, &sparse, &p.interference, 0, None, &mut seeded_rng(34)).unwrap();
        assert!(sq.makespan <= before);
        assert_valid_placement(&jobs, &sq);
    }
}
