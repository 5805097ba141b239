//! Functional execution of batched embedding lookups against a plan:
//! per-DPU gather, cache matching, partial-sum reduction, and host-side
//! aggregation, with latency charged from observed per-DPU work.
//!
//! Summation runs in a fixed order (cached subsets as precomputed at build,
//! then residual rows ascending, row groups ascending); because table values
//! sit on a dyadic grid every order yields the same bits, and the simulated
//! outputs equal the naive reference exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::cache::match_sample;
use crate::costmodel::{dpu_time, LatencyReport};
use crate::error::{Error, Result};
use crate::model::{CostParams, DpuClusterConfig, EmbeddingTableSpec};
use crate::partition::PartitionPlan;

/// One cached group materialized on a shard: every non-empty subset sum of
/// the group's rows, restricted to the shard's N_c columns.
#[derive(Debug, Clone)]
pub struct CachedGroupImage {
    pub items: Vec<u32>,
    /// sums[(mask - 1) * n_c ..][..n_c] = sum of rows selected by `mask`
    /// (bit i = items[i]).
    pub sums: Vec<f32>,
}

/// MRAM contents of one DPU: the EMT rows of its row group restricted to its
/// column shard, plus the cached subset sums placed on that group.
#[derive(Debug, Clone)]
pub struct DpuImage {
    pub row_group: u32,
    pub shard: u32,
    /// Sorted items resident in this row group; parallel to `emt` rows.
    pub rows: Vec<u32>,
    /// Row-major n_rows x n_c values for columns [shard*n_c, (shard+1)*n_c).
    pub emt: Vec<f32>,
    pub cached: Vec<CachedGroupImage>,
    pub n_c: u32,
}

impl DpuImage {
    /// Bytes this image occupies in MRAM.
    pub fn bytes(&self) -> u64 {
        (self.emt.len() as u64
            + self.cached.iter().map(|c| c.sums.len() as u64).sum::<u64>())
            * 4
    }

    fn row_slice(&self, item: u32) -> &[f32] {
        let pos = self.rows.binary_search(&item).expect("item resident");
        let n_c = self.n_c as usize;
        &self.emt[pos * n_c..(pos + 1) * n_c]
    }
}

/// Everything simulate_forward produces for one batch.
#[derive(Debug, Clone)]
pub struct BatchResult {
    /// batch_size x C reduced embeddings.
    pub outputs: Vec<Vec<f32>>,
    pub latency: LatencyReport,
    /// MRAM reads per DPU, ordered row group-major then shard.
    pub per_dpu_accesses: Vec<u64>,
    /// MRAM reads per row group (every shard of a group reads identically).
    pub per_row_group_accesses: Vec<u64>,
}

impl BatchResult {
    pub fn total_row_group_accesses(&self) -> u64 {
        self.per_row_group_accesses.iter().sum()
    }
}

/// Materializes each DPU's EMT and cache regions from the hash-generated
/// table contents. Deterministic.
pub fn build_images(plan: &PartitionPlan, table: &EmbeddingTableSpec) -> Result<Vec<DpuImage>> {
    if plan.n_items as u64 != table.rows {
        return Err(Error::validation(
            "plan",
            format!(
                "plan covers {} items but table has {} rows",
                plan.n_items, table.rows
            ),
        ));
    }
    let n_c = plan.shape.n_c;
    let mut rows_by_group: Vec<Vec<u32>> = vec![Vec::new(); plan.n_row_groups as usize];
    for (item, &g) in plan.assigned.iter().enumerate() {
        rows_by_group[g as usize].push(item as u32);
    }

    let mut images = Vec::with_capacity((plan.n_row_groups * plan.column_shards) as usize);
    for g in 0..plan.n_row_groups {
        let rows = &rows_by_group[g as usize];
        for shard in 0..plan.column_shards {
            let col0 = shard * n_c;
            let mut emt = Vec::with_capacity(rows.len() * n_c as usize);
            for &item in rows {
                for c in 0..n_c {
                    emt.push(table.value_unchecked(item as u64, col0 + c));
                }
            }
            let mut cached = Vec::new();
            for cg in &plan.cached[g as usize] {
                let m = cg.items.len();
                let mut sums = vec![0.0f32; ((1usize << m) - 1) * n_c as usize];
                for mask in 1..(1usize << m) {
                    let base = (mask - 1) * n_c as usize;
                    // Ascending-index accumulation; exact on the value grid.
                    for (bit, &item) in cg.items.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            for c in 0..n_c as usize {
                                sums[base + c] +=
                                    table.value_unchecked(item as u64, col0 + c as u32);
                            }
                        }
                    }
                }
                cached.push(CachedGroupImage {
                    items: cg.items.clone(),
                    sums,
                });
            }
            let image = DpuImage {
                row_group: g,
                shard,
                rows: rows.clone(),
                emt,
                cached,
                n_c,
            };
            debug_assert_eq!(
                image.bytes(),
                plan.per_row_group_bytes[g as usize].0 + plan.per_row_group_bytes[g as usize].1
            );
            images.push(image);
        }
    }
    Ok(images)
}

/// Naive oracle: per sample, the element-wise sum of its items' full C-wide
/// rows in ascending index order. No partitioning involved.
pub fn reference_forward(
    table: &EmbeddingTableSpec,
    batch: &[Vec<u32>],
) -> Result<Vec<Vec<f32>>> {
    let cols = table.cols;
    let mut out = Vec::with_capacity(batch.len());
    for sample in batch {
        let mut acc = vec![0.0f32; cols as usize];
        for &item in sample {
            if item as u64 >= table.rows {
                return Err(Error::IndexOutOfBounds {
                    what: "item",
                    index: item as u64,
                    bound: table.rows - 1,
                });
            }
            for c in 0..cols {
                acc[c as usize] += table.value_unchecked(item as u64, c);
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// The cache module's matching rule, applied to one row group's slice of a
/// sample: returns the matched intersections (one cached read each) and the
/// residual single-row reads.
pub fn cache_match(
    sample_in_group: &[u32],
    cached: &[crate::cache::CacheGroup],
) -> (Vec<Vec<u32>>, Vec<u32>) {
    match_sample(sample_in_group, cached)
}

/// Executes one batch against the images: per-DPU reads and partial sums,
/// host-side concatenation and aggregation, latency from observed work.
pub fn simulate_forward(
    plan: &PartitionPlan,
    images: &[DpuImage],
    batch: &[Vec<u32>],
    cluster: &DpuClusterConfig,
    params: &CostParams,
) -> Result<BatchResult> {
    let n_rg = plan.n_row_groups as usize;
    let shards = plan.column_shards as usize;
    let n_c = plan.shape.n_c as usize;
    let cols = shards * n_c;
    if images.len() != n_rg * shards {
        return Err(Error::validation(
            "images",
            format!("expected {} DPU images, got {}", n_rg * shards, images.len()),
        ));
    }

    let image_at = |g: usize, s: usize| &images[g * shards + s];
    let mut accesses = vec![0u64; n_rg];
    let mut sample_touch = vec![0u64; n_rg];
    let mut index_counts = vec![0u64; n_rg];
    let mut outputs = Vec::with_capacity(batch.len());
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n_rg];
    let mut touched: Vec<u32> = Vec::new();

    for sample in batch {
        for &idx in sample {
            if idx >= plan.n_items {
                return Err(Error::PlanCoverage {
                    index: idx as u64,
                    bound: plan.n_items as u64,
                });
            }
            let g = plan.assigned[idx as usize];
            if buckets[g as usize].is_empty() {
                touched.push(g);
            }
            buckets[g as usize].push(idx);
        }
        touched.sort_unstable();

        let mut out = vec![0.0f32; cols];
        for &g in &touched {
            let gu = g as usize;
            let bucket = &buckets[gu];
            index_counts[gu] += bucket.len() as u64;
            let (matched, residual) = match_sample(bucket, &plan.cached[gu]);
            let reads = matched.len() + residual.len();
            accesses[gu] += reads as u64;
            if reads > 0 {
                sample_touch[gu] += 1;
            }
            // Each shard of the group performs the same reads on its slice.
            for s in 0..shards {
                let image = image_at(gu, s);
                let slice = &mut out[s * n_c..(s + 1) * n_c];
                for inter in &matched {
                    // Locate the cached group again by membership of the
                    // first intersected item; groups are item-disjoint.
                    let cg_idx = image
                        .cached
                        .iter()
                        .position(|cg| cg.items.binary_search(&inter[0]).is_ok())
                        .expect("matched group present in image");
                    let cg = &image.cached[cg_idx];
                    let mut mask = 0usize;
                    for &item in inter {
                        let bit = cg.items.binary_search(&item).expect("member");
                        mask |= 1 << bit;
                    }
                    let base = (mask - 1) * n_c;
                    for c in 0..n_c {
                        slice[c] += cg.sums[base + c];
                    }
                }
                for &item in &residual {
                    let row = image.row_slice(item);
                    for c in 0..n_c {
                        slice[c] += row[c];
                    }
                }
            }
        }
        for &g in &touched {
            buckets[g as usize].clear();
        }
        touched.clear();
        outputs.push(out);
    }

    // Stage 1: observed per-row-group index counts (cached or not, indices
    // travel); padded buffers transfer in parallel, unpadded sequentially.
    let t1 = {
        let counts = index_counts.iter().map(|&c| c as f64);
        let t = if params.equal_size_padding {
            counts.fold(0.0, f64::max)
        } else {
            counts.sum()
        };
        t * params.t_c
    };
    // Stage 2: observed reads and touched-sample counts per DPU.
    let read_bytes = plan.shape.n_c as u64 * 4;
    let mut t_lookup = Vec::with_capacity(n_rg);
    for g in 0..n_rg {
        t_lookup.push(dpu_time(
            accesses[g] as f64,
            sample_touch[g] as f64,
            read_bytes,
            cluster.tasklets,
            params,
        )?);
    }
    // Stage 3: every DPU returns N_c values per sample, equal-size buffers.
    let t3 = plan.shape.n_c as f64 * batch.len() as f64 * params.t_d;

    let latency = LatencyReport::new(t1, t_lookup, t3);
    let per_dpu_accesses: Vec<u64> = (0..n_rg)
        .flat_map(|g| std::iter::repeat(accesses[g]).take(shards))
        .collect();
    Ok(BatchResult {
        outputs,
        latency,
        per_dpu_accesses,
        per_row_group_accesses: accesses,
    })
}

/// Binary output dump: 16-byte header (magic `EMB1`, u32 rows, u32 cols,
/// u32 reserved), then row-major f32 little-endian values.
pub const OUTPUT_MAGIC: &[u8; 4] = b"EMB1";

pub fn write_outputs_bin(path: &Path, outputs: &[Vec<f32>]) -> Result<()> {
    let rows = outputs.len() as u32;
    let cols = outputs.first().map_or(0, |r| r.len()) as u32;
    let mut f = fs::File::create(path)?;
    f.write_all(OUTPUT_MAGIC)?;
    f.write_all(&rows.to_le_bytes())?;
    f.write_all(&cols.to_le_bytes())?;
    f.write_all(&0u32.to_le_bytes())?;
    let mut buf = Vec::with_capacity(outputs.len() * cols as usize * 4);
    for row in outputs {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_outputs_bin(path: &Path) -> Result<Vec<Vec<f32>>> {
    let data = fs::read(path)?;
    if data.len() < 16 || &data[0..4] != OUTPUT_MAGIC {
        return Err(Error::parse(0, "bad output dump header"));
    }
    let rows = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
    if data.len() != 16 + rows * cols * 4 {
        return Err(Error::parse(0, "output dump length mismatch"));
    }
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for c in 0..cols {
            let off = 16 + (r * cols + c) * 4;
            row.push(f32::from_le_bytes(data[off..off + 4].try_into().unwrap()));
        }
        out.push(row);
    }
    Ok(out)
}

/// Summary of an aggregated simulation run, serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub batches: u64,
    pub batch_size: u32,
    pub stage1_total: f64,
    pub stage2_total: f64,
    pub stage3_total: f64,
    pub total: f64,
    pub stage1_mean: f64,
    pub stage2_mean: f64,
    pub stage3_mean: f64,
    pub total_mean: f64,
    pub per_dpu_accesses: Vec<u64>,
    pub total_mram_accesses: u64,
    pub verified: Option<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{CacheGroup, CacheList};
    use crate::partition::{
        partition_cache_aware, partition_nonuniform, partition_uniform, tile_shape, TileShape,
    };
    use crate::trace::{generate_cooccur_trace, profile, AccessTrace};
    use crate::model::WorkloadSpec;

    fn table(rows: u64, cols: u32) -> EmbeddingTableSpec {
        EmbeddingTableSpec::new(0, rows, cols, 7)
    }

    fn cluster(n_dpu: u32) -> DpuClusterConfig {
        DpuClusterConfig {
            n_dpu,
            ..DpuClusterConfig::default()
        }
    }

    #[test]
    fn uniform_image_holds_expected_rows() {
        let t = table(8, 8);
        let cl = cluster(2);
        let shape = tile_shape(8, &t, &cl).unwrap();
        let plan = partition_uniform(&t, &shape, &cl).unwrap();
        let images = build_images(&plan, &t).unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images[0].rows, vec![0, 1, 2, 3]);
        assert_eq!(images[1].rows, vec![4, 5, 6, 7]);
        for c in 0..8u32 {
            assert_eq!(images[0].emt[c as usize], t.value(0, c).unwrap());
        }
    }

    #[test]
    fn cached_sums_match_recomputed_rows() {
        let t = table(8, 4);
        let cl = cluster(2);
        let shape = TileShape { n_r: 4, n_c: 4 };
        let mut counts = vec![1u64; 8];
        counts[4] = 5;
        counts[5] = 5;
        let prof = crate::trace::FrequencyProfile {
            counts,
            total_samples: 10,
            avg_red: 1.0,
        };
        let list = CacheList::new(vec![CacheGroup::new(vec![4, 5], 3).unwrap()]).unwrap();
        let plan = partition_cache_aware(&prof, &list, &t, &shape, &cl).unwrap();
        let images = build_images(&plan, &t).unwrap();
        let g = plan.assigned[4] as usize;
        let img = &images[g]; // single shard
        assert_eq!(img.cached.len(), 1);
        let cg = &img.cached[0];
        // mask 0b11 = both rows.
        let base = (0b11 - 1) * 4;
        for c in 0..4usize {
            let want = t.value(4, c as u32).unwrap() + t.value(5, c as u32).unwrap();
            assert_eq!(cg.sums[base + c].to_bits(), want.to_bits());
        }
        // Byte accounting matches the plan.
        for img in &images {
            let (emt, cache) = plan.per_row_group_bytes[img.row_group as usize];
            assert_eq!(img.bytes(), emt + cache);
            assert!(img.bytes() <= cl.mram_bytes);
        }
    }

    #[test]
    fn reference_forward_basics() {
        let t = table(10, 6);
        let out = reference_forward(&t, &[vec![3]]).unwrap();
        for c in 0..6u32 {
            assert_eq!(out[0][c as usize], t.value(3, c).unwrap());
        }
        let out = reference_forward(&t, &[vec![2, 7]]).unwrap();
        for c in 0..6u32 {
            let want = t.value(2, c).unwrap() + t.value(7, c).unwrap();
            assert_eq!(out[0][c as usize].to_bits(), want.to_bits());
        }
        let out = reference_forward(&t, &[vec![]]).unwrap();
        assert!(out[0].iter().all(|&v| v == 0.0));
        assert!(reference_forward(&t, &[vec![10]]).is_err());
    }

    fn cached_pair_setup() -> (
        EmbeddingTableSpec,
        DpuClusterConfig,
        PartitionPlan,
        Vec<DpuImage>,
    ) {
        let t = table(6, 8);
        let cl = cluster(2);
        let shape = tile_shape(8, &t, &cl).unwrap();
        let mut counts = vec![0u64; 6];
        counts[1] = 10;
        counts[4] = 10;
        counts[5] = 10;
        let prof = crate::trace::FrequencyProfile {
            counts,
            total_samples: 10,
            avg_red: 3.0,
        };
        let list = CacheList::new(vec![CacheGroup::new(vec![4, 5], 10).unwrap()]).unwrap();
        let plan = partition_cache_aware(&prof, &list, &t, &shape, &cl).unwrap();
        let images = build_images(&plan, &t).unwrap();
        (t, cl, plan, images)
    }

    #[test]
    fn cached_pair_costs_one_read() {
        let (t, cl, plan, images) = cached_pair_setup();
        let batch = vec![vec![1, 4, 5]];
        let res = simulate_forward(&plan, &images, &batch, &cl, &CostParams::default()).unwrap();
        // Two reads total: the {4,5} cached sum plus item 1's row.
        assert_eq!(res.total_row_group_accesses(), 2);
        let reference = reference_forward(&t, &batch).unwrap();
        assert_eq!(res.outputs, reference);

        // Without the cache the same batch costs three reads.
        let prof = crate::trace::FrequencyProfile {
            counts: vec![0, 10, 0, 0, 10, 10],
            total_samples: 10,
            avg_red: 3.0,
        };
        let shape = tile_shape(8, &t, &cl).unwrap();
        let nu = partition_nonuniform(&prof, &t, &shape, &cl).unwrap();
        let nu_images = build_images(&nu, &t).unwrap();
        let res_nu =
            simulate_forward(&nu, &nu_images, &batch, &cl, &CostParams::default()).unwrap();
        assert_eq!(res_nu.total_row_group_accesses(), 3);
    }

    #[test]
    fn singleton_hit_reads_from_emt() {
        let (t, cl, plan, images) = cached_pair_setup();
        let g = plan.assigned[4] as usize;
        let (matched, residual) = cache_match(&[4], &plan.cached[g]);
        assert!(matched.is_empty());
        assert_eq!(residual, vec![4]);

        let batch = vec![vec![4]];
        let res = simulate_forward(&plan, &images, &batch, &cl, &CostParams::default()).unwrap();
        assert_eq!(res.total_row_group_accesses(), 1);
        assert_eq!(res.outputs, reference_forward(&t, &batch).unwrap());
    }

    #[test]
    fn simulation_matches_reference_on_cooccur_trace() {
        let groups = vec![vec![2, 3, 4], vec![10, 11, 12]];
        let tr = generate_cooccur_trace(64, 256, 8.0, 1.0, &groups, 0.6, 13).unwrap();
        let prof = profile(&tr).unwrap();
        let t = table(64, 16);
        let cl = cluster(8);
        let shape = tile_shape(4, &t, &cl).unwrap();
        let list = CacheList::new(vec![
            CacheGroup::new(vec![2, 3, 4], estimate(&tr, &[2, 3, 4])).unwrap(),
            CacheGroup::new(vec![10, 11, 12], estimate(&tr, &[10, 11, 12])).unwrap(),
        ])
        .unwrap();
        let plan = partition_cache_aware(&prof, &list, &t, &shape, &cl).unwrap();
        let images = build_images(&plan, &t).unwrap();
        let res =
            simulate_forward(&plan, &images, &tr.samples, &cl, &CostParams::default()).unwrap();
        let reference = reference_forward(&t, &tr.samples).unwrap();
        assert_eq!(res.outputs, reference);

        // Latency consistency: stage 2 equals dpu_time of the observed counts.
        for g in 0..plan.n_row_groups as usize {
            let expect = dpu_time(
                res.per_row_group_accesses[g] as f64,
                tr.samples
                    .iter()
                    .filter(|s| s.iter().any(|&i| plan.assigned[i as usize] == g as u32))
                    .count() as f64,
                plan.shape.n_c as u64 * 4,
                cl.tasklets,
                &CostParams::default(),
            )
            .unwrap();
            assert_eq!(res.latency.t_lookup_per_dpu[g], expect);
        }
        let lr = &res.latency;
        assert_eq!(lr.total, lr.t_cpu_to_dpu + lr.t_lookup_max + lr.t_dpu_to_cpu);
    }

    fn estimate(tr: &AccessTrace, items: &[u32]) -> u64 {
        crate::cache::estimate_benefit(tr, items)
    }

    #[test]
    fn coverage_error_on_foreign_index() {
        let (_, cl, plan, images) = cached_pair_setup();
        let err = simulate_forward(&plan, &images, &[vec![99]], &cl, &CostParams::default());
        assert!(matches!(err, Err(Error::PlanCoverage { .. })));
    }

    #[test]
    fn lookup_share_drops_under_cache_aware_plan() {
        // Engineered heavy co-occurrence: samples union several planted
        // quadruples, so caching strips most reads and stage 2 loses its
        // dominance of the modeled batch latency.
        let n_groups = 20u32;
        let quad = |g: u32| -> Vec<u32> { (4 * g..4 * g + 4).collect() };
        let mut samples = Vec::new();
        for s in 0..512u32 {
            let mut sample = Vec::new();
            for k in 0..9u32 {
                let g = (s.wrapping_mul(31).wrapping_add(k * 7)) % n_groups;
                sample.extend(quad(g));
            }
            sample.extend([90 + (s % 8), 99 + (s % 5)]);
            samples.push(sample);
        }
        let tr = AccessTrace::new(0, 128, samples).unwrap();
        let prof = profile(&tr).unwrap();
        let t = table(128, 8);
        let cl = cluster(8);
        let shape = tile_shape(8, &t, &cl).unwrap();

        let uni = partition_uniform(&t, &shape, &cl).unwrap();
        let groups: Vec<CacheGroup> = (0..n_groups)
            .map(|g| CacheGroup::new(quad(g), estimate(&tr, &quad(g))).unwrap())
            .collect();
        let list = CacheList::new(groups).unwrap();
        let ca = partition_cache_aware(&prof, &list, &t, &shape, &cl).unwrap();

        let mut params = CostParams::default();
        params.t_out = 0.0;
        let batch = &tr.samples[..64];
        let u_img = build_images(&uni, &t).unwrap();
        let c_img = build_images(&ca, &t).unwrap();
        let ru = simulate_forward(&uni, &u_img, batch, &cl, &params).unwrap();
        let rc = simulate_forward(&ca, &c_img, batch, &cl, &params).unwrap();
        let share = |r: &BatchResult| r.latency.t_lookup_max / r.latency.total;
        assert!(
            share(&rc) < share(&ru),
            "cache-aware share {} vs uniform {}",
            share(&rc),
            share(&ru)
        );
        assert!(share(&rc) < 0.55, "cache-aware share {}", share(&rc));
        assert_eq!(rc.outputs, reference_forward(&t, batch).unwrap());
        let _ = WorkloadSpec::default();
    }

    #[test]
    fn output_dump_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.bin");
        let outputs = vec![vec![1.0f32, -0.5], vec![0.25, 2.0]];
        write_outputs_bin(&p, &outputs).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..4], b"EMB1");
        assert_eq!(bytes.len(), 16 + 4 * 4);
        assert_eq!(read_outputs_bin(&p).unwrap(), outputs);
    }
}
