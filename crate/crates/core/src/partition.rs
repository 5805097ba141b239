//! Placement planning: uniform tile-shape optimization, greedy non-uniform
//! bin packing over access frequencies, and cache-aware partitioning that
//! balances combined EMT + cache accesses.
//!
//! A table is tiled N_r x N_c. The C / N_c column shards of the same row
//! range live on distinct DPUs which together form a *row group*; load is
//! symmetric across a group's shards, so all balancing happens at row-group
//! granularity.
//!
//! Plan file format (text, versioned): `emtplan v1` header, a `table` line,
//! a `shape` line (`N_r N_c n_row_groups column_shards`), a `weights` line,
//! run-length `item <a>-<b> -> group <g>` assignments, then
//! `cache <group>: <items>;<benefit>` placements.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::cache::{cache_storage_bytes, match_sample, CacheGroup, CacheList, DEFAULT_M_MAX};
use crate::costmodel;
use crate::error::{Error, Result};
use crate::model::{CostParams, DpuClusterConfig, EmbeddingTableSpec, WorkloadSpec};
use crate::trace::{AccessTrace, FrequencyProfile};

/// Rows x columns of the table slice stored on one DPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileShape {
    pub n_r: u64,
    pub n_c: u32,
}

/// Column widths the uniform optimizer considers: N_c * 4 B must stay within
/// the flat region of the MRAM read curve.
pub const UNIFORM_NC_CANDIDATES: [u32; 4] = [2, 4, 6, 8];

pub fn column_shards(n_c: u32, table: &EmbeddingTableSpec) -> Result<u32> {
    if n_c < 1 {
        return Err(Error::validation("shape.n_c", "must be >= 1"));
    }
    if table.cols % n_c != 0 {
        return Err(Error::validation(
            "shape.n_c",
            format!("{} does not divide table cols {}", n_c, table.cols),
        ));
    }
    Ok(table.cols / n_c)
}

pub fn row_groups(shards: u32, cluster: &DpuClusterConfig) -> Result<u32> {
    let n_rg = cluster.n_dpu / shards;
    if n_rg < 1 {
        return Err(Error::validation(
            "cluster.n_dpu",
            format!(
                "{} DPUs cannot host {} column shards of one row group",
                cluster.n_dpu, shards
            ),
        ));
    }
    Ok(n_rg)
}

fn min_dpus_for(table: &EmbeddingTableSpec, cluster: &DpuClusterConfig) -> u64 {
    table.total_bytes().div_ceil(cluster.mram_bytes)
}

pub fn check_tile_capacity(
    shape: &TileShape,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
) -> Result<()> {
    let tile_bytes = shape.n_r * shape.n_c as u64 * table.elem_bytes as u64;
    if tile_bytes > cluster.mram_bytes {
        return Err(Error::Infeasible {
            message: format!(
                "tile of {} rows x {} cols needs {} bytes but MRAM holds {}",
                shape.n_r, shape.n_c, tile_bytes, cluster.mram_bytes
            ),
            min_dpus: min_dpus_for(table, cluster),
        });
    }
    Ok(())
}

fn shape_for(
    n_c: u32,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
) -> Result<TileShape> {
    let shards = column_shards(n_c, table)?;
    let n_rg = row_groups(shards, cluster)?;
    let n_r = table.rows.div_ceil(n_rg as u64);
    let shape = TileShape { n_r, n_c };
    check_tile_capacity(&shape, table, cluster)?;
    Ok(shape)
}

/// Uniform tile shape for a legal column width (N_c in {2, 4, 6, 8}).
pub fn tile_shape(
    n_c: u32,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
) -> Result<TileShape> {
    if !UNIFORM_NC_CANDIDATES.contains(&n_c) {
        return Err(Error::validation(
            "shape.n_c",
            format!("must be one of {UNIFORM_NC_CANDIDATES:?}, got {n_c}"),
        ));
    }
    shape_for(n_c, table, cluster)
}

/// Tile shape without the N_c <= 8 bound; used by sweep mode, which widens
/// lookups past the flat region of the read curve on purpose.
pub fn tile_shape_relaxed(
    n_c: u32,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
) -> Result<TileShape> {
    if n_c % 2 != 0 {
        return Err(Error::validation(
            "shape.n_c",
            format!("must be even, got {n_c}"),
        ));
    }
    shape_for(n_c, table, cluster)
}

/// Objective value per candidate N_c; `None` marks infeasible candidates.
pub fn evaluate_shape_candidates(
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
    workload: &WorkloadSpec,
    params: &CostParams,
) -> Vec<(u32, Option<f64>)> {
    UNIFORM_NC_CANDIDATES
        .iter()
        .map(|&n_c| {
            let obj = tile_shape(n_c, table, cluster)
                .and_then(|shape| costmodel::objective(&shape, table, cluster, workload, params))
                .ok();
            (n_c, obj)
        })
        .collect()
}

/// Exhaustively evaluates the stage-time objective over the legal column
/// widths and returns the argmin; ties go to the larger N_c (fewer, larger
/// MRAM reads).
pub fn optimize_uniform_shape(
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
    workload: &WorkloadSpec,
    params: &CostParams,
) -> Result<TileShape> {
    let mut best: Option<(f64, u32)> = None;
    for (n_c, obj) in evaluate_shape_candidates(table, cluster, workload, params) {
        if let Some(obj) = obj {
            let take = match best {
                None => true,
                Some((b, _)) => obj <= b,
            };
            if take {
                best = Some((obj, n_c));
            }
        }
    }
    match best {
        Some((_, n_c)) => tile_shape(n_c, table, cluster),
        None => Err(Error::Infeasible {
            message: format!(
                "no legal column width fits table {} ({} rows x {} cols) on {} DPUs",
                table.table_id, table.rows, table.cols, cluster.n_dpu
            ),
            min_dpus: min_dpus_for(table, cluster),
        }),
    }
}

/// Item -> row-group placement plus per-group residency accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub table_id: u32,
    pub n_items: u32,
    pub shape: TileShape,
    pub column_shards: u32,
    pub n_row_groups: u32,
    /// assigned[item] = row group holding that item's embedding row.
    pub assigned: Vec<u32>,
    /// Cached groups placed per row group, in plan (matching) order.
    pub cached: Vec<Vec<CacheGroup>>,
    /// Expected share of a batch's index traffic per row group.
    pub group_weights: Vec<f64>,
    pub rows_per_group: Vec<u64>,
    /// (emt_bytes, cache_bytes) per member DPU of each row group.
    pub per_row_group_bytes: Vec<(u64, u64)>,
}

impl PartitionPlan {
    pub fn total_cached_groups(&self) -> usize {
        self.cached.iter().map(|c| c.len()).sum()
    }

    /// Checks completeness, capacity, and cache co-location.
    pub fn validate(&self, cluster: &DpuClusterConfig) -> Result<()> {
        if self.assigned.len() != self.n_items as usize {
            return Err(Error::validation("plan.assigned", "must cover every item"));
        }
        for (i, &g) in self.assigned.iter().enumerate() {
            if g >= self.n_row_groups {
                return Err(Error::validation(
                    "plan.assigned",
                    format!("item {i} assigned to nonexistent group {g}"),
                ));
            }
        }
        for (g, (emt, cache)) in self.per_row_group_bytes.iter().enumerate() {
            if emt + cache > cluster.mram_bytes {
                return Err(Error::validation(
                    "plan.per_row_group_bytes",
                    format!(
                        "group {g} needs {} bytes but MRAM holds {}",
                        emt + cache,
                        cluster.mram_bytes
                    ),
                ));
            }
        }
        for (g, groups) in self.cached.iter().enumerate() {
            for cg in groups {
                for &item in &cg.items {
                    if self.assigned[item as usize] != g as u32 {
                        return Err(Error::validation(
                            "plan.cached",
                            format!("cached item {item} not co-located with group {g}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn plan_geometry(
    table: &EmbeddingTableSpec,
    shape: &TileShape,
    cluster: &DpuClusterConfig,
) -> Result<(u32, u32, u32)> {
    let shards = column_shards(shape.n_c, table)?;
    let n_rg = row_groups(shards, cluster)?;
    check_tile_capacity(shape, table, cluster)?;
    let n_items = u32::try_from(table.rows)
        .map_err(|_| Error::validation("table.rows", "plans support up to 2^32 items"))?;
    Ok((shards, n_rg, n_items))
}

fn row_bytes(shape: &TileShape, table: &EmbeddingTableSpec) -> u64 {
    shape.n_c as u64 * table.elem_bytes as u64
}

/// Contiguous equal-row tiling: rows [g*N_r, (g+1)*N_r) go to group g; the
/// last group may run short.
pub fn partition_uniform(
    table: &EmbeddingTableSpec,
    shape: &TileShape,
    cluster: &DpuClusterConfig,
) -> Result<PartitionPlan> {
    let (shards, n_rg, n_items) = plan_geometry(table, shape, cluster)?;
    let mut assigned = vec![0u32; n_items as usize];
    let mut rows_per_group = vec![0u64; n_rg as usize];
    for item in 0..n_items as u64 {
        let g = (item / shape.n_r).min(n_rg as u64 - 1) as u32;
        assigned[item as usize] = g;
        rows_per_group[g as usize] += 1;
    }
    let rb = row_bytes(shape, table);
    let per_row_group_bytes = rows_per_group.iter().map(|&r| (r * rb, 0)).collect();
    let group_weights = rows_per_group
        .iter()
        .map(|&r| r as f64 / table.rows as f64)
        .collect();
    Ok(PartitionPlan {
        table_id: table.table_id,
        n_items,
        shape: *shape,
        column_shards: shards,
        n_row_groups: n_rg,
        assigned,
        cached: vec![Vec::new(); n_rg as usize],
        group_weights,
        rows_per_group,
        per_row_group_bytes,
    })
}

/// Items in descending frequency order, ties by ascending id.
fn items_by_frequency(profile: &FrequencyProfile) -> Vec<u32> {
    let mut items: Vec<u32> = (0..profile.counts.len() as u32).collect();
    items.sort_unstable_by_key(|&i| (Reverse(profile.counts[i as usize]), i));
    items
}

fn freq_weights(profile: &FrequencyProfile, assigned: &[u32], n_rg: u32, rows: &[u64]) -> Vec<f64> {
    let total = profile.total_accesses();
    if total == 0 {
        let n = assigned.len() as f64;
        return rows.iter().map(|&r| r as f64 / n).collect();
    }
    let mut per_group = vec![0u64; n_rg as usize];
    for (i, &g) in assigned.iter().enumerate() {
        per_group[g as usize] += profile.counts[i];
    }
    per_group.iter().map(|&f| f as f64 / total as f64).collect()
}

/// Greedy bin packing: items in descending frequency order each go to the
/// row group with the lowest accumulated frequency that still has row
/// capacity (ties: lowest group id).
pub fn partition_nonuniform(
    profile: &FrequencyProfile,
    table: &EmbeddingTableSpec,
    shape: &TileShape,
    cluster: &DpuClusterConfig,
) -> Result<PartitionPlan> {
    let (shards, n_rg, n_items) = plan_geometry(table, shape, cluster)?;
    if profile.counts.len() != n_items as usize {
        return Err(Error::validation(
            "profile",
            format!(
                "profile covers {} items but table has {}",
                profile.counts.len(),
                n_items
            ),
        ));
    }
    let rb = row_bytes(shape, table);
    let cap_rows = cluster.mram_bytes / rb;
    if cap_rows * (n_rg as u64) < n_items as u64 {
        return Err(Error::CapacityExhausted(format!(
            "{} items exceed {} row groups x {} rows of MRAM capacity",
            n_items, n_rg, cap_rows
        )));
    }

    let mut assigned = vec![0u32; n_items as usize];
    let mut rows_per_group = vec![0u64; n_rg as usize];
    // Min-heap on (accumulated frequency, group id).
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> =
        (0..n_rg).map(|g| Reverse((0u64, g))).collect();
    for item in items_by_frequency(profile) {
        let g = loop {
            let Reverse((load, g)) = heap
                .pop()
                .ok_or_else(|| Error::CapacityExhausted("all row groups full".into()))?;
            if rows_per_group[g as usize] < cap_rows {
                heap.push(Reverse((load + profile.counts[item as usize], g)));
                break g;
            }
            // Full groups leave the heap for good.
        };
        assigned[item as usize] = g;
        rows_per_group[g as usize] += 1;
    }

    let per_row_group_bytes = rows_per_group.iter().map(|&r| (r * rb, 0)).collect();
    let group_weights = freq_weights(profile, &assigned, n_rg, &rows_per_group);
    Ok(PartitionPlan {
        table_id: table.table_id,
        n_items,
        shape: *shape,
        column_shards: shards,
        n_row_groups: n_rg,
        assigned,
        cached: vec![Vec::new(); n_rg as usize],
        group_weights,
        rows_per_group,
        per_row_group_bytes,
    })
}

/// Step-by-step diagnostics of a cache-aware run, for auditing the greedy
/// evolution on small instances.
#[derive(Debug, Clone)]
pub struct CacheAwareReport {
    pub plan: PartitionPlan,
    /// part_count snapshot after each phase-1 group and each phase-2 item.
    pub part_count_steps: Vec<Vec<i64>>,
    pub final_part_counts: Vec<i64>,
    /// Groups that fit no row group's cache space and fell back to plain rows.
    pub demoted: Vec<CacheGroup>,
}

/// Cache-aware partitioning.
///
/// Phase 1 walks the cache list in order: each group goes, with all its
/// items and subset sums, to the row group with the lowest running
/// part_count that can physically hold it, then the group's benefit is
/// subtracted from that counter. Phase 2 places the remaining items like
/// [`partition_nonuniform`], against the same counters.
///
/// The cache budget is a single pool of `cache_fraction` times the bytes the
/// whole list would need; groups that no longer fit the pool (or no row
/// group's MRAM) are demoted to uncached items with a warning.
pub fn partition_cache_aware(
    profile: &FrequencyProfile,
    cache_list: &CacheList,
    table: &EmbeddingTableSpec,
    shape: &TileShape,
    cluster: &DpuClusterConfig,
) -> Result<PartitionPlan> {
    Ok(cache_aware_impl(profile, cache_list, table, shape, cluster, false)?.plan)
}

/// [`partition_cache_aware`] with full part_count step recording.
pub fn partition_cache_aware_traced(
    profile: &FrequencyProfile,
    cache_list: &CacheList,
    table: &EmbeddingTableSpec,
    shape: &TileShape,
    cluster: &DpuClusterConfig,
) -> Result<CacheAwareReport> {
    cache_aware_impl(profile, cache_list, table, shape, cluster, true)
}

fn cache_aware_impl(
    profile: &FrequencyProfile,
    cache_list: &CacheList,
    table: &EmbeddingTableSpec,
    shape: &TileShape,
    cluster: &DpuClusterConfig,
    record_steps: bool,
) -> Result<CacheAwareReport> {
    let (shards, n_rg, n_items) = plan_geometry(table, shape, cluster)?;
    if profile.counts.len() != n_items as usize {
        return Err(Error::validation(
            "profile",
            format!(
                "profile covers {} items but table has {}",
                profile.counts.len(),
                n_items
            ),
        ));
    }
    for g in &cache_list.groups {
        if let Some(&bad) = g.items.iter().find(|&&i| i >= n_items) {
            return Err(Error::IndexOutOfBounds {
                what: "cached item",
                index: bad as u64,
                bound: n_items as u64 - 1,
            });
        }
    }

    let rb = row_bytes(shape, table);
    let group_bytes: Vec<Option<u64>> = cache_list
        .groups
        .iter()
        .map(|g| cache_storage_bytes(g.len(), shape.n_c, table.elem_bytes, DEFAULT_M_MAX).ok())
        .collect();
    // Global pool: cache_fraction of the storage the full list would need.
    let required: u64 = group_bytes.iter().map(|b| b.unwrap_or(0)).sum();
    let mut pool = (cluster.cache_fraction * required as f64).floor() as u64;

    let mut assigned: Vec<Option<u32>> = vec![None; n_items as usize];
    let mut rows_used = vec![0u64; n_rg as usize];
    let mut cache_bytes = vec![0u64; n_rg as usize];
    let mut part_count = vec![0i64; n_rg as usize];
    let mut cached: Vec<Vec<CacheGroup>> = vec![Vec::new(); n_rg as usize];
    let mut steps = Vec::new();
    let mut demoted = Vec::new();

    // Phase 1: cache hits.
    for (gi, group) in cache_list.groups.iter().enumerate() {
        let bytes = match group_bytes[gi] {
            Some(b) => b,
            None => {
                log::warn!(
                    "cache group {:?} exceeds the size guard; demoting to uncached rows",
                    group.items
                );
                demoted.push(group.clone());
                continue;
            }
        };
        let m = group.len() as u64;
        let target = if bytes > pool {
            None
        } else {
            (0..n_rg)
                .filter(|&g| {
                    let gu = g as usize;
                    (rows_used[gu] + m) * rb + cache_bytes[gu] + bytes <= cluster.mram_bytes
                })
                .min_by_key(|&g| (part_count[g as usize], g))
        };
        let Some(target) = target else {
            log::warn!(
                "no cache capacity left for group {:?}; demoting to uncached rows",
                group.items
            );
            demoted.push(group.clone());
            continue;
        };
        let gu = target as usize;
        for &item in &group.items {
            assigned[item as usize] = Some(target);
            rows_used[gu] += 1;
            part_count[gu] += profile.counts[item as usize] as i64;
        }
        part_count[gu] -= group.benefit as i64;
        cache_bytes[gu] += bytes;
        pool -= bytes;
        cached[gu].push(group.clone());
        if record_steps {
            steps.push(part_count.clone());
        }
    }

    // Phase 2: cache misses, by descending frequency. The cache regions are
    // fixed now, so each group's row budget is what MRAM has left.
    let max_rows: Vec<u64> = (0..n_rg as usize)
        .map(|g| (cluster.mram_bytes - cache_bytes[g].min(cluster.mram_bytes)) / rb)
        .collect();
    let mut heap: BinaryHeap<Reverse<(i64, u32)>> = (0..n_rg)
        .map(|g| Reverse((part_count[g as usize], g)))
        .collect();
    for item in items_by_frequency(profile) {
        if assigned[item as usize].is_some() {
            continue;
        }
        let g = loop {
            let Reverse((_, g)) = heap.pop().ok_or_else(|| {
                Error::CapacityExhausted("all row groups full of rows and cached sums".into())
            })?;
            if rows_used[g as usize] < max_rows[g as usize] {
                break g;
            }
            // Full groups leave the heap for good.
        };
        let gu = g as usize;
        assigned[item as usize] = Some(g);
        rows_used[gu] += 1;
        part_count[gu] += profile.counts[item as usize] as i64;
        heap.push(Reverse((part_count[gu], g)));
        if record_steps {
            steps.push(part_count.clone());
        }
    }

    let assigned: Vec<u32> = assigned.into_iter().map(|a| a.expect("all items placed")).collect();
    let per_row_group_bytes: Vec<(u64, u64)> = rows_used
        .iter()
        .zip(&cache_bytes)
        .map(|(&r, &c)| (r * rb, c))
        .collect();
    let group_weights = freq_weights(profile, &assigned, n_rg, &rows_used);
    let plan = PartitionPlan {
        table_id: table.table_id,
        n_items,
        shape: *shape,
        column_shards: shards,
        n_row_groups: n_rg,
        assigned,
        cached,
        group_weights,
        rows_per_group: rows_used,
        per_row_group_bytes,
    };
    Ok(CacheAwareReport {
        plan,
        part_count_steps: steps,
        final_part_counts: part_count,
        demoted,
    })
}

/// Replayed load-balance metrics for a plan over a trace.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceMetrics {
    /// MRAM reads charged per row group: uncached assigned items plus one
    /// per cache-group hit.
    pub per_group: Vec<u64>,
    pub total: u64,
    /// Coefficient of variation (population std dev / mean).
    pub cv: f64,
    /// None when some group received no accesses.
    pub max_min_ratio: Option<f64>,
}

pub fn balance_metrics(plan: &PartitionPlan, trace: &AccessTrace) -> Result<BalanceMetrics> {
    if trace.n_items > plan.n_items {
        return Err(Error::PlanCoverage {
            index: trace.n_items as u64 - 1,
            bound: plan.n_items as u64,
        });
    }
    let n_rg = plan.n_row_groups as usize;
    let mut per_group = vec![0u64; n_rg];
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n_rg];
    let mut touched: Vec<u32> = Vec::new();
    for sample in &trace.samples {
        for &idx in sample {
            let g = plan.assigned[idx as usize];
            if buckets[g as usize].is_empty() {
                touched.push(g);
            }
            buckets[g as usize].push(idx);
        }
        for &g in &touched {
            let gu = g as usize;
            let (matched, residual) = match_sample(&buckets[gu], &plan.cached[gu]);
            per_group[gu] += (matched.len() + residual.len()) as u64;
            buckets[gu].clear();
        }
        touched.clear();
    }
    let total: u64 = per_group.iter().sum();
    let mean = total as f64 / n_rg as f64;
    let var = per_group
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n_rg as f64;
    let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
    let max = per_group.iter().copied().max().unwrap_or(0);
    let min = per_group.iter().copied().min().unwrap_or(0);
    let max_min_ratio = if min > 0 { Some(max as f64 / min as f64) } else { None };
    Ok(BalanceMetrics {
        per_group,
        total,
        cv,
        max_min_ratio,
    })
}

/// Serializes a plan in the versioned text format.
pub fn write_plan(path: &Path, plan: &PartitionPlan, table: &EmbeddingTableSpec) -> Result<()> {
    let mut out = String::new();
    out.push_str("emtplan v1\n");
    out.push_str(&format!(
        "table {} items {} cols {} elem {}\n",
        plan.table_id, plan.n_items, table.cols, table.elem_bytes
    ));
    out.push_str(&format!(
        "shape {} {} {} {}\n",
        plan.shape.n_r, plan.shape.n_c, plan.n_row_groups, plan.column_shards
    ));
    let weights: Vec<String> = plan.group_weights.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("weights {}\n", weights.join(" ")));
    let mut i = 0usize;
    while i < plan.assigned.len() {
        let g = plan.assigned[i];
        let mut j = i;
        while j + 1 < plan.assigned.len() && plan.assigned[j + 1] == g {
            j += 1;
        }
        if i == j {
            out.push_str(&format!("item {i} -> group {g}\n"));
        } else {
            out.push_str(&format!("item {i}-{j} -> group {g}\n"));
        }
        i = j + 1;
    }
    for (g, groups) in plan.cached.iter().enumerate() {
        for cg in groups {
            let items: Vec<String> = cg.items.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("cache {g}: {};{}\n", items.join(" "), cg.benefit));
        }
    }
    Ok(fs::write(path, out)?)
}

pub fn load_plan(path: &Path) -> Result<PartitionPlan> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));

    let (n, header) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty plan file"))?;
    if header != "emtplan v1" {
        return Err(Error::parse(n, format!("unsupported header '{header}'")));
    }

    fn fields<'a>(line: &'a str, n: usize, pattern: &[&str]) -> Result<Vec<&'a str>> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != pattern.len() {
            return Err(Error::parse(n, format!("expected `{}`", pattern.join(" "))));
        }
        for (t, p) in toks.iter().zip(pattern) {
            if *p != "*" && t != p {
                return Err(Error::parse(n, format!("expected `{}`", pattern.join(" "))));
            }
        }
        Ok(toks)
    }
    fn num<T: std::str::FromStr>(tok: &str, n: usize) -> Result<T> {
        tok.parse()
            .map_err(|_| Error::parse(n, format!("invalid number '{tok}'")))
    }

    let (n, line) = lines.next().ok_or_else(|| Error::parse(0, "missing table line"))?;
    let t = fields(line, n, &["table", "*", "items", "*", "cols", "*", "elem", "*"])?;
    let table_id: u32 = num(t[1], n)?;
    let n_items: u32 = num(t[3], n)?;

    let (n, line) = lines.next().ok_or_else(|| Error::parse(0, "missing shape line"))?;
    let t = fields(line, n, &["shape", "*", "*", "*", "*"])?;
    let shape = TileShape {
        n_r: num(t[1], n)?,
        n_c: num(t[2], n)?,
    };
    let n_row_groups: u32 = num(t[3], n)?;
    let column_shards: u32 = num(t[4], n)?;

    let (n, line) = lines.next().ok_or_else(|| Error::parse(0, "missing weights line"))?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some("weights") {
        return Err(Error::parse(n, "expected `weights ...`"));
    }
    let mut group_weights = Vec::new();
    for tok in toks {
        group_weights.push(num::<f64>(tok, n)?);
    }
    if group_weights.len() != n_row_groups as usize {
        return Err(Error::parse(n, "weight count != row group count"));
    }

    let mut assigned: Vec<Option<u32>> = vec![None; n_items as usize];
    let mut cached: Vec<Vec<CacheGroup>> = vec![Vec::new(); n_row_groups as usize];
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("item ") {
            let t = fields(rest, n, &["*", "->", "group", "*"])?;
            let g: u32 = num(t[3], n)?;
            if g >= n_row_groups {
                return Err(Error::parse(n, format!("group {g} out of range")));
            }
            let (a, b) = match t[0].split_once('-') {
                Some((a, b)) => (num::<u32>(a, n)?, num::<u32>(b, n)?),
                None => {
                    let a = num::<u32>(t[0], n)?;
                    (a, a)
                }
            };
            if b < a || b as usize >= assigned.len() {
                return Err(Error::parse(n, format!("bad item range {}", t[0])));
            }
            for i in a..=b {
                if assigned[i as usize].replace(g).is_some() {
                    return Err(Error::parse(n, format!("item {i} assigned twice")));
                }
            }
        } else if let Some(rest) = line.strip_prefix("cache ") {
            let (gpart, spec) = rest
                .split_once(':')
                .ok_or_else(|| Error::parse(n, "expected `cache <group>: <items>;<benefit>`"))?;
            let g: u32 = num(gpart.trim(), n)?;
            if g >= n_row_groups {
                return Err(Error::parse(n, format!("group {g} out of range")));
            }
            let (items_part, benefit_part) = spec
                .split_once(';')
                .ok_or_else(|| Error::parse(n, "expected `<items>;<benefit>`"))?;
            let mut items = Vec::new();
            for tok in items_part.split_whitespace() {
                items.push(num::<u32>(tok, n)?);
            }
            let benefit: u64 = num(benefit_part.trim(), n)?;
            cached[g as usize].push(
                CacheGroup::new(items, benefit).map_err(|e| Error::parse(n, e.to_string()))?,
            );
        } else {
            return Err(Error::parse(n, format!("unrecognized line '{line}'")));
        }
    }

    let mut rows_per_group = vec![0u64; n_row_groups as usize];
    let mut assigned_out = Vec::with_capacity(n_items as usize);
    for (i, a) in assigned.into_iter().enumerate() {
        let g = a.ok_or_else(|| Error::parse(0, format!("item {i} never assigned")))?;
        rows_per_group[g as usize] += 1;
        assigned_out.push(g);
    }
    let rb = shape.n_c as u64 * 4;
    let per_row_group_bytes: Vec<(u64, u64)> = (0..n_row_groups as usize)
        .map(|g| {
            let cache: u64 = cached[g]
                .iter()
                .map(|cg| ((1u64 << cg.len()) - 1) * rb)
                .sum();
            (rows_per_group[g] * rb, cache)
        })
        .collect();
    let plan = PartitionPlan {
        table_id,
        n_items,
        shape,
        column_shards,
        n_row_groups,
        assigned: assigned_out,
        cached,
        group_weights,
        rows_per_group,
        per_row_group_bytes,
    };
    for (g, groups) in plan.cached.iter().enumerate() {
        for cg in groups {
            for &item in &cg.items {
                if plan.assigned[item as usize] != g as u32 {
                    return Err(Error::parse(
                        0,
                        format!("cached item {item} not assigned to group {g}"),
                    ));
                }
            }
        }
    }
    Ok(plan)
}
