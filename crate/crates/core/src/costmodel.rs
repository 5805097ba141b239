//! Latency model: the MRAM read curve, the three embedding stage times, the
//! multi-tasklet DPU time, and the shape-selection objective.
//!
//! Stage 1 is the CPU->DPU index transfer, stage 2 the on-DPU lookup+reduce,
//! stage 3 the DPU->CPU partial-result transfer. Index buffers are charged
//! once per row group (every column shard of a group receives the same
//! indices). All times are nanoseconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostParams, DpuClusterConfig, EmbeddingTableSpec, WorkloadSpec};
use crate::partition::{PartitionPlan, TileShape};

/// Largest single MRAM read in bytes.
pub const MRAM_MAX_READ: u64 = 2048;
/// Reads up to this size cost the same as an 8-byte read.
pub const MRAM_FLAT_BYTES: u64 = 32;

/// Stage-wise latency of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Stage 1: CPU->DPU index transfer.
    pub t_cpu_to_dpu: f64,
    /// Stage 2 per row group (all column shards of a group run identically).
    pub t_lookup_per_dpu: Vec<f64>,
    /// Stage 2 as charged: the slowest DPU.
    pub t_lookup_max: f64,
    /// Stage 3: DPU->CPU partial-result transfer.
    pub t_dpu_to_cpu: f64,
    pub total: f64,
}

impl LatencyReport {
    pub fn new(t_cpu_to_dpu: f64, t_lookup_per_dpu: Vec<f64>, t_dpu_to_cpu: f64) -> Self {
        let t_lookup_max = t_lookup_per_dpu.iter().cloned().fold(0.0, f64::max);
        Self {
            t_cpu_to_dpu,
            t_lookup_per_dpu,
            t_lookup_max,
            t_dpu_to_cpu,
            total: t_cpu_to_dpu + t_lookup_max + t_dpu_to_cpu,
        }
    }
}

/// Latency of one MRAM read of `bytes` bytes.
///
/// Flat at `mram_alpha` through 32 B, then `mram_beta` per additional byte.
/// Reads must be 8-byte aligned and within [8, 2048] bytes.
pub fn mram_read_latency(bytes: u64, params: &CostParams) -> Result<f64> {
    if bytes < 8 || bytes > MRAM_MAX_READ || bytes % 8 != 0 {
        return Err(Error::MramAlignment { bytes });
    }
    if bytes <= MRAM_FLAT_BYTES {
        Ok(params.mram_alpha)
    } else {
        Ok(params.mram_alpha + params.mram_beta * (bytes - MRAM_FLAT_BYTES) as f64)
    }
}

/// Time one DPU spends on `accesses` MRAM reads of `read_bytes` each while
/// serving `samples` samples.
///
/// Roofline of two bounds: the shared instruction pipeline must issue the
/// per-lookup work plus the reduce/write-back of one `read_bytes`-wide
/// result per touched sample, while the `tasklets` threads overlap the MRAM
/// read latency. The per-sample term is what lets lookup time saturate at
/// large read sizes once the pipeline, not the memory, is the bottleneck.
pub fn dpu_time(
    accesses: f64,
    samples: f64,
    read_bytes: u64,
    tasklets: u32,
    params: &CostParams,
) -> Result<f64> {
    let t_a = mram_read_latency(read_bytes, params)?;
    let instr = accesses * params.t_instr + samples * read_bytes as f64 * params.t_out;
    let mem = accesses * t_a / tasklets.max(1) as f64;
    Ok(instr.max(mem))
}

fn shape_geometry(
    shape: &TileShape,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
) -> Result<(u32, u32)> {
    let shards = crate::partition::column_shards(shape.n_c, table)?;
    let n_rg = crate::partition::row_groups(shards, cluster)?;
    Ok((shards, n_rg))
}

/// Stage-2 time under the uniform model: each row group serves an equal
/// (N_r / R) share of the batch's lookups.
pub fn lookup_time_uniform(
    shape: &TileShape,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
    workload: &WorkloadSpec,
    params: &CostParams,
) -> Result<f64> {
    shape_geometry(shape, table, cluster)?;
    let avg_red = workload.avg_red()?;
    let row_share = shape.n_r as f64 / table.rows as f64;
    let accesses = row_share * workload.batch_size as f64 * avg_red;
    let read_bytes = shape.n_c as u64 * table.elem_bytes as u64;
    dpu_time(
        accesses,
        workload.batch_size as f64,
        read_bytes,
        cluster.tasklets,
        params,
    )
}

/// Stage-1 time from per-row-group expected index counts.
///
/// With equal-size padding the buffers transfer in parallel (time of the
/// largest); otherwise they transfer sequentially (sum).
pub(crate) fn cpu_to_dpu_from_weights(
    weights: &[f64],
    workload: &WorkloadSpec,
    params: &CostParams,
) -> Result<f64> {
    let avg_red = workload.avg_red()?;
    let per_batch = workload.batch_size as f64 * avg_red;
    let counts = weights.iter().map(|w| per_batch * w);
    let time = if params.equal_size_padding {
        counts.fold(0.0, f64::max)
    } else {
        counts.sum()
    };
    Ok(time * params.t_c)
}

/// Stage-1 time for a concrete plan, using its expected index shares.
pub fn cpu_to_dpu_time(
    plan: &PartitionPlan,
    workload: &WorkloadSpec,
    params: &CostParams,
) -> Result<f64> {
    cpu_to_dpu_from_weights(&plan.group_weights, workload, params)
}

pub(crate) fn dpu_to_cpu_from_shape(
    n_c: u32,
    workload: &WorkloadSpec,
    params: &CostParams,
) -> f64 {
    // Every DPU returns one N_c-wide partial per sample; buffers are
    // equal-size by construction, so the transfers run in parallel.
    n_c as f64 * workload.batch_size as f64 * params.t_d
}

/// Stage-3 time: N_c * batch_size values per DPU, transferred in parallel.
pub fn dpu_to_cpu_time(plan: &PartitionPlan, workload: &WorkloadSpec, params: &CostParams) -> f64 {
    dpu_to_cpu_from_shape(plan.shape.n_c, workload, params)
}

/// The shape-selection objective: stage 1 + stage 2 + stage 3 under the
/// uniform model. Errors on infeasible shapes.
pub fn objective(
    shape: &TileShape,
    table: &EmbeddingTableSpec,
    cluster: &DpuClusterConfig,
    workload: &WorkloadSpec,
    params: &CostParams,
) -> Result<f64> {
    let (_, n_rg) = shape_geometry(shape, table, cluster)?;
    crate::partition::check_tile_capacity(shape, table, cluster)?;
    // Uniform plans hold ceil(R / n_rg) rows in every group but the last.
    let mut weights: Vec<f64> = Vec::with_capacity(n_rg as usize);
    let mut remaining = table.rows;
    for _ in 0..n_rg {
        let rows = remaining.min(shape.n_r);
        weights.push(rows as f64 / table.rows as f64);
        remaining -= rows;
    }
    let t1 = cpu_to_dpu_from_weights(&weights, workload, params)?;
    let t2 = lookup_time_uniform(shape, table, cluster, workload, params)?;
    let t3 = dpu_to_cpu_from_shape(shape.n_c, workload, params);
    Ok(t1 + t2 + t3)
}
