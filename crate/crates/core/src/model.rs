//! Domain types, configuration schema, and deterministic table-content
//! generation.
//!
//! Embedding tables are never materialized as stored weights: any element is
//! recomputed on demand from a seeded integer hash (see [`EmbeddingTableSpec::value`]),
//! so tables with 10^7+ rows cost nothing to "hold". Values land on a 2^-12
//! dyadic grid in [-1, 1], which makes every f32 sum of up to 4096 rows exact
//! and therefore independent of association order — the simulator and the
//! reference oracle agree bit-for-bit no matter how partial sums are grouped.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Embedding elements are 32-bit values; all capacity math assumes this width.
pub const ELEM_BYTES: u32 = 4;

/// Denominator of the dyadic value grid. Sums stay exact in f32 while the
/// accumulated numerator magnitude is below 2^24, i.e. up to 4096 addends.
const VALUE_GRID: i64 = 4096;

/// splitmix64 finalizer; the stated integer mix behind table contents.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Shape and content seed of one embedding table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingTableSpec {
    #[serde(default)]
    pub table_id: u32,
    /// Row count: number of distinct items.
    pub rows: u64,
    /// Embedding dimension.
    pub cols: u32,
    #[serde(default = "default_elem_bytes")]
    pub elem_bytes: u32,
    #[serde(default)]
    pub content_seed: u64,
}

fn default_elem_bytes() -> u32 {
    ELEM_BYTES
}

impl EmbeddingTableSpec {
    pub fn new(table_id: u32, rows: u64, cols: u32, content_seed: u64) -> Self {
        Self {
            table_id,
            rows,
            cols,
            elem_bytes: ELEM_BYTES,
            content_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 {
            return Err(Error::validation("table.rows", "must be >= 1"));
        }
        if self.cols < 1 {
            return Err(Error::validation("table.cols", "must be >= 1"));
        }
        if self.cols % 2 != 0 {
            return Err(Error::validation(
                "table.cols",
                format!("must be a multiple of 2, got {}", self.cols),
            ));
        }
        if self.elem_bytes != ELEM_BYTES {
            return Err(Error::validation(
                "table.elem_bytes",
                format!("must be {} (32-bit values), got {}", ELEM_BYTES, self.elem_bytes),
            ));
        }
        Ok(())
    }

    /// Table bytes if fully materialized; used for capacity reporting.
    pub fn total_bytes(&self) -> u64 {
        self.rows * self.cols as u64 * self.elem_bytes as u64
    }

    /// Deterministic table element at (row, col).
    ///
    /// Pure function of (content_seed, table_id, row, col). Values are
    /// k/4096 for k in [-4096, 4096], i.e. within [-1, 1].
    pub fn value(&self, row: u64, col: u32) -> Result<f32> {
        if row >= self.rows {
            return Err(Error::IndexOutOfBounds {
                what: "row",
                index: row,
                bound: self.rows - 1,
            });
        }
        if col >= self.cols {
            return Err(Error::IndexOutOfBounds {
                what: "col",
                index: col as u64,
                bound: self.cols as u64 - 1,
            });
        }
        Ok(self.value_unchecked(row, col))
    }

    pub(crate) fn value_unchecked(&self, row: u64, col: u32) -> f32 {
        let mut h = mix64(self.content_seed ^ 0x7061_7274_6961_6c73);
        h = mix64(h ^ self.table_id as u64);
        h = mix64(h ^ row);
        h = mix64(h ^ col as u64);
        let k = (h % (2 * VALUE_GRID as u64 + 1)) as i64 - VALUE_GRID;
        k as f32 / VALUE_GRID as f32
    }
}

/// Free-function form of [`EmbeddingTableSpec::value`].
pub fn table_value(spec: &EmbeddingTableSpec, row: u64, col: u32) -> Result<f32> {
    spec.value(row, col)
}

/// Simulated DPU cluster: count, per-DPU memory, threading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpuClusterConfig {
    /// Number of DPUs available for one table.
    #[serde(default = "default_n_dpu")]
    pub n_dpu: u32,
    /// Per-DPU MRAM bank capacity in bytes (64 MiB on real hardware).
    #[serde(default = "default_mram_bytes")]
    pub mram_bytes: u64,
    /// Per-DPU WRAM scratchpad bytes. Informational only.
    #[serde(default = "default_wram_bytes")]
    pub wram_bytes: u64,
    /// Hardware threads per DPU pipelining MRAM accesses.
    #[serde(default = "default_tasklets")]
    pub tasklets: u32,
    /// Fraction of the required partial-sum cache storage actually granted.
    #[serde(default = "default_cache_fraction")]
    pub cache_fraction: f64,
}

fn default_n_dpu() -> u32 {
    64
}
fn default_mram_bytes() -> u64 {
    64 * 1024 * 1024
}
fn default_wram_bytes() -> u64 {
    64 * 1024
}
fn default_tasklets() -> u32 {
    14
}
fn default_cache_fraction() -> f64 {
    1.0
}

impl Default for DpuClusterConfig {
    fn default() -> Self {
        Self {
            n_dpu: default_n_dpu(),
            mram_bytes: default_mram_bytes(),
            wram_bytes: default_wram_bytes(),
            tasklets: default_tasklets(),
            cache_fraction: default_cache_fraction(),
        }
    }
}

impl DpuClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_dpu < 1 {
            return Err(Error::validation("cluster.n_dpu", "must be >= 1"));
        }
        if self.mram_bytes < 8 {
            return Err(Error::validation("cluster.mram_bytes", "must be >= 8"));
        }
        if self.tasklets < 1 {
            return Err(Error::validation("cluster.tasklets", "must be >= 1"));
        }
        if !(self.cache_fraction >= 0.0 && self.cache_fraction <= 1.0) {
            return Err(Error::validation(
                "cluster.cache_fraction",
                format!("must be within [0, 1], got {}", self.cache_fraction),
            ));
        }
        Ok(())
    }
}

/// Calibrated latency parameters, all in nanoseconds.
///
/// The MRAM read curve is alpha (flat up to 32 B) plus beta per byte past
/// 32 B; defaults give ~780 MB/s at the 2048 B maximum read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// ns per index value transferred CPU -> DPU.
    #[serde(default = "default_t_c")]
    pub t_c: f64,
    /// ns per result value transferred DPU -> CPU.
    #[serde(default = "default_t_d")]
    pub t_d: f64,
    /// ns fixed cost of one MRAM read (covers reads up to 32 bytes).
    #[serde(default = "default_mram_alpha")]
    pub mram_alpha: f64,
    /// ns per byte beyond 32 bytes in one MRAM read.
    #[serde(default = "default_mram_beta")]
    pub mram_beta: f64,
    /// ns of pipeline time issued per lookup.
    #[serde(default = "default_t_instr")]
    pub t_instr: f64,
    /// ns of pipeline time per result byte written per touched sample
    /// (the in-DPU reduce/write-back work; 0 disables the term).
    #[serde(default = "default_t_out")]
    pub t_out: f64,
    /// Pad per-DPU buffers to a common size so transfers run in parallel;
    /// unequal buffers transfer sequentially.
    #[serde(default = "default_padding")]
    pub equal_size_padding: bool,
}

fn default_t_c() -> f64 {
    2.0
}
fn default_t_d() -> f64 {
    2.0
}
fn default_mram_alpha() -> f64 {
    100.0
}
fn default_mram_beta() -> f64 {
    1.25
}
fn default_t_instr() -> f64 {
    1.0
}
fn default_t_out() -> f64 {
    3.0
}
fn default_padding() -> bool {
    true
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            t_c: default_t_c(),
            t_d: default_t_d(),
            mram_alpha: default_mram_alpha(),
            mram_beta: default_mram_beta(),
            t_instr: default_t_instr(),
            t_out: default_t_out(),
            equal_size_padding: default_padding(),
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cost.t_c", self.t_c),
            ("cost.t_d", self.t_d),
            ("cost.mram_beta", self.mram_beta),
            ("cost.t_instr", self.t_instr),
            ("cost.t_out", self.t_out),
        ] {
            if !(v >= 0.0) {
                return Err(Error::validation(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.mram_alpha > 0.0) {
            return Err(Error::validation(
                "cost.mram_alpha",
                format!("must be > 0, got {}", self.mram_alpha),
            ));
        }
        Ok(())
    }
}

/// Inference batching parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    #[serde(default = "default_batch_size")]
    pub batch_size: u32,
    /// Mean active indices per sample. Usually derived from a trace profile;
    /// may be pinned in the config for formula-only evaluations.
    #[serde(default)]
    pub avg_red: Option<f64>,
}

fn default_batch_size() -> u32 {
    64
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            batch_size: default_batch_size(),
            avg_red: None,
        }
    }
}

impl WorkloadSpec {
    pub fn new(batch_size: u32, avg_red: f64) -> Self {
        Self {
            batch_size,
            avg_red: Some(avg_red),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::validation("workload.batch_size", "must be >= 1"));
        }
        if let Some(a) = self.avg_red {
            if !(a > 0.0) {
                return Err(Error::validation(
                    "workload.avg_red",
                    format!("must be > 0, got {a}"),
                ));
            }
        }
        Ok(())
    }

    pub fn avg_red(&self) -> Result<f64> {
        self.avg_red
            .ok_or_else(|| Error::validation("workload.avg_red", "not set and no trace profiled"))
    }
}

/// Top-level configuration file: sections `cluster`, `cost`, `workload`,
/// `tables` (JSON; all fields optional with the schema defaults above).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub cluster: DpuClusterConfig,
    #[serde(default)]
    pub cost: CostParams,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default = "default_tables")]
    pub tables: Vec<EmbeddingTableSpec>,
}

fn default_tables() -> Vec<EmbeddingTableSpec> {
    vec![EmbeddingTableSpec::new(0, 100_000, 64, 42)]
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cluster: DpuClusterConfig::default(),
            cost: CostParams::default(),
            workload: WorkloadSpec::default(),
            tables: default_tables(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        self.cost.validate()?;
        self.workload.validate()?;
        if self.tables.is_empty() {
            return Err(Error::validation("tables", "at least one table required"));
        }
        for (i, t) in self.tables.iter().enumerate() {
            t.validate().map_err(|e| match e {
                Error::Validation { field, message } => Error::Validation {
                    field: format!("tables[{i}].{field}"),
                    message,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        // Field order is fixed by the struct, so serialize -> parse ->
        // serialize round-trips byte-identically.
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_json())?)
    }
}
