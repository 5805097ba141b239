//! Item-access traces: loading, synthesis, and profiling.
//!
//! Trace file format (UTF-8, LF): one sample per line,
//! `<sample_ordinal>,<space-separated item indices>`. Lines starting with
//! `#` are comments. Samples are canonicalized on load: indices sorted,
//! deduplicated, and bounds-checked against the table's row count.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{mix64, EmbeddingTableSpec};

/// An ordered list of multi-hot samples over items `0..n_items`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTrace {
    pub table_id: u32,
    pub n_items: u32,
    pub samples: Vec<Vec<u32>>,
}

impl AccessTrace {
    /// Builds a trace from raw samples, canonicalizing each one.
    pub fn new(table_id: u32, n_items: u32, samples: Vec<Vec<u32>>) -> Result<Self> {
        let mut canon = Vec::with_capacity(samples.len());
        for mut s in samples {
            s.sort_unstable();
            s.dedup();
            if let Some(&max) = s.last() {
                if max >= n_items {
                    return Err(Error::IndexOutOfBounds {
                        what: "item",
                        index: max as u64,
                        bound: n_items as u64 - 1,
                    });
                }
            }
            canon.push(s);
        }
        Ok(Self {
            table_id,
            n_items,
            samples: canon,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_accesses(&self) -> u64 {
        self.samples.iter().map(|s| s.len() as u64).sum()
    }
}

/// Per-item access counts derived from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    /// counts[i] = number of samples containing item i.
    pub counts: Vec<u64>,
    pub total_samples: u64,
    /// Mean active indices per sample.
    pub avg_red: f64,
}

impl FrequencyProfile {
    pub fn n_items(&self) -> u32 {
        self.counts.len() as u32
    }

    pub fn total_accesses(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Loads and canonicalizes a trace file, bounds-checking against `table`.
pub fn load_trace(path: &Path, table: &EmbeddingTableSpec) -> Result<AccessTrace> {
    let text = fs::read_to_string(path)?;
    let n_items = u32::try_from(table.rows).map_err(|_| {
        Error::validation("table.rows", "trace replay supports up to 2^32 items")
    })?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (ordinal, rest) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(lineno, "expected `<ordinal>,<indices>`"))?;
        ordinal
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(lineno, format!("invalid sample ordinal '{ordinal}'")))?;
        let mut sample = Vec::new();
        for tok in rest.split_whitespace() {
            let idx: u32 = tok
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid index '{tok}'")))?;
            if idx as u64 >= table.rows {
                return Err(Error::parse(
                    lineno,
                    format!("index {idx} out of range for table with {} rows", table.rows),
                ));
            }
            sample.push(idx);
        }
        sample.sort_unstable();
        sample.dedup();
        samples.push(sample);
    }
    Ok(AccessTrace {
        table_id: table.table_id,
        n_items,
        samples,
    })
}

/// Writes a trace in the text format accepted by [`load_trace`].
pub fn write_trace(path: &Path, trace: &AccessTrace) -> Result<()> {
    let mut out = String::new();
    for (i, sample) in trace.samples.iter().enumerate() {
        out.push_str(&i.to_string());
        out.push(',');
        for (j, idx) in sample.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&idx.to_string());
        }
        out.push('\n');
    }
    Ok(fs::write(path, out)?)
}

/// Zipf(s) popularity law over items 0..n (s = 0 is uniform), sampled by
/// inverse CDF over a precomputed cumulative weight table.
struct ZipfSampler {
    cum: Vec<f64>,
    total: f64,
}

impl ZipfSampler {
    fn new(n_items: u32, s: f64) -> Self {
        let mut cum = Vec::with_capacity(n_items as usize);
        let mut acc = 0.0;
        for i in 0..n_items {
            acc += 1.0 / ((i + 1) as f64).powf(s);
            cum.push(acc);
        }
        Self { cum, total: acc }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u = rng.gen::<f64>() * self.total;
        self.cum.partition_point(|&c| c < u) as u32
    }
}

/// Independent per-sample RNG stream so generation order (or future
/// parallelism) cannot perturb seed-determinism.
fn sample_rng(seed: u64, sample_idx: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed) ^ sample_idx))
}

fn draw_sample_len(rng: &mut ChaCha8Rng, avg_red: f64, n_items: u32) -> usize {
    let poisson = Poisson::new(avg_red).expect("avg_red > 0 validated");
    let k = poisson.sample(rng) as u64;
    k.clamp(1, n_items as u64) as usize
}

fn check_gen_params(n_items: u32, avg_red: f64, zipf_s: f64) -> Result<()> {
    if n_items < 1 {
        return Err(Error::validation("n_items", "must be >= 1"));
    }
    if !(avg_red > 0.0) {
        return Err(Error::validation("avg_red", "must be > 0"));
    }
    if avg_red > n_items as f64 {
        return Err(Error::validation(
            "avg_red",
            format!("must be <= n_items ({n_items}), got {avg_red}"),
        ));
    }
    if !(zipf_s >= 0.0) {
        return Err(Error::validation("zipf_s", "must be >= 0"));
    }
    Ok(())
}

/// Synthesizes a trace whose samples draw a Poisson(avg_red) count of
/// distinct items (clamped to [1, n_items]) from a Zipf(zipf_s) popularity
/// law. Deterministic under `seed`.
pub fn generate_zipf_trace(
    n_items: u32,
    n_samples: u64,
    avg_red: f64,
    zipf_s: f64,
    seed: u64,
) -> Result<AccessTrace> {
    check_gen_params(n_items, avg_red, zipf_s)?;
    let zipf = ZipfSampler::new(n_items, zipf_s);
    let mut samples = Vec::with_capacity(n_samples as usize);
    for i in 0..n_samples {
        let mut rng = sample_rng(seed, i);
        let k = draw_sample_len(&mut rng, avg_red, n_items);
        let mut set = HashSet::with_capacity(k);
        while set.len() < k {
            set.insert(zipf.sample(&mut rng));
        }
        let mut sample: Vec<u32> = set.into_iter().collect();
        sample.sort_unstable();
        samples.push(sample);
    }
    Ok(AccessTrace {
        table_id: 0,
        n_items,
        samples,
    })
}

/// Synthesizes a trace with planted co-occurrence: with probability
/// `group_prob` a sample contains one of `groups` in full, padded with
/// Zipf-drawn items up to its target length.
pub fn generate_cooccur_trace(
    n_items: u32,
    n_samples: u64,
    avg_red: f64,
    zipf_s: f64,
    groups: &[Vec<u32>],
    group_prob: f64,
    seed: u64,
) -> Result<AccessTrace> {
    check_gen_params(n_items, avg_red, zipf_s)?;
    if !(0.0..=1.0).contains(&group_prob) {
        return Err(Error::validation("group_prob", "must be within [0, 1]"));
    }
    for (gi, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::validation(
                format!("groups[{gi}]"),
                "planted groups need >= 2 items",
            ));
        }
        if let Some(&bad) = g.iter().find(|&&x| x >= n_items) {
            return Err(Error::validation(
                format!("groups[{gi}]"),
                format!("item {bad} >= n_items ({n_items})"),
            ));
        }
    }
    let zipf = ZipfSampler::new(n_items, zipf_s);
    let mut samples = Vec::with_capacity(n_samples as usize);
    for i in 0..n_samples {
        let mut rng = sample_rng(seed, i);
        let planted: Option<&Vec<u32>> = if !groups.is_empty() && rng.gen::<f64>() < group_prob {
            Some(&groups[rng.gen_range(0..groups.len())])
        } else {
            None
        };
        let mut k = draw_sample_len(&mut rng, avg_red, n_items);
        let mut set: HashSet<u32> = HashSet::new();
        if let Some(g) = planted {
            set.extend(g.iter().copied());
            k = k.max(set.len());
        }
        while set.len() < k {
            set.insert(zipf.sample(&mut rng));
        }
        let mut sample: Vec<u32> = set.into_iter().collect();
        sample.sort_unstable();
        samples.push(sample);
    }
    Ok(AccessTrace {
        table_id: 0,
        n_items,
        samples,
    })
}

/// Exact per-item access counts and the derived average reduction.
pub fn profile(trace: &AccessTrace) -> Result<FrequencyProfile> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace("cannot profile a trace with no samples".into()));
    }
    let mut counts = vec![0u64; trace.n_items as usize];
    for sample in &trace.samples {
        for &idx in sample {
            counts[idx as usize] += 1;
        }
    }
    let total_samples = trace.len() as u64;
    let total: u64 = counts.iter().sum();
    Ok(FrequencyProfile {
        counts,
        total_samples,
        avg_red: total as f64 / total_samples as f64,
    })
}

/// Total accesses per contiguous row block when dividing the items into
/// `n_blocks` blocks of ceil(n_items / n_blocks) rows.
pub fn block_access_histogram(profile: &FrequencyProfile, n_blocks: u32) -> Result<Vec<u64>> {
    let n = profile.counts.len() as u64;
    if n_blocks < 1 {
        return Err(Error::validation("n_blocks", "must be >= 1"));
    }
    if n_blocks as u64 > n {
        return Err(Error::validation(
            "n_blocks",
            format!("must be <= item count ({n}), got {n_blocks}"),
        ));
    }
    let block_size = n.div_ceil(n_blocks as u64);
    let mut blocks = vec![0u64; n_blocks as usize];
    for (i, &c) in profile.counts.iter().enumerate() {
        blocks[i as u64 as usize / block_size as usize] += c;
    }
    Ok(blocks)
}
