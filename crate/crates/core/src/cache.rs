//! Partial-sum cache mining: find hot item groups that co-occur within
//! samples, estimate how many MRAM reads caching each group saves, and
//! account for the storage the cached subset sums consume.
//!
//! Cache list file format (text): one group per line,
//! `<space-separated indices>;<benefit>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::{AccessTrace, FrequencyProfile};

/// Largest group size the storage guard allows; every non-empty subset sum
/// of a group is cached, so storage grows as 2^m - 1.
pub const DEFAULT_M_MAX: usize = 4;

/// A mined group of co-occurring items plus its replay-measured benefit:
/// the number of MRAM reads caching it saves over the profiling trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheGroup {
    /// Sorted, distinct item indices; 2 <= len <= m_max.
    pub items: Vec<u32>,
    pub benefit: u64,
}

impl CacheGroup {
    pub fn new(mut items: Vec<u32>, benefit: u64) -> Result<Self> {
        items.sort_unstable();
        items.dedup();
        if items.len() < 2 {
            return Err(Error::validation(
                "cache_group.items",
                "a cached group needs at least 2 distinct items",
            ));
        }
        Ok(Self { items, benefit })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Ordered, pairwise item-disjoint cache groups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CacheList {
    pub groups: Vec<CacheGroup>,
}

impl CacheList {
    pub fn new(groups: Vec<CacheGroup>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (gi, g) in groups.iter().enumerate() {
            for &item in &g.items {
                if let Some(prev) = seen.insert(item, gi) {
                    return Err(Error::validation(
                        "cache_list",
                        format!("item {item} appears in groups {prev} and {gi}"),
                    ));
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total_benefit(&self) -> u64 {
        self.groups.iter().map(|g| g.benefit).sum()
    }
}

/// Controls for the co-occurrence miner.
#[derive(Debug, Clone)]
pub struct MineParams {
    /// Only the `top_k` hottest items enter the co-occurrence graph.
    pub top_k: usize,
    /// An item joins a group only if it co-occurs with every current member
    /// at least this many times; seed edges need this weight too.
    pub min_support: u64,
    /// Group size cap (storage grows as 2^m - 1).
    pub m_max: usize,
}

impl Default for MineParams {
    fn default() -> Self {
        Self {
            top_k: 1000,
            min_support: 50,
            m_max: DEFAULT_M_MAX,
        }
    }
}

/// Exact replay count of reads saved by caching `items` (sorted, distinct):
/// a sample hitting k >= 2 of the group's items collapses k reads into one.
pub fn estimate_benefit(trace: &AccessTrace, items: &[u32]) -> u64 {
    let mut saved = 0u64;
    for sample in &trace.samples {
        let hits = items
            .iter()
            .filter(|&&i| sample.binary_search(&i).is_ok())
            .count() as u64;
        saved += hits.saturating_sub(1);
    }
    saved
}

/// Bytes one column shard spends on a cached group of `m` items: all
/// 2^m - 1 non-empty subset sums, each N_c values wide.
pub fn cache_storage_bytes(m: usize, n_c: u32, elem_bytes: u32, m_max: usize) -> Result<u64> {
    if m > m_max {
        return Err(Error::validation(
            "cache_group.items",
            format!("group size {m} exceeds m_max {m_max} (storage grows as 2^m - 1)"),
        ));
    }
    if m < 2 {
        return Err(Error::validation(
            "cache_group.items",
            "a cached group needs at least 2 items",
        ));
    }
    Ok(((1u64 << m) - 1) * n_c as u64 * elem_bytes as u64)
}

/// Mines item-disjoint co-occurring groups from a profiled trace.
///
/// Builds a pair co-occurrence graph over the `top_k` hottest items, then
/// repeatedly seeds a group from the heaviest remaining edge and grows it
/// while some unused item co-occurs with every current member at least
/// `min_support` times (best candidate by total edge weight, ties to the
/// lowest id). Groups are ordered by descending replay benefit.
pub fn mine_cache_lists(
    trace: &AccessTrace,
    profile: &FrequencyProfile,
    params: &MineParams,
) -> Result<CacheList> {
    let n_items = profile.counts.len();
    let mut top_k = params.top_k;
    if top_k > n_items {
        log::warn!("top_k {} exceeds item count {}; clamping", top_k, n_items);
        top_k = n_items;
    }
    if top_k < 2 || params.m_max < 2 {
        return CacheList::new(vec![]);
    }

    // Hottest items, ties broken by ascending id.
    let mut by_freq: Vec<u32> = (0..n_items as u32).collect();
    by_freq.sort_unstable_by_key(|&i| (std::cmp::Reverse(profile.counts[i as usize]), i));
    let hot: Vec<u32> = by_freq
        .into_iter()
        .take(top_k)
        .filter(|&i| profile.counts[i as usize] > 0)
        .collect();
    let mut is_hot = vec![false; n_items];
    for &i in &hot {
        is_hot[i as usize] = true;
    }

    // Pair co-occurrence counts among hot items.
    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut hot_in_sample = Vec::new();
    for sample in &trace.samples {
        hot_in_sample.clear();
        hot_in_sample.extend(sample.iter().copied().filter(|&i| is_hot[i as usize]));
        for a in 0..hot_in_sample.len() {
            for b in a + 1..hot_in_sample.len() {
                *pair_counts
                    .entry((hot_in_sample[a], hot_in_sample[b]))
                    .or_insert(0) += 1;
            }
        }
    }

    // Deterministic edge order: weight descending, then pair ascending.
    let mut edges: Vec<(u32, u32, u64)> = pair_counts
        .iter()
        .filter(|&(_, &w)| w >= params.min_support)
        .map(|(&(a, b), &w)| (a, b, w))
        .collect();
    edges.sort_unstable_by_key(|&(a, b, w)| (std::cmp::Reverse(w), a, b));

    let pair_weight = |a: u32, b: u32| -> u64 {
        let key = if a < b { (a, b) } else { (b, a) };
        pair_counts.get(&key).copied().unwrap_or(0)
    };

    let mut used = vec![false; n_items];
    let mut groups = Vec::new();
    for &(a, b, _) in &edges {
        if used[a as usize] || used[b as usize] {
            continue;
        }
        let mut group = vec![a, b];
        used[a as usize] = true;
        used[b as usize] = true;
        while group.len() < params.m_max {
            let mut best: Option<(u64, u32)> = None;
            for &cand in &hot {
                if used[cand as usize] {
                    continue;
                }
                let mut total = 0u64;
                let mut ok = true;
                for &m in &group {
                    let w = pair_weight(cand, m);
                    if w < params.min_support {
                        ok = false;
                        break;
                    }
                    total += w;
                }
                if ok {
                    let better = match best {
                        None => true,
                        Some((bt, bi)) => total > bt || (total == bt && cand < bi),
                    };
                    if better {
                        best = Some((total, cand));
                    }
                }
            }
            match best {
                Some((_, cand)) => {
                    used[cand as usize] = true;
                    group.push(cand);
                }
                None => break,
            }
        }
        group.sort_unstable();
        let benefit = estimate_benefit(trace, &group);
        groups.push(CacheGroup { items: group, benefit });
    }

    groups.sort_by_key(|g| (std::cmp::Reverse(g.benefit), g.items[0]));
    CacheList::new(groups)
}

/// The cache matching rule shared by the planner's balance replay and the
/// execution engine: walk the placed groups in plan order; a group whose
/// intersection with the sample has >= 2 items serves that whole
/// intersection from one cached subset-sum read and consumes those items.
/// Returns (matched intersections, residual single-row reads).
pub fn match_sample(sample_in_group: &[u32], groups: &[CacheGroup]) -> (Vec<Vec<u32>>, Vec<u32>) {
    let mut remaining: Vec<u32> = sample_in_group.to_vec();
    let mut matched = Vec::new();
    for g in groups {
        let inter: Vec<u32> = remaining
            .iter()
            .copied()
            .filter(|i| g.items.binary_search(i).is_ok())
            .collect();
        if inter.len() >= 2 {
            remaining.retain(|i| g.items.binary_search(i).is_err());
            matched.push(inter);
        }
    }
    (matched, remaining)
}

/// Writes a cache list in the text format accepted by [`load_cache_list`].
pub fn write_cache_list(path: &Path, list: &CacheList) -> Result<()> {
    let mut out = String::new();
    for g in &list.groups {
        let items: Vec<String> = g.items.iter().map(|i| i.to_string()).collect();
        out.push_str(&items.join(" "));
        out.push(';');
        out.push_str(&g.benefit.to_string());
        out.push('\n');
    }
    Ok(fs::write(path, out)?)
}

pub fn load_cache_list(path: &Path) -> Result<CacheList> {
    let text = fs::read_to_string(path)?;
    let mut groups = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (items_part, benefit_part) = line
            .split_once(';')
            .ok_or_else(|| Error::parse(lineno, "expected `<indices>;<benefit>`"))?;
        let mut items = Vec::new();
        for tok in items_part.split_whitespace() {
            items.push(
                tok.parse::<u32>()
                    .map_err(|_| Error::parse(lineno, format!("invalid index '{tok}'")))?,
            );
        }
        let benefit = benefit_part
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(lineno, format!("invalid benefit '{benefit_part}'")))?;
        groups.push(
            CacheGroup::new(items, benefit)
                .map_err(|e| Error::parse(lineno, e.to_string()))?,
        );
    }
    CacheList::new(groups)
}
