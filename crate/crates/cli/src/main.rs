//! Command-line front end: trace generation, profiling, cache mining,
//! placement planning, lookup simulation, parameter sweeps, and report
//! emission.
//!
//! Exit codes: 0 success, 1 usage, 2 validation/infeasibility,
//! 3 verification failure.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use embsim::cache::{self, CacheList, MineParams};
use embsim::costmodel;
use embsim::engine::{self, SimulationSummary};
use embsim::model::{Config, EmbeddingTableSpec, WorkloadSpec};
use embsim::partition::{self, PartitionPlan, TileShape};
use embsim::trace::{self, AccessTrace};

#[derive(Parser)]
#[command(name = "embsim", version, about = "Embedding placement planning and PIM lookup simulation")]
struct Cli {
    /// Configuration file (JSON). Defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for all randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output path (file or directory, command-dependent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cross-check simulated outputs against the reference reduction.
    #[arg(long, global = true)]
    verify: bool,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic access trace (plus a profile sidecar).
    GenTrace(GenTraceArgs),
    /// Profile an existing trace file.
    Profile(ProfileArgs),
    /// Mine co-occurring hot-item groups worth caching.
    MineCache(MineCacheArgs),
    /// Compute a placement plan and its balance report.
    Partition(PartitionArgs),
    /// Execute batched lookups against a plan.
    Simulate(SimulateArgs),
    /// Model stage times over an avg_red x N_c grid.
    Sweep(SweepArgs),
    /// Summarize previously written JSON reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenTraceArgs {
    /// Item universe size.
    #[arg(long)]
    items: u32,
    /// Number of samples to generate.
    #[arg(long)]
    samples: u64,
    /// Target mean active indices per sample.
    #[arg(long)]
    avg_red: f64,
    /// Zipf popularity exponent (0 = uniform).
    #[arg(long, default_value_t = 0.0)]
    zipf: f64,
    /// Planted co-occurrence groups, e.g. "4,5;7,8,9".
    #[arg(long)]
    groups: Option<String>,
    /// Probability a sample embeds one planted group.
    #[arg(long, default_value_t = 0.0)]
    group_prob: f64,
    #[arg(long, default_value_t = 0)]
    table_id: u32,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Item universe size of the trace.
    #[arg(long)]
    items: u32,
    /// Row blocks for the access histogram.
    #[arg(long, default_value_t = 8)]
    blocks: u32,
}

#[derive(Args)]
struct MineCacheArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    items: u32,
    #[arg(long, default_value_t = 1000)]
    top_k: usize,
    #[arg(long, default_value_t = 50)]
    min_support: u64,
    #[arg(long, default_value_t = 4)]
    m_max: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Planner {
    Uniform,
    Nonuniform,
    CacheAware,
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Planner::Uniform => "uniform",
            Planner::Nonuniform => "nonuniform",
            Planner::CacheAware => "cache-aware",
        })
    }
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Index into the config's `tables` section.
    #[arg(long, default_value_t = 0)]
    table: usize,
    #[arg(long, value_enum)]
    planner: Planner,
    /// Column width: `auto` (optimize) or an explicit even value.
    #[arg(long, default_value = "auto")]
    nc: String,
    /// Cache list file for the cache-aware planner.
    #[arg(long)]
    cache_list: Option<PathBuf>,
    /// Inline mining parameters, e.g. "top_k=1000,min_support=50,m_max=4".
    #[arg(long)]
    mine: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value_t = 0)]
    table: usize,
    /// Samples per batch (defaults to the config's workload batch size).
    #[arg(long)]
    batch_size: Option<u32>,
    /// Batches to run (default: up to 12800 inferences).
    #[arg(long)]
    batches: Option<u64>,
    /// Samples to skip before the first batch (window selection).
    #[arg(long, default_value_t = 0)]
    skip: u64,
    /// Also write the reduced embeddings as a binary matrix.
    #[arg(long)]
    dump_outputs: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0)]
    table: usize,
    /// Comma-separated avg_red axis.
    #[arg(long, default_value = "50,100,150,200,250,300")]
    avg_red: String,
    /// Comma-separated N_c axis (sweep mode may exceed 8).
    #[arg(long, default_value = "2,4,8,16,32")]
    nc: String,
    #[arg(long)]
    batch_size: Option<u32>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON reports produced by `partition` or `simulate`.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
}

/// Argument combinations clap cannot see (exit 1).
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Simulated outputs diverged from the reference (exit 3).
#[derive(Debug)]
struct VerifyFailed(String);

impl fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for VerifyFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Error
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else if err.downcast_ref::<VerifyFailed>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.cmd {
        Cmd::GenTrace(a) => cmd_gen_trace(cli, a),
        Cmd::Profile(a) => cmd_profile(cli, a),
        Cmd::MineCache(a) => cmd_mine_cache(cli, a),
        Cmd::Partition(a) => cmd_partition(cli, a),
        Cmd::Simulate(a) => cmd_simulate(cli, a),
        Cmd::Sweep(a) => cmd_sweep(cli, a),
        Cmd::Report(a) => cmd_report(cli, a),
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    match &cli.config {
        Some(path) => {
            Config::load(path).with_context(|| format!("loading config {}", path.display()))
        }
        None => Ok(Config::default()),
    }
}

fn table_from<'a>(cfg: &'a Config, index: usize) -> anyhow::Result<&'a EmbeddingTableSpec> {
    cfg.tables.get(index).ok_or_else(|| {
        UsageError(format!(
            "--table {index} out of range; config defines {} table(s)",
            cfg.tables.len()
        ))
        .into()
    })
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn say(cli: &Cli, msg: impl fmt::Display) {
    if !cli.quiet {
        println!("{msg}");
    }
}

/// Writes via a temp file plus rename so partially written outputs never
/// land under the final name.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn parse_groups(spec: &str) -> anyhow::Result<Vec<Vec<u32>>> {
    let mut groups = Vec::new();
    for part in spec.split(';').filter(|p| !p.trim().is_empty()) {
        let mut g = Vec::new();
        for tok in part.split(',') {
            g.push(
                tok.trim()
                    .parse::<u32>()
                    .map_err(|_| UsageError(format!("bad group item '{tok}'")))?,
            );
        }
        groups.push(g);
    }
    Ok(groups)
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> anyhow::Result<Vec<T>> {
    let mut out = Vec::new();
    for tok in spec.split(',').filter(|t| !t.trim().is_empty()) {
        out.push(
            tok.trim()
                .parse::<T>()
                .map_err(|_| UsageError(format!("bad {what} value '{tok}'")))?,
        );
    }
    if out.is_empty() {
        return Err(UsageError(format!("empty {what} list")).into());
    }
    Ok(out)
}

fn parse_mine_params(spec: &str) -> anyhow::Result<MineParams> {
    let mut params = MineParams::default();
    for pair in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| UsageError(format!("bad mine parameter '{pair}'")))?;
        let v = v.trim();
        match k.trim() {
            "top_k" => params.top_k = v.parse().map_err(|_| UsageError(format!("bad top_k '{v}'")))?,
            "min_support" => {
                params.min_support =
                    v.parse().map_err(|_| UsageError(format!("bad min_support '{v}'")))?
            }
            "m_max" => params.m_max = v.parse().map_err(|_| UsageError(format!("bad m_max '{v}'")))?,
            other => return Err(UsageError(format!("unknown mine parameter '{other}'")).into()),
        }
    }
    Ok(params)
}

fn profile_json(prof: &embsim::trace::FrequencyProfile, blocks: u32, top: usize) -> serde_json::Value {
    let histogram = trace::block_access_histogram(prof, blocks.min(prof.n_items())).unwrap_or_default();
    let mut hottest: Vec<(u32, u64)> = prof
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as u32, c))
        .collect();
    hottest.sort_unstable_by_key(|&(i, c)| (std::cmp::Reverse(c), i));
    hottest.truncate(top);
    json!({
        "n_items": prof.n_items(),
        "total_samples": prof.total_samples,
        "total_accesses": prof.total_accesses(),
        "avg_red": prof.avg_red,
        "block_histogram": histogram,
        "hottest_items": hottest.iter().map(|&(i, c)| json!([i, c])).collect::<Vec<_>>(),
        "generated_at": timestamp(),
    })
}

fn cmd_gen_trace(cli: &Cli, a: &GenTraceArgs) -> anyhow::Result<()> {
    let out = out_path(cli, "trace.txt");
    let groups = match &a.groups {
        Some(spec) => parse_groups(spec)?,
        None => Vec::new(),
    };
    let mut tr = if groups.is_empty() && a.group_prob == 0.0 {
        trace::generate_zipf_trace(a.items, a.samples, a.avg_red, a.zipf, cli.seed)?
    } else {
        trace::generate_cooccur_trace(
            a.items, a.samples, a.avg_red, a.zipf, &groups, a.group_prob, cli.seed,
        )?
    };
    tr.table_id = a.table_id;
    trace::write_trace(&out, &tr)?;
    let sidecar = out.with_extension("profile.json");
    if !tr.is_empty() {
        let prof = trace::profile(&tr)?;
        write_json(&sidecar, &profile_json(&prof, 8, 20))?;
    }
    say(cli, format!("wrote {} samples to {}", tr.len(), out.display()));
    Ok(())
}

fn cmd_profile(cli: &Cli, a: &ProfileArgs) -> anyhow::Result<()> {
    let out = out_path(cli, "profile.json");
    let table = EmbeddingTableSpec::new(0, a.items as u64, 2, 0);
    let tr = trace::load_trace(&a.trace, &table)?;
    let prof = trace::profile(&tr)?;
    let mut value = profile_json(&prof, a.blocks, 20);
    value["block_histogram"] = json!(trace::block_access_histogram(&prof, a.blocks)?);
    write_json(&out, &value)?;
    say(
        cli,
        format!(
            "profiled {} samples, avg_red {:.3} -> {}",
            prof.total_samples,
            prof.avg_red,
            out.display()
        ),
    );
    Ok(())
}

fn cmd_mine_cache(cli: &Cli, a: &MineCacheArgs) -> anyhow::Result<()> {
    let out = out_path(cli, "cache.txt");
    let table = EmbeddingTableSpec::new(0, a.items as u64, 2, 0);
    let tr = trace::load_trace(&a.trace, &table)?;
    let prof = trace::profile(&tr)?;
    let params = MineParams {
        top_k: a.top_k,
        min_support: a.min_support,
        m_max: a.m_max,
    };
    let list = cache::mine_cache_lists(&tr, &prof, &params)?;
    cache::write_cache_list(&out, &list)?;
    say(cli, format!("mined {} groups -> {}", list.groups.len(), out.display()));
    for g in &list.groups {
        say(cli, format!("  {:?} saves {} reads", g.items, g.benefit));
    }
    Ok(())
}

enum NcChoice {
    Auto,
    Fixed(u32),
}

fn parse_nc(s: &str) -> anyhow::Result<NcChoice> {
    if s == "auto" {
        Ok(NcChoice::Auto)
    } else {
        Ok(NcChoice::Fixed(s.parse().map_err(|_| {
            UsageError(format!("--nc expects `auto` or an even number, got '{s}'"))
        })?))
    }
}

fn cmd_partition(cli: &Cli, a: &PartitionArgs) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let table = table_from(&cfg, a.table)?;
    let out = out_path(cli, "plan.txt");
    let tr = trace::load_trace(&a.trace, table)?;
    let prof = trace::profile(&tr)?;
    let workload = WorkloadSpec {
        batch_size: cfg.workload.batch_size,
        avg_red: Some(cfg.workload.avg_red.unwrap_or(prof.avg_red)),
    };

    let mut candidates_json = Vec::new();
    let shape: TileShape = match parse_nc(&a.nc)? {
        NcChoice::Fixed(n_c) => partition::tile_shape(n_c, table, &cfg.cluster)?,
        NcChoice::Auto => {
            let candidates =
                partition::evaluate_shape_candidates(table, &cfg.cluster, &workload, &cfg.cost);
            for (n_c, obj) in &candidates {
                match obj {
                    Some(o) => say(cli, format!("candidate n_c={n_c}: objective {o:.1} ns")),
                    None => say(cli, format!("candidate n_c={n_c}: infeasible")),
                }
                candidates_json.push(json!({ "n_c": n_c, "objective": obj }));
            }
            let shape =
                partition::optimize_uniform_shape(table, &cfg.cluster, &workload, &cfg.cost)?;
            say(cli, format!("chosen n_c={}", shape.n_c));
            shape
        }
    };

    let plan = match a.planner {
        Planner::Uniform => partition::partition_uniform(table, &shape, &cfg.cluster)?,
        Planner::Nonuniform => {
            partition::partition_nonuniform(&prof, table, &shape, &cfg.cluster)?
        }
        Planner::CacheAware => {
            let list: CacheList = match (&a.cache_list, &a.mine) {
                (Some(path), _) => cache::load_cache_list(path)?,
                (None, Some(spec)) => {
                    let params = parse_mine_params(spec)?;
                    cache::mine_cache_lists(&tr, &prof, &params)?
                }
                (None, None) => {
                    return Err(UsageError(
                        "--planner cache-aware needs --cache-list or --mine".into(),
                    )
                    .into())
                }
            };
            partition::partition_cache_aware(&prof, &list, table, &shape, &cfg.cluster)?
        }
    };
    plan.validate(&cfg.cluster)?;
    partition::write_plan(&out, &plan, table)?;

    let balance = partition::balance_metrics(&plan, &tr)?;
    let report = json!({
        "planner": a.planner.to_string(),
        "table_id": table.table_id,
        "shape": { "n_r": plan.shape.n_r, "n_c": plan.shape.n_c,
                   "n_row_groups": plan.n_row_groups, "column_shards": plan.column_shards },
        "nc_candidates": candidates_json,
        "cached_groups": plan.total_cached_groups(),
        "balance": balance,
        "generated_at": timestamp(),
    });
    let report_path = out.with_extension("balance.json");
    write_json(&report_path, &report)?;
    say(
        cli,
        format!(
            "{} plan: {} row groups x {} shards, CV {:.4} -> {}",
            a.planner,
            plan.n_row_groups,
            plan.column_shards,
            balance.cv,
            out.display()
        ),
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let table = table_from(&cfg, a.table)?;
    let out_dir = out_path(cli, "sim_out");
    std::fs::create_dir_all(&out_dir)?;

    let plan: PartitionPlan = partition::load_plan(&a.plan)?;
    plan.validate(&cfg.cluster)?;
    let tr: AccessTrace = trace::load_trace(&a.trace, table)?;

    let batch_size = a.batch_size.unwrap_or(cfg.workload.batch_size) as usize;
    if batch_size == 0 {
        return Err(UsageError("--batch-size must be >= 1".into()).into());
    }
    let skip = a.skip as usize;
    if skip >= tr.len() {
        return Err(embsim::Error::EmptyTrace(format!(
            "skip {} leaves no samples of {}",
            skip,
            tr.len()
        ))
        .into());
    }
    let available = (tr.len() - skip) / batch_size;
    let batches = match a.batches {
        Some(b) => {
            if b as usize > available {
                return Err(embsim::Error::validation(
                    "batches",
                    format!("requested {b} batches but trace holds {available}"),
                )
                .into());
            }
            b as usize
        }
        // Default run: 12,800 inferences, trimmed to what the trace holds.
        None => available.min((12_800usize).div_ceil(batch_size)),
    };
    if batches == 0 {
        return Err(embsim::Error::EmptyTrace("no full batch available".into()).into());
    }

    let images = engine::build_images(&plan, table)?;
    let mut csv = String::from("stage1,stage2_max,stage3,total\n");
    let mut sums = [0.0f64; 4];
    let mut per_dpu = vec![0u64; (plan.n_row_groups * plan.column_shards) as usize];
    let mut all_outputs: Vec<Vec<f32>> = Vec::new();
    let mut verified = None;
    for b in 0..batches {
        let lo = skip + b * batch_size;
        let batch = &tr.samples[lo..lo + batch_size];
        let res = engine::simulate_forward(&plan, &images, batch, &cfg.cluster, &cfg.cost)?;
        if cli.verify {
            let reference = engine::reference_forward(table, batch)?;
            if res.outputs != reference {
                return Err(VerifyFailed(format!(
                    "batch {b}: simulated outputs diverge from the reference reduction"
                ))
                .into());
            }
            verified = Some(true);
        }
        let lr = &res.latency;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            lr.t_cpu_to_dpu, lr.t_lookup_max, lr.t_dpu_to_cpu, lr.total
        ));
        sums[0] += lr.t_cpu_to_dpu;
        sums[1] += lr.t_lookup_max;
        sums[2] += lr.t_dpu_to_cpu;
        sums[3] += lr.total;
        for (acc, add) in per_dpu.iter_mut().zip(&res.per_dpu_accesses) {
            *acc += add;
        }
        if a.dump_outputs {
            all_outputs.extend(res.outputs);
        }
    }

    write_atomic(&out_dir.join("breakdown.csv"), csv.as_bytes())?;
    let n = batches as f64;
    let summary = SimulationSummary {
        batches: batches as u64,
        batch_size: batch_size as u32,
        stage1_total: sums[0],
        stage2_total: sums[1],
        stage3_total: sums[2],
        total: sums[3],
        stage1_mean: sums[0] / n,
        stage2_mean: sums[1] / n,
        stage3_mean: sums[2] / n,
        total_mean: sums[3] / n,
        total_mram_accesses: per_dpu.iter().sum(),
        per_dpu_accesses: per_dpu,
        verified,
    };
    let mut summary_json = serde_json::to_value(&summary)?;
    summary_json["generated_at"] = json!(timestamp());
    write_json(&out_dir.join("summary.json"), &summary_json)?;
    if a.dump_outputs {
        engine::write_outputs_bin(&out_dir.join("outputs.bin"), &all_outputs)?;
    }
    say(
        cli,
        format!(
            "simulated {} batches of {}: mean total {:.1} ns (stage2 share {:.1}%) -> {}",
            batches,
            batch_size,
            summary.total_mean,
            100.0 * summary.stage2_total / summary.total,
            out_dir.display()
        ),
    );
    Ok(())
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let table = table_from(&cfg, a.table)?;
    let out = out_path(cli, "sweep.csv");
    let avg_reds: Vec<f64> = parse_list(&a.avg_red, "avg_red")?;
    let ncs: Vec<u32> = parse_list(&a.nc, "nc")?;
    let batch = a.batch_size.unwrap_or(cfg.workload.batch_size);

    let mut csv = String::from("avg_red,n_c,read_bytes,stage1,stage2,stage3,total\n");
    for &avg_red in &avg_reds {
        for &n_c in &ncs {
            // Sweep mode deliberately relaxes the N_c <= 8 rule to walk the
            // read-size axis.
            let shape = partition::tile_shape_relaxed(n_c, table, &cfg.cluster)?;
            let workload = WorkloadSpec::new(batch, avg_red);
            let row_share = shape.n_r as f64 / table.rows as f64;
            let indices = batch as f64 * avg_red;
            let t1 = if cfg.cost.equal_size_padding {
                row_share * indices * cfg.cost.t_c
            } else {
                indices * cfg.cost.t_c
            };
            let t2 =
                costmodel::lookup_time_uniform(&shape, table, &cfg.cluster, &workload, &cfg.cost)?;
            let t3 = n_c as f64 * batch as f64 * cfg.cost.t_d;
            let read_bytes = n_c * table.elem_bytes;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                avg_red,
                n_c,
                read_bytes,
                t1,
                t2,
                t3,
                t1 + t2 + t3
            ));
        }
    }
    write_atomic(&out, csv.as_bytes())?;
    say(
        cli,
        format!(
            "swept {} x {} cells -> {}",
            avg_reds.len(),
            ncs.len(),
            out.display()
        ),
    );
    Ok(())
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for path in &a.inputs {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let name = path.display().to_string();
        if let Some(balance) = value.get("balance") {
            let line = format!(
                "{name}: planner={} cv={} total_accesses={}",
                value.get("planner").and_then(|v| v.as_str()).unwrap_or("?"),
                balance.get("cv").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                balance.get("total").and_then(|v| v.as_u64()).unwrap_or(0),
            );
            say(cli, &line);
            rows.push(line);
        } else if value.get("stage1_total").is_some() {
            let g = |k: &str| value.get(k).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
            let line = format!(
                "{name}: batches={} mean_total={:.1} stage2_share={:.3} mram_accesses={}",
                value.get("batches").and_then(|v| v.as_u64()).unwrap_or(0),
                g("total_mean"),
                g("stage2_total") / g("total"),
                value.get("total_mram_accesses").and_then(|v| v.as_u64()).unwrap_or(0),
            );
            say(cli, &line);
            rows.push(line);
        } else {
            let line = format!("{name}: avg_red={}",
                value.get("avg_red").and_then(|v| v.as_f64()).map_or("?".into(), |v| v.to_string()));
            say(cli, &line);
            rows.push(line);
        }
    }
    if let Some(out) = &cli.out {
        write_atomic(out, (rows.join("\n") + "\n").as_bytes())?;
    }
    Ok(())
}
