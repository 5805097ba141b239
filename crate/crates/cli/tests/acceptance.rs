//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them). Thresholds are pinned
//! regression values; simulated outputs are compared bit-exactly.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use embsim::cache::{estimate_benefit, mine_cache_lists, CacheGroup, CacheList, MineParams};
use embsim::costmodel::{self, mram_read_latency};
use embsim::engine::{build_images, reference_forward, simulate_forward};
use embsim::model::{CostParams, DpuClusterConfig, EmbeddingTableSpec, WorkloadSpec};
use embsim::partition::{
    balance_metrics, partition_cache_aware, partition_cache_aware_traced, partition_nonuniform,
    partition_uniform, tile_shape, UNIFORM_NC_CANDIDATES,
};
use embsim::trace::{generate_cooccur_trace, generate_zipf_trace, profile, AccessTrace};

fn pass(n: u32, name: &str) {
    println!("acceptance criterion {n:02} ({name}): PASS");
}

fn cluster(n_dpu: u32) -> DpuClusterConfig {
    DpuClusterConfig {
        n_dpu,
        ..DpuClusterConfig::default()
    }
}

fn table(rows: u64, cols: u32, seed: u64) -> EmbeddingTableSpec {
    EmbeddingTableSpec::new(0, rows, cols, seed)
}

/// Criterion 1: for randomized configurations across all three planners,
/// simulate_forward equals reference_forward bit-exactly (zero tolerance).
#[test]
fn criterion_01_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC0);
    let mut done = 0u32;
    let mut attempts = 0u32;
    while done < 200 {
        attempts += 1;
        assert!(attempts < 2000, "could not draw 200 feasible configurations");
        let cols = [8u32, 16, 32][rng.gen_range(0..3)];
        let n_dpu = rng.gen_range(8..=64);
        let rows: u64 = if done % 40 == 39 {
            rng.gen_range(50_000..=100_000)
        } else {
            rng.gen_range(100..=20_000)
        };
        let tbl = EmbeddingTableSpec::new(done, rows, cols, rng.gen());
        let cl = cluster(n_dpu);
        let shapes: Vec<_> = UNIFORM_NC_CANDIDATES
            .iter()
            .filter_map(|&nc| tile_shape(nc, &tbl, &cl).ok())
            .collect();
        if shapes.is_empty() {
            continue;
        }
        let shape = shapes[rng.gen_range(0..shapes.len())];
        let avg_red = rng.gen_range(2.0..60.0);

        // Half the configurations plant co-occurring groups; those also feed
        // the cache-aware planner.
        let planted: Vec<Vec<u32>> = if done % 2 == 0 {
            let n_groups = rng.gen_range(1..=4);
            let mut items: Vec<u32> = Vec::new();
            while items.len() < 4 * n_groups {
                let i = rng.gen_range(0..rows as u32);
                if !items.contains(&i) {
                    items.push(i);
                }
            }
            (0..n_groups)
                .map(|g| {
                    let size = rng.gen_range(2..=4);
                    let mut v: Vec<u32> = items[4 * g..4 * g + size].to_vec();
                    v.sort_unstable();
                    v
                })
                .collect()
        } else {
            Vec::new()
        };
        let tr = if planted.is_empty() {
            generate_zipf_trace(rows as u32, 96, avg_red, rng.gen_range(0.0..1.2), rng.gen())
                .unwrap()
        } else {
            generate_cooccur_trace(
                rows as u32,
                96,
                avg_red,
                rng.gen_range(0.0..1.2),
                &planted,
                0.7,
                rng.gen(),
            )
            .unwrap()
        };
        let prof = profile(&tr).unwrap();

        let plan = match done % 3 {
            0 => partition_uniform(&tbl, &shape, &cl).unwrap(),
            1 => partition_nonuniform(&prof, &tbl, &shape, &cl).unwrap(),
            _ => {
                let groups: Vec<CacheGroup> = planted
                    .iter()
                    .map(|g| CacheGroup::new(g.clone(), estimate_benefit(&tr, g)).unwrap())
                    .collect();
                let list = CacheList::new(groups).unwrap();
                partition_cache_aware(&prof, &list, &tbl, &shape, &cl).unwrap()
            }
        };
        plan.validate(&cl).unwrap();
        let images = build_images(&plan, &tbl).unwrap();
        for img in &images {
            assert!(img.bytes() <= cl.mram_bytes);
        }
        let batch = &tr.samples[..64];
        let res = simulate_forward(&plan, &images, batch, &cl, &CostParams::default()).unwrap();
        let reference = reference_forward(&tbl, batch).unwrap();
        assert_eq!(
            res.outputs, reference,
            "bit-exact oracle equivalence failed (config {done})"
        );
        done += 1;
    }
    pass(1, "oracle equivalence over 200 randomized configurations");
}

/// Criterion 2: the cache-aware planner's assignments and part_count
/// evolution match a manual step-for-step trace of the greedy algorithm on
/// hand-checkable instances.
#[test]
fn criterion_02_cache_aware_fidelity() {
    // Instance A: lookup of {1,4,5} with {4,5} cached, two row groups.
    let tbl = table(6, 8, 1);
    let cl = cluster(2);
    let shape = tile_shape(8, &tbl, &cl).unwrap();
    let mut counts = vec![0u64; 6];
    counts[1] = 10;
    counts[4] = 10;
    counts[5] = 10;
    let prof = embsim::trace::FrequencyProfile {
        counts,
        total_samples: 10,
        avg_red: 3.0,
    };
    let list = CacheList::new(vec![CacheGroup::new(vec![4, 5], 10).unwrap()]).unwrap();
    let rep = partition_cache_aware_traced(&prof, &list, &tbl, &shape, &cl).unwrap();
    // Phase 1: {4,5} -> group 0 (tie on 0 breaks low), count 10+10-10 = 10.
    // Phase 2: item 1 -> group 1; zero-frequency items 0,2,3 -> group 0.
    assert_eq!(rep.plan.assigned, vec![0, 1, 0, 0, 0, 0]);
    assert_eq!(
        rep.part_count_steps,
        vec![
            vec![10, 0],
            vec![10, 10],
            vec![10, 10],
            vec![10, 10],
            vec![10, 10],
        ]
    );
    assert_eq!(rep.final_part_counts, vec![10, 10]);
    assert_eq!(rep.plan.cached[0][0].items, vec![4, 5]);
    assert!(rep.demoted.is_empty());

    // Instance B: benefit subtraction drives group 0's counter negative, so
    // the second cached group lands there too; without the `-= benefit`
    // step it would have chosen group 1.
    let prof = embsim::trace::FrequencyProfile {
        counts: vec![3, 3, 5, 5, 2, 1],
        total_samples: 10,
        avg_red: 2.0,
    };
    let list = CacheList::new(vec![
        CacheGroup::new(vec![0, 1], 10).unwrap(),
        CacheGroup::new(vec![2, 3], 2).unwrap(),
    ])
    .unwrap();
    let rep = partition_cache_aware_traced(&prof, &list, &tbl, &shape, &cl).unwrap();
    assert_eq!(rep.plan.assigned, vec![0, 0, 0, 0, 1, 1]);
    assert_eq!(
        rep.part_count_steps,
        vec![vec![-4, 0], vec![4, 0], vec![4, 2], vec![4, 3]]
    );
    assert_eq!(rep.final_part_counts, vec![4, 3]);
    pass(2, "greedy cache-aware evolution matches manual traces");
}

/// Criterion 3: greedy bin packing vs an exhaustive oracle on 500 small
/// random instances, plus the worked (18,18) example.
#[test]
fn criterion_03_greedy_binpacking_quality() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB1B1);
    for _ in 0..500 {
        let n = rng.gen_range(4..=12usize);
        let n_groups = rng.gen_range(2..=3u32);
        let freqs: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=100)).collect();

        let tbl = table(n as u64, 8, 0);
        let cl = cluster(n_groups);
        let shape = tile_shape(8, &tbl, &cl).unwrap();
        let prof = embsim::trace::FrequencyProfile {
            counts: freqs.clone(),
            total_samples: 1,
            avg_red: 1.0,
        };
        let plan = partition_nonuniform(&prof, &tbl, &shape, &cl).unwrap();
        let mut loads = vec![0u64; n_groups as usize];
        for (i, &g) in plan.assigned.iter().enumerate() {
            loads[g as usize] += freqs[i];
        }
        let greedy_max = *loads.iter().max().unwrap();

        // Exhaustive optimum over all group^n assignments.
        let mut opt_max = u64::MAX;
        let total_assignments = (n_groups as u64).pow(n as u32);
        for code in 0..total_assignments {
            let mut c = code;
            let mut loads = vec![0u64; n_groups as usize];
            for &f in &freqs {
                loads[(c % n_groups as u64) as usize] += f;
                c /= n_groups as u64;
            }
            opt_max = opt_max.min(*loads.iter().max().unwrap());
        }
        let max_freq = *freqs.iter().max().unwrap();
        assert!(
            3 * greedy_max <= 4 * opt_max + 3 * max_freq,
            "greedy {greedy_max} vs optimal {opt_max} (max item {max_freq})"
        );
    }

    // Worked example: frequencies [10,9,5,5,4,3] over two groups -> (18,18).
    let tbl = table(6, 8, 0);
    let cl = cluster(2);
    let shape = tile_shape(8, &tbl, &cl).unwrap();
    let prof = embsim::trace::FrequencyProfile {
        counts: vec![10, 9, 5, 5, 4, 3],
        total_samples: 1,
        avg_red: 1.0,
    };
    let plan = partition_nonuniform(&prof, &tbl, &shape, &cl).unwrap();
    let mut loads = [0u64; 2];
    for (i, &g) in plan.assigned.iter().enumerate() {
        loads[g as usize] += prof.counts[i];
    }
    assert_eq!(loads, [18, 18]);
    pass(3, "greedy within 4/3 * optimal + max frequency on 500 instances");
}

/// Criterion 4: on a Zipf(1.05) trace with 8 row groups, the non-uniform
/// plan balances replayed accesses (CV < 0.05) where uniform does not
/// (CV > 0.5).
#[test]
fn criterion_04_balance_improvement() {
    let tr = generate_zipf_trace(10_000, 100_000, 50.0, 1.05, 0x41).unwrap();
    let prof = profile(&tr).unwrap();
    let tbl = table(10_000, 8, 2);
    let cl = cluster(8);
    let shape = tile_shape(8, &tbl, &cl).unwrap();

    let uni = partition_uniform(&tbl, &shape, &cl).unwrap();
    let non = partition_nonuniform(&prof, &tbl, &shape, &cl).unwrap();
    let mu = balance_metrics(&uni, &tr).unwrap();
    let mn = balance_metrics(&non, &tr).unwrap();
    assert!(mu.cv > 0.5, "uniform CV {} should exceed 0.5", mu.cv);
    assert!(mn.cv < 0.05, "non-uniform CV {} should be below 0.05", mn.cv);
    pass(4, "non-uniform partitioning balances a skewed trace");
}

fn planted_workload(seed: u64) -> (AccessTrace, Vec<Vec<u32>>) {
    let groups: Vec<Vec<u32>> = (0..10u32).map(|g| vec![3 * g, 3 * g + 1, 3 * g + 2]).collect();
    let tr = generate_cooccur_trace(100, 19_968, 3.0, 0.0, &groups, 0.5, seed).unwrap();
    (tr, groups)
}

/// Criterion 5: on the planted co-occurrence workload, cache-aware
/// execution cuts total MRAM reads by >= 25% versus non-uniform, and the
/// measured savings equal the mined benefits exactly.
#[test]
fn criterion_05_cache_benefit() {
    let (tr, planted) = planted_workload(0xC5);
    let prof = profile(&tr).unwrap();
    let tbl = table(100, 8, 3);
    let cl = cluster(4);
    let shape = tile_shape(8, &tbl, &cl).unwrap();

    let list = mine_cache_lists(
        &tr,
        &prof,
        &MineParams {
            top_k: 100,
            min_support: 300,
            m_max: 3,
        },
    )
    .unwrap();
    // The miner recovers exactly the ten planted triples.
    let mut mined: Vec<Vec<u32>> = list.groups.iter().map(|g| g.items.clone()).collect();
    mined.sort();
    let mut want = planted.clone();
    want.sort();
    assert_eq!(mined, want, "miner should recover the planted groups");

    let nu = partition_nonuniform(&prof, &tbl, &shape, &cl).unwrap();
    let ca = partition_cache_aware(&prof, &list, &tbl, &shape, &cl).unwrap();
    assert_eq!(ca.total_cached_groups(), list.groups.len(), "all groups placed");

    let params = CostParams::default();
    let run = |plan: &embsim::partition::PartitionPlan| -> u64 {
        let images = build_images(plan, &tbl).unwrap();
        let mut total = 0u64;
        for batch in tr.samples.chunks(64) {
            let res = simulate_forward(plan, &images, batch, &cl, &params).unwrap();
            total += res.total_row_group_accesses();
        }
        total
    };
    let total_nu = run(&nu);
    let total_ca = run(&ca);
    assert_eq!(total_nu, tr.total_accesses(), "uncached run reads every active");
    let savings = total_nu - total_ca;
    assert_eq!(savings, list.total_benefit(), "savings must equal mined benefits");
    assert!(
        savings as f64 >= 0.25 * total_nu as f64,
        "saved {savings} of {total_nu} ({:.1}%), need >= 25%",
        100.0 * savings as f64 / total_nu as f64
    );
    pass(5, "cache-aware execution saves >= 25% reads, exactly the mined benefit");
}

/// Criterion 6: granting 40% / 70% / 100% of the required cache storage
/// yields non-increasing modeled lookup time, strictly lower at 100%.
#[test]
fn criterion_06_cache_capacity_monotonicity() {
    let (tr, _) = planted_workload(0xC6);
    let prof = profile(&tr).unwrap();
    let tbl = table(100, 8, 4);
    // Memory-bound cost point so stage 2 reflects the saved reads.
    let params = CostParams {
        t_out: 0.0,
        ..CostParams::default()
    };
    let list = mine_cache_lists(
        &tr,
        &prof,
        &MineParams {
            top_k: 100,
            min_support: 300,
            m_max: 3,
        },
    )
    .unwrap();
    assert_eq!(list.groups.len(), 10);

    let mut lookup_totals = Vec::new();
    for fraction in [0.4, 0.7, 1.0] {
        let cl = DpuClusterConfig {
            n_dpu: 2,
            cache_fraction: fraction,
            ..DpuClusterConfig::default()
        };
        let shape = tile_shape(8, &tbl, &cl).unwrap();
        let plan = partition_cache_aware(&prof, &list, &tbl, &shape, &cl).unwrap();
        let images = build_images(&plan, &tbl).unwrap();
        let mut stage2 = 0.0;
        for batch in tr.samples.chunks(64) {
            let res = simulate_forward(&plan, &images, batch, &cl, &params).unwrap();
            stage2 += res.latency.t_lookup_max;
        }
        lookup_totals.push(stage2);
    }
    assert!(
        lookup_totals[0] >= lookup_totals[1] && lookup_totals[1] >= lookup_totals[2],
        "lookup time must be non-increasing in cache fraction: {lookup_totals:?}"
    );
    assert!(
        lookup_totals[2] < lookup_totals[0],
        "full cache must beat 40%: {lookup_totals:?}"
    );
    pass(6, "lookup time non-increasing in granted cache fraction");
}

/// Criterion 7: MRAM read-curve anchors — flat through 32 B, non-decreasing,
/// ~800 MB/s at the 2048 B maximum, unaligned reads rejected.
#[test]
fn criterion_07_cost_model_anchors() {
    let p = CostParams::default();
    let base = mram_read_latency(8, &p).unwrap();
    for b in [16u64, 24, 32] {
        assert_eq!(mram_read_latency(b, &p).unwrap(), base);
    }
    let mut prev = 0.0;
    for b in (8..=2048).step_by(8) {
        let v = mram_read_latency(b, &p).unwrap();
        assert!(v >= prev);
        prev = v;
    }
    let ns = mram_read_latency(2048, &p).unwrap();
    let mb_per_s = 2048.0 / ns * 1e3;
    assert!(
        (700.0..=800.0).contains(&mb_per_s),
        "modeled large-read bandwidth {mb_per_s} MB/s"
    );
    for bad in [4u64, 12, 21, 2056] {
        assert!(mram_read_latency(bad, &p).is_err(), "{bad} B must be rejected");
    }
    pass(7, "MRAM curve flat to 32 B, ~780 MB/s at 2 KiB, alignment enforced");
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_embsim")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn embsim");
    assert!(
        out.status.success(),
        "embsim {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Criterion 8: stage-time trends over N_c, and `--nc auto` returning the
/// argmin of an independent re-evaluation of the three stage formulas.
#[test]
fn criterion_08_stage_trends_and_auto_nc() {
    // Direction: stage 3 strictly rises and stage 1 strictly falls with N_c.
    let tbl = table(16_384, 16, 5);
    let cl = cluster(16);
    let w = WorkloadSpec::new(64, 100.0);
    let p = CostParams::default();
    let mut last_t1 = f64::INFINITY;
    let mut last_t3 = 0.0;
    for n_c in [2u32, 4, 8] {
        let shape = tile_shape(n_c, &tbl, &cl).unwrap();
        let plan = partition_uniform(&tbl, &shape, &cl).unwrap();
        let t1 = costmodel::cpu_to_dpu_time(&plan, &w, &p).unwrap();
        let t3 = costmodel::dpu_to_cpu_time(&plan, &w, &p);
        assert!(t1 < last_t1, "stage 1 must strictly decrease");
        assert!(t3 > last_t3, "stage 3 must strictly increase");
        last_t1 = t1;
        last_t3 = t3;
    }

    // `--nc auto` through the CLI, cross-checked against a from-scratch
    // evaluation of the objective (no library calls).
    let dir = tempfile::tempdir().unwrap();
    let rows = 8192u64;
    std::fs::write(
        dir.path().join("config.json"),
        format!(
            r#"{{ "cluster": {{ "n_dpu": 16 }},
                 "tables": [ {{ "table_id": 0, "rows": {rows}, "cols": 16, "content_seed": 3 }} ] }}"#
        ),
    )
    .unwrap();
    run_in(
        dir.path(),
        &[
            "gen-trace", "--items", "8192", "--samples", "256", "--avg-red", "40",
            "--zipf", "1.0", "--seed", "11", "--out", "trace.txt", "--quiet",
        ],
    );
    run_in(
        dir.path(),
        &[
            "partition", "--config", "config.json", "--trace", "trace.txt",
            "--planner", "uniform", "--nc", "auto", "--out", "plan.txt", "--quiet",
        ],
    );
    let plan_text = std::fs::read_to_string(dir.path().join("plan.txt")).unwrap();
    let shape_line = plan_text
        .lines()
        .find(|l| l.starts_with("shape "))
        .expect("shape line");
    let chosen_nc: u32 = shape_line.split_whitespace().nth(2).unwrap().parse().unwrap();

    // Derive avg_red exactly as the CLI does: from the trace itself.
    let trace_text = std::fs::read_to_string(dir.path().join("trace.txt")).unwrap();
    let (mut total, mut samples) = (0u64, 0u64);
    for line in trace_text.lines() {
        let (_, rest) = line.split_once(',').unwrap();
        total += rest.split_whitespace().count() as u64;
        samples += 1;
    }
    let avg_red = total as f64 / samples as f64;

    // Independent re-implementation of the three stage formulas
    // (defaults: t_c = t_d = 2, alpha = 100, beta = 1.25, t_instr = 1,
    // t_out = 3, 14 tasklets, batch 64, equal-size padding).
    let (batch, cols, n_dpu) = (64.0f64, 16u32, 16u32);
    let mut best: Option<(f64, u32)> = None;
    for n_c in [2u32, 4, 6, 8] {
        if cols % n_c != 0 {
            continue;
        }
        let shards = cols / n_c;
        let n_rg = n_dpu / shards;
        if n_rg < 1 {
            continue;
        }
        let n_r = (rows as f64 / n_rg as f64).ceil();
        let read_bytes = (n_c * 4) as f64;
        let t_a = if read_bytes <= 32.0 {
            100.0
        } else {
            100.0 + 1.25 * (read_bytes - 32.0)
        };
        let share = n_r / rows as f64;
        let accesses = share * batch * avg_red;
        let t1 = share * batch * avg_red * 2.0;
        let t2 = (accesses * 1.0 + batch * read_bytes * 3.0).max(accesses * t_a / 14.0);
        let t3 = n_c as f64 * batch * 2.0;
        let obj = t1 + t2 + t3;
        let take = best.map_or(true, |(b, _)| obj <= b);
        if take {
            best = Some((obj, n_c));
        }
    }
    assert_eq!(chosen_nc, best.unwrap().1, "--nc auto must return the argmin");
    pass(8, "stage trends hold and --nc auto matches independent argmin");
}

/// Criterion 9: CLI sweep reproduces both lookup-time regimes: near-linear
/// growth for 8 B lookups, saturation for 64 B lookups.
#[test]
fn criterion_09_sweep_regimes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("config.json"),
        r#"{ "cluster": { "n_dpu": 64, "tasklets": 14 },
             "cost": { "t_c": 2.0, "t_d": 2.0, "mram_alpha": 100.0, "mram_beta": 1.25,
                        "t_instr": 1.0, "t_out": 3.0, "equal_size_padding": true },
             "workload": { "batch_size": 64 },
             "tables": [ { "table_id": 0, "rows": 100000, "cols": 64, "content_seed": 1 } ] }"#,
    )
    .unwrap();
    run_in(
        dir.path(),
        &[
            "sweep", "--config", "config.json", "--avg-red", "50,100,150,200,250,300",
            "--nc", "2,4,8,16,32", "--out", "sweep.csv", "--quiet",
        ],
    );
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut stage2 = std::collections::HashMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let avg_red: f64 = f[0].parse().unwrap();
        let n_c: u32 = f[1].parse().unwrap();
        let t2: f64 = f[4].parse().unwrap();
        stage2.insert((avg_red as u32, n_c), t2);
    }
    let growth_8b = stage2[&(300, 2)] / stage2[&(50, 2)];
    assert!(growth_8b >= 3.5, "8 B lookup growth {growth_8b} must be >= 3.5");
    let sat_64b = stage2[&(300, 16)] / stage2[&(200, 16)];
    assert!(sat_64b <= 1.1, "64 B lookup 300/200 ratio {sat_64b} must be <= 1.1");
    // Secondary direction: the 64 B series grows far less than the 8 B one.
    let growth_64b = stage2[&(300, 16)] / stage2[&(50, 16)];
    assert!(growth_64b < growth_8b);
    pass(9, "sweep shows linear 8 B growth and 64 B saturation");
}

/// Criterion 10: every command is byte-deterministic under a fixed seed
/// (timestamp field excluded).
#[test]
fn criterion_10_cli_determinism() {
    fn normalized(path: &PathBuf) -> String {
        let text = std::fs::read_to_string(path).unwrap();
        if path.extension().is_some_and(|e| e == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
            if let Some(obj) = v.as_object_mut() {
                obj.remove("generated_at");
            }
            serde_json::to_string_pretty(&v).unwrap()
        } else {
            text
        }
    }

    let run_pipeline = |dir: &Path| -> Vec<(String, String)> {
        std::fs::write(
            dir.join("config.json"),
            r#"{ "cluster": { "n_dpu": 8 },
                 "tables": [ { "table_id": 0, "rows": 600, "cols": 16, "content_seed": 9 } ] }"#,
        )
        .unwrap();
        run_in(
            dir,
            &[
                "gen-trace", "--items", "600", "--samples", "640", "--avg-red", "12",
                "--zipf", "0.9", "--groups", "4,5,6;10,11", "--group-prob", "0.4",
                "--seed", "77", "--out", "trace.txt", "--quiet",
            ],
        );
        run_in(
            dir,
            &[
                "mine-cache", "--trace", "trace.txt", "--items", "600", "--top-k", "100",
                "--min-support", "100", "--m-max", "3", "--out", "cache.txt", "--quiet",
            ],
        );
        run_in(
            dir,
            &[
                "partition", "--config", "config.json", "--trace", "trace.txt",
                "--planner", "cache-aware", "--cache-list", "cache.txt", "--nc", "auto",
                "--out", "plan.txt", "--quiet",
            ],
        );
        run_in(
            dir,
            &[
                "simulate", "--config", "config.json", "--trace", "trace.txt",
                "--plan", "plan.txt", "--verify", "--out", "sim", "--quiet",
            ],
        );
        run_in(
            dir,
            &[
                "sweep", "--config", "config.json", "--avg-red", "50,100", "--nc", "2,4,8",
                "--out", "sweep.csv", "--quiet",
            ],
        );
        ["trace.txt", "trace.profile.json", "cache.txt", "plan.txt",
         "plan.balance.json", "sim/breakdown.csv", "sim/summary.json", "sweep.csv"]
            .iter()
            .map(|name| (name.to_string(), normalized(&dir.join(name))))
            .collect()
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_pipeline(dir_a.path());
    let b = run_pipeline(dir_b.path());
    for ((name, left), (_, right)) in a.iter().zip(&b) {
        assert_eq!(left, right, "{name} differs between identical runs");
    }
    pass(10, "re-runs are byte-identical apart from timestamps");
}
