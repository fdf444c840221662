//! Acceptance checks. Each criterion prints one PASS or FAIL line; the
//! process exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use schedbench::embedding::{embed_ising, find_embedding, random_spins, validate_embedding};
use schedbench::harness::{analyze, run_experiment, ExperimentPlan, RESULT_FILE};
use schedbench::instances::{edge_target, generate_instance, is_proper_coloring, verify_colorable};
use schedbench::qubo::{
    apply_gauge, coloring_qubo, encode_coloring, ising_energy, qubo_energy, Gauge, IsingProblem,
};
use schedbench::samplers::{sample_exact, sample_sa, SamplerConfig, Schedule};
use schedbench::seed::rng_from;
use schedbench::stats::{compute_tts, fit_scaling, Tts};
use schedbench::topology::{build_chimera, build_pegasus, HardwareProfile, Machine};

type Outcome = Result<String, String>;

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let elapsed = start.elapsed();
    if elapsed <= limit {
        Ok(format!("{detail} in {:.1}s", elapsed.as_secs_f64()))
    } else {
        Err(format!("{detail}, but took {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
    }
}

fn random_ising(n: usize, rng: &mut impl Rng) -> IsingProblem {
    let mut p = IsingProblem::empty(n);
    for h in p.h.iter_mut() {
        *h = rng.gen_range(-1.0..1.0);
    }
    for a in 0..n {
        for b in a + 1..n {
            p.add_coupling(a, b, rng.gen_range(-1.0..1.0));
        }
    }
    p
}

/// All `k^n` colorings, as digits of a base-`k` counter.
fn all_colorings(n: usize, k: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..k.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let c = (code % k) as u8;
                code /= k;
                c
            })
            .collect()
    })
}

fn qubo_correctness() -> Outcome {
    let start = Instant::now();
    let mut colorable = 0;
    for trial in 0..50u64 {
        let mut rng = rng_from(1001, &[trial]);
        let n = rng.gen_range(1..=6);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|_| rng.gen_bool(0.6))
            .collect();
        let q = coloring_qubo(n, &edges, 3).map_err(|e| e.to_string())?;
        let proper: BTreeSet<Vec<u8>> = all_colorings(n, 3)
            .filter(|c| is_proper_coloring(&edges, c))
            .map(|c| encode_coloring(&c, 3))
            .collect();
        let mut zeros = BTreeSet::new();
        let mut min = f64::INFINITY;
        for code in 0u32..1 << (3 * n) {
            let x: Vec<u8> = (0..3 * n).map(|i| (code >> i & 1) as u8).collect();
            let e = qubo_energy(&q, &x).map_err(|e| e.to_string())?;
            min = min.min(e);
            if e == 0.0 {
                zeros.insert(x);
            }
        }
        if zeros != proper {
            return Err(format!("graph {trial}: zero set differs from proper colorings"));
        }
        if (min == 0.0) != !proper.is_empty() {
            return Err(format!("graph {trial}: min H = {min} disagrees with colorability"));
        }
        colorable += usize::from(!proper.is_empty());
    }
    within(
        Duration::from_secs(60),
        start,
        format!("50 graphs, {colorable} colorable"),
    )
}

fn instance_generator() -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    for n in [8, 12, 16] {
        let mut ok = 0;
        let mut first_error = None;
        for i in 0..100u64 {
            match generate_instance(n, 4.5, i) {
                Ok(g) => {
                    let colorable = verify_colorable(&g, 3).map_err(|e| e.to_string())?.is_some();
                    if colorable && g.edges.len() == edge_target(n, 4.5) {
                        ok += 1;
                    }
                }
                Err(e) => {
                    first_error.get_or_insert(e.to_string());
                }
            }
        }
        if ok < 100 {
            problems.push(format!(
                "n={n}: {ok}/100 valid with {} edges ({})",
                edge_target(n, 4.5),
                first_error.unwrap_or_default()
            ));
        }
    }
    if problems.is_empty() {
        within(Duration::from_secs(60), start, "300 instances valid".into())
    } else {
        Err(problems.join("; "))
    }
}

fn topology_counts() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    for (m, nodes) in [(8, 512), (12, 1152), (16, 2048)] {
        let g = build_chimera(m).map_err(|e| e.to_string())?;
        if g.nodes().len() != nodes || g.max_degree() != 6 {
            return Err(format!("C{m}: {} nodes, max degree {}", g.nodes().len(), g.max_degree()));
        }
        details.push(format!("C{m}={nodes}"));
    }
    let p = build_pegasus(16).map_err(|e| e.to_string())?;
    if p.nodes().len() != 5640 || p.max_degree() != 15 {
        return Err(format!("P16: {} nodes, max degree {}", p.nodes().len(), p.max_degree()));
    }
    details.push("P16=5640".into());
    within(Duration::from_secs(60), start, details.join(", "))
}

fn embedding_validity() -> Outcome {
    let start = Instant::now();
    let profile = HardwareProfile::builtin(Machine::TwoX);
    let hw = profile.ideal_graph().map_err(|e| e.to_string())?;
    if hw.m() != 12 {
        return Err(format!("2X graph is C{}", hw.m()));
    }
    let grid = [-0.5, -1.0, -2.0];
    for i in 0..100u64 {
        let n = 7 + (i % 6) as usize;
        let g = generate_instance(n, 2.25, 500 + i).map_err(|e| e.to_string())?;
        let logical = coloring_qubo(g.n, &g.edges, 3).map_err(|e| e.to_string())?.to_ising();
        let e = find_embedding(&logical.adjacency(), &hw, i, 16).map_err(|e| format!("instance {i}: {e}"))?;
        let defects = validate_embedding(logical.num_spins, &logical.interaction_edges(), &e.chains, &hw);
        if !defects.is_empty() {
            return Err(format!("instance {i}: {defects:?}"));
        }
        let j_f = grid[i as usize % grid.len()];
        let emb = embed_ising(&logical, &e, &hw, j_f, &profile).map_err(|e| e.to_string())?;
        let couplers = emb.chain_couplers.len() as f64;
        let mut rng = rng_from(77, &[i]);
        for _ in 0..20 {
            let s = random_spins(logical.num_spins, &mut rng);
            let physical = emb.extend_sample(&s).map_err(|e| e.to_string())?;
            let lhs = ising_energy(&emb.ising, &physical).map_err(|e| e.to_string())?;
            let rhs = emb.scale * ising_energy(&logical, &s).map_err(|e| e.to_string())? + j_f * couplers;
            if lhs != rhs {
                return Err(format!("instance {i}: embedded {lhs} != {rhs}"));
            }
        }
    }
    within(
        Duration::from_secs(300),
        start,
        "100 embeddings valid, identity exact on 2000 samples".into(),
    )
}

fn tts_formula() -> Outcome {
    let tts = |p: f64, t: f64| compute_tts(p, t).map(|e| e.tts).map_err(|e| e.to_string());
    for t in [0.25, 1.0, 5.0, 20.0, 300.0] {
        if tts(0.99, t)? != Tts::Finite(t) {
            return Err(format!("TTS(0.99, {t}) = {}", tts(0.99, t)?));
        }
        if tts(0.0, t)? != Tts::Infinite {
            return Err(format!("TTS(0, {t}) = {}", tts(0.0, t)?));
        }
    }
    let oracle = 132.877_123_795_494_493_314_f64;
    let got = tts(0.5, 20.0)?.value();
    let rel = ((got - oracle) / oracle).abs();
    if rel <= 1e-6 {
        Ok(format!("TTS(0.5, 20) = {got}, relative error {rel:.1e}"))
    } else {
        Err(format!("TTS(0.5, 20) = {got}, relative error {rel:.1e}"))
    }
}

fn sa_versus_exact() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for i in 0..100u64 {
        let mut rng = rng_from(606, &[i]);
        let p = random_ising(12, &mut rng);
        let ground = sample_exact(&p).map_err(|e| e.to_string())?.ground_energy;
        let cfg = SamplerConfig {
            anneal_time_us: 1000.0,
            num_reads: 10,
            seed: i,
            ..SamplerConfig::default()
        };
        if cfg.sweeps() != 100_000 {
            return Err(format!("{} sweeps", cfg.sweeps()));
        }
        let set = sample_sa(&p, &cfg).map_err(|e| e.to_string())?;
        hits += usize::from(set.count_at(ground) > 0);
    }
    if hits < 99 {
        return Err(format!("{hits}/100 problems solved"));
    }
    within(Duration::from_secs(300), start, format!("{hits}/100 problems solved with 10 reads each"))
}

fn scaling_fit() -> Outcome {
    let start = Instant::now();
    let exact: Vec<(usize, Tts)> = (8..=40)
        .step_by(2)
        .map(|n| (n, Tts::Finite(2.0 * (0.5 * n as f64).exp())))
        .collect();
    let fit = fit_scaling(&exact).map_err(|e| e.to_string())?;
    let rel = ((fit.alpha - 0.5) / 0.5).abs();
    if rel > 1e-9 {
        return Err(format!("exact data gave alpha {} (relative error {rel:.1e})", fit.alpha));
    }
    let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
    let mut inside = 0;
    for trial in 0..100u64 {
        let mut rng = rng_from(707, &[trial]);
        let points: Vec<(usize, Tts)> = (8..=40)
            .step_by(2)
            .map(|n| {
                let noise: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
                (n, Tts::Finite(2.0 * (0.5 * n as f64 + noise).exp()))
            })
            .collect();
        let f = fit_scaling(&points).map_err(|e| e.to_string())?;
        let se = f.stderr.ok_or("no standard error")?;
        inside += usize::from((f.alpha - 0.5).abs() <= 3.0 * se);
    }
    if inside < 100 {
        return Err(format!("{inside}/100 noisy fits within 3 SE"));
    }
    within(
        Duration::from_secs(60),
        start,
        format!("exact relative error {rel:.1e}, {inside}/100 noisy fits within 3 SE"),
    )
}

fn mini_plan(dir: &std::path::Path) -> ExperimentPlan {
    let mut plan = ExperimentPlan::defaults(Machine::D2000Q, dir.to_path_buf());
    plan.sizes = vec![8, 10, 12];
    plan.instances_per_size = 20;
    plan.density = 2.25;
    plan.anneal_times_us = vec![1.0, 5.0];
    plan.j_f_grid = vec![-0.5, -1.0];
    plan.sampler.num_reads = 250;
    plan.sampler.num_gauges = 8;
    plan.sampler.schedule = Schedule {
        beta_start: 1.0,
        beta_end: 5.0,
    };
    plan.gauges = None;
    plan.master_seed = 2024;
    plan
}

fn end_to_end() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let start = Instant::now();
    let result = run_experiment(&mini_plan(dirs[0].path())).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    let mut notes = vec![format!("first run {:.0}s", elapsed.as_secs_f64())];
    if elapsed > Duration::from_secs(30 * 60) {
        problems.push("run exceeded 30 min".to_string());
    }
    for u in &result.u_opt {
        let i = result
            .i_opt
            .iter()
            .find(|i| i.n == u.n && i.t_us == u.t_us)
            .ok_or("missing i.opt")?;
        notes.push(format!(
            "n={} t={} u.opt J_F={} median {} i.opt median {}",
            u.n, u.t_us, u.j_f, u.summary.median, i.summary.median
        ));
        if !u.summary.median.is_finite() {
            problems.push(format!("u.opt median infinite at n={} t={}", u.n, u.t_us));
        }
        if i.summary.median > u.summary.median {
            problems.push(format!("i.opt > u.opt at n={} t={}", u.n, u.t_us));
        }
    }
    for f in analyze(&result).iter().filter(|f| f.setting == "u.opt") {
        match &f.fit {
            Some(fit) if fit.alpha.is_finite() && fit.alpha > 0.0 => {
                notes.push(format!("{} = {:.4}", f.label, fit.alpha))
            }
            Some(fit) => problems.push(format!("{} = {}", f.label, fit.alpha)),
            None => problems.push(format!("{}: {}", f.label, f.note.clone().unwrap_or_default())),
        }
    }
    run_experiment(&mini_plan(dirs[1].path())).map_err(|e| e.to_string())?;
    let a = std::fs::read(dirs[0].path().join(RESULT_FILE)).map_err(|e| e.to_string())?;
    let b = std::fs::read(dirs[1].path().join(RESULT_FILE)).map_err(|e| e.to_string())?;
    if a != b {
        problems.push("rerun is not byte-identical".into());
    } else {
        notes.push("rerun byte-identical".into());
    }
    for line in &notes {
        println!("    {line}");
    }
    if problems.is_empty() {
        Ok(notes[0].clone())
    } else {
        Err(problems.join("; "))
    }
}

fn gauge_invariance() -> Outcome {
    let start = Instant::now();
    for i in 0..20u64 {
        let mut rng = rng_from(909, &[i]);
        let p = random_ising(10, &mut rng);
        let g = Gauge::random(10, rng.gen());
        let gauged = apply_gauge(&p, &g).map_err(|e| e.to_string())?;
        let spectrum = |q: &IsingProblem| -> Result<Vec<u64>, String> {
            let mut energies: Vec<f64> = (0u32..1 << 10)
                .map(|code| {
                    let s: Vec<i8> = (0..10).map(|b| if code >> b & 1 == 1 { 1 } else { -1 }).collect();
                    ising_energy(q, &s).map_err(|e| e.to_string())
                })
                .collect::<Result<_, _>>()?;
            energies.sort_by(f64::total_cmp);
            Ok(energies.into_iter().map(f64::to_bits).collect())
        };
        if spectrum(&p)? != spectrum(&gauged)? {
            return Err(format!("problem {i}: spectra differ"));
        }
    }
    within(Duration::from_secs(60), start, "20 spectra identical".into())
}

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().filter_map(|a| a.parse().ok()).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("QUBO zero set equals proper colorings", qubo_correctness),
        ("generator edge counts and colorability at d=4.5", instance_generator),
        ("topology node counts and degrees", topology_counts),
        ("embedding validity and energy identity on C12", embedding_validity),
        ("TTS closed form", tts_formula),
        ("SA matches exact ground states at 1e5 sweeps", sa_versus_exact),
        ("scaling fit recovery", scaling_fit),
        ("end-to-end mini-experiment", end_to_end),
        ("gauge spectrum invariance", gauge_invariance),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS criterion {id}: {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id}: {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
