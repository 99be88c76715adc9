//! Acceptance checks. Prints one `[PASS]` or `[FAIL]` line per criterion.
//!
//! Failing criteria are reported, not hidden; set `ACCEPTANCE_STRICT=1` to
//! turn any failure into a nonzero exit status.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::time::{Duration, Instant};

use floquet_otoc::circuit::{build_floquet_step, build_otoc_circuit, prune_causal_cone};
use floquet_otoc::config::{ExactKeyword, LatticeSpec, RunConfig, ShotBudget};
use floquet_otoc::lattice::{build_heavy_hex, color_edges, CouplingGraph};
use floquet_otoc::model::{sample_disorder, ModelParams};
use floquet_otoc::otoc::{effective_quantum_volume, measure_otoc, MeasureSeeds, OtocRecord, OtocSetup};
use floquet_otoc::runner::{run, simulate};
use floquet_otoc::seeds::derive_seed;
use floquet_otoc::sim::{simulate_z, NoiseModel, TrajectoryOptions};
use floquet_otoc::stats::{aggregate, estimate_crossover, zne_extrapolate, CrossoverOptions, Quantity};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, limit: Duration, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = outcome.pass && in_time;
    println!(
        "[{}] criterion {id}: {} ({:.1}s, limit {}s{})",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    pass
}

fn noiseless_setup(graph: &CouplingGraph, params: ModelParams, butterfly: usize) -> OtocSetup<'_> {
    OtocSetup {
        graph,
        params,
        butterfly,
        noise: NoiseModel::noiseless(),
        trajectories: TrajectoryOptions {
            trajectories: 1,
            ..Default::default()
        },
    }
}

fn seeds(tag: u64) -> MeasureSeeds {
    MeasureSeeds {
        numerator: derive_seed(tag, &[1]),
        denominator: derive_seed(tag, &[2]),
        fold: derive_seed(tag, &[3]),
    }
}

/// Connected vertex subsets of size `2..=max` with their induced edges,
/// relabeled to `0..k`.
fn connected_subgraphs(g: &CouplingGraph, max: usize) -> Vec<(usize, Vec<(usize, usize)>)> {
    let n = g.num_qubits();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let k = mask.count_ones() as usize;
        if !(2..=max).contains(&k) {
            continue;
        }
        let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let index = |v: usize| verts.iter().position(|&u| u == v).unwrap();
        let edges: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .filter(|&&(a, b)| mask >> a & 1 == 1 && mask >> b & 1 == 1)
            .map(|&(a, b)| (index(a), index(b)))
            .collect();
        if let Ok(sub) = CouplingGraph::from_edges(k, &edges) {
            if sub.is_connected() {
                out.push((k, edges));
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let ring = build_heavy_hex(1, 1).unwrap();
    let subgraphs = connected_subgraphs(&ring, 8);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (si, (k, edges)) in subgraphs.iter().enumerate() {
        let g = color_edges(&CouplingGraph::from_edges(*k, edges).unwrap()).unwrap();
        let butterfly = g.center().unwrap();
        for (wi, &w) in [0.0, 0.05, 0.5].iter().enumerate() {
            let params = ModelParams::default().with_disorder(w);
            for r in 0..5 {
                let real = sample_disorder(&params, *k, derive_seed(1, &[si as u64, wi as u64]), r).unwrap();
                let u = common::floquet(*k, edges, params.jt, params.bzt, &real.bxt);
                let setup = noiseless_setup(&g, params, butterfly);
                for n in 0..=4 {
                    let recs = measure_otoc(&setup, &real, n, 1.0, seeds(0)).unwrap();
                    let exact = common::otoc_all(&u, *k, n, Some(butterfly));
                    for rec in recs {
                        worst = worst.max((rec.numerator - exact[rec.m]).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!(
            "{} connected subgraphs of the 12-qubit lattice (N <= 8), {cases} site values, max |pipeline - dense| = {worst:.1e} (tol 1e-10)",
            subgraphs.len()
        ),
    }
}

fn criterion_2() -> Outcome {
    let g = build_heavy_hex(1, 1).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for butterfly in 0..g.num_qubits() {
        for (wi, &w) in [0.05, 0.5].iter().enumerate() {
            let params = ModelParams::default().with_disorder(w);
            let real = sample_disorder(&params, 12, 2, (butterfly * 2 + wi) as u64).unwrap();
            let setup = noiseless_setup(&g, params, butterfly);
            for n in 0..=6 {
                for rec in measure_otoc(&setup, &real, n, 1.0, seeds(0)).unwrap() {
                    if rec.x > n {
                        worst = worst.max((rec.normalized.unwrap() - 1.0).abs());
                        checked += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst < 1e-10 && checked > 0,
        detail: format!("{checked} (butterfly, W, n, m) values with x > n, max |OTOC - 1| = {worst:.1e} (tol 1e-10)"),
    }
}

fn criterion_3() -> Outcome {
    let g = build_heavy_hex(1, 1).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for &w in &[0.0, 0.05, 0.2, 0.5] {
        let params = ModelParams::default().with_disorder(w);
        for r in 0..3 {
            let real = sample_disorder(&params, 12, 3, r).unwrap();
            let setup = noiseless_setup(&g, params, 0);
            for n in 0..=10 {
                for rec in measure_otoc(&setup, &real, n, 1.0, seeds(0)).unwrap() {
                    worst = worst.max((rec.denominator - 1.0).abs());
                    checked += 1;
                }
            }
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("{checked} denominators, n <= 10, max |den - 1| = {worst:.1e} (tol 1e-10)"),
    }
}

/// 12-qubit ring with four pendant qubits on alternate ring sites.
fn sixteen_qubit_graph() -> CouplingGraph {
    let mut edges: Vec<(usize, usize)> = (0..12).map(|i| (i, (i + 1) % 12)).collect();
    edges.extend([(0, 12), (3, 13), (6, 14), (9, 15)]);
    color_edges(&CouplingGraph::from_edges(16, &edges).unwrap()).unwrap()
}

fn criterion_4() -> Outcome {
    let graphs = [build_heavy_hex(1, 1).unwrap(), sixteen_qubit_graph()];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for g in &graphs {
        let nq = g.num_qubits();
        let params = ModelParams::default().with_disorder(0.2);
        let real = sample_disorder(&params, nq, 4, 0).unwrap();
        let step = build_floquet_step(g, &params, &real).unwrap();
        for butterfly in [0, 1, nq - 1] {
            for n in 0..=6 {
                for insert in [true, false] {
                    let full = build_otoc_circuit(&step, n, butterfly, insert).unwrap();
                    let a = simulate_z(&full, 26).unwrap();
                    let b = simulate_z(&prune_causal_cone(&full).unwrap(), 26).unwrap();
                    for m in 0..nq {
                        worst = worst.max((a[m] - b[m]).abs());
                        checked += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("12 and 16 qubits, n <= 6, {checked} values, max |pruned - full| = {worst:.1e} (tol 1e-10)"),
    }
}

/// Noiseless, exact-expectation sweep on the 12-qubit lattice shared by
/// criteria 5 and 6.
fn regime_sweep() -> Vec<OtocRecord> {
    let mut cfg = RunConfig::new(LatticeSpec::HeavyHex { rows: 1, cols: 1 });
    cfg.w_list = (1..=25).map(|i| 0.02 * f64::from(i)).collect();
    cfg.realizations = 10;
    cfg.n_max = 10;
    cfg.noise = NoiseModel::noiseless();
    cfg.noise_factors = vec![1.0];
    cfg.trajectories = 1;
    cfg.shots = ShotBudget::Keyword(ExactKeyword::Exact);
    cfg.seed = 5;
    simulate(&cfg).unwrap()
}

fn late_curve(records: &[OtocRecord]) -> BTreeMap<u64, (f64, f64, f64)> {
    aggregate(records, Quantity::Normalized, None)
        .unwrap()
        .into_iter()
        .filter(|s| s.key.n == 10 && s.key.x == 5)
        .map(|s| (s.key.w.to_bits(), (s.key.w, s.mean.unwrap(), s.stderr.unwrap())))
        .collect()
}

fn criterion_5(records: &[OtocRecord]) -> Outcome {
    let curve = late_curve(records);
    let at = |w: f64| curve.values().find(|p| (p.0 - w).abs() < 1e-9).map(|p| p.1).unwrap();
    let (low, high) = (at(0.06), at(0.5));
    // 0.05 is not on the 0.02 grid; measure it directly
    let g = build_heavy_hex(1, 1).unwrap();
    let params = ModelParams::default().with_disorder(0.05);
    let mut sum = 0.0;
    let mut count = 0;
    for r in 0..10 {
        let real = sample_disorder(&params, 12, 55, r).unwrap();
        let setup = noiseless_setup(&g, params, g.center().unwrap());
        for rec in measure_otoc(&setup, &real, 10, 1.0, seeds(0)).unwrap() {
            if rec.x == 5 {
                sum += rec.normalized.unwrap();
                count += 1;
            }
        }
    }
    let chaotic = sum / count as f64;
    Outcome {
        pass: chaotic < 0.3 && high > 0.8,
        detail: format!(
            "12 qubits, n = 10, x = 5, 10 realizations: OTOC(W=0.05) = {chaotic:.3} (need < 0.3), OTOC(W=0.5) = {high:.3} (need > 0.8); OTOC(W=0.06) = {low:.3}"
        ),
    }
}

fn criterion_6(records: &[OtocRecord]) -> Outcome {
    let curve: Vec<_> = late_curve(records).into_values().collect();
    let opts = CrossoverOptions {
        bootstrap: 1000,
        seed: 6,
    };
    let desk = estimate_crossover(&curve, &opts).unwrap();
    let grid: Vec<f64> = (1..=25).map(|i| 0.02 * f64::from(i)).collect();
    let logistic: Vec<_> = grid
        .iter()
        .map(|&w| (w, 1.0 / (1.0 + (-(w - 0.18) / 0.04).exp()), 0.0))
        .collect();
    let synthetic = estimate_crossover(&logistic, &opts).unwrap();
    let desk_ok = (0.1..=0.3).contains(&desk.w_c);
    let synth_ok = (synthetic.w_c - 0.18).abs() <= 0.02 + 1e-12;
    Outcome {
        pass: desk_ok && synth_ok,
        detail: format!(
            "desk curve ({} W points, 0.02-0.5): W_c = {:.3} +/- {:.3}{} (need [0.1, 0.3]); logistic at 0.18: W_c = {:.4} (need 0.18 +/- 0.02)",
            curve.len(),
            desk.w_c,
            desk.uncertainty,
            if desk.low_confidence { " LOW_CONFIDENCE" } else { "" },
            synthetic.w_c
        ),
    }
}

fn ten_qubit_ring() -> CouplingGraph {
    let edges: Vec<_> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
    color_edges(&CouplingGraph::from_edges(10, &edges).unwrap()).unwrap()
}

fn criterion_7() -> Outcome {
    let g = ten_qubit_ring();
    let params = ModelParams::default().with_disorder(0.1);
    let real = sample_disorder(&params, 10, 7, 0).unwrap();
    let setup = OtocSetup {
        graph: &g,
        params,
        butterfly: 0,
        noise: NoiseModel::global(0.05),
        trajectories: TrajectoryOptions {
            trajectories: 5000,
            seed: 0,
            ..Default::default()
        },
    };
    let ideal_setup = noiseless_setup(&g, params, 0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for n in 1..=6 {
        let noisy = measure_otoc(&setup, &real, n, 1.0, seeds(70 + n as u64)).unwrap();
        let ideal = measure_otoc(&ideal_setup, &real, n, 1.0, seeds(0)).unwrap();
        for (a, b) in noisy.iter().zip(&ideal) {
            let err = a.err_normalized().unwrap_or(0.0);
            let dev = (a.normalized.unwrap() - b.numerator).abs();
            worst = worst.max(if err > 0.0 { dev / err } else if dev < 1e-12 { 0.0 } else { f64::INFINITY });
            checked += 1;
        }
    }
    Outcome {
        pass: worst <= 3.0,
        detail: format!(
            "10 qubits, q_global = 0.05, 5000 trajectories, {checked} (n, m) values: max |normalized - noiseless| / stderr = {worst:.2} (need <= 3)"
        ),
    }
}

fn criterion_8() -> Outcome {
    let g = ten_qubit_ring();
    let n = 6;
    let params = ModelParams::default().with_disorder(0.05);
    let setup = OtocSetup {
        graph: &g,
        params,
        butterfly: 0,
        noise: NoiseModel::local(3.7e-3),
        trajectories: TrajectoryOptions {
            trajectories: 10_000,
            seed: 0,
            ..Default::default()
        },
    };
    let mut improved = 0;
    let mut cases = 0;
    for r in 0..25 {
        let real = sample_disorder(&params, 10, 8, r).unwrap();
        let ideal = measure_otoc(&noiseless_setup(&g, params, 0), &real, n, 1.0, seeds(0)).unwrap();
        let raw = measure_otoc(&setup, &real, n, 1.0, seeds(derive_seed(80, &[r]))).unwrap();
        let folded = measure_otoc(&setup, &real, n, 1.5, seeds(derive_seed(81, &[r]))).unwrap();
        for m in (0..10).filter(|&m| raw[m].x == n / 2) {
            let zne = zne_extrapolate(&[
                (1.0, raw[m].numerator, raw[m].err_num),
                (1.5, folded[m].numerator, folded[m].err_num),
            ]);
            let truth = ideal[m].numerator;
            if let Ok(z) = zne {
                if (z.estimate - truth).abs() < (raw[m].numerator - truth).abs() {
                    improved += 1;
                }
            }
            cases += 1;
        }
    }
    let frac = improved as f64 / cases as f64;
    Outcome {
        pass: cases == 50 && frac >= 0.8,
        detail: format!(
            "10 qubits, p2 = 3.7e-3, n = 6, x = 3, W = 0.05, 10000 trajectories: ZNE closer than raw in {improved}/{cases} cases (need >= 80%)"
        ),
    }
}

fn criterion_9() -> Outcome {
    let p: f64 = 3.7e-3;
    let inverted = effective_quantum_volume((1.0 - p).powf(37.0), p).unwrap();
    let inversion_ok = (inverted - 37.0).abs() < 1e-9;

    let g = build_heavy_hex(1, 1).unwrap();
    let (early, late) = (6, 10);
    let mut growth = Vec::new();
    for &w in &[0.05, 0.5] {
        let params = ModelParams::default().with_disorder(w);
        let setup = OtocSetup {
            graph: &g,
            params,
            butterfly: 0,
            noise: NoiseModel::local(p),
            trajectories: TrajectoryOptions {
                trajectories: 1000,
                seed: 0,
                ..Default::default()
            },
        };
        let mut records = Vec::new();
        for r in 0..6 {
            let real = sample_disorder(&params, 12, 9, r).unwrap();
            for n in [early, late] {
                records.extend(measure_otoc(&setup, &real, n, 1.0, seeds(derive_seed(90, &[w.to_bits(), r, n as u64]))).unwrap());
            }
        }
        let mean_at = |n: usize| {
            let v: Vec<f64> = records.iter().filter(|r| r.n == n).filter_map(|r| r.veff).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        growth.push((mean_at(late) - mean_at(early)) / (late - early) as f64);
    }
    let ratio = growth[0] / growth[1];
    Outcome {
        pass: inversion_ok && ratio >= 2.0,
        detail: format!(
            "inversion error {:.1e} (tol 1e-9); 12 qubits, site-averaged V_eff growth per step over n = 6..10: W=0.05 {:.2}, W=0.5 {:.2}, ratio {ratio:.2} (need >= 2)",
            (inverted - 37.0).abs(),
            growth[0],
            growth[1]
        ),
    }
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(LatticeSpec::HeavyHex { rows: 1, cols: 1 });
    cfg.w_list = vec![0.05, 0.2, 0.35, 0.5];
    cfg.realizations = 3;
    cfg.n_max = 4;
    cfg.trajectories = 200;
    cfg.shots = ShotBudget::Count(2000);
    cfg.seed = 10;
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        cfg.output_dir = dir.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run(&cfg)).unwrap();
        outputs.push(fs::read(cfg.output_dir.join("records.csv")).unwrap());
    }
    let same = outputs[0] == outputs[1];
    Outcome {
        pass: same && !outputs[0].is_empty(),
        detail: format!(
            "noisy sweep with shots run on 1 and 4 worker threads: records.csv {} ({} bytes)",
            if same { "byte-identical" } else { "differs" },
            outputs[0].len()
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = vec![
        report(1, secs(60), criterion_1),
        report(2, secs(60), criterion_2),
        report(3, secs(120), criterion_3),
        report(4, secs(300), criterion_4),
    ];
    let start = Instant::now();
    let sweep = regime_sweep();
    println!("  (criteria 5-6 sweep: {} records in {:.1}s)", sweep.len(), start.elapsed().as_secs_f64());
    results.push(report(5, secs(1800), || criterion_5(&sweep)));
    results.push(report(6, secs(60), || criterion_6(&sweep)));
    results.push(report(7, secs(600), criterion_7));
    results.push(report(8, secs(1200), criterion_8));
    results.push(report(9, secs(1800), criterion_9));
    results.push(report(10, secs(600), criterion_10));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed < results.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
