//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//! With `UPLIFT_ACCEPTANCE_STRICT` set, any FAIL makes the process exit non-zero.
//!
//! The benchmark criteria train 310 models with the default training setup
//! (300 epochs max, early stopping with patience 30, lr 1e-4). Results are
//! cached under the cargo target tmp dir and reused on later runs; delete
//! `acceptance-bench` there to recompute from scratch.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use uplift_cli::bench::{self, Cell, ExperimentConfig, ModelEntry, ScenarioEntry};
use uplift_core::datagen::{generate, ScenarioKind, ScenarioSpec};
use uplift_core::eval::{mqini_from_predictions, null_mqini, qini_curve, qini_score, TieMode};
use uplift_core::exec::Exec;
use uplift_core::heads::{legendre_eval, HeadKind};
use uplift_core::model::{mmd_rbf, wasserstein_1d, Backbone, Batch, DiscKind, ModelSpec, Preset, UpliftModel};
use uplift_core::numkit::{finite_diff_grad, max_rel_error, seeded_rng, Matrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn combos() -> Vec<(Backbone, HeadKind, DiscKind)> {
    let mut out = vec![(Backbone::Slearner, HeadKind::Fa, DiscKind::None)];
    for disc in [DiscKind::None, DiscKind::Mmd, DiscKind::Wass] {
        out.push((Backbone::Bnn, HeadKind::Fa, disc));
        for b in [Backbone::TarnetCfrnet, Backbone::Drcfr] {
            for h in [HeadKind::Sa, HeadKind::Ofa] {
                out.push((b, h, disc));
            }
        }
    }
    out
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, mut f: impl FnMut(&mut R) -> f64) -> Matrix {
    let data = (0..rows * cols).map(|_| f(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn uniform<R: Rng>(rng: &mut R) -> f64 {
    rng.gen()
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let (d, m, n) = (4, 3, 24);
    let mut worst = (0.0f64, String::from("-"));
    let mut kinks = 0;
    for (b, h, disc) in combos() {
        for seed in 0..10u64 {
            let repr: &[usize] = match b {
                Backbone::Slearner => &[],
                Backbone::Drcfr => &[6, 6],
                _ => &[6, 5],
            };
            let mut spec = ModelSpec::new(b, h, disc)
                .with_widths(repr, &[5])
                .with_seed(seed)
                .with_lambda2(0.7);
            spec.lambda1 = 1.1;
            let model = UpliftModel::build(&spec, d, m).unwrap();
            let mut rng = seeded_rng(1000 + seed);
            let x = random_matrix(&mut rng, n, d, normal);
            let t: Vec<usize> = (0..n).map(|i| i % m).collect();
            let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.4)))).collect();
            let (_, grads) = model.total_loss(Batch { x: &x, t: &t, y: &y }).unwrap();
            let mut probe = model.clone();
            let numeric = finite_diff_grad(
                |theta| {
                    probe.set_flat_params(theta).unwrap();
                    probe.evaluate_loss(Batch { x: &x, t: &t, y: &y }).unwrap().total
                },
                &model.flat_params(),
                1e-5,
            );
            let analytic = grads.flatten();
            let theta = model.flat_params();
            for i in 0..theta.len() {
                let err = max_rel_error(&analytic[i..=i], &numeric[i..=i]);
                // Only skip a coordinate when the analytic gradient itself jumps
                // inside [θ−h, θ+h], i.e. the step straddles a kink.
                let mut side = |sign: f64| {
                    let mut shifted = theta.clone();
                    shifted[i] += sign * 1e-5;
                    probe.set_flat_params(&shifted).unwrap();
                    probe.total_loss(Batch { x: &x, t: &t, y: &y }).unwrap().1.flatten()[i]
                };
                if err >= 1e-4 && max_rel_error(&[side(-1.0)], &[side(1.0)]) > 1e-3 {
                    kinks += 1;
                } else if err > worst.0 {
                    worst = (err, format!("{} seed {seed}", spec.label()));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst.0 < 1e-4 && secs < 60.0,
        format!(
            "16 combos x 10 seeds, max rel err {:.2e} ({}) off kinks, {kinks} coords straddling a kink skipped, {secs:.1}s",
            worst.0, worst.1
        ),
    )
}

fn legendre_suite() -> Outcome {
    let mut closed = 0.0f64;
    for i in 0..100 {
        let x = -1.0 + 2.0 * i as f64 / 99.0;
        let p = legendre_eval(3, x);
        closed = closed
            .max((p[2] - (3.0 * x * x - 1.0) / 2.0).abs())
            .max((p[3] - (5.0 * x.powi(3) - 3.0 * x) / 2.0).abs());
    }
    let points = 100_000;
    let h = 2.0 / (points - 1) as f64;
    let mut gram = [[0.0f64; 9]; 9];
    for i in 0..points {
        let x = -1.0 + i as f64 * h;
        let w = if i == 0 || i == points - 1 { h / 2.0 } else { h };
        let p = legendre_eval(8, x);
        for j in 0..9 {
            for k in 0..9 {
                gram[j][k] += w * p[j] * p[k];
            }
        }
    }
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for (j, row) in gram.iter().enumerate() {
        for (k, &g) in row.iter().enumerate() {
            if j == k {
                diag = diag.max((g - 2.0 / (2 * j + 1) as f64).abs());
            } else {
                off = off.max(g.abs());
            }
        }
    }
    let at_one = legendre_eval(8, 1.0)
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        closed < 1e-12 && off < 1e-6 && diag < 1e-6 && at_one < 1e-12,
        format!("P2/P3 err {closed:.1e}, off-diagonal {off:.1e}, diagonal err {diag:.1e}, |P_k(1)-1| {at_one:.1e}"),
    )
}

fn discrepancy_closed_forms() -> Outcome {
    let mut rng = seeded_rng(77);
    let n = 10_000;
    let a = random_matrix(&mut rng, n, 1, uniform);
    let b = random_matrix(&mut rng, n, 1, |r| uniform(r) + 0.3);
    let w = wasserstein_1d(&a, &b).unwrap().value;

    let mut mmd_same = Vec::new();
    for seed in 0..5 {
        let mut rng = seeded_rng(500 + seed);
        let p = random_matrix(&mut rng, n, 2, normal);
        let q = random_matrix(&mut rng, n, 2, normal);
        mmd_same.push(mmd_rbf(&p, &q).unwrap().value);
    }
    let mmd_ok = mmd_same.iter().all(|v| v.abs() < 0.01);

    let mut rng = seeded_rng(91);
    let base = random_matrix(&mut rng, 2000, 2, normal);
    let other = random_matrix(&mut rng, 2000, 2, normal);
    let (mut ws, mut ms) = (Vec::new(), Vec::new());
    for shift in [0.5, 1.0, 2.0] {
        let mut moved = other.clone();
        moved.data_mut().iter_mut().for_each(|v| *v += shift);
        ws.push(wasserstein_1d(&base, &moved).unwrap().value);
        ms.push(mmd_rbf(&base, &moved).unwrap().value);
    }
    let mono = |v: &[f64]| v.windows(2).all(|p| p[1] > p[0]);
    outcome(
        (w - 0.3).abs() <= 0.01 && mmd_ok && mono(&ws) && mono(&ms),
        format!(
            "W(U[0,1],U[0.3,1.3]) = {w:.4}; max |MMD| same law {:.2e}; W by shift {ws:.3?}; MMD by shift {ms:.3?}",
            mmd_same.iter().map(|v| v.abs()).fold(0.0, f64::max)
        ),
    )
}

fn qini_oracle(cells: &[Cell]) -> Outcome {
    let c = qini_curve(&[4.0, 3.0, 2.0, 1.0], &[1, 0, 1, 0], &[true, true, false, false]).unwrap();
    let v: Vec<f64> = c.points[1..].iter().map(|p| p.1).collect();
    let hand = v == [1.0, 1.0, -1.0, 0.0] && qini_score(&c) == 0.25;

    let (_, test) = generate(&ScenarioSpec::new(ScenarioKind::Rct, false, 1)).unwrap();
    let truth = test.truth.as_ref().unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let null = null_mqini(truth, &test.t, &test.y, 0, &seeds, Exec::default()).unwrap();
    let null_max = null.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let oracle = mqini_from_predictions(truth, &test.t, &test.y, 0, TieMode::Stable, Exec::default()).unwrap();

    let mut runs = 0;
    let mut beaten = Vec::new();
    for cell in cells {
        for r in &cell.results {
            runs += 1;
            if r.mqini >= r.oracle_mqini {
                beaten.push(format!(
                    "{} {} seed {}: {:.4} >= {:.4}",
                    cell.scenario, cell.model, r.seed, r.mqini, r.oracle_mqini
                ));
            }
        }
    }
    let missing: usize = cells.iter().map(|c| c.missing.len()).sum();
    outcome(
        hand && null_max <= 0.02 && beaten.is_empty() && missing == 0,
        format!(
            "hand example {}; max |null| over 20 seeds {null_max:.4}; oracle (RCT seed 1) {:.4}; oracle beaten in {}/{runs} runs{}{}",
            if hand { "ok" } else { "WRONG" },
            oracle.mqini,
            beaten.len(),
            if beaten.is_empty() { String::new() } else { format!(" [{}]", beaten.join("; ")) },
            if missing > 0 { format!("; {missing} runs missing") } else { String::new() },
        ),
    )
}

fn means(cells: &[Cell]) -> BTreeMap<(String, String), f64> {
    cells
        .iter()
        .filter_map(|c| c.mean().map(|m| ((c.scenario.clone(), c.model.clone()), m)))
        .collect()
}

fn table1(cells: &[Cell]) -> Outcome {
    let m = means(cells);
    let mut pass = true;
    let mut parts = Vec::new();
    for scenario in ["RCT-Noise", "RCT-NM"] {
        for (ofa, sa) in [("TARNet+OFA", "TARNet+SA"), ("DR-CFR+OFA", "DR-CFR+SA")] {
            let get = |model: &str| m.get(&(scenario.to_string(), model.to_string())).copied();
            match (get(ofa), get(sa)) {
                (Some(o), Some(s)) => {
                    pass &= o - s >= 0.01;
                    parts.push(format!("{scenario}: {ofa} {o:.4} vs {sa} {s:.4} (gap {:+.4})", o - s));
                }
                _ => {
                    pass = false;
                    parts.push(format!("{scenario}: {ofa}/{sa} missing"));
                }
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn tables23(cells: &[Cell]) -> Outcome {
    let m = means(cells);
    let mut pass = true;
    let mut parts = Vec::new();
    for scenario in ["OBS w/ IV", "OBS w/o IV", "MIX w/ IV", "MIX w/o IV"] {
        let best = |head: &str| {
            m.iter()
                .filter(|((s, model), _)| s == scenario && model.contains(head))
                .map(|((_, model), &v)| (v, model.clone()))
                .max_by(|a, b| a.0.total_cmp(&b.0))
        };
        match (best("+OFA"), best("+SA"), best("+FA")) {
            (Some(o), Some(s), Some(f)) => {
                let gap = o.0 - s.0.max(f.0);
                pass &= gap >= 0.01;
                parts.push(format!(
                    "{scenario}: {} {:.4} vs {} {:.4} / {} {:.4} (gap {gap:+.4})",
                    o.1, o.0, s.1, s.0, f.1, f.0
                ));
            }
            _ => {
                pass = false;
                parts.push(format!("{scenario}: variants missing"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn budget() -> Outcome {
    let mut lo = usize::MAX;
    let mut hi = 0;
    let mut real = (usize::MAX, 0);
    for (b, h, disc) in combos() {
        let n = UpliftModel::build(&ModelSpec::preset(b, h, disc, Preset::Synthetic), 8, 5)
            .unwrap()
            .param_count();
        lo = lo.min(n);
        hi = hi.max(n);
        let r = UpliftModel::build(&ModelSpec::preset(b, h, disc, Preset::RealScale), 47, 5)
            .unwrap()
            .param_count();
        real = (real.0.min(r), real.1.max(r));
    }
    outcome(
        lo >= 80_000 && hi <= 100_000 && real.0 >= 135_000 && real.1 <= 165_000,
        format!(
            "synthetic presets {lo}..{hi} params; real-scale presets {}..{}",
            real.0, real.1
        ),
    )
}

fn determinism(workers: usize) -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut snapshots = Vec::new();
    for dir in &dirs {
        let cfg = ExperimentConfig {
            scenarios: vec![ScenarioEntry::new(ScenarioKind::Obs, true)],
            models: vec![
                ModelEntry::new(Backbone::TarnetCfrnet, HeadKind::Ofa, DiscKind::Mmd),
                ModelEntry::new(Backbone::Drcfr, HeadKind::Sa, DiscKind::Wass),
            ],
            seeds: vec![3],
            n_train: 1500,
            n_test: 1500,
            epochs: 3,
            out_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        bench::run_bench(&cfg, workers).unwrap();
        let mut files = BTreeMap::new();
        for entry in walk(dir.path().to_path_buf()) {
            let rel = entry.strip_prefix(dir.path()).unwrap().to_path_buf();
            files.insert(rel, std::fs::read(&entry).unwrap());
        }
        snapshots.push(files);
    }
    outcome(
        snapshots[0] == snapshots[1] && snapshots[0].len() == 4,
        format!(
            "2-cell bench run twice: {} files each, identical = {}",
            snapshots[0].len(),
            snapshots[0] == snapshots[1]
        ),
    )
}

fn walk(dir: PathBuf) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn bench_configs() -> (ExperimentConfig, ExperimentConfig) {
    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-bench");
    let rct = ExperimentConfig {
        scenarios: vec![
            ScenarioEntry::new(ScenarioKind::Rct, false),
            ScenarioEntry::new(ScenarioKind::RctNoise, false),
            ScenarioEntry::new(ScenarioKind::RctNm, false),
        ],
        models: bench::default_models(),
        out_dir: out_dir.clone(),
        ..ExperimentConfig::default()
    };
    let obs = ExperimentConfig {
        scenarios: vec![
            ScenarioEntry::new(ScenarioKind::Obs, true),
            ScenarioEntry::new(ScenarioKind::Obs, false),
            ScenarioEntry::new(ScenarioKind::Mix, true),
            ScenarioEntry::new(ScenarioKind::Mix, false),
        ],
        models: bench::balancing_models(),
        out_dir,
        ..ExperimentConfig::default()
    };
    (rct, obs)
}

fn main() {
    let workers = std::env::var("UPLIFT_BENCH_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mut results: Vec<(&str, Outcome)> = vec![
        ("gradient suite", gradient_suite()),
        ("legendre suite", legendre_suite()),
        ("discrepancy closed forms", discrepancy_closed_forms()),
        ("parameter budget", budget()),
        ("bench determinism", determinism(workers)),
    ];

    let start = Instant::now();
    let (rct, obs) = bench_configs();
    let mut cells = Vec::new();
    for cfg in [&rct, &obs] {
        let (counts, c) = bench::run_bench(cfg, workers).expect("bench runs");
        println!(
            "bench: ran {}, reused {}, failed {} ({:.0}s so far)",
            counts.ran,
            counts.skipped,
            counts.failed,
            start.elapsed().as_secs_f64()
        );
        print!("{}", bench::markdown_table(cfg, &c));
        cells.extend(c);
    }
    results.push(("qini oracle", qini_oracle(&cells)));
    results.push(("synthetic RCT ordering (OFA over SA)", table1(&cells)));
    results.push(("OBS/MIX ordering (best OFA over SA and FA)", tables23(&cells)));

    println!();
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    // The report is the product; set UPLIFT_ACCEPTANCE_STRICT=1 to turn FAIL lines into a failing exit code.
    if failed > 0 && std::env::var_os("UPLIFT_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
