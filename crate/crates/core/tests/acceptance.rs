//! Acceptance suite. Each test prints one `criterion N ... PASS|FAIL` line to
//! stderr (bypassing output capture) and then asserts.

use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;

use bifair::cli::{cmd_run, Overrides, SUMMARY_FILE, TIMESERIES_FILE};
use bifair::confreg::{optimistic_means, ConfidenceRegion, OptimizerConfig};
use bifair::env::{BanditInstance, GeneratorSpec, RewardKind};
use bifair::fairness::FairnessConfig;
use bifair::merit::{MeritKind, MeritSpec, DEFAULT_MERIT_FLOOR};
use bifair::oracle::OracleSummary;
use bifair::policies::Algorithm;
use bifair::rng::{Purpose, RngStream, StreamId};
use bifair::runner::{run_experiment, run_experiment_with, AggregateResult, Execution, InstanceSource, RunConfig};

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2} {name}: {verdict} ({detail})");
}

fn identity() -> MeritSpec {
    MeritSpec::identity(DEFAULT_MERIT_FLOOR).unwrap()
}

fn config(spec: GeneratorSpec, horizon: u64, runs: u64, algorithms: Vec<Algorithm>) -> RunConfig {
    RunConfig {
        horizon,
        runs,
        seed: 2024,
        checkpoints_per_decade: 16,
        extra_checkpoints: vec![],
        algorithms,
        instance: InstanceSource::Generated {
            spec,
            regenerate_per_run: true,
        },
        beta: FairnessConfig::parse(&["2/5", "2/5"]).unwrap(),
        merit: identity(),
        delta: 0.01,
        optimizer: OptimizerConfig::default(),
        normalize: false,
    }
}

#[test]
fn criterion_01_anytime_exposure_floors() {
    let mut worst = i64::MAX;
    let mut checked = 0;
    for spec in [GeneratorSpec::low_arms(), GeneratorSpec::high_arms()] {
        let cfg = config(spec, 100_000, 20, vec![Algorithm::BfUcb, Algorithm::GefUcb]);
        let agg = run_experiment(&cfg).unwrap();
        for a in &agg.algorithms {
            for r in &a.runs {
                for g in &r.summary.groups {
                    worst = worst.min(g.min_gef_slack);
                    checked += 1;
                }
            }
        }
    }
    let pass = worst >= 0 && checked == 2 * 2 * 20 * 2;
    report(1, "anytime exposure floors", pass, &format!("min slack {worst} over {checked} run-groups"));
    assert!(pass);
}

#[test]
fn criterion_02_regret_decomposition() {
    let horizon = 100_000;
    let mut worst: f64 = 0.0;
    for spec in [GeneratorSpec::low_arms(), GeneratorSpec::high_arms()] {
        let cfg = config(spec, horizon, 5, Algorithm::ALL.to_vec());
        let agg = run_experiment(&cfg).unwrap();
        for a in &agg.algorithms {
            for r in &a.runs {
                let s = &r.summary;
                worst = worst.max((s.pseudo_regret - s.term1 - s.term2).abs());
            }
        }
    }
    let tol = 1e-9 * horizon as f64;
    let pass = worst <= tol;
    report(2, "regret decomposition", pass, &format!("max residual {worst:.3e}, tolerance {tol:.0e}"));
    assert!(pass);
}

/// Best total of `Σ_t R*_{g_t}` over every group sequence that keeps each
/// group at or above `⌊β_g t⌋` pulls after every round.
fn brute_force_optimum(r_star: &[f64], beta: &[(u64, u64)], horizon: u64) -> f64 {
    fn dfs(t: u64, pulls: &mut Vec<u64>, acc: f64, r: &[f64], beta: &[(u64, u64)], horizon: u64, best: &mut f64) {
        if t == horizon {
            *best = best.max(acc);
            return;
        }
        for g in 0..r.len() {
            pulls[g] += 1;
            let ok = beta
                .iter()
                .zip(pulls.iter())
                .all(|(&(p, q), &n)| n * q >= p * (t + 1) - (p * (t + 1)) % q);
            if ok {
                dfs(t + 1, pulls, acc + r[g], r, beta, horizon, best);
            }
            pulls[g] -= 1;
        }
    }
    let mut best = f64::NEG_INFINITY;
    dfs(0, &mut vec![0; r_star.len()], 0.0, r_star, beta, horizon, &mut best);
    best
}

#[test]
fn criterion_03_optimal_fair_reward() {
    let merit = identity();
    let example = OracleSummary {
        pi_star: vec![vec![1.0], vec![1.0]],
        r_star: vec![0.68, 0.60],
        g_star: 0,
        g_star_unique: true,
        gaps: vec![0.0, 0.08],
        delta_min: Some(0.08),
    };
    let beta = FairnessConfig::parse(&["2/5", "2/5"]).unwrap();
    let exact = example.optimal_reward(&beta, 10);
    let mut pass = exact == 4.0 * 0.68 + 4.0 * 0.60 + 2.0 * 0.68 && (exact - 6.48).abs() < 1e-12;

    let mut rng = RngStream::new(3, StreamId::new(0, 0, Purpose::Instance));
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.gen_range(1..=3usize);
        let mut means = Vec::new();
        let mut groups = Vec::new();
        for _ in 0..m {
            let k = rng.gen_range(1..=3usize);
            groups.push((means.len()..means.len() + k).collect::<Vec<_>>());
            means.extend((0..k).map(|_| rng.gen_range(0.05..1.0)));
        }
        // shares p/q with p/q ≤ 1/m and Σ < 1
        let q = rng.gen_range(m as u64 + 1..=12);
        let beta: Vec<(u64, u64)> = loop {
            let b: Vec<(u64, u64)> = (0..m).map(|_| (rng.gen_range(1..=q / m as u64 + 1), q)).collect();
            let sum: u64 = b.iter().map(|x| x.0).sum();
            if b.iter().all(|&(p, q)| p * m as u64 <= q) && sum < q {
                break b;
            }
        };
        let horizon = rng.gen_range(1..=12u64);
        let inst = BanditInstance::new(means.clone(), groups.clone(), RewardKind::Bernoulli).unwrap();
        let r_star: Vec<f64> = groups
            .iter()
            .map(|arms| {
                let num: f64 = arms.iter().map(|&i| means[i] * means[i]).sum();
                let den: f64 = arms.iter().map(|&i| means[i]).sum();
                num / den
            })
            .collect();
        let shares: Vec<String> = beta.iter().map(|(p, q)| format!("{p}/{q}")).collect();
        let fair = FairnessConfig::parse(&shares).unwrap();
        let lib = OracleSummary::build(&inst, &merit).optimal_reward(&fair, horizon);
        let brute = brute_force_optimum(&r_star, &beta, horizon);
        worst = worst.max((lib - brute).abs());
    }
    pass &= worst <= 1e-12;
    report(3, "optimal fair reward", pass, &format!("worked example {exact}, max brute-force gap {worst:.2e}"));
    assert!(pass);
}

fn grid_max(lo: &[f64], hi: &[f64], f: &dyn Fn(f64) -> f64) -> (f64, Vec<f64>) {
    let k = lo.len();
    let steps = 101usize;
    let axis: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..steps)
                .map(|s| if s == steps - 1 { hi[j] } else { lo[j] + (hi[j] - lo[j]) * s as f64 / (steps - 1) as f64 })
                .collect()
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, vec![]);
    let total = steps.pow(k as u32);
    let mut mu = vec![0.0; k];
    for idx in 0..total {
        let mut rest = idx;
        for j in 0..k {
            mu[j] = axis[j][rest % steps];
            rest /= steps;
        }
        let w: Vec<f64> = mu.iter().map(|&x| f(x)).collect();
        let value = w.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        if value > best.0 || (value == best.0 && mu > best.1) {
            best = (value, mu.clone());
        }
    }
    best
}

#[test]
fn criterion_04_optimizer() {
    let mut rng = RngStream::new(4, StreamId::new(0, 0, Purpose::Estimate));
    let cfg = OptimizerConfig::default();
    let floor = DEFAULT_MERIT_FLOOR;
    let merits = [
        MeritSpec::identity(floor).unwrap(),
        MeritSpec::new(MeritKind::Affine { a: 2.0, b: 0.1 }, floor, 1.0).unwrap(),
        MeritSpec::new(MeritKind::Power { p: 2.0 }, floor, 1.0).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let merit = merits[case % merits.len()];
        let k = rng.gen_range(1..=3usize);
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..k)
            .map(|_| {
                let a: f64 = rng.gen_range(floor..1.0);
                let b = rng.gen_range(floor..1.0);
                (a.min(b), a.max(b))
            })
            .unzip();
        let region = ConfidenceRegion::from_intervals(lo.clone(), hi.clone());
        let est = optimistic_means(&region, &merit, &cfg);
        let (grid, _) = grid_max(&lo, &hi, &|x| merit.eval(x));
        worst = worst.max((est.value - grid).abs());
    }
    let mut corner_ok = true;
    let merit = identity();
    for _ in 0..100 {
        let k = rng.gen_range(1..=3usize);
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..k)
            .map(|_| {
                let a: f64 = rng.gen_range(0.5..1.0);
                let b = rng.gen_range(0.5..1.0);
                (a.min(b), a.max(b))
            })
            .unzip();
        let region = ConfidenceRegion::from_intervals(lo.clone(), hi.clone());
        let est = optimistic_means(&region, &merit, &cfg);
        let (_, argmax) = grid_max(&lo, &hi, &|x| x);
        corner_ok &= est.mu_tilde == hi && argmax == hi;
    }
    let pass = worst <= 1e-3 && corner_ok;
    report(4, "optimistic optimizer", pass, &format!("max gap to grid {worst:.2e}, upper corner exact: {corner_ok}"));
    assert!(pass);
}

#[test]
fn criterion_05_meritocratic_convergence() {
    let horizon = 1_000_000;
    let cfg = config(GeneratorSpec::low_arms(), horizon, 20, vec![Algorithm::BfUcb]);
    let agg = run_experiment(&cfg).unwrap();
    let a = agg.get(Algorithm::BfUcb).unwrap();
    let series = |t: u64, g: &str| {
        a.series
            .iter()
            .find(|p| p.metric == "fr_norm" && p.t == t && p.group.as_deref() == Some(g))
            .map(|p| p.stat.mean)
            .unwrap()
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for g in ["0", "1"] {
        let (early, late) = (series(horizon / 10, g), series(horizon, g));
        pass &= late <= 0.5 * early && late <= 0.1;
        detail.push(format!("group {g}: {early:.4} -> {late:.4}"));
    }
    report(5, "meritocratic convergence", pass, &detail.join(", "));
    assert!(pass);
}

/// High-arms preset, T = 10⁶, 50 runs, every algorithm. Shared by 6, 7, 8.
fn high_arms_experiment() -> &'static AggregateResult {
    static CELL: OnceLock<AggregateResult> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut cfg = config(GeneratorSpec::high_arms(), 1_000_000, 50, Algorithm::ALL.to_vec());
        cfg.extra_checkpoints = vec![40_000, 160_000, 250_000, 640_000];
        run_experiment(&cfg).unwrap()
    })
}

#[test]
fn criterion_06_sublinear_regret() {
    let agg = high_arms_experiment();
    let bf = agg.get(Algorithm::BfUcb).unwrap();
    // the first 20 runs
    let mean_at = |t: u64| {
        let v: Vec<f64> = bf.runs[..20]
            .iter()
            .map(|r| r.snapshots.iter().find(|s| s.t == t).unwrap().pseudo_regret)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for t in [10_000u64, 40_000, 160_000, 250_000] {
        let ratio = mean_at(4 * t) / mean_at(t);
        pass &= ratio <= 3.0;
        detail.push(format!("{}x{t}: {ratio:.2}", 4));
    }
    report(6, "sub-linear regret", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_07_reward_ordering() {
    let agg = high_arms_experiment();
    let stat = |a: Algorithm| {
        let x = agg.get(a).unwrap();
        (x.summary.realized_reward, x.runs.len() as f64)
    };
    let order = [Algorithm::Ucb1, Algorithm::GefUcb, Algorithm::MfUcb, Algorithm::BfUcb];
    let mut pass = true;
    let mut detail = Vec::new();
    for w in order.windows(2) {
        let ((a, n), (b, m)) = (stat(w[0]), stat(w[1]));
        let se = (a.std * a.std / n + b.std * b.std / m).sqrt();
        let gap = a.mean - b.mean;
        pass &= gap > se;
        detail.push(format!("{}-{} = {gap:.0} (se {se:.0})", w[0], w[1]));
    }
    report(7, "reward ordering", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_08_group_exposure() {
    let agg = high_arms_experiment();
    let floor = (2 * 1_000_000 / 5) as f64;
    let minority = |a: Algorithm| agg.get(a).unwrap().summary.groups[0].group_pulls.mean;
    let bf_min = agg
        .get(Algorithm::BfUcb)
        .unwrap()
        .runs
        .iter()
        .map(|r| r.summary.groups[0].group_pulls)
        .min()
        .unwrap() as f64;
    let ucb = minority(Algorithm::Ucb1);
    let pass = minority(Algorithm::MfUcb) < 0.5 * floor
        && bf_min >= floor
        && Algorithm::ALL
            .iter()
            .filter(|&&a| a != Algorithm::Ucb1)
            .all(|&a| ucb < minority(a));
    let detail = Algorithm::ALL
        .iter()
        .map(|&a| format!("{a} {:.0}", minority(a)))
        .collect::<Vec<_>>()
        .join(", ");
    report(8, "group exposure", pass, &format!("minority pulls: {detail}; floor {floor}"));
    assert!(pass);
}

#[test]
fn criterion_09_minimum_pulls() {
    let cfg = config(GeneratorSpec::low_arms(), 100_000, 100, vec![Algorithm::BfUcb]);
    let agg = run_experiment(&cfg).unwrap();
    let (g1, g2) = (cfg.merit.gamma1(), cfg.merit.gamma2());
    let mut held = 0usize;
    let mut total = 0usize;
    for r in &agg.get(Algorithm::BfUcb).unwrap().runs {
        for g in &r.summary.groups {
            let n = g.group_pulls as f64;
            let k = g.arm_pulls.len() as f64;
            let bound = n * g1 / (k * g2) - (n * (k / cfg.delta).ln() / 2.0).sqrt();
            for &pulls in &g.arm_pulls {
                total += 1;
                held += (pulls as f64 >= bound) as usize;
            }
        }
    }
    let share = held as f64 / total as f64;
    let pass = share >= 0.99;
    report(9, "minimum pulls per arm", pass, &format!("{held}/{total} pairs"));
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(
        &config_path,
        r#"
[experiment]
horizon = 20000
runs = 3
seed = 11

[instance]
preset = "low_arms"

[fairness]
beta = ["0.3", "0.3"]
"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let code = cmd_run(&config_path, &out, &Overrides::default(), &mut Vec::new(), &mut Vec::new());
        assert_eq!(code, 0);
        outputs.push((
            std::fs::read(out.join(TIMESERIES_FILE)).unwrap(),
            std::fs::read(out.join(SUMMARY_FILE)).unwrap(),
        ));
    }
    let files_equal = outputs[0] == outputs[1];

    let mut cfg = config(GeneratorSpec::high_arms(), 20_000, 4, Algorithm::ALL.to_vec());
    cfg.normalize = true;
    let seq = run_experiment_with(&cfg, Execution::Sequential).unwrap();
    let par = run_experiment_with(&cfg, Execution::Parallel(Some(4))).unwrap();
    let bits_equal = seq == par;
    let pass = files_equal && bits_equal;
    report(
        10,
        "determinism",
        pass,
        &format!("repeated artifacts identical: {files_equal}, sequential = parallel: {bits_equal}"),
    );
    assert!(pass);
}
