//! Acceptance checks. Each criterion prints one `PASS` or `FAIL` line; the
//! process exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{fd_gradient, frob, gaussian, random_psd, reference_loss, rng, Instance};
use jcmspl::dataset::{synth_generate, Normalization, SynthSpec};
use jcmspl::linalg::{sylvester_oracle, sylvester_solve, Matrix};
use jcmspl::recognizer::{eval_standard, harmonic_mean, Direction, Distance};
use jcmspl::trainer::{fit, update_a, update_a_from_grams, update_b, update_c, AUpdateGrams, Hyperparams, Variant};
use jcmspl::JcmsplModel;
use rand::Rng;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
    warning: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            warning: None,
        }
    }
}

fn sylvester_correctness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let nr = r.random_range(1..=10);
        let ns = r.random_range(1..=10);
        let m = random_psd(nr, 2, &mut r);
        let n = random_psd(ns, 2, &mut r);
        let t = gaussian(nr, ns, &mut r);
        let fast = sylvester_solve(&m, &n, &t).expect("spectral solve");
        let slow = sylvester_oracle(&m, &n, &t).expect("oracle solve");
        worst = worst.max(frob(&(&fast - &slow)) / frob(&slow).max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("worst relative error {worst:.2e} over 50 instances in {elapsed:.2?}"),
    )
}

/// Relative stationarity of a block: `‖∇f(P*)‖ / ‖∇f(0)‖`.
fn stationarity(p: &Matrix, f: impl Fn(&Matrix) -> f64) -> f64 {
    let at_opt = frob(&fd_gradient(p, 1e-3, &f));
    let at_zero = frob(&fd_gradient(&Matrix::zeros(p.rows(), p.cols()), 1e-3, &f));
    at_opt / at_zero.max(f64::MIN_POSITIVE)
}

fn block_minimizers() -> Outcome {
    let mut worst = 0.0f64;
    let mut increases = 0;
    for seed in 0..20 {
        let inst = Instance::random(100 + seed);
        let hyper = inst.hyper();
        let Instance { x, y, h, a, b, c, w } = &inst;
        let w = *w;
        let f = |a: &Matrix, b: &Matrix, c: &Matrix| reference_loss(a, b, c, x, y, h, w);

        let f0 = f(a, b, c);
        let a1 = update_a(c, x, w.l3, 1e-8).unwrap().value;
        let f1 = f(&a1, b, c);
        worst = worst.max(stationarity(&a1, |p| f(p, b, c)));

        let b1 = update_b(c, y, w.l1, w.l4, 1e-8).unwrap().value;
        let f2 = f(&a1, &b1, c);
        worst = worst.max(stationarity(&b1, |p| f(&a1, p, c)));

        let c1 = update_c(&a1, &b1, x, y, h, &hyper).unwrap();
        let f3 = f(&a1, &b1, &c1);
        worst = worst.max(stationarity(&c1, |p| f(&a1, &b1, p)));

        for (before, after) in [(f0, f1), (f1, f2), (f2, f3)] {
            if after > before + 1e-12 * (1.0 + before.abs()) {
                increases += 1;
            }
        }
    }
    Outcome::new(
        increases == 0 && worst <= 1e-6,
        format!("{increases} loss increases; worst relative stationarity {worst:.2e} over 20 instances"),
    )
}

fn closed_form_c() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let inst = Instance::random(500 + seed);
        let hyper = inst.hyper();
        let c = update_c(&inst.a, &inst.b, &inst.x, &inst.y, &inst.h, &hyper).unwrap();
        let rel = stationarity(&c, |p| reference_loss(&inst.a, &inst.b, p, &inst.x, &inst.y, &inst.h, inst.w));
        worst = worst.max(rel);
    }
    Outcome::new(worst <= 1e-5, format!("worst relative finite-difference gradient {worst:.2e}"))
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let (ds, _) = synth_generate(&SynthSpec::default()).unwrap();
    let (ds, _, _) = ds.normalized(Normalization::L2Columns);
    let mut hyper = Hyperparams::new(40);
    hyper.seed = 1;
    let (_, trace) = fit(&ds, &hyper).unwrap();
    let elapsed = start.elapsed();
    let f1 = trace.records[0].loss;
    let monotone = trace.monotonicity_violations(1e-9 * (1.0 + f1));
    let descent = trace.descent_violations(1e-8 * (1.0 + f1));
    let converged = trace.converged_at.is_some_and(|t| t <= 100);
    Outcome::new(
        monotone.is_empty() && descent.is_empty() && converged && elapsed < Duration::from_secs(30),
        format!(
            "converged at {:?}, {} monotonicity and {} descent violations, {elapsed:.2?}",
            trace.converged_at,
            monotone.len(),
            descent.len()
        ),
    )
}

fn planted_recovery() -> Outcome {
    let spec = SynthSpec {
        k: 15,
        noise_sigma: 0.0,
        ..SynthSpec::default()
    };
    let (ds, planted) = synth_generate(&spec).unwrap();
    let oracle = JcmsplModel {
        c: None,
        a: planted.a_true,
        b: Some(planted.b_true),
        variant: Variant::Full,
        hyper: Hyperparams::new(spec.k),
    };
    let oracle_acc = eval_standard(&oracle, &ds, Direction::V2s, Distance::Cosine)
        .unwrap()
        .overall_accuracy;

    let (normed, _, _) = ds.normalized(Normalization::L2Columns);
    let (model, _) = fit(&normed, &Hyperparams::new(spec.k)).unwrap();
    let acc = eval_standard(&model, &normed, Direction::V2s, Distance::Cosine)
        .unwrap()
        .overall_accuracy;
    Outcome::new(
        oracle_acc == 1.0 && acc >= 0.90,
        format!("planted model {oracle_acc:.3}, trained model {acc:.3}"),
    )
}

fn harmonic_mean_rows() -> Outcome {
    let rows = [(67.6, 43.3, 52.8), (48.3, 56.4, 52.1), (54.2, 50.7, 52.4)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (s, u, want) in rows {
        let got = 100.0 * harmonic_mean(s / 100.0, u / 100.0).unwrap();
        let ok = (got - want).abs() <= 0.05;
        pass &= ok;
        parts.push(format!("({s}, {u}) -> {got:.3} vs {want}{}", if ok { "" } else { " MISS" }));
    }
    Outcome::new(pass, parts.join("; "))
}

fn ablation_direction() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut warning = None;
    for noise in [0.05, 0.3] {
        let mut means = [0.0; 3];
        let variants = [Variant::Full, Variant::Jcmspl0, Variant::Ipl];
        for seed in 1..=5 {
            let spec = SynthSpec {
                noise_sigma: noise,
                seed,
                ..SynthSpec::default()
            };
            let (ds, _) = synth_generate(&spec).unwrap();
            let (ds, _, _) = ds.normalized(Normalization::L2Columns);
            for (slot, variant) in means.iter_mut().zip(variants) {
                let mut hyper = Hyperparams::new(spec.k);
                hyper.seed = seed;
                hyper.variant = variant;
                let (model, _) = fit(&ds, &hyper).unwrap();
                *slot += eval_standard(&model, &ds, Direction::V2s, Distance::Cosine)
                    .unwrap()
                    .per_class_mean_accuracy
                    / 5.0;
            }
        }
        let [full, j0, ipl] = means;
        pass &= full >= ipl && j0 >= ipl;
        if (full - ipl).min(j0 - ipl) < 0.01 {
            warning = Some(format!(
                "noise {noise}: margin over IPL below one accuracy point ({:.4}, {:.4})",
                full - ipl,
                j0 - ipl
            ));
        }
        lines.push(format!("noise {noise}: Full {full:.3}, JCMSPL0 {j0:.3}, IPL {ipl:.3}"));
    }
    Outcome {
        pass,
        detail: lines.join("; "),
        warning,
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort_unstable();
    v[v.len() / 2]
}

fn complexity() -> Outcome {
    let mut grams = Vec::new();
    let mut shapes_ok = true;
    for spc in [50, 100] {
        let (ds, _) = synth_generate(&SynthSpec {
            samples_per_class: spc,
            ..SynthSpec::default()
        })
        .unwrap();
        let x = ds.visual_seen();
        let c = gaussian(40, x.cols(), &mut rng(spc as u64));
        let g = AUpdateGrams::new(&c, x);
        shapes_ok &= g.cct.shape() == (40, 40) && g.xxt.shape() == (50, 50) && g.cxt.shape() == (40, 50);
        grams.push((x.cols(), g));
    }
    for (_, g) in &grams {
        update_a_from_grams(g, 1.0, 1e-8).unwrap();
    }
    let mut times = [Vec::new(), Vec::new()];
    for _ in 0..41 {
        for (slot, (_, g)) in times.iter_mut().zip(&grams) {
            let t = Instant::now();
            std::hint::black_box(update_a_from_grams(g, 1.0, 1e-8).unwrap());
            slot.push(t.elapsed());
        }
    }
    let [t500, t1000] = times.map(median);
    let change = (t1000.as_secs_f64() / t500.as_secs_f64() - 1.0).abs();
    Outcome::new(
        shapes_ok && change < 0.2,
        format!(
            "Gram shapes fixed: {shapes_ok}; median solve n_s={} {t500:.2?}, n_s={} {t1000:.2?} ({:.1}% change)",
            grams[0].0,
            grams[1].0,
            100.0 * change
        ),
    )
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_jcmspl"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    assert!(status.success(), "jcmspl {args:?} failed with {status}");
}

fn end_to_end(dir: &Path) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    run_cli(&["synth", "--spc", "20", "--seed", "3", "--out", &p("data")]);
    let manifest = p("data/manifest.json");
    run_cli(&["train", "--manifest", &manifest, "--k", "40", "--seed", "5", "--holdout", "0.2", "--split-seed", "7", "--out", &p("run")]);
    run_cli(&["eval", "--model", &p("run/model.bin"), "--manifest", &manifest, "--gzsl", "--seed", "7", "--hit-k", "2"]);
    let read = |name: &str| std::fs::read(dir.join(name)).unwrap();
    (read("run/report.json"), read("run/summary.json"), read("run/model.bin"))
}

fn determinism() -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = end_to_end(first.path());
    let b = end_to_end(second.path());
    Outcome::new(
        a == b,
        format!(
            "report.json identical: {}, summary.json identical: {}, model.bin identical: {}",
            a.0 == b.0,
            a.1 == b.1,
            a.2 == b.2
        ),
    )
}

fn main() {
    let criteria: [Check; 9] = [
        ("sylvester solver agrees with the Kronecker oracle", sylvester_correctness),
        ("block updates are exact minimizers", block_minimizers),
        ("closed-form C is stationary", closed_form_c),
        ("training converges monotonically on the default benchmark", convergence),
        ("planted model is recovered on noiseless data", planted_recovery),
        ("harmonic mean reproduces the published rows", harmonic_mean_rows),
        ("ablation ordering Full >= IPL and JCMSPL0 >= IPL", ablation_direction),
        ("A-update cost is independent of the sample count", complexity),
        ("train and eval are deterministic end to end", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {}", outcome.detail);
        if let Some(w) = outcome.warning {
            println!("     warning: {w}");
        }
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
