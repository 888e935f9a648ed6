//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints exactly one PASS/FAIL line; exits non-zero if any fail.
//!
//! Pass a check id (e.g. `7`, `10`) as an argument to run a subset.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use qnull::hermitian::{random_rank_r_state, sample_perturbed_state, sample_trace_one_hermitian, Spectrum};
use qnull::heterodyne::{roster_state, sample_husimi};
use qnull::isotropic::{run_experiment, IsotropicConfig, ProjectionMode};
use qnull::projection::{oracle_project, project_to_states, TangentCone};
use qnull::rng::SeedStream;
use qnull::semicircle::{empirical_mean_spectrum, order_statistics, Semicircle};
use qnull::stats::{ks_pvalue, ks_statistic};
use qnull::theory::{lambda_asymptotic, lambda_expected, lambda_kite, solve_quintic_z, z_approx};

const SEED: u64 = 20_261_016;

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

type Check = fn() -> Vec<(&'static str, Outcome)>;

fn isotropic(d: usize, r: usize, seed: u64) -> qnull::isotropic::IsotropicSummary {
    run_experiment(&IsotropicConfig {
        d,
        r,
        eps: 1e-4,
        trials: 500,
        projection: ProjectionMode::Cone,
        seed,
        spectrum: Spectrum::EqualWeights,
        traceless: true,
    })
    .expect("isotropic experiment")
}

fn wilks_baseline() -> Vec<(&'static str, Outcome)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 2..=4 {
        let s = isotropic(d, d, SEED + d as u64);
        let target = (d * d - 1) as f64;
        let z = (s.mean_lambda - target) / s.stderr_lambda;
        pass &= z.abs() <= 3.0;
        parts.push(format!("d={d}: {:.3} vs {target} ({z:+.2} se)", s.mean_lambda));
    }
    vec![("1", outcome(pass, parts.join("; ")))]
}

fn main_result() -> Vec<(&'static str, Outcome)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, r) in [(8, 1), (16, 1), (16, 2), (24, 2), (30, 1)] {
        let s = isotropic(d, r, SEED + (100 * d + r) as u64);
        let theory = lambda_expected(r, d).unwrap().lambda_total;
        let rel = (s.mean_lambda - theory) / theory;
        pass &= rel.abs() <= 0.05;
        parts.push(format!("({d},{r}): {:.2} vs {theory:.2} ({:+.2}%)", s.mean_lambda, 100.0 * rel));
    }
    vec![("2", outcome(pass, parts.join("; ")))]
}

fn boundary_suppression() -> Vec<(&'static str, Outcome)> {
    let s = isotropic(30, 1, SEED + 3);
    let bound = 0.5 * 899.0;
    vec![(
        "3",
        outcome(
            s.mean_lambda < bound,
            format!("d=30, r=1: {:.2} < {bound}", s.mean_lambda),
        ),
    )]
}

fn l_kite_split() -> Vec<(&'static str, Outcome)> {
    let s = isotropic(8, 2, SEED + 4);
    let l = s.l_entries();
    let (lo, hi) = l
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let diag = s.support_diagonal_mean();
    let kernel = s.kernel_mean();
    let pass = lo >= 0.85 && hi <= 1.15 && diag > 1.0 && kernel < 1.0;
    vec![(
        "4",
        outcome(
            pass,
            format!("{} L entries in [{lo:.3}, {hi:.3}]; support diagonal {diag:.3}; kernel {kernel:.3}", l.len()),
        ),
    )]
}

fn projection_vs_oracle() -> Vec<(&'static str, Outcome)> {
    let mut worst: f64 = 0.0;
    for d in [3, 4] {
        let stream = SeedStream::new(SEED).child(50 + d as u64);
        for i in 0..100 {
            let h = sample_trace_one_hermitian(d, 0.3, &mut stream.rng(i)).unwrap();
            let fast = project_to_states(&h).unwrap().projected;
            let slow = oracle_project(&h).unwrap();
            worst = worst.max(fast.as_hermitian().sub(slow.as_hermitian()).unwrap().norm_sqr().sqrt());
        }
    }
    vec![("5", outcome(worst <= 1e-8, format!("max Frobenius gap {worst:.2e} over 200 inputs")))]
}

fn pythagoras() -> Vec<(&'static str, Outcome)> {
    let stream = SeedStream::new(SEED).child(60);
    let rho0 = random_rank_r_state(6, 2, Spectrum::UniformSimplex, &mut stream.rng(0)).unwrap();
    let cone = TangentCone::new(&rho0);
    let trials = stream.child(1);
    let mut worst: f64 = 0.0;
    let mut clipped = 0;
    for i in 0..100 {
        let h = sample_perturbed_state(&rho0, 0.005, true, &mut trials.rng(i)).unwrap();
        let res = cone.project(&h).unwrap();
        let star = &res.projected;
        clipped += res.clipped_count;
        let lhs = rho0.as_hermitian().sub(&h).unwrap().norm_sqr() - star.sub(&h).unwrap().norm_sqr();
        let rhs = rho0.as_hermitian().sub(star).unwrap().norm_sqr();
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    vec![(
        "6",
        outcome(
            worst <= 1e-8,
            format!("max relative residual {worst:.2e} over 100 inputs ({clipped} clipped kernel eigenvalues)"),
        ),
    )]
}

fn order_statistics_ansatz() -> Vec<(&'static str, Outcome)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [10, 100] {
        let (means, _) = empirical_mean_spectrum(n, 1.0, 1000, SeedStream::new(SEED).child(70 + n as u64)).unwrap();
        let os = order_statistics(n, 1.0).unwrap();
        let radius = Semicircle::for_gue(n, 1.0).unwrap().radius();
        let dev = means
            .iter()
            .zip(&os)
            .map(|(m, o)| (m - o).abs())
            .fold(0.0, f64::max)
            / radius;
        pass &= dev <= 0.05;
        parts.push(format!("n={n}: max deviation {dev:.4} R"));
    }
    vec![("7", outcome(pass, parts.join("; ")))]
}

/// Composite 8-point Gauss-Legendre rule on `[a, b]`.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const NODES: [(f64, f64); 4] = [
        (0.183_434_642_495_649_8, 0.362_683_783_378_362),
        (0.525_532_409_916_329, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    ];
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        for (x, w) in NODES {
            total += w * (f(mid - 0.5 * h * x) + f(mid + 0.5 * h * x));
        }
    }
    0.5 * h * total
}

/// `r + r z^2 + n * integral_z^{2 sqrt n} p(k) (k - z)^2 dk` for the unit
/// semicircle of radius `2 sqrt n`, integrated over the angle `k = R sin t`.
fn kite_quadrature(r: usize, n: usize, z: f64) -> f64 {
    let radius = 2.0 * (n as f64).sqrt();
    let t0 = (z / radius).asin();
    let integral = gauss_legendre(
        |t| {
            let k = radius * t.sin();
            let density = 2.0 / (PI * radius * radius) * radius * t.cos();
            density * (k - z).powi(2) * radius * t.cos()
        },
        t0,
        PI / 2.0,
        200,
    );
    r as f64 * (1.0 + z * z) + n as f64 * integral
}

fn quintic() -> Vec<(&'static str, Outcome)> {
    let mut worst = (0.0, 0, 0);
    let mut failing = 0;
    let mut cells = 0;
    for n in 5..=200 {
        for r in 1..=(n / 2).min(10) {
            let exact = solve_quintic_z(r, n).unwrap();
            let rel = (z_approx(r, n).unwrap() - exact).abs() / exact;
            cells += 1;
            if rel > 0.01 {
                failing += 1;
            }
            if rel > worst.0 {
                worst = (rel, n, r);
            }
        }
    }
    let a = outcome(
        failing == 0,
        format!(
            "z_approx within 1% of the quintic root in {}/{cells} cells; worst {:.2}% at n={}, r={}",
            cells - failing,
            100.0 * worst.0,
            worst.1,
            worst.2
        ),
    );

    let mut worst_rel: f64 = 0.0;
    let points = [
        (1, 5), (1, 9), (1, 20), (1, 50), (1, 199), (2, 7), (2, 14), (2, 40), (2, 120), (3, 9),
        (3, 30), (3, 90), (4, 12), (4, 60), (5, 15), (5, 100), (6, 25), (7, 150), (8, 40), (10, 200),
    ];
    for (r, n) in points {
        let z = solve_quintic_z(r, n).unwrap();
        let closed = lambda_kite(r, n, z).unwrap();
        worst_rel = worst_rel.max((closed - kite_quadrature(r, n, z)).abs() / closed);
    }
    let b = outcome(
        worst_rel <= 1e-6,
        format!("closed-form kite vs quadrature on 20 points: max relative error {worst_rel:.2e}"),
    );
    vec![("8a", a), ("8b", b)]
}

fn asymptotic() -> Vec<(&'static str, Outcome)> {
    let ratio = lambda_asymptotic(1, 500).unwrap() / lambda_expected(1, 500).unwrap().lambda_total;
    vec![("9", outcome((0.98..=1.02).contains(&ratio), format!("ratio at d=500: {ratio:.5}")))]
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_qnull")
}

fn run_cli(args: &[&str], out: &Path, workers: usize) -> String {
    let output = Command::new(binary())
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--workers")
        .arg(workers.to_string())
        .env("RUST_LOG", "error")
        .output()
        .expect("spawning qnull");
    assert!(
        output.status.success(),
        "qnull {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

/// Rows of a CSV written by the CLI, keyed by header name.
fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body = text.split_once('\n').expect("schema line").1;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().map(String::from).zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn heterodyne_suite() -> Vec<(&'static str, Outcome)> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("het");
    // Desk-scale defaults: fock0 and sup01, d_model 2..6, N in {1e3, 1e4}, 20 datasets.
    run_cli(&["heterodyne", "--seed", &SEED.to_string()], &out, 0);

    let fisher = read_table(&out.join("fisher.csv"));
    let summary = read_table(&out.join("lambda_summary.csv"));
    let states = ["fock0", "sup01"];

    let mut pass_a = true;
    let mut parts_a = Vec::new();
    for s in states {
        let conds: Vec<(usize, f64)> = fisher
            .iter()
            .filter(|r| r["rho0_label"] == s && r["n_samples"] == "10000")
            .map(|r| (num(r, "d_model") as usize, num(r, "condition_number")))
            .collect();
        let at4 = conds.iter().find(|c| c.0 == 4).map(|c| c.1).unwrap_or(f64::NAN);
        // "Within noise": a 10% dip between neighbouring models is tolerated.
        let monotone = conds.windows(2).all(|w| w[1].1 >= 0.9 * w[0].1);
        pass_a &= at4 >= 10.0 && monotone;
        let list: Vec<String> = conds.iter().map(|(d, c)| format!("{d}:{c:.3e}")).collect();
        parts_a.push(format!("{s} [{}]", list.join(" ")));
    }

    let mut pass_b = true;
    let mut parts_b = Vec::new();
    let mut pass_c = true;
    let mut parts_c = Vec::new();
    for s in states {
        let rows: Vec<_> = summary.iter().filter(|r| r["rho0_label"] == s).collect();
        for r in rows.iter().filter(|r| r["n_samples"] == "10000") {
            let (mean, wilks) = (num(r, "mean_lambda"), num(r, "wilks"));
            pass_b &= mean < wilks;
            parts_b.push(format!("{s} d={}: {mean:.2}<{wilks}", r["d_model"]));
            let small = rows
                .iter()
                .find(|q| q["n_samples"] == "1000" && q["d_model"] == r["d_model"])
                .expect("N=1000 row");
            let se = num(r, "stderr").hypot(num(small, "stderr"));
            let ok = mean >= num(small, "mean_lambda") - 2.0 * se;
            pass_c &= ok;
            parts_c.push(format!("{s} d={}: {:.2}->{mean:.2}", r["d_model"], num(small, "mean_lambda")));
        }
    }
    vec![
        ("10a", outcome(pass_a, format!("Fisher condition numbers at N=1e4: {}", parts_a.join("; ")))),
        ("10b", outcome(pass_b, format!("mean lambda below Wilks at N=1e4: {}", parts_b.join(", ")))),
        ("10c", outcome(pass_c, format!("mean lambda N=1e3 -> 1e4 within 2 se: {}", parts_c.join(", ")))),
    ]
}

fn husimi_sampler() -> Vec<(&'static str, Outcome)> {
    let vac = roster_state("fock0").unwrap();
    let mut passed = 0;
    for s in 0..20u64 {
        let seed = SEED + s;
        let data = sample_husimi(&vac, 10_000, "fock0", seed, &mut SeedStream::new(seed).rng(0)).unwrap();
        let r2: Vec<f64> = data.samples.iter().map(|a| a.norm_sqr()).collect();
        let d = ks_statistic(&r2, |x| 1.0 - (-x).exp());
        if ks_pvalue(d, r2.len()) > 0.01 {
            passed += 1;
        }
    }
    vec![("11", outcome(passed >= 18, format!("{passed}/20 seeds pass KS at p > 0.01")))]
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Vec<(&'static str, Outcome)> {
    let dir = tempfile::tempdir().unwrap();
    let seed = SEED.to_string();
    let commands: [(&str, Vec<&str>); 5] = [
        ("isotropic-sweep", vec!["--d-values", "2,3,5", "--r-values", "1,2", "--trials", "40"]),
        ("lambda-jk", vec!["--d", "5", "--r", "2", "--trials", "40"]),
        (
            "heterodyne",
            vec!["--states", "fock0,sup01", "--d-models", "2,3", "--n-samples", "100,300", "--datasets", "3"],
        ),
        ("wigner-check", vec!["--n-values", "5,12", "--draws", "50"]),
        ("projection-check", vec!["--samples", "10"]),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (name, extra) in &commands {
        let mut args = vec![*name, "--seed", &seed];
        args.extend(extra.iter().copied());
        let a = dir.path().join(format!("{name}-a"));
        let b = dir.path().join(format!("{name}-b"));
        run_cli(&args, &a, 1);
        run_cli(&args, &b, 4);
        let files_a = files_under(&a);
        if files_a != files_under(&b) {
            mismatches.push(format!("{name}: file sets differ"));
            continue;
        }
        // Manifests carry wall-clock timestamps by design.
        for rel in files_a.iter().filter(|p| !p.to_string_lossy().ends_with(".manifest.json")) {
            compared += 1;
            if std::fs::read(a.join(rel)).unwrap() != std::fs::read(b.join(rel)).unwrap() {
                mismatches.push(format!("{name}: {}", rel.display()));
            }
        }
    }
    let theory = ["theory", "--r", "2", "--d", "16", "--asymptotic"];
    let t1 = run_cli(&theory, &dir.path().join("t"), 1);
    let t2 = run_cli(&theory, &dir.path().join("t"), 4);
    compared += 1;
    if t1 != t2 {
        mismatches.push("theory: stdout differs".into());
    }
    vec![(
        "12",
        outcome(
            mismatches.is_empty(),
            if mismatches.is_empty() {
                format!("{compared} outputs byte-identical across 1 and 4 workers")
            } else {
                mismatches.join("; ")
            },
        ),
    )]
}

fn main() {
    let checks: [(&str, Check); 12] = [
        ("1", wilks_baseline),
        ("2", main_result),
        ("3", boundary_suppression),
        ("4", l_kite_split),
        ("5", projection_vs_oracle),
        ("6", pythagoras),
        ("7", order_statistics_ansatz),
        ("8", quintic),
        ("9", asymptotic),
        ("10", heterodyne_suite),
        ("11", husimi_sampler),
        ("12", determinism),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (id, _) in &checks {
            println!("criterion_{id}: test");
        }
        return;
    }
    let wanted: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, check) in checks {
        if !wanted.is_empty() && !wanted.iter().any(|w| *w == id) {
            continue;
        }
        let start = Instant::now();
        let results = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            vec![(id, outcome(false, format!("panicked: {msg}")))]
        });
        let secs = start.elapsed().as_secs_f64();
        for (label, o) in results {
            if !o.pass {
                failed += 1;
            }
            println!(
                "{} criterion {label:<3} [{secs:7.1}s] {}",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
