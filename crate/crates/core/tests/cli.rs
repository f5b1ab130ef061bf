use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn cloccs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloccs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = cloccs(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "simulate.grid_points = 4\nsimulate.grid_step = 30\nsimulate.budding_cells = 100\n\
                     simulate.flow_cells = 400\nsampler.iterations = 600\nsampler.burn_in = 200\n\
                     sampler.thin = 2\nsampler.start = prior\ncompare.importance_draws = 200\n\
                     compare.rmse_draws = 20\n";

#[test]
fn simulate_fit_summarize_pipeline() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let data = dir.path().join("data");
    ok(&["simulate", "--config", path(&cfg), "--out", path(&data), "--seed", "3"]);
    for f in ["budding.csv", "flow.csv", "flow_truth.csv", "manifest.txt"] {
        assert!(data.join(f).is_file(), "{f}");
    }
    let manifest = fs::read_to_string(data.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = simulate"));
    assert!(manifest.contains("sampler.seed = 3"));

    let fit = dir.path().join("fit");
    ok(&[
        "fit",
        "--config",
        path(&cfg),
        "--out",
        path(&fit),
        "--budding",
        path(&data.join("budding.csv")),
        "--flow",
        path(&data.join("flow.csv")),
    ]);
    let chain = fs::read_to_string(fit.join("chain.csv")).unwrap();
    assert!(chain.starts_with("draw,log_posterior,mu0,sigma0,sigmav,lambda,delta,beta,gamma1,gamma2,"));
    assert_eq!(chain.lines().count(), 1 + 200);
    let diag = fs::read_to_string(fit.join("diagnostics.csv")).unwrap();
    assert!(diag.lines().any(|l| l.starts_with("acceptance,")));
    assert!(diag.lines().any(|l| l.starts_with("ess,mu0,")));

    let again = dir.path().join("summary");
    ok(&[
        "summarize",
        "--chain",
        path(&fit.join("chain.csv")),
        "--out",
        path(&again),
    ]);
    assert_eq!(
        fs::read(fit.join("summary.csv")).unwrap(),
        fs::read(again.join("summary.csv")).unwrap()
    );

    let curve = fs::read_to_string(fit.join("budding_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("time_min,mean,lower,upper,observed"));
    let mut observed = 0;
    for l in lines {
        let v: Vec<&str> = l.split(',').collect();
        let (mean, lo, hi): (f64, f64, f64) = (v[1].parse().unwrap(), v[2].parse().unwrap(), v[3].parse().unwrap());
        assert!(lo <= mean + 1e-12 && mean <= hi + 1e-12 && (0.0..=1.0).contains(&mean));
        observed += usize::from(!v[4].is_empty());
    }
    assert_eq!(observed, 4);

    // The observed column is a density on the log2 scale: channel k covers
    // [log2(k - 1/2), log2(k + 1/2)].
    let dens = fs::read_to_string(fit.join("flow_density.csv")).unwrap();
    let mut by_time = std::collections::BTreeMap::<String, (f64, f64)>::new();
    for l in dens.lines().skip(1) {
        let v: Vec<&str> = l.split(',').collect();
        let f: f64 = v[1].parse().unwrap();
        let k = f.exp2().round();
        let width = (k + 0.5).log2() - (k - 0.5).max(0.5).log2();
        let e = by_time.entry(v[0].to_string()).or_default();
        e.0 += v[3].parse::<f64>().unwrap() * width;
        e.1 += v[2].parse::<f64>().unwrap() * width;
    }
    assert_eq!(by_time.len(), 4);
    for (t, (obs, model)) in by_time {
        assert!(
            (obs - 1.0).abs() < 1e-3,
            "observed density at t={t} integrates to {obs}"
        );
        assert!(
            model > 0.9 && model < 1.1,
            "model density at t={t} integrates to {model}"
        );
    }
}

#[test]
fn compare_writes_the_lattice_table() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let data = dir.path().join("data");
    ok(&["simulate", "--config", path(&cfg), "--out", path(&data)]);
    let out = dir.path().join("cmp");
    ok(&[
        "compare",
        "--config",
        path(&cfg),
        "--out",
        path(&out),
        "--budding",
        path(&data.join("budding.csv")),
        "--importance-draws",
        "300",
    ]);
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][1], "full");
    assert_eq!(rows[0][8], "mu0=delta=sigma0sq=0");
    assert_eq!(rows.len(), 1 + 8 + 6);
    // Diagonal entries compare a model with itself.
    for i in 1..=8 {
        assert_eq!(rows[i][i].parse::<f64>().unwrap(), 0.0);
    }
    // The full model nests everything; the smallest model nests nothing else.
    assert!(rows[2..=8].iter().all(|r| !r[1].is_empty()));
    assert!(rows[1..8].iter().all(|r| r[8].is_empty()));
    assert!(fs::read_to_string(out.join("manifest.txt"))
        .unwrap()
        .contains("compare.importance_draws = 300"));
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(cloccs(&["fit"]).status.code(), Some(2));
    assert_eq!(cloccs(&["fit", "--out", path(&out)]).status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "sampler.wobble = 1\n").unwrap();
    let r = cloccs(&["simulate", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("sampler.wobble"));

    let bad = dir.path().join("b.csv");
    fs::write(&bad, "time_min,budded,total\n30,3,200\n38,250,200\n").unwrap();
    let r = cloccs(&["fit", "--out", path(&out), "--budding", path(&bad)]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));

    let missing = dir.path().join("nope.csv");
    let r = cloccs(&["fit", "--out", path(&out), "--budding", path(&missing)]);
    assert_eq!(r.status.code(), Some(3));
}
