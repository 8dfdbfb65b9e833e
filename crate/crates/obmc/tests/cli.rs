use std::path::Path;
use std::process::{Command, Output};

fn obmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obmc"))
        .args(args)
        .env_remove("OBMC_THREADS")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn version_prints_semver() {
    let out = obmc(&["version"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let version = text.trim().strip_prefix("obmc ").unwrap();
    let parts: Vec<&str> = version.split('.').collect();
    assert_eq!(parts.len(), 3);
    assert!(parts.iter().all(|p| p.parse::<u32>().is_ok()));
}

#[test]
fn every_command_has_help() {
    for cmd in ["generate", "fit", "evaluate", "sweep", "rate", "version"] {
        let out = obmc(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        assert!(stdout(&out).contains("Usage"), "{cmd}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(obmc(&["bogus"]).status.code(), Some(1));
    assert_eq!(obmc(&["sweep", "--out", "x.csv"]).status.code(), Some(1));
    assert_eq!(obmc(&["generate", "--m1", "4"]).status.code(), Some(1));
}

#[test]
fn evaluating_the_truth_gives_zero_excess() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    let out = obmc(&[
        "generate",
        "--m1",
        "12",
        "--m2",
        "9",
        "--rank",
        "2",
        "--gamma",
        "1.5",
        "--seed",
        "3",
        "--out",
        path(&truth),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&truth).unwrap();
    for key in [
        "# r 2",
        "# gamma 1.5",
        "# tau ",
        "# generator block_sign",
        "# seed 3",
    ] {
        assert!(text.contains(key), "{key}");
    }
    let out = obmc(&[
        "evaluate",
        "--estimate",
        path(&truth),
        "--truth",
        path(&truth),
        "--header",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "risk,bayes_risk,excess,frob_err_sq_norm");
    let cols: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(cols[2], 0.0);
    assert_eq!(cols[3], 0.0);
    assert_eq!(cols[0], cols[1]);
}

#[test]
fn generate_fit_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    let samples = dir.path().join("samples.txt");
    let est = dir.path().join("est.txt");
    let out = obmc(&[
        "generate",
        "--m1",
        "15",
        "--m2",
        "10",
        "-r",
        "1",
        "--gamma",
        "1.0",
        "--out",
        path(&truth),
        "--n",
        "400",
        "--samples-out",
        path(&samples),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for estimator in [
        "nuclear_penalized",
        "nuclear_constrained",
        "maxnorm_constrained",
    ] {
        let out = obmc(&[
            "fit",
            "--samples",
            path(&samples),
            "--estimator",
            estimator,
            "--set",
            "gamma=1.0",
            "--set",
            "max_iters=300",
            "--out",
            path(&est),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(stdout(&out).contains(&format!("estimator {estimator}")));
        let out = obmc(&[
            "evaluate",
            "--estimate",
            path(&est),
            "--truth",
            path(&truth),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let excess: f64 = stdout(&out)
            .trim()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap();
        assert!((0.0..0.5).contains(&excess));
    }
    let out = obmc(&[
        "fit",
        "--truth",
        path(&truth),
        "--n",
        "300",
        "--set",
        "lambda=0.01",
        "--out",
        path(&est),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("lambda 0.01"));
}

#[test]
fn fit_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let est = dir.path().join("est.txt");
    assert_eq!(obmc(&["fit", "--out", path(&est)]).status.code(), Some(1));
    let samples = dir.path().join("s.txt");
    std::fs::write(&samples, "2 2 1\n0 0 3\n").unwrap();
    let out = obmc(&["fit", "--samples", path(&samples), "--out", path(&est)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
    std::fs::write(&samples, "2 2 1\n0 0 1\n").unwrap();
    let out = obmc(&[
        "fit",
        "--samples",
        path(&samples),
        "--set",
        "nope=1",
        "--out",
        path(&est),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_then_rate_gives_one_row_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    std::fs::write(
        &cfg,
        r#"
shapes = [[10, 10], [12, 8]]
ranks = [1]
gammas = [1.0]
n_values = [60, 120, 240]
estimators = ["nuclear_constrained", "maxnorm_constrained"]
replicates = 2
[solver_defaults]
max_iters = 100
restarts = 1
"#,
    )
    .unwrap();
    let runs = dir.path().join("runs.csv");
    let rates = dir.path().join("rates.csv");
    let out = obmc(&[
        "sweep",
        "--config",
        path(&cfg),
        "--out",
        path(&runs),
        "--seed",
        "7",
        "--threads",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read(&runs).unwrap();
    assert_eq!(
        std::fs::read_to_string(&runs).unwrap().lines().count(),
        1 + 12 * 3
    );

    let out = Command::new(env!("CARGO_BIN_EXE_obmc"))
        .args([
            "sweep",
            "--config",
            path(&cfg),
            "--out",
            path(&runs),
            "--seed",
            "7",
        ])
        .env("OBMC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&runs).unwrap(), first);

    let out = obmc(&[
        "rate",
        "--config",
        path(&cfg),
        "--in",
        path(&runs),
        "--out",
        path(&rates),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(&rates).unwrap();
    assert_eq!(table.lines().count(), 1 + 4);
    assert!(table.starts_with("estimator,m1,m2,r,gamma,points,excess_slope"));
    let svg = std::fs::read_to_string(rates.with_extension("svg")).unwrap();
    assert!(svg.contains("<svg"));
}

#[test]
fn sweep_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "shapes = [[4, 4]]\n").unwrap();
    let runs = dir.path().join("runs.csv");
    assert_eq!(
        obmc(&["sweep", "--config", path(&cfg), "--out", path(&runs)])
            .status
            .code(),
        Some(1)
    );
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        obmc(&["sweep", "--config", path(&missing), "--out", path(&runs)])
            .status
            .code(),
        Some(1)
    );
}
