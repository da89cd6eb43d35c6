use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("simulate binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"
m = 32
k = 2
beta_bi_db = -70.0
beta_iu_db = -40.0
n_sweep = [4, 6]
trials = 2
phi_random_starts = 2
"#;

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = simulate(&["--config", &cfg, "--out", out.to_str().unwrap(), "--emit-plot-data"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.starts_with("scheme,n,m,trial,user,gamma,rate,sum_rate,tau,leakage,degenerate\n"));
    // 3 schemes x 2 N x 2 trials x 2 users.
    assert_eq!(records.lines().count(), 1 + 24);
    let agg = fs::read_to_string(out.join("aggregates.csv")).unwrap();
    assert!(agg.starts_with("scheme,n,m,mean_sum_rate,stderr,trials_used\n"));
    assert_eq!(agg.lines().count(), 1 + 6);
    for name in ["records.json", "aggregates.json", "plot_data.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn overrides_change_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = simulate(&[
        "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5", "--trials", "1", "--sweep-n", "4:8:2",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let agg = fs::read_to_string(out.join("aggregates.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 3 * 3);
    assert!(agg.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(simulate(&["--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(simulate(&["--config", &cfg, "--out", b.to_str().unwrap(), "--sequential"]).status.success());
    for name in ["records.csv", "aggregates.csv", "records.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn convergence_mode_writes_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
        m = 16
        k = 2
        beta_bi_db = -70.0
        beta_iu_db = -40.0
        n_sweep = [6]
        m_sweep = [16, 32, 64]
        convergence_lines = 2
        convergence_draws = 5
        "#,
    );
    let out = dir.path().join("out");
    let res = simulate(&["--config", &cfg, "--out", out.to_str().unwrap(), "--convergence"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(text.starts_with("regime,line,m,user,mc_mean,limit,rel_error\n"));
    // 2 regimes x 2 lines x 3 M x 2 users.
    assert_eq!(text.lines().count(), 1 + 24);
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in ["trials = 0", "k = 8\nn_sweep = [8]", "not toml at all [", "bogus_key = 1"] {
        let cfg = write_config(dir.path(), body);
        let res = simulate(&["--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{body}");
    }
    let cfg = write_config(dir.path(), SMALL);
    let res = simulate(&["--config", &cfg, "--out", out.to_str().unwrap(), "--sweep-n", "9:3:1"]);
    assert_eq!(res.status.code(), Some(2));
    let res = simulate(&["--config", "/nonexistent/config.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
