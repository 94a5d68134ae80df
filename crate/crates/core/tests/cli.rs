use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_misokg"));
    c.env_remove("MISOKG_OUTPUT_DIR");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_lam(out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(configs().join("rosenbrock_lam.toml"))
        .args(["--replications", "3", "--seed", "7", "--output"])
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read(p: PathBuf) -> Vec<u8> {
    fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn replicated_run_writes_outputs_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run_lam(&a, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_lam(&b, &["--jobs", "3"]);
    assert!(out.status.success());
    for r in 0..3 {
        let csv = read(a.join(format!("rep_{r}.csv")));
        assert_eq!(csv, read(b.join(format!("rep_{r}.csv"))), "rep {r} differs");
        let header = String::from_utf8_lossy(&csv).lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "iter,source,x_0,x_1,y,cost,cum_cost,rec_x_0,rec_x_1,rec_mu,true_value"
        );
        let side: serde_json::Value = serde_json::from_slice(&read(a.join(format!("rep_{r}.json")))).unwrap();
        assert_eq!(side["seed"], 7 + r as u64);
        assert!(side["log"]["model"].is_object());
        assert!(side["config"]["problem"]["name"] == "rosenbrock_lam");
    }
    assert_eq!(fs::read_dir(&a).unwrap().count(), 6);

    let agg = bin().arg("aggregate").arg(&a).output().unwrap();
    assert!(agg.status.success(), "{}", String::from_utf8_lossy(&agg.stderr));
    let summary = String::from_utf8(read(a.join("summary.csv"))).unwrap();
    assert!(summary.starts_with("cum_cost_grid,mean_gain,lower_2se,upper_2se"));
    assert_eq!(summary.lines().count(), 101);
}

#[test]
fn missing_config_exits_1_and_names_it() {
    let out = bin().args(["run", "--config", "/nonexistent/nope.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/nope.toml"));
    let out = bin().args(["run", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn budget_override_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("quad.toml");
    fs::write(
        &cfg,
        format!(
            "[problem]\nfile = {:?}\n\n[budget]\nmode = \"total_cost\"\nlimit = 30\n\n[run]\nreplications = 1\n",
            configs().join("quadratic_problem.toml")
        ),
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--budget", "60", "--output"])
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let side: serde_json::Value = serde_json::from_slice(&read(tmp.path().join("o/rep_0.json"))).unwrap();
    assert_eq!(side["config"]["budget"]["limit"], 60.0);
    assert!(side["log"]["total_cost"].as_f64().unwrap() - side["log"]["initial_cost"].as_f64().unwrap() <= 60.0);
}

#[test]
fn output_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env");
    let out = bin()
        .env("MISOKG_OUTPUT_DIR", &dir)
        .args(["run", "--config"])
        .arg(configs().join("rosenbrock_lam.toml"))
        .args(["--replications", "1", "--budget", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("rep_0.csv").exists());
    assert!(dir.join("rep_0.json").exists());
}

#[test]
fn aggregate_rejects_mixed_configurations() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("mixed");
    assert!(run_lam(&dir, &["--budget", "2"]).status.success());
    let other = tmp.path().join("other");
    let out = bin()
        .args(["run", "--config"])
        .arg(configs().join("rosenbrock_lam.toml"))
        .args(["--replications", "4", "--budget", "3", "--output"])
        .arg(&other)
        .output()
        .unwrap();
    assert!(out.status.success());
    fs::copy(other.join("rep_3.json"), dir.join("rep_3.json")).unwrap();
    fs::copy(other.join("rep_3.csv"), dir.join("rep_3.csv")).unwrap();
    let agg = bin().arg("aggregate").arg(&dir).output().unwrap();
    assert_eq!(agg.status.code(), Some(1));
}

#[test]
fn failing_replications_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = tmp.path().join("blowup.toml");
    // overflows to infinity on most of the box
    fs::write(
        &problem,
        "lower = [0.0]\nupper = [3.0]\n\n[[sources]]\nexpr = \"exp(exp(exp(x_0)))\"\ncost = 1.0\n",
    )
    .unwrap();
    let cfg = tmp.path().join("blowup_run.toml");
    fs::write(
        &cfg,
        "[problem]\nfile = \"blowup.toml\"\n\n[budget]\nmode = \"iterations\"\nlimit = 3\n\n[run]\nreplications = 2\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let side: serde_json::Value = serde_json::from_slice(&read(tmp.path().join("out/rep_0.json"))).unwrap();
    assert!(side["error"].is_string());
}

#[test]
fn hyperfit_and_ckg_eval_print_results() {
    let out = bin()
        .args(["hyperfit", "--config"])
        .arg(configs().join("rosenbrock_lam.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["problem"], "rosenbrock_lam");
    assert!(v["model"]["kernel"].is_object());

    let out = bin()
        .args(["ckg-eval", "--config"])
        .arg(configs().join("rosenbrock_lam.toml"))
        .args(["--grid", "10", "--source", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("source,x_0,x_1,ckg,h,cost"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let ckg: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(ckg >= 0.0);
    }
}
