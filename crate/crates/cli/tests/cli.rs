use std::path::Path;
use std::process::{Command, Output};

fn maxproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxproj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(maxproj(&["--help"]).status.code(), Some(0));
    assert_eq!(maxproj(&["--version"]).status.code(), Some(0));
    assert_eq!(maxproj(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(maxproj(&["critvals"]).status.code(), Some(1));
}

#[test]
fn invalid_parameters_exit_one() {
    let o = maxproj(&["critvals", "--d", "1", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let o = maxproj(&["critvals", "--d", "2", "--beta", "0", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let o = maxproj(&["power", "--d", "2", "--alt", "nonsense", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn critvals_csv_is_reproducible() {
    let args = [
        "critvals",
        "--d",
        "2",
        "--n",
        "20",
        "--beta",
        "1,2",
        "--reps",
        "300",
        "--cover-m",
        "200",
        "--seed",
        "9",
    ];
    let a = maxproj(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tool_version,d,n,statistic,alpha,tail,critical_value,mc_stderr,replications,cover_m,seed"
    );
    assert_eq!(lines.count(), 2);
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "2"]);
    assert_eq!(maxproj(&with_workers).stdout, a.stdout);
}

#[test]
fn power_uses_saved_critical_values() {
    let dir = tempfile::tempdir().unwrap();
    let cv = dir.path().join("cv.csv");
    let cv = cv.to_str().unwrap();
    let o = maxproj(&[
        "critvals",
        "--d",
        "2",
        "--n",
        "30",
        "--beta",
        "1",
        "--reps",
        "400",
        "--cover-m",
        "200",
        "--out",
        cv,
    ]);
    assert!(o.status.success());
    let o = maxproj(&[
        "power",
        "--d",
        "2",
        "--n",
        "30",
        "--beta",
        "1",
        "--cover-m",
        "200",
        "--alt",
        "vmf:kappa=2",
        "--power-reps",
        "100",
        "--critvals",
        cv,
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let power = rows[0]["power"].as_f64().unwrap();
    assert!(power > 0.9, "power {power}");

    let o = maxproj(&[
        "power",
        "--d",
        "2",
        "--n",
        "31",
        "--beta",
        "1",
        "--alt",
        "vmf:kappa=2",
        "--power-reps",
        "10",
        "--critvals",
        cv,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run `critvals`"));
}

#[test]
fn ingest_check_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "craters.csv",
        "lat,lon,diameter_km\n10,20,5\n-45,100,30\n95,0,40\n0,0,25\n",
    );
    let o = maxproj(&["ingest-check", &data, "--min-diameter", "20", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report[0]["rows_read"], 4);
    assert_eq!(report[0]["filtered"], 1);
    assert_eq!(report[0]["skipped"], 1);
    assert_eq!(report[0]["kept"], 2);
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "x1,x2,x3\n1,0,0\n0,abc,1\n");
    let o = maxproj(&["ingest-check", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = maxproj(&["ingest-check", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_then_test() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    let data = data.to_str().unwrap();
    let o = maxproj(&[
        "sample",
        "--d",
        "3",
        "--n",
        "60",
        "--alt",
        "vmf:kappa=3",
        "--seed",
        "4",
        "--out",
        data,
    ]);
    assert!(o.status.success());
    let o = maxproj(&[
        "test",
        data,
        "--d",
        "3",
        "--beta",
        "1,2",
        "--reps",
        "199",
        "--cover-m",
        "500",
        "--competitors",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "p_value").unwrap();
    let t1 = text.lines().find(|l| l.contains(",T1,")).expect("T1 row");
    let p: f64 = t1.split(',').nth(col).unwrap().parse().unwrap();
    assert!(p <= 0.01, "{t1}");
    assert_eq!(text.lines().count(), 1 + 2 + 6);
}

#[test]
fn bahadur_table_output() {
    let o = maxproj(&["bahadur"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().count() > 40);
    assert!(text.lines().next().unwrap().contains("family"));
}
