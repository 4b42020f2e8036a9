use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn macstate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macstate"))
        .args(args)
        .env("MACSTATE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUICK: [&str; 8] = ["--directions", "5", "--restarts", "2", "--steps", "40", "--seed", "1"];

fn region(dir: &Path, name: &str, extra: &[&str]) -> (Output, String) {
    let out = dir.join(name).display().to_string();
    let mut args = vec![
        "region", "--preset", "switch_bsc", "--pz", "0.01", "--p1", "0.25", "--p2", "0.25",
    ];
    args.extend_from_slice(extra);
    args.extend_from_slice(&QUICK);
    args.extend_from_slice(&["--out", &out]);
    (macstate(&args), out)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(macstate(&["--help"]).status.code(), Some(0));
    assert_eq!(macstate(&["--version"]).status.code(), Some(0));
    assert_eq!(macstate(&["region", "--help"]).status.code(), Some(0));
}

#[test]
fn negative_link_rate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = region(dir.path(), "r.csv", &["--mode", "one_way", "--c12", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("c12"), "{}", stderr(&o));
    assert!(!Path::new(&out).exists());
}

#[test]
fn unused_rate_for_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = region(dir.path(), "r.csv", &["--mode", "one_way", "--c12", "0.2", "--c21", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_channel_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("ch.json");
    fs::write(
        &spec,
        r#"{"s1_size": 1, "s2_size": 1, "x1_size": 2, "x2_size": 2, "y_size": 2,
            "state_pmf": [1.0],
            "kernel": [[0.5, 0.5], [0.5, 0.5], [0.5, 0.4], [0.5, 0.5]]}"#,
    )
    .unwrap();
    let o = macstate(&[
        "region", "--channel", spec.to_str().unwrap(), "--mode", "one_way", "--out",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("x1=1"), "{}", stderr(&o));

    fs::write(&spec, r#"{"preset": "switch_bsc", "pz": 0.1, "colour": 3}"#).unwrap();
    let o = macstate(&["region", "--channel", spec.to_str().unwrap(), "--mode", "one_way"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn preset_needs_pz() {
    let o = macstate(&["region", "--preset", "switch_bsc", "--mode", "one_way"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pz"));
}

#[test]
fn region_writes_manifest_frontier_and_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = region(dir.path(), "r.csv", &["--mode", "one_way", "--c12", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let manifest: serde_json::Value =
        serde_json::from_str(lines.next().unwrap().strip_prefix("# manifest ").unwrap()).unwrap();
    assert_eq!(manifest["command"], "region");
    assert_eq!(manifest["seed"], 1);
    assert!(lines.next().unwrap().starts_with("# mode=one_way, c12=0.500000"));
    assert_eq!(lines.next().unwrap(), "r1,r2");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.first().unwrap().0, 0.0);
    assert_eq!(rows.last().unwrap().1, 0.0);

    let dump: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.witness.json")).unwrap()).unwrap();
    assert_eq!(dump["witnesses"].as_array().unwrap().len(), rows.len());
}

#[test]
fn simulate_from_a_witness_and_guards() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = region(dir.path(), "r.csv", &["--mode", "one_way", "--c12", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let dump = dir.path().join("r.witness.json").display().to_string();
    let sim = dir.path().join("sim.csv").display().to_string();
    let base = [
        "simulate", "--preset", "switch_bsc", "--pz", "0.01", "--policy", &dump, "--witness", "1",
        "--c12", "0.5", "--eps", "0.9", "--seed", "2", "--out", &sim,
    ];
    let mut ok = base.to_vec();
    ok.extend_from_slice(&["--n", "4,6", "--r1", "0.1", "--r2", "0.1", "--trials", "20"]);
    let o = macstate(&ok);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&sim).unwrap();
    assert!(text.lines().any(|l| l == macstate::binsim::CSV_HEADER));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);

    let mut zero = base.to_vec();
    zero.extend_from_slice(&["--n", "6", "--r1", "0.1", "--r2", "0.1", "--trials", "0"]);
    assert_eq!(macstate(&zero).status.code(), Some(1));

    let mut huge = base.to_vec();
    huge.extend_from_slice(&["--n", "20", "--r1", "1.5", "--r2", "0.1", "--trials", "5"]);
    assert_eq!(macstate(&huge).status.code(), Some(3));
}

#[test]
fn compare_reports_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "compare", "--preset", "switch_bsc", "--pz", "0.01", "--p1", "0.25", "--p2", "0.25",
        "--run", "one_way:c12=0.5", "--run", "state_only:c12=0.5", "--run", "one_way",
        "--out-dir", dir.path().to_str().unwrap(),
    ];
    args.extend_from_slice(&QUICK);
    let o = macstate(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().next().unwrap().starts_with("one_way(c12=0.5),state_only(c12=0.5),b_subset_a"));
    for k in 0..3 {
        assert!(dir.path().join(format!("region_{k}.csv")).exists());
    }
    assert!(dir.path().join("verdicts.csv").exists());

    let o = macstate(&["compare", "--preset", "switch_bsc", "--pz", "0.1", "--run", "one_way"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_checks_nesting() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep", "--preset", "switch_bsc", "--pz", "0.01", "--p1", "0.25", "--p2", "0.25",
        "--c12", "0,0.2", "--out-dir", dir.path().to_str().unwrap(),
    ];
    args.extend_from_slice(&QUICK);
    let o = macstate(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let nesting = fs::read_to_string(dir.path().join("nesting.csv")).unwrap();
    assert!(nesting.contains("one_way(c12=0),one_way(c12=0.2),a_subset_b"), "{nesting}");
    assert!(nesting.contains("saturated"));
}

#[test]
fn replay_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = region(dir.path(), "r.csv", &["--mode", "split", "--c12m", "0.1", "--c12s", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let again = dir.path().join("again.csv").display().to_string();
    let o = macstate(&["replay", &out, "--out", &again]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "r1,r2\n").unwrap();
    assert_eq!(macstate(&["replay", junk.to_str().unwrap()]).status.code(), Some(1));
}
