use std::process::Command;

use mamcts::bench::{read_records_csv, replay};

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mamcts-bench"))
}

#[test]
fn full_accuracy_run_writes_replayable_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let status = bench()
        .args(["--grid-size", "4,5", "--agents", "2", "--instances", "2", "--seed", "3"])
        .args(["--iterations", "300", "--repeats", "2", "--oracle-check", "--alpha", "0.5", "--update", "max"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary = String::from_utf8(status.stderr).unwrap();
    assert!(summary.contains("MP52-2"));
    let records = read_records_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(records.len(), 8);
    for rec in &records {
        assert_eq!(rec.alpha, "0.5");
        assert_eq!(rec.update_rule, "max");
        assert_eq!(rec.t_final, 3 * u32::from(rec.n));
        assert!(rec.oracle_makespan.is_some() && rec.lower_bound.is_some());
        let again = replay(rec).unwrap();
        assert_eq!((again.success_rate, again.makespan), (rec.success_rate, rec.makespan));
    }
}

#[test]
fn sweep_writes_sorted_points_to_stdout() {
    let out = bench()
        .args(["--grid-size", "4", "--agents", "2", "--instances", "3", "--iterations", "100"])
        .args(["--sweep-t-final", "0:12:4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t_final,mean_success_rate,runs");
    let ts: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ts, ["0", "4", "8", "12"]);
    assert!(lines[1].starts_with("0,0.0,3"));
}

#[test]
fn instance_files_and_explicit_horizon() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/MP52-1.txt");
    let out = bench()
        .args(["--instance-file", fixture, "--t-final", "0", "--iterations", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let records = read_records_csv(&out.stdout[..]).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].instance, "MP52-1");
    assert_eq!(records[0].success_rate, 0.0);
    assert_eq!(records[0].makespan, 0);
}

#[test]
fn bad_arguments_fail() {
    for args in [
        vec!["--alpha", "0.3"],
        vec!["--update", "median"],
        vec!["--sweep-t-final", "9:1:1"],
        vec!["--iterations", "0"],
        vec!["--grid-size", "2", "--agents", "3"],
    ] {
        let out = bench().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
    }
}
