use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use memtree::analysis::{degree_histogram, height};
use memtree::limits::constants::HeightConstants;
use memtree::{grow_tree, MemorySchedule};

fn memtree(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memtree"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&memtree(&["--help"], d)), 0);
    assert_eq!(code(&memtree(&[], d)), 1);
    assert_eq!(code(&memtree(&["grow", "--n", "10"], d)), 1);
    assert_eq!(code(&memtree(&["grow", "--mesoscopic", "1.5", "--n", "10"], d)), 1);
    assert_eq!(code(&memtree(&["grow", "--macroscopic", "0", "--n", "10"], d)), 1);
    assert_eq!(
        code(&memtree(&["grow", "--mesoscopic", "0.5", "--macroscopic", "0.5", "--n", "10"], d)),
        1
    );
    assert_eq!(code(&memtree(&["grow", "--sarrt", "beta:1", "--n", "10"], d)), 1);
    let missing = memtree(&["height", "--tree", "missing.csv"], d);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}

#[test]
fn grow_writes_one_row_per_edge() {
    let dir = tempfile::tempdir().unwrap();
    let o = memtree(&["grow", "--mesoscopic", "0.5", "--n", "1000", "--seed", "4"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("vertex,parent"));
    let rows: Vec<(u64, u64)> = lines
        .map(|l| {
            let (v, p) = l.split_once(',').unwrap();
            (v.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 999);
    let t = grow_tree(&MemorySchedule::mesoscopic(0.5).unwrap(), 1000, 4).unwrap();
    let expected: Vec<(u64, u64)> = (2..=1000).zip(t.parents()).collect();
    assert_eq!(rows, expected);
    let again = memtree(&["grow", "--mesoscopic", "0.5", "--n", "1000", "--seed", "4"], dir.path());
    assert_eq!(stdout(&again), text);
}

#[test]
fn saved_tree_round_trips_through_analysis_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = memtree(
        &["grow", "--macroscopic", "0.3", "--n", "3000", "--seed", "9", "--out", "t.csv", "--export-dot", "t.dot"],
        d,
    );
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(d.join("t.dot")).unwrap().starts_with("digraph"));
    let t = grow_tree(&MemorySchedule::macroscopic(0.3).unwrap(), 3000, 9).unwrap();

    let h = memtree(&["height", "--tree", "t.csv", "--format", "json"], d);
    assert_eq!(code(&h), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&h)).unwrap();
    assert_eq!(json["command"], "height");
    assert_eq!(json["data"][0]["height"], height(&t));

    let deg = memtree(&["degrees", "--tree", "t.csv"], d);
    assert_eq!(code(&deg), 0);
    let text = stdout(&deg);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,count,frequency,limit"));
    let parsed: BTreeMap<u64, u64> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .filter(|&(_, c)| c > 0)
        .collect();
    assert_eq!(parsed, degree_histogram(&t));
}

#[test]
fn csv_output_gets_a_provenance_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = memtree(
        &["height", "--mesoscopic", "0.5", "--n", "500,1000", "--reps", "3", "--seed", "5", "--out", "h.csv"],
        d,
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(d.join("h.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,rep,seed,height,height_scaled"));
    assert_eq!(csv.lines().count(), 7);
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("h.csv.config.json")).unwrap()).unwrap();
    assert_eq!(side["command"], "height");
    assert_eq!(side["config"]["seed"], 5);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), r#"{"schedule": {"kind": "mesoscopic", "beta": 0.5}, "n": [200], "seed": 1}"#).unwrap();
    let from_config = stdout(&memtree(&["grow", "--config", "c.json"], d));
    let explicit = stdout(&memtree(&["grow", "--mesoscopic", "0.5", "--n", "200", "--seed", "1"], d));
    assert_eq!(from_config, explicit);
    let overridden = stdout(&memtree(&["grow", "--config", "c.json", "--seed", "2"], d));
    let explicit2 = stdout(&memtree(&["grow", "--mesoscopic", "0.5", "--n", "200", "--seed", "2"], d));
    assert_eq!(overridden, explicit2);
    assert_ne!(overridden, from_config);
    fs::write(d.join("bad.json"), r#"{"schedule": {"kind": "mesoscopic", "beta": 0.5}, "nn": 3}"#).unwrap();
    assert_eq!(code(&memtree(&["grow", "--config", "bad.json"], d)), 1);
}

#[test]
fn custom_j_file_drives_growth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // j(m) = m: every vertex attaches to its predecessor
    let rows: String = (1..50).map(|m| format!("{m}\n")).collect();
    fs::write(d.join("j.txt"), rows).unwrap();
    let o = memtree(&["grow", "--custom-j", "j.txt", "--n", "50", "--seed", "3"], d);
    assert_eq!(code(&o), 0);
    for (i, line) in stdout(&o).lines().skip(1).enumerate() {
        let v = i as u64 + 2;
        assert_eq!(line, format!("{v},{}", v - 1));
    }
}

#[test]
fn constants_table_satisfies_duality() {
    let dir = tempfile::tempdir().unwrap();
    let o = memtree(&["constants", "--theta", "0.2,0.5,0.8", "--format", "json"], dir.path());
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = json["data"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let theta = row["theta"].as_f64().unwrap();
        let direct = HeightConstants::compute(theta, 1e-12).unwrap();
        assert!((row["kappa"].as_f64().unwrap() - direct.kappa).abs() < 1e-8);
        assert!((row["kappa"].as_f64().unwrap() * row["alpha_max"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn explore_and_branchpoints_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = memtree(
        &["explore", "--mesoscopic", "0.5", "--n", "5000", "--seed", "2", "--k", "3", "--export-dot", "s.dot"],
        d,
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("m,revealed_label,chosen_line,M_1,M_2,M_3"));
    for (i, line) in text.lines().skip(1).enumerate() {
        let f: Vec<u64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[0], i as u64 + 1);
        assert_eq!(f[3] + f[4] + f[5], f[0]);
    }
    assert!(fs::read_to_string(d.join("s.dot")).unwrap().contains("doublecircle"));

    let b = memtree(
        &["branchpoints", "--mesoscopic", "0.5", "--n", "2000", "--reps", "20", "--seed", "1", "--format", "json"],
        d,
    );
    assert_eq!(code(&b), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&b)).unwrap();
    assert_eq!(json["data"].as_array().unwrap().len(), 20);
    let ks = json["summary"]["ks"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ks));
}

#[test]
fn sweep_writes_artifacts_and_asserts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"{
        "schedule": {"kind": "mesoscopic", "beta": 0.5},
        "n": [500],
        "replications": 3,
        "master_seed": 1,
        "statistics": [{"kind": "height"}],
        "checks": [{"metric": "height_scaled", "target": 100.0, "tolerance": 0.1}]
    }"#;
    fs::write(d.join("sweep.json"), config).unwrap();
    let ok = memtree(&["sweep", "--config", "sweep.json", "--out", "run"], d);
    assert_eq!(code(&ok), 0);
    assert!(d.join("run/report.json").exists());
    assert!(d.join("run/cells.csv").exists());
    let first = fs::read_to_string(d.join("run/report.json")).unwrap();
    let failing = memtree(&["sweep", "--config", "sweep.json", "--out", "run2", "--assert"], d);
    assert_eq!(code(&failing), 3);
    assert_eq!(fs::read_to_string(d.join("run2/report.json")).unwrap(), first);
}
