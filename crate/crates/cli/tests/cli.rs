use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diartool"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn rttm_line(session: &str, speaker: &str, start: f64, dur: f64) -> String {
    format!("SPEAKER {session} 1 {start:.3} {dur:.3} <NA> <NA> {speaker} <NA> <NA>\n")
}

const REF: &str = "SPEAKER s1 1 0.000 2.000 <NA> <NA> A <NA> <NA>\n\
SPEAKER s1 1 1.500 2.500 <NA> <NA> B <NA> <NA>\n\
SPEAKER s2 1 0.000 1.000 <NA> <NA> C <NA> <NA>\n";

#[test]
fn combine_identical_inputs_reproduces_them() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.rttm", REF);
    let out = dir.path().join("out.rttm");
    let res = run(&["combine", s(&a), s(&a), s(&a), "-o", s(&out)]);
    assert!(res.status.success());
    assert_eq!(std::fs::read_to_string(out).unwrap(), REF);
}

#[test]
fn combine_hungarian_with_mapping_dump() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.rttm", REF);
    let b = write(&dir, "b.rttm", &REF.replace(" A ", " x ").replace(" B ", " y "));
    let c = write(&dir, "c.rttm", &REF.replace(" A ", " q "));
    let out = dir.path().join("out.rttm");
    let map = dir.path().join("map.json");
    let res = run(&[
        "combine", s(&a), s(&b), s(&c), "--method", "hungarian", "-o", s(&out), "--dump-mapping", s(&map),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(std::fs::read_to_string(out).unwrap(), REF);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(map).unwrap()).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["sessions"]["s1"]["mapping"]["hyp_1:x"], "A");
    assert_eq!(doc["sessions"]["s1"]["method"], "hungarian");
}

#[test]
fn exponential_refuses_eight_by_eight() {
    let dir = TempDir::new().unwrap();
    let mut paths = Vec::new();
    for h in 0..8 {
        let mut text = String::new();
        for k in 0..8 {
            text += &rttm_line("big", &format!("h{h}s{k}"), k as f64 * 2.0 + h as f64 * 0.01, 1.5);
        }
        paths.push(write(&dir, &format!("h{h}.rttm"), &text));
    }
    let mut args = vec!["combine", "--method", "exponential"];
    args.extend(paths.iter().map(|p| s(p)));
    let res = run(&args);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("resource limit"));
}

#[test]
fn der_of_reference_against_itself_is_zero() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.rttm", REF);
    let doc = json_stdout(&run(&["der", "--ref", s(&r), "--hyp", s(&r)]));
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["aggregate"]["der"], 0.0);
    assert_eq!(doc["sessions"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_hypothesis_session_is_fully_missed() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.rttm", REF);
    let h = write(&dir, "h.rttm", &rttm_line("s1", "A", 0.0, 2.0));
    let out = run(&["der", "--ref", s(&r), "--hyp", s(&h)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let doc = json_stdout(&out);
    let s2 = &doc["sessions"][1];
    assert_eq!(s2["session"], "s2");
    assert_eq!(s2["missed"], 10_000);
    assert_eq!(s2["rates"]["der"], 1.0);
    // Aggregate pools ticks across sessions.
    let sessions = doc["sessions"].as_array().unwrap();
    let sum = |k: &str| sessions.iter().map(|x| x[k].as_i64().unwrap()).sum::<i64>();
    let errors = sum("missed") + sum("false_alarm") + sum("confusion");
    let expect = errors as f64 / sum("total_ref_speech") as f64;
    assert!((doc["aggregate"]["der"].as_f64().unwrap() - expect).abs() < 1e-12);

    let strict = run(&["der", "--ref", s(&r), "--hyp", s(&h), "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn collar_and_overlap_flags_are_accepted() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.rttm", REF);
    let h = write(&dir, "h.rttm", &REF.replace("1.500", "1.600"));
    let plain = json_stdout(&run(&["der", "--ref", s(&r), "--hyp", s(&h)]));
    let forgiving = json_stdout(&run(&[
        "der", "--ref", s(&r), "--hyp", s(&h), "--collar", "0.25", "--ignore-overlap",
    ]));
    assert!(plain["aggregate"]["der"].as_f64().unwrap() > 0.0);
    assert_eq!(forgiving["aggregate"]["der"], 0.0);
}

#[test]
fn malformed_rttm_exits_two() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.rttm", "SPEAKER s1 1 0.0 1.0 <NA> <NA> A\n");
    let out = run(&["der", "--ref", s(&r), "--hyp", s(&r)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

const WORDS_REF: &str = r#"{"session":"m","speaker":"A","start":0.0,"end":1.0,"text":"hello there"}
{"session":"m","speaker":"B","start":1.0,"end":2.0,"text":"general kenobi"}
"#;

const WORDS_ONE_CHANNEL: &str = r#"{"session":"m","speaker":"X","start":0.0,"end":2.0,"text":"hello there general kenobi"}
"#;

#[test]
fn single_channel_hypothesis_scores() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.jsonl", WORDS_REF);
    let h = write(&dir, "h.jsonl", WORDS_ONE_CHANNEL);
    let cp = json_stdout(&run(&["cpwer", "--ref", s(&r), "--hyp", s(&h)]));
    assert_eq!(cp["aggregate"]["errors"], 4);
    let orc = json_stdout(&run(&["orcwer", "--ref", s(&r), "--hyp", s(&h)]));
    assert_eq!(orc["aggregate"]["errors"], 0);
    assert_eq!(orc["sessions"][0]["assignment"]["channels"], serde_json::json!([0, 0]));
    let wide = json_stdout(&run(&["orcwer", "--ref", s(&r), "--hyp", s(&h), "--channels", "3"]));
    assert_eq!(wide["aggregate"]["errors"], 0);
    let wd = json_stdout(&run(&["wder", "--ref", s(&r), "--hyp", s(&h)]));
    assert_eq!(wd["aggregate"]["correct_words"], 4);
    assert_eq!(wd["aggregate"]["speaker_errors"], 2);
}

#[test]
fn block_affinity_clusters_into_three() {
    let dir = TempDir::new().unwrap();
    let sizes = [4usize, 5, 4];
    let id: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
        .collect();
    let csv: String = id
        .iter()
        .map(|&a| {
            id.iter()
                .map(|&b| if a == b { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    let aff = write(&dir, "a.csv", &csv);
    let report = dir.path().join("report.json");
    let out = run(&["cluster", "--affinity", s(&aff), "--report", s(&report)]);
    let doc = json_stdout(&out);
    let labels: Vec<usize> = doc["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l[0].as_u64().unwrap() as usize)
        .collect();
    let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
    assert_eq!(distinct.len(), 3);
    for i in 0..id.len() {
        for j in 0..id.len() {
            assert_eq!(id[i] == id[j], labels[i] == labels[j]);
        }
    }
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(rep["k"], 3);
}

fn utterances(n: usize) -> String {
    (0..n)
        .map(|i| {
            format!(
                "{{\"id\":\"u{i}\",\"speaker\":\"spk{}\",\"duration\":{}}}\n",
                i % 7,
                1.0 + (i % 5) as f64 * 0.5
            )
        })
        .collect()
}

#[test]
fn simulate_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let u = write(&dir, "u.jsonl", &utterances(200));
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let rttm = dir.path().join(format!("o{run_id}.rttm"));
        let man = dir.path().join(format!("o{run_id}.jsonl"));
        let res = run(&[
            "simulate", "--utterances", s(&u), "--aimix", "--seed", "7", "--max-dur", "10",
            "--rttm", s(&rttm), "--manifest", s(&man),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push((std::fs::read(rttm).unwrap(), std::fs::read(man).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(!outputs[0].0.is_empty());
}

#[test]
fn simulate_without_overlap_has_no_overlap() {
    let dir = TempDir::new().unwrap();
    let u = write(&dir, "u.jsonl", &utterances(100));
    let fit = write(&dir, "fit.rttm", REF);
    let rttm = dir.path().join("o.rttm");
    let man = dir.path().join("o.jsonl");
    let res = run(&[
        "simulate", "--utterances", s(&u), "--fit", s(&fit), "--p-overlap", "0", "--seed", "3",
        "--rttm", s(&rttm), "--manifest", s(&man),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(rttm).unwrap();
    let mut by_session: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let start: f64 = f[3].parse().unwrap();
        let dur: f64 = f[4].parse().unwrap();
        by_session.entry(f[1].to_owned()).or_default().push((start, start + dur));
    }
    for turns in by_session.values_mut() {
        turns.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in turns.windows(2) {
            assert!(w[1].0 >= w[0].1 - 1e-9, "{w:?}");
        }
    }
}

#[test]
fn simulate_needs_statistics_source() {
    let dir = TempDir::new().unwrap();
    let u = write(&dir, "u.jsonl", &utterances(5));
    let out = run(&["simulate", "--utterances", s(&u), "--rttm", "x", "--manifest", "y"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn jobs_from_environment() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.rttm", REF);
    let out = bin()
        .env("DIARTOOL_JOBS", "2")
        .args(["der", "--ref", s(&r), "--hyp", s(&r)])
        .output()
        .unwrap();
    assert_eq!(json_stdout(&out)["aggregate"]["der"], 0.0);
}
