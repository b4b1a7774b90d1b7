use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const NTS: &str = env!("CARGO_BIN_EXE_nts");

const SMALL_MARKOV: &str = r#"
algorithm = "markov"
d = 0.3333333333333333
L = 12
K = 60
N = 6
master_seed = 9
oracle_eval = "every-iteration"

[source]
alphabet_size = 2
order = 1
transitions = [[0.8, 0.2], [0.4, 0.6]]

[measure]
name = "hamming"
"#;

fn nts(args: &[&str]) -> Output {
    Command::new(NTS).args(args).output().expect("spawn nts")
}

fn run_config(dir: &Path, text: &str, out: &str) -> Output {
    let cfg = dir.join(format!("{out}.toml"));
    fs::write(&cfg, text).unwrap();
    let out = dir.join(out);
    nts(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_config(tmp.path(), SMALL_MARKOV, "a");
    let b = run_config(tmp.path(), SMALL_MARKOV, "b");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    for f in ["trace.csv", "final_distribution.toml", "manifest.toml"] {
        assert_eq!(read(tmp.path().join("a").join(f)), read(tmp.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn manifest_reproduces_trace() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_config(tmp.path(), SMALL_MARKOV, "first").status.code(), Some(0));
    let manifest = tmp.path().join("first/manifest.toml");
    let again = tmp.path().join("again");
    let out = nts(&["run", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(tmp.path().join("first/trace.csv")), read(again.join("trace.csv")));
}

#[test]
fn seed_override_changes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, SMALL_MARKOV).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    nts(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    nts(&["run", "--config", cfg.to_str().unwrap(), "--seed", "10", "--out", b.to_str().unwrap()]);
    assert_ne!(read(a.join("trace.csv")), read(b.join("trace.csv")));
    let manifest = String::from_utf8(read(b.join("manifest.toml"))).unwrap();
    assert!(manifest.contains("master_seed = 10"), "{manifest}");
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = run_config(tmp.path(), &SMALL_MARKOV.replace("K = 60", "K = 60\nbogus = 1"), "bad");
    assert_eq!(bad.status.code(), Some(2));
    let range = run_config(tmp.path(), &SMALL_MARKOV.replace("d = 0.3333333333333333", "d = -1"), "range");
    assert_eq!(range.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&range.stderr).contains('d'));
}

#[test]
fn exhausted_search_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_MARKOV
        .replace("d = 0.3333333333333333", "d = 0.01\ncap = 1")
        .replace("L = 12", "L = 30");
    let out = run_config(tmp.path(), &text, "ex");
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("iteration"), "{err}");
}

#[test]
fn report_lists_transition_columns() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_config(tmp.path(), SMALL_MARKOV, "r").status.code(), Some(0));
    let dir = tmp.path().join("r");
    let out = nts(&["report", "--in", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("final Q_0given0 = "), "{summary}");
    assert!(summary.contains("final Q_1given0 = "), "{summary}");
    assert!(dir.join("report_long.csv").exists());
    assert_eq!(fs::read_to_string(dir.join("summary.txt")).unwrap(), summary);
}

#[test]
fn report_on_empty_trace_fails() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("trace.csv"), "").unwrap();
    let out = nts(&["report", "--in", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let missing = tmp.path().join("nothing");
    fs::create_dir(&missing).unwrap();
    assert_eq!(nts(&["report", "--in", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn deterministic_ab_summary_matches_trace() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets/memoryless-ba-check.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("ab");
    let out = nts(&["run", "--config", preset.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 2, "single-row trace");
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|c| *c == "oracle_rate_bits").unwrap();
    let last = lines[1].split(',').nth(col).unwrap();
    let rate: f64 = last.parse().unwrap();
    let h2 = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    assert!((rate - (h2(0.3) - h2(0.1))).abs() < 1e-9);
    let report = nts(&["report", "--in", out_dir.to_str().unwrap()]);
    let summary = String::from_utf8(report.stdout).unwrap();
    assert!(summary.contains(&format!("final oracle rate = {last} bits")), "{summary}");
}

#[test]
fn length_sweep_writes_one_directory_per_length() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(tmp.path(), &SMALL_MARKOV.replace("L = 12", "L = [6, 12]"), "sweep");
    assert_eq!(out.status.code(), Some(0));
    for l in ["L6", "L12"] {
        assert!(tmp.path().join("sweep").join(l).join("trace.csv").exists(), "{l}");
    }
}
