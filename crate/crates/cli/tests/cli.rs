use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sliceplace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sliceplace")).args(args).env_remove("SLICEPLACE_THREADS").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = sliceplace(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_and_solve() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    ok(&["generate", "--slices", "4", "--seed", "3", "--out", p(&sc)]);
    for alg in ["exact", "cost-aware", "performance-aware", "load-balance", "random"] {
        let a = dir.path().join(format!("{alg}-a.csv"));
        let b = dir.path().join(format!("{alg}-b.csv"));
        ok(&["solve", "--algorithm", alg, "--scenario", p(&sc), "--out", p(&a)]);
        ok(&["solve", "--algorithm", alg, "--scenario", p(&sc), "--out", p(&b)]);
        let text = fs::read_to_string(&a).unwrap();
        assert_eq!(text, fs::read_to_string(&b).unwrap());
        assert_eq!(text.lines().count(), 1 + 4 * 7);
        assert!(text.starts_with("slice_id,slice_type,vnf,infrastructure,tier"));
    }
    let out = sliceplace(&["solve", "--algorithm", "quantum", "--scenario", p(&sc)]);
    assert!(!out.status.success());
}

#[test]
fn train_then_solve_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    ok(&["generate", "--slices", "5", "--seed", "8", "--out", p(&sc)]);
    let mut placements = Vec::new();
    for run in ["a", "b"] {
        let ck = dir.path().join(run);
        ok(&["train", "--agent", "all", "--episodes", "40", "--seed", "5", "--max-queue", "3", "--out", p(&ck)]);
        for alg in ["marl", "mono"] {
            let out = ck.join(format!("{alg}.csv"));
            ok(&["solve", "--algorithm", alg, "--checkpoints", p(&ck), "--scenario", p(&sc), "--out", p(&out)]);
            placements.push(fs::read(out).unwrap());
        }
    }
    assert_eq!(placements[0], placements[2]);
    assert_eq!(placements[1], placements[3]);
    for name in ["embb", "urllc", "mmtc", "monolithic"] {
        for ext in ["qnet", "toml"] {
            let f = format!("{name}.{ext}");
            assert_eq!(fs::read(dir.path().join("a").join(&f)).unwrap(), fs::read(dir.path().join("b").join(&f)).unwrap(), "{f}");
        }
        let curve = format!("{name}-training.csv");
        assert_eq!(fs::read(dir.path().join("a").join(&curve)).unwrap(), fs::read(dir.path().join("b").join(&curve)).unwrap());
    }
}

#[test]
fn solve_learned_without_checkpoints_fails() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    ok(&["generate", "--slices", "2", "--out", p(&sc)]);
    let out = sliceplace(&["solve", "--algorithm", "marl", "--checkpoints", p(dir.path()), "--scenario", p(&sc)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing checkpoint"));
}

#[test]
fn evaluate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "algorithms = [\"exact\", \"cost-aware\"]\nslice_counts = [3, 5]\ntrials = 3\nseed = 2\n").unwrap();
    let out = dir.path().join("out");
    ok(&["evaluate", "--spec", p(&spec), "--out", p(&out)]);
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("speed-up over exact"));

    fs::write(&spec, "algorithms = [\"exact\", \"marl\"]\ntrials = 1\n").unwrap();
    let missing = sliceplace(&["evaluate", "--spec", p(&spec), "--checkpoints", p(dir.path()), "--out", p(&out)]);
    assert!(!missing.status.success());
}

#[test]
fn profile_and_lookup() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let mut text = String::from("timestamp_us,direction,size_bytes,flow_id\n");
    for i in 0..300 {
        text.push_str(&format!("{},downlink,1200,ue1\n", i * 10_000));
    }
    fs::write(&trace, text).unwrap();
    let out = dir.path().join("profile.csv");
    let stdout = ok(&["profile", "--trace", p(&trace), "--window", "1.0", "--out", p(&out)]).stdout;
    let stdout = String::from_utf8(stdout).unwrap();
    assert!(stdout.contains("inter-arrival mean 10000.000 us, stddev 0.000 us"), "{stdout}");
    let rates = fs::read_to_string(out).unwrap();
    assert!(rates.lines().nth(1).unwrap().starts_with("0,100,120000,100,960000"));

    let hit = String::from_utf8(ok(&["lookup", "--slice-type", "embb", "--vnf", "UPF", "--users", "200"]).stdout).unwrap();
    assert!(hit.starts_with("cpu 41.48%"), "{hit}");
    let exported = dir.path().join("table.csv");
    ok(&["lookup", "--export", p(&exported)]);
    let again = String::from_utf8(ok(&["lookup", "--table", p(&exported)]).stdout).unwrap();
    assert_eq!(again, fs::read_to_string(&exported).unwrap());
}
