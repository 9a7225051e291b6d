use std::path::Path;
use std::process::{Command, Output};

use brdm_cli::parse_config;

fn brdm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brdm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str = "\
# quick sweep
episodes = 120
replicates = 2
total_steps = 20, 40
selection_steps = 5
betas = 0, 1, 10, 100
";

#[test]
fn baseline_writes_sorted_frontier() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "betas = 100, 0, 10\n").unwrap();
    let out = brdm(dir.path(), &["baseline", "--config", "c.cfg", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("o/frontier.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "beta,mi_bits,expected_utility");
    assert!(lines[1].starts_with("0,0,"));
    assert!(lines[2].starts_with("10,"));
    assert!(lines[3].starts_with("100,"));
    assert!(text.ends_with('\n'));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "betas = 0, 5\n").unwrap();
    let args = ["baseline", "--config", "c.cfg", "--out", "o"];
    assert_eq!(code(&brdm(dir.path(), &args)), 0);
    let again = brdm(dir.path(), &args);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&brdm(dir.path(), &forced)), 0);
}

#[test]
fn config_and_usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "seed = 1\nwidht = 0.1\n").unwrap();
    let out = brdm(dir.path(), &["run", "--config", "bad.cfg"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("widht"), "{err}");

    std::fs::write(
        dir.path().join("c.cfg"),
        "selection_steps = 120\ntotal_steps = 100\n",
    )
    .unwrap();
    let out = brdm(dir.path(), &["run", "--config", "c.cfg"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("`selection_steps`") && err.contains("`total_steps`"),
        "{err}"
    );

    assert_eq!(code(&brdm(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&brdm(dir.path(), &["run", "--workers", "lots"])), 1);
    assert_eq!(code(&brdm(dir.path(), &["--help"])), 0);
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = brdm(dir.path(), &["baseline", "--config", "nope.cfg"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn run_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), SMALL).unwrap();
    let run = brdm(
        dir.path(),
        &["run", "--config", "c.cfg", "--out", "o", "--workers", "2"],
    );
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let base = brdm(dir.path(), &["baseline", "--config", "c.cfg", "--out", "o"]);
    assert_eq!(code(&base), 0);

    let summary = std::fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    // single: 2 budgets x 2 replicates, multi: the same.
    assert_eq!(summary.lines().count(), 1 + 8);
    for stem in ["single_t20_a20_r0", "multi_t40_a35_r1"] {
        let log =
            std::fs::read_to_string(dir.path().join(format!("o/episodes/{stem}.csv"))).unwrap();
        assert_eq!(log.lines().count(), 121);
    }

    let plot = brdm(dir.path(), &["plot", "--out", "o"]);
    assert_eq!(code(&plot), 0, "{}", String::from_utf8_lossy(&plot.stderr));
    let script = std::fs::read_to_string(dir.path().join("o/plot.py")).unwrap();
    assert_eq!(script.matches("    (\"single\",").count(), 4);
    assert_eq!(script.matches("    (\"multi\",").count(), 4);
}

#[test]
fn malformed_summary_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    std::fs::create_dir(&o).unwrap();
    std::fs::write(
        o.join("frontier.csv"),
        "beta,mi_bits,expected_utility\n0,0,0.1\n",
    )
    .unwrap();
    std::fs::write(
        o.join("summary.csv"),
        "agent_kind,total_steps,action_steps,replicate,mi_bits,expected_utility,mean_delta_u,stddev_delta_u\nsingle,10,10,0,1,0.5,0.1,0.1\nsingle,10,ten,0,1,0.5,0.1,0.1\n",
    )
    .unwrap();
    let out = brdm(dir.path(), &["plot", "--out", "o"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("summary.csv:3"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.cfg"),
        "episodes = 40\nreplicates = 1\nagents = single\ntotal_steps = 10\nseed = 3\n",
    )
    .unwrap();
    let read = |o: &str| std::fs::read(dir.path().join(o).join("summary.csv")).unwrap();
    let run = |o: &str, extra: &[&str]| {
        let mut args = vec!["run", "--config", "c.cfg", "--out", o];
        args.extend_from_slice(extra);
        assert_eq!(code(&brdm(dir.path(), &args)), 0);
    };
    run("a", &[]);
    run("b", &["--seed", "3"]);
    run("c", &["--seed", "4"]);
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn bundled_sweep_config_parses() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/sweep.cfg"
    ))
    .expect("example config present");
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.total_steps, vec![25, 50, 100]);
}
