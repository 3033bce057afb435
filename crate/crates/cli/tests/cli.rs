use std::path::Path;
use std::process::{Command, Output};

const SPEC: &str = r#"
problems = ["partial-rastrigin-d20-s1"]
runs = 3
NP = 20
max_FEs = 3000

[[arm]]
name = "mses"

[[arm]]
name = "single"
mode = "single"
"#;

fn mses(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mses"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn csvs_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                found.push(p);
            }
        }
    }
    found.sort();
    found
}

#[test]
fn run_compare_plot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.toml"), SPEC).unwrap();

    let out = mses(&["run", "spec.toml", "--out-dir", "a", "--workers", "2"], tmp.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("partial-rastrigin-d20-s1"));
    let files = csvs_under(&tmp.path().join("a"));
    // 3 runs x 2 arms + summary
    assert_eq!(files.len(), 7);
    assert!(tmp.path().join("a/summary.csv").is_file());

    let again = mses(&["run", "spec.toml", "--out-dir", "b", "--workers", "1"], tmp.path());
    assert!(again.status.success());
    for f in &files {
        let twin = tmp.path().join("b").join(f.strip_prefix(tmp.path().join("a")).unwrap());
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(&twin).unwrap(), "{}", f.display());
    }

    let cmp = mses(&["compare", "a/mses", "a/single", "--out", "cmp.csv"], tmp.path());
    assert!(cmp.status.success(), "{}", text(&cmp.stderr));
    assert!(text(&cmp.stdout).contains("mses vs single"));
    assert!(tmp.path().join("cmp.csv").is_file());

    let plot = mses(&["plot", "a", "--out", "fig/curves.svg"], tmp.path());
    assert!(plot.status.success(), "{}", text(&plot.stderr));
    let svg = std::fs::read_to_string(tmp.path().join("fig/curves.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(tmp.path().join("fig/curves.csv").is_file());
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.toml"), SPEC).unwrap();
    assert!(mses(&["run", "spec.toml", "--out-dir", "x"], tmp.path()).status.success());
    assert!(mses(&["run", "spec.toml", "--out-dir", "y", "--seed", "7"], tmp.path())
        .status
        .success());
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("mses/partial-rastrigin-d20-s1/run-000.csv")).unwrap();
    assert_ne!(read("x"), read("y"));
}

#[test]
fn unknown_key_fails_with_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("spec.toml"),
        "problems = [\"partial-rastrigin-d20-s1\"]\ngt_interval = 3\n",
    )
    .unwrap();
    let out = mses(&["run", "spec.toml"], tmp.path());
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("spec.toml:2"), "{err}");
    assert!(err.contains("G_t"), "{err}");
}

#[test]
fn invalid_sweep_value_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.toml"), SPEC).unwrap();
    let out = mses(
        &["sweep", "spec.toml", "--param", "d_s", "--values", "5,20", "--out-dir", "s"],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("d_s"));
    assert!(!tmp.path().join("s").exists());
}

#[test]
fn sweep_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.toml"), SPEC.replace("runs = 3", "runs = 2")).unwrap();
    let out = mses(
        &["sweep", "spec.toml", "--param", "Q", "--values", "0.1np,0.2np", "--out-dir", "s"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("s/sweep-Q.csv")).unwrap();
    // header, two values, one baseline row
    assert_eq!(table.lines().count(), 4);
    let normalized = std::fs::read_to_string(tmp.path().join("s/sweep-Q-normalized.csv")).unwrap();
    assert!(normalized.contains("1.0000000000000000e0"));
}

#[test]
fn missing_inputs_fail() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!mses(&["run", "nope.toml"], tmp.path()).status.success());
    assert!(!mses(&["compare", "a", "b"], tmp.path()).status.success());
    assert!(!mses(&["plot", ".", "--out", "p.svg"], tmp.path()).status.success());
    assert!(!mses(&["sweep", "x.toml", "--param", "NP", "--values", "1"], tmp.path())
        .status
        .success());
}
