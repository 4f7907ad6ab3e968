use std::path::Path;
use std::process::{Command, Output};

fn ttsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttsa")).args(args).output().expect("spawn ttsa")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_HHB: &str = r#"
[objective]
N = 4
seed = 7

[schedule.slow]
family = "power_law"
a = 1.0
b = 1.0
rho = 1.0

[schedule.fast]
family = "power_law"
a = 1.0
b = 1.0
rho = 0.6

[run]
K = 10000
seeds = [0]
stochastic = false
"#;

#[test]
fn print_defaults_is_a_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = ttsa(&["print-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[schedule.slow]") && text.contains("[chain]"));
    let cfg = write(dir.path(), "d.toml", &text);
    let o = dir.path().join("o");
    let run = ttsa(&["chain", "--config", &cfg, "--out", o.to_str().unwrap(), "--quiet"]);
    // The default system is hhb_tt, whose chains need an internal box.
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn simulate_row_count_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL_HHB);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        let out = ttsa(&["simulate", "--config", &cfg, "--out", o.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read_to_string(a.join("trajectory_seed0.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let jumps = rows.iter().filter(|r| r.split(',').nth(2) == Some("jump")).count();
    let flows = rows.iter().filter(|r| r.split(',').nth(2) == Some("flow")).count();
    assert_eq!(flows, 10_000);
    assert_eq!(rows.len(), 10_000 + jumps + 1);
    assert_eq!(rows.last().unwrap().split(',').nth(2), Some(""));
    for f in ["trajectory_seed0.csv", "convergence_seed0.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ma: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest_simulate.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&std::fs::read(b.join("manifest_simulate.json")).unwrap()).unwrap();
    assert_eq!(ma["digest"], mb["digest"]);
    assert_eq!(ma["files"].as_object().unwrap().len(), 2);
}

#[test]
fn invalid_schedule_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[schedule.fast]\nfamily = \"power_law\"\na = 1.0\nrho = 0.0\n");
    let out = ttsa(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("schedule.fast.rho") && err.contains("line 4"), "{err}");
}

#[test]
fn diagnose_passes_on_deterministic_runs_and_needs_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL_HHB);
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    let missing = ttsa(&["diagnose", "--config", &cfg, "--out", o]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(ttsa(&["simulate", "--config", &cfg, "--out", o, "--quiet"]).status.success());
    let out = ttsa(&["diagnose", "--config", &cfg, "--out", o]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{table}");
    assert!(table.contains("closeness_fast_T1") && !table.contains("FAIL"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(o).join("report_seed0.json")).unwrap()).unwrap();
    assert!(report["verdicts"]["graph_flow"]["passed"].as_bool().unwrap());
    assert!(Path::new(o).join("closeness_slow_T1_seed0.csv").exists());
    assert!(Path::new(o).join("manifest_diagnose.json").exists());
}

#[test]
fn biased_fixture_fails_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[run]\nK = 20000\nseeds = [0]\nbias = 0.1\n";
    let cfg = write(dir.path(), "b.toml", body);
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    assert!(ttsa(&["simulate", "--config", &cfg, "--out", o, "--quiet"]).status.success());
    let out = ttsa(&["diagnose", "--config", &cfg, "--out", o, "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(o).join("report_seed0.json")).unwrap()).unwrap();
    assert!(!report["verdicts"]["closeness_fast_T1"]["passed"].as_bool().unwrap());
}

#[test]
fn seeds_override_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[system]\nname = \"linear_decay_demo\"\n[run]\nK = 100\n");
    let o = dir.path().join("o");
    let out = ttsa(&["simulate", "--config", &cfg, "--out", o.to_str().unwrap(), "--seeds", "3,4"]);
    assert!(out.status.success());
    assert!(o.join("trajectory_seed3.csv").exists() && o.join("trajectory_seed4.csv").exists());
    assert!(!o.join("trajectory_seed0.csv").exists());
}

#[test]
fn chain_command_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    let chain = |x: &str, y: &str, eps: &str, budget: &str| {
        let body = format!(
            "[system]\nname = \"linear_decay_demo\"\n[chain]\nx = [{x}]\ny = [{y}]\ntau = 1.0\nepsilon = {eps}\nbudget = {budget}\n"
        );
        let cfg = write(dir.path(), "ch.toml", &body);
        ttsa(&["chain", "--config", &cfg, "--out", o])
    };
    let ok = chain("1.0", "0.0", "0.5", "20");
    assert_eq!(ok.status.code(), Some(0));
    let c: serde_json::Value = serde_json::from_slice(&std::fs::read(Path::new(o).join("chain.json")).unwrap()).unwrap();
    assert!(c["legs"].as_array().unwrap().len() <= 3);
    assert_eq!(c["tau"], 1.0);
    let trivial = chain("0.0", "0.0", "0.001", "5");
    assert_eq!(trivial.status.code(), Some(0));
    assert!(String::from_utf8(trivial.stdout).unwrap().contains("1 legs"));
    let infeasible = chain("0.0", "10.0", "0.01", "5");
    assert_eq!(infeasible.status.code(), Some(1));
    assert!(String::from_utf8(infeasible.stdout).unwrap().contains("closest approach"));
    let bad = chain("0.0, 1.0", "0.0", "0.5", "5");
    assert_eq!(bad.status.code(), Some(2));
}
