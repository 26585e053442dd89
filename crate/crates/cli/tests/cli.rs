use std::path::Path;
use std::process::{Command, Output};

fn carplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carplan"))
        .args(args)
        .env_remove("CARPLAN_CONFIG")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, count: &str, goals: &str) {
    let out = carplan(&[
        "generate", "--map", "40x40:4", "-n", "5", "--count", count, "--goals", goals, "--seed", "3", "-o", s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_then_validate_own_output() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc, "1", "1");
    let scenario = sc.join("inst000.json");
    for algo in ["pbcr-v2", "eccr"] {
        let traj = tmp.path().join(format!("{algo}.csv"));
        let out = carplan(&["solve", s(&scenario), "--algo", algo, "-o", s(&traj)]);
        assert_eq!(out.status.code(), Some(0), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let v = carplan(&["validate", s(&scenario), s(&traj)]);
        assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    }
}

#[test]
fn clcbs_is_eccr_with_unit_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc, "1", "1");
    let scenario = sc.join("inst000.json");
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    assert!(carplan(&["solve", s(&scenario), "--algo", "clcbs", "-o", s(&a)]).status.success());
    assert!(carplan(&["solve", s(&scenario), "--algo", "eccr", "--subopt", "1.0", "-o", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn tampered_trajectory_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc, "1", "1");
    let scenario = sc.join("inst000.json");
    let traj = tmp.path().join("t.csv");
    assert!(carplan(&["solve", s(&scenario), "-o", s(&traj)]).status.success());
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.iter().position(|l| l.contains(",FS,") || l.contains(",GM,")).unwrap();
    let mut cols: Vec<String> = lines[row].split(',').map(String::from).collect();
    cols[2] = (cols[2].parse::<f64>().unwrap() + 0.5).to_string();
    lines[row] = cols.join(",");
    std::fs::write(&traj, lines.join("\n") + "\n").unwrap();
    let v = carplan(&["validate", s(&scenario), s(&traj)]);
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn invalid_input_and_timeout_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"map\": 3}").unwrap();
    assert_eq!(carplan(&["solve", s(&bad)]).status.code(), Some(2));
    assert_eq!(carplan(&["solve", s(&tmp.path().join("missing.json"))]).status.code(), Some(2));
    assert_eq!(carplan(&["solve", s(&bad), "--algo", "astar"]).status.code(), Some(2));

    let sc = tmp.path().join("sc");
    generate(&sc, "1", "1");
    let out = carplan(&["solve", s(&sc.join("inst000.json")), "--algo", "eccr", "--time-limit", "1e-9"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn pbcr_step_cap_is_a_planner_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc, "1", "1");
    let out = carplan(&["solve", s(&sc.join("inst000.json")), "--max-steps", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_rows_and_summary_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc, "3", "1");
    let run = || {
        let out = carplan(&["bench", s(&sc), "--algo", "pbcr-v2,pbcr-v1", "--no-runtime", "-j", "2"]);
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "instance,algo,n,success,runtime_s,makespan,makespan_steps,flowtime,arrival_fraction,throughput,hl_exp,ll_exp"
    );
    assert_eq!(lines.len(), 1 + 6 + 2);
    assert!(lines[7].starts_with("summary,pbcr-v2,3,"));
    assert!(lines[8].starts_with("summary,pbcr-v1,3,"));
}

#[test]
fn lifelong_render_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc, "1", "4");
    let scenario = sc.join("inst000.json");
    let traj = tmp.path().join("l.csv");
    let out = carplan(&["lifelong", s(&scenario), "--algo", "pbcr-v1", "--max-steps", "60", "-o", s(&traj)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = String::from_utf8(out.stdout).unwrap();
    assert!(metrics.contains("\"throughput\""));
    let v = carplan(&["validate", "--no-goals", s(&scenario), s(&traj)]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));

    let svg = tmp.path().join("l.svg");
    assert!(carplan(&["render", s(&scenario), s(&traj), "-o", s(&svg)]).status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.matches("<polyline").count() == 5);

    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[run]\nmax_steps = 7\n").unwrap();
    let shown = Command::new(env!("CARGO_BIN_EXE_carplan"))
        .args(["config"])
        .env("CARPLAN_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(String::from_utf8(shown.stdout).unwrap().contains("max_steps = 7"));
}
