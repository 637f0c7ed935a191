use annuity_cli::commands::{self, FairAnnuityArgs};
use annuity_cli::config::ScenarioConfig;
use annuity_cli::csv::Table;
use annuity_cli::curves::{self, FIGURES};
use annuity_cli::verify::{self, Status};
use annuity_core::policy::PolicyMode;
use std::path::Path;
use std::process::{Command, Output};

fn annuity(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annuity")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_reports_baseline_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = annuity(&["solve", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let kv = std::fs::read_to_string(dir.path().join("run/summary.kv")).unwrap();
    assert!(kv.lines().any(|l| l == "solvency_floor = -500.0"), "{kv}");
    assert!(kv.lines().any(|l| l == "gamma1 = 1.2"), "{kv}");
    assert!(dir.path().join("run/summary.txt").exists());
}

#[test]
fn invalid_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_alpha = write(dir.path(), "a.cfg", "alpha = 1.2\n");
    let o = annuity(&["solve", "--config", &bad_alpha], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));

    let typo = write(dir.path(), "b.cfg", "# scenario\nr = 0.02\nsigmaa = 0.2\n");
    let o = annuity(&["solve", "--config", &typo], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("sigmaa"), "{}", stderr(&o));

    let garbage = write(dir.path(), "c.cfg", "\u{1}\u{2} not a config\n");
    assert_eq!(annuity(&["verify", "--config", &garbage], dir.path()).status.code(), Some(2));

    let broken_json = write(dir.path(), "d.json", "{\"alpha\": 0.2,");
    assert_eq!(annuity(&["curves", "--config", &broken_json], dir.path()).status.code(), Some(2));

    assert_eq!(annuity(&["solve", "--mode", "sideways"], dir.path()).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // No finite retirement boundary at r = 0.05.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.cfg", "r = 0.05\n");
    let o = annuity(&["solve", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn fair_annuity_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = annuity(&["fair-annuity", "--constant-delta", "0.02", "--beta", "0.03", "--ages", "60"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    let rate: f64 = out.lines().nth(1).unwrap().split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((rate - 0.05).abs() < 1e-8, "{out}");
    assert_eq!(annuity(&["fair-annuity", "--beta", "0"], dir.path()).status.code(), Some(2));

    let ages: Vec<f64> = (60..=90).map(f64::from).collect();
    let rows = commands::fair_annuity(&FairAnnuityArgs { beta: 0.03, modal_age: 85.0, dispersion: 10.0, constant_delta: None, ages }).unwrap();
    assert!(rows.windows(2).all(|w| w[1].2 > w[0].2));
}

#[test]
fn curves_round_trip_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig { output_dir: dir.path().join("a").display().to_string(), wealth_points: 301, ..Default::default() };
    let results = commands::curves(&cfg).unwrap();
    assert!(results.iter().all(|(_, e)| e.is_none()), "{results:?}");
    let again = ScenarioConfig { output_dir: dir.path().join("b").display().to_string(), ..cfg.clone() };
    commands::curves(&again).unwrap();
    for ((name, table), _) in curves::all_figures(&cfg, PolicyMode::Foc).into_iter().zip(FIGURES) {
        let table = table.unwrap();
        let a = std::fs::read_to_string(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read_to_string(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
        assert!(Table::parse(&a).unwrap().bit_identical(&table), "{name} does not round-trip");
    }
}

#[test]
fn figure_contents() {
    let cfg = ScenarioConfig { wealth_points: 2001, ..Default::default() };
    let fig2 = curves::fig2(&cfg).unwrap();
    assert!(fig2.rows[0][1..].iter().all(|&s| s == 1.0));

    let sols = curves::eval_solutions(&cfg).unwrap();
    let [c, b, _] = curves::policy_figures(&cfg, &sols, PolicyMode::Foc).unwrap();
    let s60 = &sols[0];
    let corner_rows: Vec<&Vec<f64>> = b.rows.iter().filter(|r| r[0] >= s60.x_tilde && r[0] < s60.x_star).collect();
    assert!(!corner_rows.is_empty());
    assert!(corner_rows.iter().all(|r| r[1] == 1.0));

    // Within one age consumption is continuous at x*: the largest working
    // consumption equals c at x* up to the grid step.
    let s65 = &sols[1];
    let col = c.column("c_age65").unwrap();
    let xs = c.column("x").unwrap();
    let below = xs.iter().zip(&col).filter(|(x, _)| **x < s65.x_star).map(|(_, c)| *c).fold(0.0, f64::max);
    let at = xs.iter().zip(&col).find(|(x, _)| **x >= s65.x_star).map(|(_, c)| *c).unwrap();
    assert!(at > below && (at - below) / below < 1e-2, "below {below} at {at}");
}

#[test]
fn toggles_mark_skipped() {
    let cfg = ScenarioConfig { oracle: false, simulate: false, ..Default::default() };
    let report = verify::run_core(&cfg).unwrap();
    assert_eq!(report.get("6").unwrap().status, Status::Skipped);
    assert_eq!(report.get("7").unwrap().status, Status::Skipped);
    assert_eq!(report.get("5").unwrap().status, Status::Pass);
    let json: serde_json::Value = serde_json::from_str(&report.render_json()).unwrap();
    assert_eq!(json["criteria"][5]["status"], "skipped");
}

#[test]
fn simulate_writes_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig {
        output_dir: dir.path().display().to_string(),
        n_paths: 200,
        horizon: 2.0,
        record_paths: 3,
        ..Default::default()
    };
    let summary = commands::simulate(&cfg, false).unwrap();
    assert!(summary.contains("j_estimate"));
    let t = Table::parse(&std::fs::read_to_string(dir.path().join("sim_paths.csv")).unwrap()).unwrap();
    assert_eq!(t.column("path").unwrap().iter().fold(0.0, |a: f64, &b| a.max(b)), 2.0);
}
