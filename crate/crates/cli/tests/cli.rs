//! CLI surface tests: config round trips, schema rejection, exit codes, and
//! artifact determinism of a scenario run.

use std::path::Path;
use std::process::Command;

use qwalk_cli::config::ScenarioConfig;
use qwalk_cli::scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qwalk"))
}

fn repo_scenario(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn config_round_trip_is_identity() {
    for name in [
        "homogeneous_pr.toml",
        "example_a_one_loop.toml",
        "homogeneous_null_two_loops.toml",
    ] {
        let config = ScenarioConfig::load(&repo_scenario(name)).expect("bundled config loads");
        let text = config.to_toml().expect("serializes");
        let reparsed: ScenarioConfig = toml::from_str(&text).expect("round trip parses");
        assert_eq!(config, reparsed, "{name}");
    }
}

#[test]
fn malformed_loop_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        r#"
name = "bad"
checks = []

[walk]
family = "example_a"

[[loops]]
site = 0
mass = 1.5
take_from = "right"

[truncation]
n = [50]

[horizon]
t = [10]

[initial_state]
kind = "arc"
vertex = 0
direction = "R"

[output]
dir = "bad"
"#,
    )
    .unwrap();
    let status = bin().arg("measure").arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let unknown_field = path.with_file_name("unknown.toml");
    std::fs::write(&unknown_field, "name = \"x\"\nbogus = 1\n").unwrap();
    let status = bin().arg("measure").arg(&unknown_field).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn verify_list_prints_catalog_without_running() {
    let out = bin().args(["verify", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["A1", "A5", "A10", "rw-model", "scenario-cli"] {
        assert!(text.contains(needle), "missing {needle} in:\n{text}");
    }
}

#[test]
fn verify_rejects_unknown_filter() {
    let out = bin().args(["verify", "--filter", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_rerun_is_byte_identical() {
    let config = ScenarioConfig::load(&repo_scenario("homogeneous_null_two_loops.toml")).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = scenario::run_measure_scenario(&config, dir_a.path()).unwrap();
    let out_b = scenario::run_measure_scenario(&config, dir_b.path()).unwrap();
    assert_eq!(out_a.artifacts.len(), out_b.artifacts.len());
    for (a, b) in out_a.artifacts.iter().zip(&out_b.artifacts) {
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        assert_eq!(bytes_a, bytes_b, "{}", a.display());
    }
}

#[test]
fn classify_subcommand_reports_the_class() {
    let out = bin()
        .arg("classify")
        .arg(repo_scenario("example_c.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("positive_recurrent"), "{text}");
}

#[test]
fn every_configured_check_appears_exactly_once_per_grid_point() {
    let config = ScenarioConfig::load(&repo_scenario("example_c.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = scenario::run_measure_scenario(&config, dir.path()).unwrap();
    let points = config.truncation.n.len() * config.horizon.t.len();
    for check in &config.checks {
        let count = outcome
            .records
            .iter()
            .filter(|r| r.name.ends_with(&format!(".{check}")))
            .count();
        assert_eq!(count, points, "check {check}");
    }
    assert_eq!(outcome.records.len(), points * config.checks.len());
}

#[test]
fn measure_csv_has_the_documented_columns() {
    let config = ScenarioConfig::load(&repo_scenario("homogeneous_pr.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = scenario::run_measure_scenario(&config, dir.path()).unwrap();
    let csv = std::fs::read_to_string(&outcome.artifacts[0]).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "vertex,direct_value,spectral_value,hr_part,hs_part,lower_bound,closed_form"
    );
    // Deterministic row order by vertex.
    let first_col: Vec<&str> = csv
        .lines()
        .skip(1)
        .take(5)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(first_col, vec!["0", "1", "2", "3", "4"]);
}
