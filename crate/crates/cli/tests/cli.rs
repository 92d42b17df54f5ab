use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use zigp_core::match_data::Competition;
use zigp_core::tournament::run_rng;
use zigp_core::validation::synthetic::{synthetic_history, synthetic_world, SyntheticDesign};

fn zigp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zigp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture_models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/france_denmark.json")
}

fn tournament_name(c: Competition) -> &'static str {
    match c {
        Competition::WorldCup => "FIFA World Cup",
        Competition::ContinentalFinal => "UEFA Euro",
        Competition::QualifierOrNationsLeague => "UEFA Nations League",
        Competition::FriendlyOrOther => "Friendly",
    }
}

/// Two groups of four synthetic teams with a results file, ratings,
/// participants and a tournament config in a temp dir.
struct World {
    dir: TempDir,
}

impl World {
    fn new() -> Self {
        let d = SyntheticDesign {
            n_groups: 2,
            matches_per_team: 60,
            ..SyntheticDesign::default()
        };
        let w = synthetic_world(&d);
        let history = synthetic_history(&w, &d, &mut run_rng(11, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let mut csv = String::from("date,home_team,away_team,home_score,away_score,tournament,neutral,home_elo,away_elo\n");
        for r in &history {
            use zigp_core::match_data::Location;
            let (home, away, gh, ga, eh, ea) = match r.location {
                Location::HomeB => (&r.team_b, &r.team_a, r.goals_b, r.goals_a, r.elo_b, r.elo_a),
                _ => (&r.team_a, &r.team_b, r.goals_a, r.goals_b, r.elo_a, r.elo_b),
            };
            csv.push_str(&format!(
                "{},{home},{away},{gh},{ga},{},{},{eh},{ea}\n",
                r.date,
                tournament_name(r.competition),
                r.location == Location::Neutral
            ));
        }
        std::fs::write(dir.path().join("results.csv"), csv).unwrap();

        let mut ratings = String::from("team,elo\n");
        let mut teams: Vec<_> = w.elo.ratings().iter().collect();
        teams.sort_by(|a, b| a.0.cmp(b.0));
        for (t, e) in &teams {
            ratings.push_str(&format!("{t},{e}\n"));
        }
        std::fs::write(dir.path().join("ratings.csv"), ratings).unwrap();

        let participants: Vec<&str> = teams.iter().map(|(t, _)| t.as_str()).collect();
        std::fs::write(dir.path().join("participants.txt"), participants.join("\n")).unwrap();

        let mut conf = String::from("name = mini\nn_runs = 200\nseed = 5\n");
        for (g, members) in &w.config.groups {
            conf.push_str(&format!("group.{g} = {}\n", members.join(", ")));
        }
        conf.push_str("bracket = A1 B2 B1 A2\n");
        std::fs::write(dir.path().join("tournament.conf"), conf).unwrap();

        std::fs::write(
            dir.path().join("run.conf"),
            "matches = results.csv\nratings = ratings.csv\nparticipants = participants.txt\n\
             tournament = tournament.conf\nreference_date = 2022-11-20\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }
}

#[test]
fn predict_match_reproduces_worked_example() {
    let out = tempfile::tempdir().unwrap();
    let o = zigp(&[
        "predict-match",
        "--models",
        fixture_models().to_str().unwrap(),
        "--team-a",
        "France",
        "--team-b",
        "Denmark",
        "--elo-a",
        "2005",
        "--elo-b",
        "1971",
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("outcome.json")).unwrap()).unwrap();
    assert_eq!(v["stronger"]["team"], "France");
    let mean = v["stronger"]["mean"].as_f64().unwrap();
    assert!((mean - 1.27585).abs() < 5e-6, "{mean}");
    assert!((v["total_probability"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    let sum = v["win_a"].as_f64().unwrap() + v["draw"].as_f64().unwrap() + v["win_b"].as_f64().unwrap();
    assert!((sum - 1.0).abs() < 1e-6);

    let matrix = std::fs::read_to_string(out.path().join("score_matrix.csv")).unwrap();
    assert!(matrix.starts_with("# config_hash="));
    assert!(matrix.lines().nth(1).unwrap().starts_with("goals_a,0,1"));
}

#[test]
fn predict_match_self_match_is_symmetric() {
    let out = tempfile::tempdir().unwrap();
    let o = zigp(&[
        "predict-match",
        "--models",
        fixture_models().to_str().unwrap(),
        "--team-a",
        "France",
        "--team-b",
        "France",
        "--elo-a",
        "2005",
        "--elo-b",
        "2005",
        "--model",
        "ip",
        "--format",
        "json",
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("score_matrix.json")).unwrap()).unwrap();
    let joint: Vec<Vec<f64>> = serde_json::from_value(v["joint"].clone()).unwrap();
    let total: f64 = joint.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-6);
    for i in 0..joint.len() {
        for j in 0..joint.len() {
            assert!((joint[i][j] - joint[j][i]).abs() < 1e-12);
        }
    }
}

#[test]
fn unknown_team_and_bad_flags_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let models = fixture_models();
    let base = [
        "predict-match",
        "--models",
        models.to_str().unwrap(),
        "--elo-a",
        "2000",
        "--elo-b",
        "1900",
        "--out-dir",
        out.path().to_str().unwrap(),
    ];
    let mut args = base.to_vec();
    args.extend(["--team-a", "France", "--team-b", "Atlantis"]);
    assert_eq!(zigp(&args).status.code(), Some(3));

    let mut args = base.to_vec();
    args.extend(["--team-a", "France", "--team-b", "Denmark", "--model", "poisson"]);
    assert_eq!(zigp(&args).status.code(), Some(1));

    let mut args = base.to_vec();
    args.extend(["--team-a", "France", "--team-b", "Denmark", "--location", "moon"]);
    assert_eq!(zigp(&args).status.code(), Some(1));

    let o = zigp(&["simulate", "--models", "/nonexistent/models.json", "--out-dir", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn fit_rejects_empty_participants_before_writing() {
    let w = World::new();
    std::fs::write(w.path("empty.txt"), "# nobody\n").unwrap();
    let out = w.path("out");
    let o = zigp(&["fit", "--config", &w.path("run.conf"), "--participants", &w.path("empty.txt"), "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no teams"), "{}", stderr(&o));
    assert!(!Path::new(&out).exists());
}

#[test]
fn fit_is_deterministic_and_feeds_simulate() {
    let w = World::new();
    let (a, b) = (w.path("a"), w.path("b"));
    for dir in [&a, &b] {
        let o = zigp(&["fit", "--config", &w.path("run.conf"), "--out-dir", dir]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["models.json", "fit_report.csv"] {
        let x = std::fs::read(Path::new(&a).join(file)).unwrap();
        let y = std::fs::read(Path::new(&b).join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
    let report = std::fs::read_to_string(Path::new(&a).join("fit_report.csv")).unwrap();
    assert!(report.starts_with("# config_hash="));
    assert_eq!(report.lines().count(), 2 + 8 * 3);

    let models = Path::new(&a).join("models.json");
    let sim = w.path("sim");
    let o = zigp(&[
        "simulate",
        "--config",
        &w.path("run.conf"),
        "--models",
        models.to_str().unwrap(),
        "--n-runs",
        "10",
        "--out-dir",
        &sim,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stages = std::fs::read_to_string(Path::new(&sim).join("stage_probabilities.csv")).unwrap();
    assert!(stages.starts_with("# config_hash="));
    assert!(stages.lines().next().unwrap().contains("seed=5"));
    assert_eq!(stages.lines().count(), 2 + 8);
    assert!(Path::new(&sim).join("group_probabilities.csv").exists());
}

#[test]
fn validate_scores_all_three_families() {
    let w = World::new();
    // realized: T08 champion, T05 runner-up, T07 and T06 semifinal losers
    let realized = "team,category\nT08,1\nT05,2\nT07,3\nT06,3\nT01,6\nT02,6\nT03,6\nT04,6\n";
    std::fs::write(w.path("realized.csv"), realized).unwrap();
    let out = w.path("val");
    let o = zigp(&[
        "validate",
        "--config",
        &w.path("run.conf"),
        "--realized",
        &w.path("realized.csv"),
        "--n-runs",
        "50",
        "--out-dir",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(Path::new(&out).join("comparison.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert_eq!(lines[1], "score,nested_zigp,bivariate_poisson,independent_poisson");
    assert!(lines[2].starts_with("brier,"));
    assert!(lines[3].starts_with("rps,"));

    let missing = zigp(&["validate", "--config", &w.path("run.conf"), "--realized", &w.path("nope.csv"), "--out-dir", &out]);
    assert_eq!(missing.status.code(), Some(1));

    std::fs::write(w.path("bad.csv"), "team,category\nT08,1\n").unwrap();
    let bad = zigp(&["validate", "--config", &w.path("run.conf"), "--realized", &w.path("bad.csv"), "--out-dir", &out]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "colour = red\n").unwrap();
    let o = zigp(&["simulate", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = zigp(&["simulate", "--models", fixture_models().to_str().unwrap(), "--n-runs", "0"]);
    assert_eq!(o.status.code(), Some(1));
}
