use std::collections::BTreeMap;

use proptest::prelude::*;
use zigp_core::validation::{
    brier_score, brier_team, rank_probability_score, rps_team, score_forecasts, RealizedResults, StageForecast,
};
use zigp_core::match_model::ModelTag;

fn forecast_strategy() -> impl Strategy<Value = StageForecast> {
    prop::array::uniform6(0.001f64..1.0).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        raw.map(|x| x / s)
    })
}

/// Textbook RPS from explicit cumulative sums.
fn rps_oracle(p: &StageForecast, category: u8) -> f64 {
    let mut total = 0.0;
    for i in 0..5 {
        let cp: f64 = p[..=i].iter().sum();
        let co = if usize::from(category) <= i + 1 { 1.0 } else { 0.0 };
        total += (cp - co) * (cp - co);
    }
    total / 5.0
}

fn realized(cats: &[(&str, u8)]) -> RealizedResults {
    RealizedResults::new(cats.iter().map(|(t, c)| (t.to_string(), *c)).collect()).unwrap()
}

#[test]
fn perfect_and_uniform_forecasts() {
    let r = realized(&[("A", 1), ("B", 2), ("C", 6)]);
    let mut perfect = BTreeMap::new();
    let mut uniform = BTreeMap::new();
    for (t, c) in &r.categories {
        let mut p = [0.0; 6];
        p[usize::from(*c) - 1] = 1.0;
        perfect.insert(t.clone(), p);
        uniform.insert(t.clone(), [1.0 / 6.0; 6]);
    }
    assert_eq!(brier_score(&perfect, &r).unwrap(), 0.0);
    assert_eq!(rank_probability_score(&perfect, &r).unwrap(), 0.0);
    assert!((brier_score(&uniform, &r).unwrap() - 3.0 * 5.0 / 6.0).abs() < 1e-14);
}

#[test]
fn upset_scores() {
    // all mass on champion, team went out in the group stage
    let p = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(brier_team(&p, 6), 2.0);
    assert_eq!(rps_team(&p, 6), 1.0);
}

#[test]
fn team_sets_must_match() {
    let r = realized(&[("A", 1), ("B", 2)]);
    let mut f = BTreeMap::new();
    f.insert("A".to_string(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(brier_score(&f, &r).is_err());
    f.insert("B".to_string(), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    f.insert("C".to_string(), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(rank_probability_score(&f, &r).is_err());
}

#[test]
fn rejects_non_probability_forecast() {
    let r = realized(&[("A", 1)]);
    let mut f = BTreeMap::new();
    f.insert("A".to_string(), [0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(brier_score(&f, &r).is_err());
}

#[test]
fn realized_csv_parsing() {
    let r = RealizedResults::from_reader("team,category\nA,1\nB , 6\n".as_bytes()).unwrap();
    assert_eq!(r.categories["B"], 6);
    assert!(RealizedResults::from_reader("team,category\nA,7\n".as_bytes()).is_err());
    assert!(RealizedResults::from_reader("team,category\nA,1\nA,2\n".as_bytes()).is_err());
}

#[test]
fn comparison_table_csv_layout() {
    let r = realized(&[("A", 1), ("B", 2)]);
    let mut f = BTreeMap::new();
    f.insert("A".to_string(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    f.insert("B".to_string(), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let table = score_forecasts("t", 1, 1, &[(ModelTag::NestedZigp, f.clone()), (ModelTag::IndependentPoisson, f)], &r)
        .unwrap();
    assert_eq!(
        table.to_csv(),
        "score,nested_zigp,independent_poisson\nbrier,0.000000,0.000000\nrps,0.000000,0.000000\n"
    );
}

proptest! {
    #[test]
    fn scores_are_bounded(p in forecast_strategy(), c in 1u8..=6) {
        let b = brier_team(&p, c);
        let r = rps_team(&p, c);
        prop_assert!(b >= 0.0 && b <= 2.0 + 1e-12);
        prop_assert!(r >= 0.0 && r <= 1.0 + 1e-12);
        prop_assert!(r <= b + 1e-12);
    }

    #[test]
    fn rps_matches_cumulative_oracle(p in forecast_strategy(), c in 1u8..=6) {
        prop_assert!((rps_team(&p, c) - rps_oracle(&p, c)).abs() < 1e-12);
    }

    #[test]
    fn totals_ignore_team_order(ps in prop::collection::vec((forecast_strategy(), 1u8..=6), 1..12)) {
        let names: Vec<String> = (0..ps.len()).map(|i| format!("T{i:02}")).collect();
        let cats: BTreeMap<String, u8> = names.iter().cloned().zip(ps.iter().map(|x| x.1)).collect();
        let r = RealizedResults::new(cats).unwrap();
        let f: BTreeMap<String, StageForecast> = names.iter().cloned().zip(ps.iter().map(|x| x.0)).collect();
        let direct: f64 = ps.iter().map(|(p, c)| brier_team(p, *c)).rev().sum();
        prop_assert!((brier_score(&f, &r).unwrap() - direct).abs() < 1e-9);
        let direct_rps: f64 = ps.iter().map(|(p, c)| rps_team(p, *c)).rev().sum();
        prop_assert!((rank_probability_score(&f, &r).unwrap() - direct_rps).abs() < 1e-9);
    }
}
