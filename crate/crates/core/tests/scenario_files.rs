use std::fs;
use std::path::PathBuf;

use holeguard::adversary::AttackKind;
use holeguard::error::ScenarioError;
use holeguard::merkle::NodeId;
use holeguard::scenario::{parse_scenario, Overrides, Placement};

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_shipped_scenario_parses() {
    let mut names: Vec<String> = fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let c = parse_scenario(&p).unwrap();
            assert_eq!(c.node_count, 10);
            assert_eq!(c.duration, 600.0);
            assert!(matches!(c.placement, Placement::Fixed(ref v) if v.len() == 10));
            assert_eq!(c.defense.enabled, c.name.ends_with("-on"), "{}", c.name);
            c.name
        })
        .collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for family in ["baseline", "single-internal", "single-external", "cooperative-2", "gray-0.5"] {
        for d in ["on", "off"] {
            assert!(names.contains(&format!("{family}-defense-{d}")), "missing {family}-defense-{d}");
        }
    }
}

#[test]
fn attack_profiles_match_their_names() {
    let load = |n: &str| parse_scenario(&scenarios_dir().join(format!("{n}.toml"))).unwrap();
    assert!(load("baseline-defense-off").attackers.is_empty());
    assert_eq!(load("single-internal-defense-on").attackers[&NodeId(8)].kind, AttackKind::InternalBlackHole);
    let coop = load("cooperative-2-defense-on");
    assert_eq!(coop.attackers.len(), 2);
    assert!(coop.attackers.values().all(|p| p.colluders.len() == 2));
    let gray = load("gray-0.5-defense-on");
    assert_eq!(gray.attackers[&NodeId(8)].gray_drop_fraction, 0.5);
}

#[test]
fn name_defaults_to_file_stem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.toml");
    fs::write(&path, "[[flows]]\nsource = 0\ndestination = 1\n").unwrap();
    assert_eq!(parse_scenario(&path).unwrap().name, "tiny");
}

#[test]
fn missing_file_is_a_read_error() {
    let err = parse_scenario(&scenarios_dir().join("no-such-scenario.toml")).unwrap_err();
    assert!(matches!(err, ScenarioError::Read { .. }));
}

#[test]
fn bad_files_give_descriptive_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[[flows]]\nsource = 0\n", "missing its destination"),
        ("nodes = 3\n[[flows]]\nsource = 0\ndestination = 7\n", "refers to node 7"),
        ("duration = -1\n[[flows]]\nsource = 0\ndestination = 1\n", "duration must be positive"),
        ("positions = [[0, 0], [10, 2000]]\n[[flows]]\nsource = 0\ndestination = 1\n", "outside"),
        ("speed = 3\n[[flows]]\nsource = 0\ndestination = 1\n", "unknown field"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        fs::write(&path, text).unwrap();
        let msg = parse_scenario(&path).unwrap_err().to_string();
        assert!(msg.contains(needle), "{msg:?} lacks {needle:?}");
    }
}

#[test]
fn overrides_replace_seed_duration_and_defense() {
    let mut c = parse_scenario(&scenarios_dir().join("baseline-defense-off.toml")).unwrap();
    Overrides {
        seed: Some(9),
        duration: Some(50.0),
        defense: Some(true),
    }
    .apply(&mut c)
    .unwrap();
    assert_eq!((c.seed, c.duration, c.defense.enabled), (9, 50.0, true));
    assert!(Overrides {
        duration: Some(-5.0),
        ..Overrides::default()
    }
    .apply(&mut c)
    .is_err());
}
