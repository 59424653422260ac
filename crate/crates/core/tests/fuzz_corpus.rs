//! Replays the checked-in fuzz seeds. Seeds are valid inputs, so each one
//! must parse; the round-trip checks mirror the fuzz targets.

use std::fs;
use std::path::PathBuf;

use selftune::experiments::config::{format_test_function, parse_test_function};
use selftune::experiments::{read_csv_dataset, ExperimentConfig, Grid, KRule, Table};
use selftune::kernel::AffinityMatrix;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (path.display().to_string(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn config_seeds_parse() {
    for (name, data) in seeds("parse_config") {
        let cfg = ExperimentConfig::parse(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(cfg.experiment.is_some(), "{name}");
    }
}

#[test]
fn grid_seeds_parse() {
    for (name, data) in seeds("eps_grid") {
        let grid = Grid::parse(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(grid.values.iter().all(|v| *v > 0.0), "{name}");
    }
}

#[test]
fn k_rule_seeds_parse() {
    for (name, data) in seeds("k_rule") {
        let rule = KRule::parse(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(rule.k_for(1000) >= 2, "{name}");
    }
}

#[test]
fn test_function_seeds_round_trip() {
    for (name, data) in seeds("test_function") {
        let f = parse_test_function(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = parse_test_function(&format_test_function(&f)).unwrap();
        for t in [0.0, 0.13, 0.5, 0.77] {
            assert_eq!(f.value(t), again.value(t), "{name}");
        }
    }
}

#[test]
fn csv_seeds_load() {
    for (name, data) in seeds("load_csv") {
        let cloud = read_csv_dataset(data.as_slice()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(cloud.len() >= 2, "{name}");
    }
}

#[test]
fn triplet_seeds_round_trip() {
    for (name, data) in seeds("affinity_triplets") {
        let w = AffinityMatrix::read_triplets(data.as_slice()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut buf = Vec::new();
        w.write_triplets(&mut buf).unwrap();
        assert_eq!(buf, data, "{name}");
    }
}

#[test]
fn table_seeds_read() {
    for (name, data) in seeds("table") {
        let table = Table::read(data.as_slice()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!table.rows.is_empty(), "{name}");
    }
}
