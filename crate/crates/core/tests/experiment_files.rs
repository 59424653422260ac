use std::fs::{self, File};

use selftune::experiments::{
    load_csv_dataset, run, write_outputs, write_points_csv, Experiment, ExperimentConfig, Table,
};
use selftune::manifold::{DensityProfile, Generator, ManifoldDataset};

#[test]
fn points_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = ManifoldDataset::new(Generator::CurveR4, DensityProfile::moderate(), 5);
    let cloud = data.sample_default(64).unwrap();
    let path = dir.path().join("points.csv");
    write_points_csv(&cloud, File::create(&path).unwrap()).unwrap();
    let back = load_csv_dataset(&path).unwrap();
    assert_eq!(back.dim(), 4);
    assert_eq!(back.coords(), cloud.coords());
    assert_eq!(back.intrinsic(), cloud.intrinsic());
}

#[test]
fn external_embedding_reads_a_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = ManifoldDataset::new(Generator::CircleR2, DensityProfile::paper_like(), 8);
    let path = dir.path().join("circle.csv");
    write_points_csv(&data.sample_default(300).unwrap(), File::create(&path).unwrap()).unwrap();

    let mut cfg = ExperimentConfig::parse(&format!(
        "experiment = external_embedding\ninput_csv = {}\nkernel = mnist_w1\nsigma0_grid = 1,2\neigs = 2\n",
        path.display()
    ))
    .unwrap();
    cfg.k_x = Some(7);
    let output = run(&cfg).unwrap();
    let out_dir = dir.path().join("out");
    let written = write_outputs(&output, &out_dir).unwrap();
    assert_eq!(written.len(), output.tables.len() + 1);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], Experiment::ExternalEmbedding.name());
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in &listed {
        let table = Table::read(File::open(out_dir.join(name)).unwrap()).unwrap();
        assert!(!table.rows.is_empty(), "{name}");
    }
    let degrees = Table::read(File::open(out_dir.join("external_degrees.csv")).unwrap()).unwrap();
    assert_eq!(degrees.rows.len(), 2);
}

#[test]
fn missing_experiment_is_a_config_error() {
    let err = run(&ExperimentConfig::default()).unwrap_err();
    assert_eq!(err.kind(), "config");
}
