use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gridsplit::synthgen::ScenarioSpec;

fn gridsplit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsplit"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn small_network(dir: &Path) {
    let spec = ScenarioSpec {
        n_villages: 5,
        consumers_per_village: (8, 15),
        ..ScenarioSpec::default_scenario(4)
    };
    fs::write(dir.join("spec.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    let out = gridsplit(&["generate", "--spec", "spec.json", "-o", "net.json"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn run_writes_a_consistent_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_network(d);
    let out = gridsplit(&["run", "--network", "net.json", "--method", "topdown", "-o", "out"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b = d.join("out/top-down");
    let mut files: Vec<_> = fs::read_dir(&b).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["audit.csv", "map.geojson", "partition.csv", "summary.csv"]);

    // totals row equals the sum of the per-type columns
    let summary = csv_rows(&b.join("summary.csv"));
    assert_eq!(summary[0], ["system_type", "Microgrids", "Isolated", "Grid", "All"]);
    let nums = |row: &Vec<String>| row[1..].iter().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>();
    for row in &summary[1..] {
        let v = nums(row);
        assert!((v[0] + v[1] + v[2] - v[3]).abs() <= 0.011 * 3.0, "{row:?}");
    }

    // one partition line per consumer, modes agree with the summary counts
    let partition = csv_rows(&b.join("partition.csv"));
    let count = |m: &str| partition[1..].iter().filter(|r| r[1] == m).count() as f64;
    let customers = nums(&summary[1]);
    assert_eq!([count("microgrid"), count("isolated"), count("grid")], customers[..3]);
    assert_eq!((partition.len() - 1) as f64, customers[3]);

    // each evaluated node audited once
    let audit = csv_rows(&b.join("audit.csv"));
    assert_eq!(audit[0][0], "node_id");
    let mut ids: Vec<_> = audit[1..].iter().map(|r| r[0].clone()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), audit.len() - 1);

    let map: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("map.geojson")).unwrap()).unwrap();
    assert_eq!(map["type"], "FeatureCollection");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_network(d);
    let run = |o: &str| gridsplit(&["run", "--network", "net.json", "--method", "both", "-o", o], d);
    assert!(run("a").status.success());
    assert!(run("b").status.success());
    for f in ["top-down/map.geojson", "top-down/audit.csv", "bottom-up/map.geojson", "bottom-up/merges.csv", "comparison.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let cmp: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a/comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_catalog_is_reported_by_class() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_network(d);
    let out = gridsplit(&["run", "--network", "net.json", "--catalog", "nope.json", "-o", "out"], d);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("ERROR CatalogMissing "), "{err}");

    let out = gridsplit(&["run", "--network", "none.json", "-o", "out"], d);
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("ERROR NetworkMissing "));
}

#[test]
fn invalid_network_is_reported_by_class() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("bad.json"),
        r#"{"nodes":[{"id":1,"kind":"transformer","voltage":"MV"},{"id":2,"kind":"line_segment","parent":1,"length_km":1.0,"voltage":"LV"}]}"#,
    )
    .unwrap();
    let out = gridsplit(&["run", "--network", "bad.json", "-o", "out"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("ERROR NonConsumerLeaf "));
}

#[test]
fn sweep_report_has_a_row_per_value_and_method() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_network(d);
    let out = gridsplit(
        &["sweep", "--network", "net.json", "--param", "fuel-cost", "--values", "0.5,0.6,0.7", "-o", "sw"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&d.join("sw/report.csv"));
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(d.join("sw/fuel_cost=0.6/bottom-up/merges.csv").is_file());

    let out = gridsplit(
        &["sweep", "--network", "net.json", "--param", "grid-reliability", "--values", "0.9,0.7,0.8", "-o", "x"],
        d,
    );
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("ERROR InvalidSweep "));
}

#[test]
fn single_value_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_network(d);
    assert!(gridsplit(&["run", "--network", "net.json", "--method", "both", "-o", "run"], d).status.success());
    let out = gridsplit(
        &["sweep", "--network", "net.json", "--param", "fuel-cost", "--values", "0.8", "-o", "sw"],
        d,
    );
    assert!(out.status.success());
    for m in ["top-down", "bottom-up"] {
        for f in ["summary.csv", "partition.csv", "map.geojson"] {
            assert_eq!(
                fs::read(d.join("run").join(m).join(f)).unwrap(),
                fs::read(d.join("sw/fuel_cost=0.8").join(m).join(f)).unwrap(),
                "{m}/{f}"
            );
        }
    }
}

#[test]
fn failing_sweep_value_does_not_stop_the_rest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_network(d);
    let out = gridsplit(
        &["sweep", "--network", "net.json", "--method", "topdown", "--param", "grid-reliability", "--values", "0.8,0.9,1.5", "-o", "sw"],
        d,
    );
    assert!(out.status.success());
    let rows = csv_rows(&d.join("sw/report.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows[1][7].is_empty() && rows[2][7].is_empty());
    assert!(rows[3][7].starts_with("InvalidConfig"), "{:?}", rows[3]);
}
