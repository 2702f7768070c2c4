use std::process::{Command, Output};

fn ishuffle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ishuffle")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn sample_order_two_cards() {
    let out = ishuffle(&["sample-order", "--measure", "gsr", "--n", "2", "--samples", "8", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[1] == "12" || r[1] == "21"));
}

#[test]
fn left_atom_gap_reverses() {
    let out = ishuffle(&["sample-order", "--measure", "gap(0,1,left)", "--n", "4", "--samples", "3", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.iter().map(|r| r[1].as_str()).collect::<Vec<_>>(), ["4321"; 3]);
}

#[test]
fn lebesgue_histogram_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("orders.json");
    let out = ishuffle(&[
        "sample-order", "--measure", "lebesgue", "--n", "3", "--samples", "60000", "--seed", "5",
        "--format", "json", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let hist = doc["histogram"].as_object().unwrap();
    assert_eq!(hist.len(), 6);
    for (perm, count) in hist {
        let c = count.as_u64().unwrap() as f64;
        assert!((c - 10_000.0).abs() <= 500.0, "{perm}: {c}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["sample-order", "--measure", "mixed", "--n", "5", "--samples", "2000", "--seed", "3"],
        vec!["step", "--measure", "gsr", "--type", "two", "--n", "6", "--samples", "500", "--seed", "4"],
        vec!["walk", "--measure", "a-shuffle:3", "--n", "5", "--steps", "4", "--samples", "20", "--seed", "4"],
        vec!["mixing", "--measure", "gsr", "--n", "4", "--steps", "5", "--mode", "mc", "--samples", "20000", "--seed", "8"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let bodies: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let path = dir.path().join(format!("run{i}-{k}.csv"));
                let mut full = args.clone();
                full.extend(["--out", path.to_str().unwrap()]);
                assert_eq!(ishuffle(&full).status.code(), Some(0), "{args:?}");
                std::fs::read(&path).unwrap()
            })
            .collect();
        assert!(!bodies[0].is_empty());
        assert_eq!(bodies[0], bodies[1], "{args:?}");
    }
}

#[test]
fn verify_exit_codes() {
    let good = ishuffle(&["verify", "--measure", "gsr"]);
    assert_eq!(good.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&good)).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 8);

    assert_eq!(ishuffle(&["verify", "--measure", "lebesgue"]).status.code(), Some(0));

    let bad = ishuffle(&["verify", "--measure", "interior-atom"]);
    assert_eq!(bad.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&bad)).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["quasi_uniform_sandwich"]);
}

#[test]
fn mixing_curves() {
    let out = ishuffle(&["mixing", "--measure", "gsr", "--type", "two", "--n", "4", "--steps", "12", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(0));
    let tv: Vec<f64> = data_rows(&stdout(&out)).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(tv.len(), 13);
    assert!(tv.windows(2).all(|w| w[1] <= w[0]));

    let out = ishuffle(&["mixing", "--measure", "lebesgue", "--n", "3", "--steps", "3"]);
    let tv: Vec<f64> = data_rows(&stdout(&out)).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(tv.len(), 4);
    assert!((tv[0] - 5.0 / 6.0).abs() < 1e-12);
    assert!(tv[1..].iter().all(|&v| v == 0.0));

    let out = ishuffle(&["mixing", "--measure", "identity", "--n", "3", "--steps", "4"]);
    let tv: Vec<f64> = data_rows(&stdout(&out)).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(tv.iter().all(|&v| (v - 5.0 / 6.0).abs() < 1e-12));
}

#[test]
fn exact_mode_refuses_large_decks() {
    let out = ishuffle(&["mixing", "--measure", "gsr", "--n", "9", "--steps", "2", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn shuffle_maps() {
    let out = ishuffle(&["shuffle-map", "--measure", "gsr"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows, [["0", "1/2", "2", "0"], ["1/2", "1", "2", "-1"]]);

    let out = ishuffle(&["shuffle-map", "--measure", "a-shuffle:4"]);
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 4);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[2], "4");
        assert_eq!(r[3], format!("{}", -(k as i64)));
    }

    let out = ishuffle(&["shuffle-map", "--measure", "a-shuffle:4", "--grid", "8"]);
    let table = data_rows(&stdout(&out));
    assert!(table.iter().any(|r| r == &["3/8", "1/2"]));

    let out = ishuffle(&["shuffle-map", "--measure", "lebesgue"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("atomic"));
}

#[test]
fn oracle_output() {
    let out = ishuffle(&["oracle", "--measure", "gsr", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["probs"]["12"], "3/4");
    assert_eq!(doc["probs"]["21"], "1/4");
}

#[test]
fn usage_errors_exit_two() {
    // stochastic commands need an explicit seed
    assert_eq!(ishuffle(&["sample-order", "--measure", "gsr", "--n", "2", "--samples", "2"]).status.code(), Some(2));
    assert_eq!(ishuffle(&["mixing", "--measure", "gsr", "--n", "3", "--steps", "2", "--mode", "mc"]).status.code(), Some(2));
    assert_eq!(
        ishuffle(&["sample-order", "--measure", "no-such", "--n", "2", "--samples", "2", "--seed", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        ishuffle(&["step", "--measure", "gsr", "--sampler", "identity", "--n", "2", "--seed", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn failed_validation_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("never.csv");
    let out = ishuffle(&[
        "sample-order", "--measure", "gap(1/2,1/4,left)", "--n", "3", "--samples", "5", "--seed", "1",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!path.exists());
}

#[test]
fn sampler_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    std::fs::write(
        &path,
        r#"{"type":"grid","grid":[["1/4","1/4"],["1/4","1/4"]]}"#,
    )
    .unwrap();
    let out = ishuffle(&["step", "--sampler", path.to_str().unwrap(), "--n", "3", "--samples", "4", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&stdout(&out)).len(), 4);
}
