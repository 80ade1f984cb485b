use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mbvge::io::{manifest_path, read_pairs_file};
use mbvge::{BvgePair, MixtureParams, Region};

const SET2: [&str; 18] = [
    "--p", "0.6", "--a1", "0.5", "--a2", "0.4", "--a3", "0.3", "--l1", "2", "--b1", "0.5", "--b2", "1.5", "--b3",
    "0.5", "--l2", "1.5",
];

fn mbvge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbvge")).args(args).output().expect("binary runs")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sample(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let out = p(dir, name);
    let n = n.to_string();
    let seed = seed.to_string();
    let mut args = vec!["sample", "--n", &n, "--seed", &seed, "--out", &out];
    args.extend_from_slice(&SET2);
    let o = mbvge(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    PathBuf::from(out)
}

#[test]
fn sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = sample(dir.path(), "a.csv", 5, 9);
    let b = sample(dir.path(), "b.csv", 5, 9);
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = ta.lines().collect();
    assert_eq!(lines[0], "x1,x2,region,label");
    assert_eq!(lines.len(), 6);
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert!(["diag", "lower", "upper"].contains(&f[2]));
        assert!(["0", "1"].contains(&f[3]));
    }
    assert!(manifest_path(&a).exists());
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "s.csv");
    let mut args = vec!["sample", "--n", "5", "--out", &out];
    args.extend_from_slice(&SET2);
    args[6] = "1.5";
    let o = mbvge(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p must lie in (0,1)"), "{}", stderr(&o));

    let o = mbvge(&["sample", "--n", "5", "--out", &out, "--p", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mbvge(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_params_file() {
    let dir = tempfile::tempdir().unwrap();
    let json = p(dir.path(), "params.json");
    std::fs::write(&json, r#"{"p":0.2,"a1":0.5,"a2":0.4,"a3":0.3,"l1":2,"b1":0.5,"b2":1.5,"b3":0.5,"l2":1.5}"#)
        .unwrap();
    let a = p(dir.path(), "a.csv");
    let b = p(dir.path(), "b.csv");
    assert!(mbvge(&["sample", "--n", "50", "--seed", "1", "--out", &a, "--params", &json, "--p", "0.6"])
        .status
        .success());
    let mut args = vec!["sample", "--n", "50", "--seed", "1", "--out", &b];
    args.extend_from_slice(&SET2);
    assert!(mbvge(&args).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sample_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = sample(dir.path(), "s.csv", 300, 4);
    let read = read_pairs_file(&path).unwrap();
    let draws = MixtureParams::from_array([0.6, 0.5, 0.4, 0.3, 2.0, 0.5, 1.5, 0.5, 1.5]).unwrap().sample_seeded(300, 4);
    assert_eq!(read.len(), 300);
    for (r, d) in read.iter().zip(&draws) {
        assert_eq!(r.0.to_bits(), d.pair.x1.to_bits());
        assert_eq!(r.1.to_bits(), d.pair.x2.to_bits());
    }
}

#[test]
fn density_grid_matches_library_and_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "grid.csv");
    let mut args = vec!["density-grid", "--xmin", "0.5", "--xmax", "2.5", "--steps", "3", "--out", &out];
    args.extend_from_slice(&SET2);
    let o = mbvge(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = MixtureParams::from_array([0.6, 0.5, 0.4, 0.3, 2.0, 0.5, 1.5, 0.5, 1.5]).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let region = if r[0] > r[1] { Region::Upper } else { Region::Lower };
        let d = m.density(&BvgePair { x1: r[0], x2: r[1], region }).value();
        assert_eq!(r[2], d);
    }
    let diag = std::fs::read_to_string(dir.path().join("grid_diag.csv")).unwrap();
    assert_eq!(diag.lines().next(), Some("x,diag_density"));
    assert_eq!(diag.lines().count(), 4);

    // symmetric parameters give a transposition-symmetric grid off the diagonal
    let sym = p(dir.path(), "sym.csv");
    let o = mbvge(&[
        "density-grid",
        "--xmin",
        "0.1",
        "--xmax",
        "3",
        "--steps",
        "7",
        "--out",
        &sym,
        "--p",
        "0.4",
        "--a1",
        "0.8",
        "--a2",
        "0.8",
        "--a3",
        "0.5",
        "--l1",
        "1.2",
        "--b1",
        "1.5",
        "--b2",
        "1.5",
        "--b3",
        "0.7",
        "--l2",
        "0.6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&sym).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    for i in 0..7 {
        for j in 0..7 {
            if i != j {
                let a = rows[i * 7 + j][2];
                let b = rows[j * 7 + i][2];
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn fit_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "bad.csv");
    let mut text = String::from("x1,x2\n");
    for k in 0..15 {
        text.push_str(&format!("{}.5,{}\n", k, k + 1));
    }
    text.push_str("1.0,oops\n");
    std::fs::write(&data, text).unwrap();
    let out = p(dir.path(), "fit.json");
    let o = mbvge(&["fit", "--data", &data, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 17: expected 2 numeric fields"), "{}", stderr(&o));
}

#[test]
fn fit_all_ties_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "ties.csv");
    std::fs::write(&data, "x1,x2\n1,1\n2,2\n3,3\n4,4\n").unwrap();
    let o = mbvge(&["fit", "--data", &data, "--out", &p(dir.path(), "f.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn fit_single_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(dir.path(), "s.csv", 400, 2);
    let out = p(dir.path(), "f.json");
    let o = mbvge(&["fit", "--data", data.to_str().unwrap(), "--max-iter", "1", "--seed", "5", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["iterations"], 1);
    assert_eq!(v["converged"], false);
    assert_eq!(v["stop_reason"], "iteration_cap");
    assert_eq!(v["loglik_trace"].as_array().unwrap().len(), 2);
    for k in ["p", "a1", "a2", "a3", "l1", "b1", "b2", "b3", "l2"] {
        assert!(v["estimates"][k].is_number());
    }
}

#[test]
fn fit_recovers_truth_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(dir.path(), "s.csv", 1500, 17);
    let out = p(dir.path(), "f.json");
    let o = mbvge(&["fit", "--data", data.to_str().unwrap(), "--seed", "1", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let est: mbvge::mixture::FlatParams = serde_json::from_value(v["estimates"].clone()).unwrap();
    let est = MixtureParams::try_from(est).unwrap();
    let truth = MixtureParams::from_array([0.6, 0.5, 0.4, 0.3, 2.0, 0.5, 1.5, 0.5, 1.5]).unwrap();
    let est = mbvge::study::resolve_labels(&est, &truth, mbvge::study::LabelResolution::MatchTruth);
    // n=1500 root-MSE scale for this parameter set is about 0.25 at worst (b2)
    for (e, t) in est.to_array().iter().zip(truth.to_array()) {
        assert!((e - t).abs() < 0.6 * t.max(0.5), "{e} vs {t}");
    }
}

#[test]
fn dependence_output_is_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "dep.json");
    let mut args = vec!["dependence", "--out", &out];
    args.extend_from_slice(&SET2);
    let o = mbvge(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let d = &v["distribution"];
    let tau = d["kendall_numeric"]["value"].as_f64().unwrap();
    assert!(tau > 0.0 && tau < 1.0);
    assert!(d["kendall_verbatim"].is_number());
    // the published upper tail index is 2 - 0.6*0.4/1.2 - 0.4*1.5/2.5 = 1.56
    assert_eq!(d["verbatim_out_of_range"]["tail_upper"], true);
    assert_eq!(d["verbatim_out_of_range"]["kendall"], false);
    assert_eq!(d["tail"]["lower"], 0.0);
    assert!(v["component_mixture"].is_object());
}

#[test]
fn simstudy_smoke_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(dir.path(), "study.json");
    std::fs::write(
        &cfg,
        r#"{"truth":{"p":0.6,"a1":0.5,"a2":0.4,"a3":0.3,"l1":2,"b1":0.5,"b2":1.5,"b3":0.5,"l2":1.5},
            "n":100,"replications":2,"seed":3,"em":{"max_iter":200}}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let d = p(dir.path(), name);
        let o = mbvge(&["simstudy", "--config", &cfg, "--out-dir", &d]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("MSE"));
        PathBuf::from(d)
    };
    let a = run("a");
    let b = run("b");
    for f in ["replications.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("replications.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert!(s.is_object());

    let bad = p(dir.path(), "bad.json");
    std::fs::write(&bad, r#"{"truth":{"p":0.6,"a1":0.5,"a2":0.4,"a3":0.3,"l1":2,"b1":0.5,"b2":1.5,"b3":0.5,"l2":1.5},"n":10,"replications":2,"seed":3}"#).unwrap();
    let o = mbvge(&["simstudy", "--config", &bad, "--out-dir", &p(dir.path(), "c")]);
    assert_eq!(o.status.code(), Some(2));
}
