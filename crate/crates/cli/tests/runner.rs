use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use thermolim::pipelines::tile::TILING_SCHEMA;
use thermolim::run::{execute, sha256_hex, Artifact, MANIFEST_SCHEMA};
use thermolim::{CliError, ExperimentConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(value: Value) -> ExperimentConfig {
    ExperimentConfig::from_value(value).unwrap()
}

fn pointer_of(value: Value) -> String {
    match ExperimentConfig::from_value(value) {
        Err(CliError::Config { pointer, .. }) => pointer,
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn bytes_by_path(artifacts: &[Artifact]) -> BTreeMap<String, Vec<u8>> {
    artifacts
        .iter()
        .map(|a| (a.path.clone(), a.bytes.clone()))
        .collect()
}

fn validates(schema: &str, doc: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let first = v
        .iter_errors(doc)
        .next()
        .map(|e| format!("{} at {}", e, e.instance_path));
    first.map_or(Ok(()), Err)
}

fn bernoulli() -> Value {
    json!({ "kind": "finite", "values": [0.0, 1.0], "weights": [0.5, 0.5] })
}

fn small_configs() -> Vec<Value> {
    vec![
        json!({
            "kind": "ids", "seed": 3, "realizations": 3,
            "folner": { "group": "zd", "d": 2, "family": "cubes", "indices": [4, 8, 12] },
            "model": { "kind": "anderson", "potential": { "kind": "interval", "lo": 0.0, "hi": 2.0 } },
            "ids": { "curves": 2 }
        }),
        json!({
            "kind": "freq", "seed": 5, "realizations": 3,
            "folner": { "group": "heisenberg", "family": "heisenberg-boxes", "indices": [3, 4] },
            "model": { "kind": "site-percolation", "p": 0.4 },
            "params": { "l": [1, 2] }
        }),
        json!({
            "kind": "tile",
            "folner": { "group": "zd", "d": 2, "family": "cubes-refined", "indices": { "from": 1, "to": 300 } },
            "params": { "epsilon": [0.09, 0.08] },
            "tiling": { "q": 100 }
        }),
        json!({
            "kind": "gc", "seed": 8, "realizations": 6,
            "gc": { "sample": { "kind": "product", "marginals": [ { "kind": "normal", "mean": 0.0, "sd": 1.0 }, { "kind": "uniform", "lo": 0.0, "hi": 1.0 } ] }, "statistic": "orthant" },
            "params": { "n": [20, 40], "kappa": [0.1, 0.3] }
        }),
        json!({
            "kind": "bounds", "seed": 1, "realizations": 3,
            "folner": { "group": "zd", "d": 1, "family": "cubes", "indices": [32, 64] },
            "model": { "kind": "anderson-percolation", "potential": bernoulli(), "p": 0.8 },
            "params": { "l": [1, 2, 3] }
        }),
        json!({
            "kind": "report", "seed": 2, "realizations": 3,
            "folner": { "group": "zd", "d": 2, "family": "cubes", "indices": [10, 20] },
            "model": { "kind": "edge-percolation", "p": 0.5 },
            "report": { "max_cluster": 4, "cluster_trials": 500 }
        }),
    ]
}

#[test]
fn config_errors_point_at_the_offending_entry() {
    let base = json!({
        "kind": "tile",
        "folner": { "group": "zd", "d": 2, "family": "cubes", "indices": [4] },
        "params": { "epsilon": [0.05] },
        "tiling": { "q": 10 }
    });
    let mut eps = base.clone();
    eps["params"]["epsilon"] = json!([0.05, 0.2]);
    assert_eq!(pointer_of(eps), "/params/epsilon/1");

    let mut typed = base.clone();
    typed["seed"] = json!("seven");
    assert_eq!(pointer_of(typed), "/seed");

    let mut deep = base.clone();
    deep["folner"]["d"] = json!(7);
    assert_eq!(pointer_of(deep), "/folner/d");

    let mut unknown = base.clone();
    unknown["tiling"]["bogus"] = json!(1);
    assert_eq!(pointer_of(unknown), "/tiling");

    let monotone = json!({
        "kind": "bounds",
        "folner": { "group": "zd", "d": 1, "family": "cubes", "indices": [20, 64] },
        "model": { "kind": "anderson", "potential": { "kind": "interval", "lo": 0.0, "hi": 1.0 } },
        "params": { "l": [10], "r": [2] }
    });
    assert_eq!(pointer_of(monotone.clone()), "/params/l/0");
    let mut wide = monotone;
    wide["folner"]["indices"] = json!([64, 128]);
    wide["params"]["r"] = json!([5]);
    assert_eq!(pointer_of(wide), "/params/r/0");

    let infinite = json!({
        "kind": "bounds",
        "folner": { "group": "zd", "d": 1, "family": "cubes", "indices": [16] },
        "model": { "kind": "anderson", "potential": { "kind": "interval", "lo": 0.0, "hi": 1.0 } },
        "params": { "l": [2] }
    });
    assert_eq!(pointer_of(infinite), "/model");

    assert!(matches!(
        ExperimentConfig::from_json("{"),
        Err(CliError::Config { .. })
    ));
}

#[test]
fn shipped_configs_validate() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path).unwrap();
            ExperimentConfig::from_json(&text)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 6);
}

#[test]
fn outputs_ignore_the_worker_count() {
    for value in small_configs() {
        let mut c = config(value);
        let (m1, a1) = execute(&c).unwrap();
        c.workers = 3;
        let (m3, a3) = execute(&c).unwrap();
        assert!(m1.complete, "{:?}", m1.tasks);
        assert_eq!(bytes_by_path(&a1), bytes_by_path(&a3), "{:?}", c.kind);
        assert_eq!(m1.config_hash, m3.config_hash);
        let seeds = |m: &thermolim::RunManifest| m.tasks.iter().map(|t| t.seed).collect::<Vec<_>>();
        assert_eq!(seeds(&m1), seeds(&m3));
        let (_, again) = execute(&c).unwrap();
        assert_eq!(bytes_by_path(&a3), bytes_by_path(&again));
    }
}

#[test]
fn csv_headers_name_units_and_json_matches_schemas() {
    let unit = |cell: &str| {
        let Some((name, rest)) = cell.split_once(" [") else {
            return false;
        };
        !name.is_empty() && rest.ends_with(']') && rest.len() > 1
    };
    for value in small_configs() {
        let c = config(value);
        let (manifest, artifacts) = execute(&c).unwrap();
        validates(MANIFEST_SCHEMA, &serde_json::to_value(&manifest).unwrap()).unwrap();
        for (a, out) in artifacts.iter().zip(&manifest.outputs) {
            assert_eq!(a.path, out.path);
            assert_eq!(sha256_hex(&a.bytes), out.sha256);
            let text = String::from_utf8(a.bytes.clone()).unwrap();
            if a.path.ends_with(".csv") {
                let header = text.lines().next().unwrap();
                assert!(header.split(',').all(unit), "{}: {header}", a.path);
            } else if a.path.starts_with("tiling_") {
                validates(TILING_SCHEMA, &serde_json::from_str(&text).unwrap()).unwrap();
            } else {
                panic!("unexpected artifact {}", a.path);
            }
        }
    }
}

#[test]
fn config_hash_ignores_workers_and_output() {
    let mut a = config(small_configs().remove(0));
    let h = sha256_hex(a.canonical_json().as_bytes());
    a.workers = 4;
    a.out = Some("elsewhere".into());
    assert_eq!(h, sha256_hex(a.canonical_json().as_bytes()));
    a.seed += 1;
    assert_ne!(h, sha256_hex(a.canonical_json().as_bytes()));
}

#[test]
fn strict_tiling_shortfalls_give_a_partial_manifest() {
    let c = config(json!({
        "kind": "tile",
        "folner": { "group": "heisenberg", "family": "heisenberg-refined", "indices": { "from": 1, "to": 200 } },
        "params": { "epsilon": [0.09] },
        "tiling": { "q": 16, "policy": "strict" }
    }));
    let (manifest, artifacts) = execute(&c).unwrap();
    assert!(!manifest.complete);
    assert_eq!(manifest.failures, 1);
    assert_eq!(manifest.exit_code(), 3);
    assert!(manifest.tasks[0]
        .error
        .as_deref()
        .unwrap()
        .contains("partial tiling"));
    assert!(artifacts.iter().all(|a| !a.path.ends_with(".json")));
}

fn thermolim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_thermolim"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", &small_configs()[0]);
    assert_eq!(thermolim(&["validate", &good]).status.code(), Some(0));

    let mut bad = small_configs()[0].clone();
    bad["realizations"] = json!(-1);
    let bad = write_config(dir.path(), "bad.json", &bad);
    let out = thermolim(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/realizations"));
    assert_eq!(thermolim(&["run", &bad]).status.code(), Some(2));

    let out_dir = dir.path().join("run");
    let run = thermolim(&[
        "run",
        &good,
        "--workers",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    validates(MANIFEST_SCHEMA, &manifest).unwrap();
    assert_eq!(manifest["master_seed"], 99);
    assert_eq!(manifest["workers"], 2);
    for o in manifest["outputs"].as_array().unwrap() {
        let bytes = fs::read(out_dir.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(sha256_hex(&bytes), o["sha256"].as_str().unwrap());
    }

    let partial = write_config(
        dir.path(),
        "partial.json",
        &json!({
            "kind": "tile",
            "folner": { "group": "heisenberg", "family": "heisenberg-refined", "indices": { "from": 1, "to": 200 } },
            "params": { "epsilon": [0.09] },
            "tiling": { "q": 16 }
        }),
    );
    let p_dir = dir.path().join("partial");
    let run = thermolim(&["run", &partial, "--out", p_dir.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(p_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], false);
    assert_eq!(manifest["tasks"][0]["ok"], false);
}

#[test]
fn step_plot_of_a_three_by_three_box_has_nine_risers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "box.json",
        &json!({
            "kind": "ids", "seed": 12,
            "folner": { "group": "zd", "d": 2, "family": "cubes", "indices": [3] },
            "model": { "kind": "anderson", "potential": { "kind": "interval", "lo": 0.0, "hi": 1.0 } }
        }),
    );
    let out = dir.path().join("out");
    assert_eq!(
        thermolim(&["run", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let curve = out.join("ids_curve_r0_i3.csv");
    let svg_path = dir.path().join("ids.svg");
    let plot = thermolim(&[
        "plot",
        curve.to_str().unwrap(),
        "--kind",
        "step",
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert_eq!(
        plot.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&plot.stderr)
    );
    let svg = fs::read_to_string(svg_path).unwrap();
    let path = svg
        .lines()
        .find(|l| l.contains("class=\"series\""))
        .unwrap();
    assert_eq!(path.matches(" V ").count(), 9);
    assert!(svg.contains("class=\"legend\""));
}

#[test]
fn log_log_plot_of_inverse_sizes_is_straight() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("err.csv");
    let mut text = String::from("L [sites],error [1]\n");
    for k in 3..10 {
        let l = (1u64 << k) as f64;
        text.push_str(&format!("{l},{}\n", 3.0 / l));
    }
    fs::write(&csv, text).unwrap();
    let svg_path = dir.path().join("err.svg");
    let plot = thermolim(&[
        "plot",
        csv.to_str().unwrap(),
        "--kind",
        "line",
        "--log-x",
        "--log-y",
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert_eq!(plot.status.code(), Some(0));
    let svg = fs::read_to_string(svg_path).unwrap();
    let path = svg
        .lines()
        .find(|l| l.contains("class=\"series\""))
        .unwrap();
    let d = path
        .split("d=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    let nums: Vec<f64> = d
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    let pts: Vec<(f64, f64)> = nums.chunks(2).map(|c| (c[0], c[1])).collect();
    assert_eq!(pts.len(), 7);
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let s0 = slope(pts[0], pts[1]);
    for w in pts.windows(2) {
        assert!((slope(w[0], w[1]) - s0).abs() < 0.01 * s0.abs(), "{pts:?}");
    }
}

#[test]
fn plotting_nothing_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    fs::write(&csv, "x [1],y [1]\n").unwrap();
    let out = thermolim(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        dir.path().join("e.svg").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to plot"));
}
