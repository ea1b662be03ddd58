use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use pbshm_core::family::{builtin_family, StructureInstance};
use pbshm_core::graph::{MetricConfig, Population, Provenance};
use pbshm_core::par::Execution;
use pbshm_core::physics::CampaignConfig;
use pbshm_core::transfer::{run_pair, DdtOptions, Oracle, PairOptions, Participant, PhysicsOracle};
use serde_json::{json, Value};
use tempfile::TempDir;

const BASE: [f64; 18] = [
    20.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2, 10.0, 0.5, 0.5, 4.0e9, 2500.0, 0.2, 28.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2,
];

fn pbshm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbshm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn campaign(count: usize) -> Value {
    json!({
        "family": "two_span",
        "theta": BASE,
        "sampling": {"count": count, "spread": 0.05},
        "conditions": [
            {"label": 0},
            {"label": 1, "slot": "D1", "delta": 0.25},
            {"label": 2, "slot": "D2", "delta": 0.25}
        ],
        "N_R": 6,
        "N_T": 2048,
        "f_s": 64.0,
        "noise_std": 0.02,
        "zeta": 0.002,
        "seed": 5,
        "N_w": 512
    })
}

fn three_span_theta() -> Vec<f64> {
    let mut t = BASE.to_vec();
    t.extend([10.0, 0.5, 0.5, 4.0e9, 2500.0, 0.2, 10.0, 4.0, 0.8, 3.5e10, 2500.0, 0.2]);
    t
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(count: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let w = Workspace { dir };
        w.put("campaign.json", &campaign(count));
        w.put(
            "population.json",
            &json!({
                "members": [{"id": "three", "family": "three_span", "theta": three_span_theta()}],
                "campaigns": ["campaign.json"]
            }),
        );
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn put(&self, name: &str, v: &Value) {
        fs::write(self.path(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
    }

    fn run(&self, args: &[&str], out: &str) -> Output {
        let out = self.arg(out);
        let mut all = vec!["--out", out.as_str()];
        all.extend_from_slice(args);
        let o = pbshm(&all);
        assert!(
            o.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn in_process_population() -> Population {
    let cfg: CampaignConfig = serde_json::from_value(campaign(3)).unwrap();
    let family = Arc::new(builtin_family("two_span").unwrap());
    let mut pop = Population::new();
    for (id, inst) in cfg.instances(&family, cfg.seed).unwrap() {
        pop.insert_instance(id, inst, Provenance::Simulated).unwrap();
    }
    let three = StructureInstance::new(Arc::new(builtin_family("three_span").unwrap()), three_span_theta()).unwrap();
    pop.insert_instance("three", three, Provenance::Simulated).unwrap();
    pop
}

#[test]
fn distance_matrix_matches_library() {
    let w = Workspace::new(3);
    w.run(&["population", "distance-matrix", "--config", &w.arg("population.json")], "dm");
    let (header, rows) = read_csv(&w.path("dm/distance_matrix.csv"));
    let ids: Vec<String> = header[1..].to_vec();
    assert_eq!(ids.len(), 4);
    let m: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].iter().map(|v| v.parse().unwrap()).collect()).collect();

    let (lib_ids, lib) = in_process_population()
        .distance_matrix(Some(&ids), &MetricConfig::default(), Execution::Sequential)
        .unwrap();
    assert_eq!(lib_ids, ids);
    for i in 0..ids.len() {
        assert_eq!(m[i][i], 0.0);
        for j in 0..ids.len() {
            assert_eq!(m[i][j], m[j][i]);
            assert_eq!(m[i][j], lib[i][j], "{} vs {}", ids[i], ids[j]);
        }
    }
    assert!(w.path("dm/run_manifest.json").exists());
}

#[test]
fn build_and_list_round_trip() {
    let w = Workspace::new(2);
    w.run(&["population", "build", "--config", &w.arg("population.json")], "pop");
    let built: Value = serde_json::from_str(&fs::read_to_string(w.path("pop/population.json")).unwrap()).unwrap();
    let members = built["members"].as_array().unwrap();
    assert_eq!(members.len(), 3);
    for m in members {
        let s = m["structure"].as_str().unwrap();
        assert!(w.path("pop").join(s).exists(), "{s}");
    }
    let o = w.run(&["population", "list", "--config", &w.arg("pop/population.json")], "list");
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("three"));
    assert!(stdout.contains("two_span_1"));
    let (_, rows) = read_csv(&w.path("list/population_list.csv"));
    assert_eq!(rows.len(), 3);
}

#[test]
fn simulate_is_reproducible_and_matches_oracle() {
    let w = Workspace::new(2);
    w.run(&["simulate", "--config", &w.arg("campaign.json")], "a");
    w.run(&["simulate", "--config", &w.arg("campaign.json")], "b");
    for rel in ["features.csv", "fibres/two_span_1/stratum_0.bin", "fibres/two_span_1/stratum_3.bin"] {
        assert_eq!(fs::read(w.path("a").join(rel)).unwrap(), fs::read(w.path("b").join(rel)).unwrap(), "{rel}");
    }

    let (header, rows) = read_csv(&w.path("a/features.csv"));
    assert_eq!(header.len(), 3 + 4);
    // Two structures, three conditions, six acquisitions each.
    assert_eq!(rows.len(), 2 * 3 * 6);

    let cfg: CampaignConfig = serde_json::from_value(campaign(2)).unwrap();
    let family = Arc::new(builtin_family("two_span").unwrap());
    let oracle = PhysicsOracle {
        conditions: cfg.conditions().unwrap(),
        settings: cfg.settings(cfg.seed),
        exec: Execution::Sequential,
    };
    for (id, inst) in cfg.instances(&family, cfg.seed).unwrap() {
        let d = oracle.simulate(&inst).unwrap();
        let ours: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == id).collect();
        assert_eq!(ours.len(), d.len());
        for (row, (x, y)) in ours.iter().zip(d.features.iter().zip(d.labels.as_ref().unwrap())) {
            assert_eq!(row[2].parse::<usize>().unwrap(), *y);
            for (v, e) in row[3..].iter().zip(x) {
                assert_eq!(v.parse::<f64>().unwrap(), *e);
            }
        }
    }

    let manifest: Value = serde_json::from_str(&fs::read_to_string(w.path("a/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["outputs"].as_array().unwrap().len() > 3);
}

#[test]
fn transfer_report_rows_and_identity_pair() {
    let w = Workspace::new(2);
    w.put(
        "transfer.json",
        &json!({
            "population": "population.json",
            "campaign": "campaign.json",
            "pairs": [["two_span_0", "two_span_0"], ["two_span_0", "two_span_1"], ["two_span_1", "two_span_0"]],
            "steps": 2
        }),
    );
    let o = w.run(&["transfer", "--config", &w.arg("transfer.json")], "tr");
    let (header, rows) = read_csv(&w.path("tr/report.csv"));
    assert_eq!(header[0], "source");
    assert_eq!(rows.len(), 3);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);

    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let own = rows.iter().find(|r| r[0] == r[1]).unwrap();
    assert_eq!(own[col("distance")].parse::<f64>().unwrap(), 0.0);
    assert_eq!(own[col("raw")], own[col("in_domain")]);
    assert_eq!(own[col("ddt")], own[col("in_domain")]);
    assert_eq!(own[col("da")], own[col("in_domain")]);
    for r in &rows {
        for c in ["raw", "ddt", "da", "in_domain"] {
            let a: f64 = r[col(c)].parse().unwrap();
            assert!((0.0..=1.0).contains(&a));
        }
    }

    let summary: Value = serde_json::from_str(&fs::read_to_string(w.path("tr/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pairs"], 3);
    let reports = summary["reports"].as_array().unwrap();
    for (r, p) in rows.iter().zip(reports) {
        assert_eq!(p["source"].as_str().unwrap(), r[0]);
        assert_eq!(p["ddt"].as_f64().unwrap(), r[col("ddt")].parse::<f64>().unwrap());
    }
    assert!(w.path("tr/scatter/two_span_0__two_span_1.svg").exists());

    let cfg: CampaignConfig = serde_json::from_value(campaign(2)).unwrap();
    let family = Arc::new(builtin_family("two_span").unwrap());
    let oracle = PhysicsOracle {
        conditions: cfg.conditions().unwrap(),
        settings: cfg.settings(cfg.seed),
        exec: Execution::Sequential,
    };
    let parts: Vec<Participant> = cfg
        .instances(&family, cfg.seed)
        .unwrap()
        .into_iter()
        .map(|(id, instance)| Participant {
            domain: oracle.simulate(&instance).unwrap(),
            id,
            instance,
        })
        .collect();
    let opts = PairOptions {
        ddt: DdtOptions {
            steps: 2,
            ..Default::default()
        },
        ..Default::default()
    };
    let lib = run_pair(&parts[0], &parts[1], &oracle, &MetricConfig::default(), &opts).unwrap().report;
    let row = rows.iter().find(|r| r[0] == "two_span_0" && r[1] == "two_span_1").unwrap();
    for (c, v) in [("raw", lib.raw), ("ddt", lib.ddt), ("da", lib.da), ("in_domain", lib.in_domain), ("distance", lib.distance)] {
        assert_eq!(row[col(c)].parse::<f64>().unwrap(), v, "{c}");
    }
}

#[test]
fn calibrate_from_report() {
    let w = Workspace::new(2);
    let mut csv = String::from("source,target,distance,path_length,leg1,leg2,raw,ddt,two_step,da,in_domain\n");
    let mut by_distance = BTreeMap::new();
    for i in 0..30 {
        let d = i as f64 * 0.01;
        let acc = if d <= 0.15 { 0.95 } else { 0.5 };
        by_distance.insert(i, acc);
        csv.push_str(&format!("s{i},t{i},{d},{d},,,{acc},{acc},,{acc},1\n"));
    }
    fs::write(w.path("report.csv"), csv).unwrap();
    w.put(
        "calibrate.json",
        &json!({
            "population": "population.json",
            "campaign": "campaign.json",
            "pairs": "all",
            "report": "report.csv"
        }),
    );
    let o = w.run(&["calibrate", "--config", &w.arg("calibrate.json"), "--target-accuracy", "0.9"], "cal");
    assert!(String::from_utf8(o.stdout).unwrap().contains("d_s = 0.15"));
    let doc: Value = serde_json::from_str(&fs::read_to_string(w.path("cal/calibration.json")).unwrap()).unwrap();
    assert_eq!(doc["threshold"].as_f64().unwrap(), 0.15);
    assert_eq!(doc["warning"], false);
    assert_eq!(doc["pairs"], 30);
    let (_, curve) = read_csv(&w.path("cal/calibration_curve.csv"));
    assert_eq!(curve.len(), by_distance.len());
}

#[test]
fn malformed_input_exits_one_with_location() {
    let w = Workspace::new(1);
    fs::write(w.path("bad.json"), "{\"members\": [ {\"id\": 3 ]}").unwrap();
    let o = pbshm(&["--out", &w.arg("bad"), "population", "list", "--config", &w.arg("bad.json")]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.json"), "{err}");
    assert!(err.contains("line 1"), "{err}");

    let o = pbshm(&["--out", &w.arg("bad"), "simulate", "--config", &w.arg("missing.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("missing.json"));

    let o = pbshm(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_member_in_pair_is_input_error() {
    let w = Workspace::new(1);
    w.put(
        "transfer.json",
        &json!({
            "population": "population.json",
            "campaign": "campaign.json",
            "pairs": [["two_span_0", "nowhere"]]
        }),
    );
    let o = pbshm(&["--out", &w.arg("tr"), "transfer", "--config", &w.arg("transfer.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("nowhere"));
}
