use std::process::{Command, Output};

use mapforge::series::parse_rat;
use serde_json::Value;

fn mapforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapforge"))
        .args(args)
        .env_remove("MAPFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = mapforge(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect()
}

#[test]
fn planar_free_energy_series() {
    let doc = json(&["planar", "--g4", "1", "--order", "3", "--emit", "f"]);
    assert_eq!(strings(&doc["results"]["f"]), ["0", "1/2", "9/8", "9/2"]);
    assert_eq!(doc["params"]["g4"], "1");
    assert_eq!(doc["command"], "planar");
}

#[test]
fn geodesic_root_series() {
    let doc = json(&["geodesic", "--g4", "1", "--n", "0", "--order", "3", "--emit", "Rn"]);
    assert_eq!(strings(&doc["results"]["Rn"]), ["1", "2", "9", "54"]);
}

#[test]
fn branching_exact_only() {
    let doc = json(&["branching", "--p", "0.3", "--n", "0", "--samples", "0"]);
    assert!(doc["results"]["estimate"].is_null());
    let exact = doc["results"]["exact"].as_f64().unwrap();
    assert!((exact - 6.0 / 7.0).abs() < 1e-12);
}

#[test]
fn keys_are_sorted_and_rationals_parse() {
    let out = mapforge(&["oracle", "--weights", "g4=1", "--order", "3", "--genus-split"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let top: Vec<&String> = doc.as_object().unwrap().keys().collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
    let f = &doc["results"]["F"];
    assert_eq!(f["3"]["1"], "33/2");
    for row in f.as_object().unwrap().values() {
        for c in row.as_object().unwrap().values() {
            let s = c.as_str().unwrap();
            assert_eq!(parse_rat(s).unwrap().to_string(), s);
        }
    }
}

#[test]
fn genus_csv_rows() {
    let out = mapforge(&["genus", "--g4", "1", "--order", "4", "--max-genus", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "# max_genus=2"));
    assert!(text.lines().any(|l| l == "order,genus,coefficient"));
    assert!(text.lines().any(|l| l == "3,1,33/2"));
    assert!(text.lines().any(|l| l == "3,2,15/4"));
}

#[test]
fn validation_errors_exit_with_two() {
    assert_eq!(mapforge(&["planar", "--g4", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(mapforge(&["sample", "--faces", "5"]).status.code(), Some(2));
    assert_eq!(mapforge(&["branching", "--p", "0.3", "--samples", "10"]).status.code(), Some(2));
    let bad = mapforge(&["branching", "--p", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("BadProbability"));
    assert_eq!(mapforge(&["planar", "--g4", "x/0"]).status.code(), Some(2));
}

#[test]
fn module_errors_map_to_exit_codes() {
    let out = mapforge(&["local", "--emit", "profile", "--finite-area", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mapforge(&["planar", "--g3", "1", "--emit", "f", "--order", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EvenOnly"));
    // too few matrix sizes to pin the genus expansion
    let out = mapforge(&["genus", "--g4", "1", "--order", "3", "--sizes", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("IncreaseM"));
}

#[test]
fn sampling_is_reproducible_across_thread_counts() {
    let base = ["sample", "--faces", "30", "--samples", "40", "--seed", "7", "--emit", "profile,summary", "--format", "json"];
    let one = mapforge(&[&base[..], &["--threads", "1"]].concat());
    let many = mapforge(&[&base[..], &["--threads", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_mapforge")).args(base).env("MAPFORGE_THREADS", "2").output().unwrap();
    assert_eq!(env.stdout, one.stdout);
    let doc: Value = serde_json::from_slice(&one.stdout).unwrap();
    let profiles = doc["results"]["profiles"].as_array().unwrap();
    assert_eq!(profiles.len(), 40);
    for p in profiles {
        let total: u64 = p.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
        assert_eq!(total, 32);
    }
}

#[test]
fn dumped_maps_are_quadrangulations() {
    let dir = std::env::temp_dir().join(format!("mapforge-dump-{}", std::process::id()));
    let path = dir.with_extension("json");
    let out = mapforge(&["sample", "--faces", "6", "--samples", "3", "--seed", "1", "--dump-maps", path.to_str().unwrap()]);
    assert!(out.status.success());
    let maps: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    for m in maps.as_array().unwrap() {
        let sigma: Vec<usize> = m["sigma"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
        let alpha: Vec<usize> = m["alpha"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
        let root = m["root"].as_u64().unwrap() as usize;
        let map = mapforge::fatgraph::CombinatorialMap::new(sigma, alpha, Some(root)).unwrap();
        let q = mapforge::bijections::RootedQuadrangulation::new(map).unwrap();
        assert_eq!(q.faces(), 6);
    }
}

#[test]
fn stringeq_and_local_outputs() {
    let doc = json(&["stringeq", "--m", "1", "--emit", "residues,commutator"]);
    assert_eq!(strings(&doc["results"]["residues"]), ["-1/2*u", "3/8*u^2 - 1/8*u''"]);
    let doc = json(&["local", "--emit", "P,profile", "--nmax", "2"]);
    assert_eq!(strings(&doc["results"]["P"]), ["3/8", "27/128"]);
    assert_eq!(strings(&doc["results"]["edges"])[..2], ["4", "19"]);
    assert_eq!(strings(&doc["results"]["vertices"]), ["1", "3", "54/5"]);
    let out = mapforge(&["geodesic", "--continuum", "--eps", "0.05", "--points", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
}
