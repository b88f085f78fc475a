use std::fs;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use spacing::spec::{DesignSpec, DistSpec, SpacingSpec};

fn spacing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spacing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const MNOM_50_10: &str = r#"{"kind":"circular","N":50,"n":10,"spacings":{"family":"mnom"}}"#;
const SRS_10_2: &str = r#"{"kind":"circular","N":10,"n":2,"spacings":{"family":"srs"}}"#;
const MNH_8_3: &str = r#"{"kind":"circular","N":8,"n":3,"spacings":{"family":"mnh","r":2.0}}"#;

#[test]
fn sample_prints_sorted_units() {
    let o = spacing(&["sample", "--design", MNOM_50_10, "--seed", "42", "--count", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let units: Vec<usize> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(units.len(), 10);
        assert!(units.windows(2).all(|w| w[0] < w[1]));
        assert!(units.iter().all(|&k| (1..=50).contains(&k)));
    }
}

#[test]
fn same_seed_same_bytes() {
    let args = ["sample", "--design", MNOM_50_10, "--seed", "7", "--count", "20"];
    assert_eq!(spacing(&args).stdout, spacing(&args).stdout);
    let other = spacing(&["sample", "--design", MNOM_50_10, "--seed", "8", "--count", "20"]);
    assert_ne!(spacing(&args).stdout, other.stdout);
}

#[test]
fn sample_reads_design_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("design.json");
    fs::write(&path, MNOM_50_10).unwrap();
    let from_file = spacing(&["sample", "--design", path.to_str().unwrap(), "--seed", "1"]);
    let inline = spacing(&["sample", "--design", MNOM_50_10, "--seed", "1"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, inline.stdout);
}

#[test]
fn srs_joint_curve_is_flat() {
    let o = spacing(&["inclusion", "--design", SRS_10_2]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gap,pi_joint,delta"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for (g, row) in rows.iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], (g + 1).to_string());
        assert!((f[1].parse::<f64>().unwrap() - 1.0 / 45.0).abs() < 1e-15);
        assert!((f[2].parse::<f64>().unwrap() - (1.0 / 45.0 - 0.04)).abs() < 1e-15);
    }
}

#[test]
fn first_order_vector_of_renewal_design() {
    let d = r#"{"kind":"renewal","N":6,"jump":{"family":"degenerate","c":1}}"#;
    let o = spacing(&["inclusion", "--design", d, "--first-order"]);
    assert!(o.status.success());
    let pis: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(pis, ["0", "1", "0", "1", "0", "1"]);
}

#[test]
fn verify_small_mnh_design() {
    let o = spacing(&["verify", "--design", MNH_8_3, "--reps", "20000", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
    assert!((report["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(report["checks"].as_array().unwrap().len() >= 6);
}

#[test]
fn verify_refuses_large_enumeration() {
    let d = r#"{"kind":"circular","N":200,"n":50,"spacings":{"family":"srs"}}"#;
    let o = spacing(&["verify", "--design", d]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "too_large");
}

#[test]
fn pmf_of_a_distribution_and_a_sample() {
    let o = spacing(&["pmf", "--dist", r#"{"family":"geometric","p":0.5}"#, "--max", "2"]);
    assert_eq!(stdout(&o), "x,pmf,cdf\n0,0.5,0.5\n1,0.25,0.75\n2,0.125,0.875\n");
    let o = spacing(&["pmf", "--design", SRS_10_2, "--units", "3,9", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["probability"].as_f64().unwrap() - 1.0 / 45.0).abs() < 1e-15);
}

#[test]
fn estimate_writes_point_and_interval() {
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("y.csv");
    let sample = dir.path().join("s.csv");
    fs::write(&pop, "y\n1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n").unwrap();
    fs::write(&sample, "unit\n2\n7\n").unwrap();
    let o = spacing(&[
        "estimate",
        "--design",
        SRS_10_2,
        "--sample",
        sample.to_str().unwrap(),
        "--population",
        pop.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // HT total 5 * (2 + 7); SYG variance N^2 (1 - n/N) s^2 / n with s^2 = 12.5
    assert!((v["point"].as_f64().unwrap() - 45.0).abs() < 1e-12);
    assert!((v["variance_syg"].as_f64().unwrap() - 500.0).abs() < 1e-9);
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() < 45.0 && ci[1].as_f64().unwrap() > 45.0);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let cfg = r#"{"N":60,"n":12,"reps":200}"#;
    let one = spacing(&["simulate", "--config", cfg, "--seed", "5", "--threads", "1"]);
    let four = spacing(&["simulate", "--config", cfg, "--seed", "5", "--threads", "4"]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
    let text = stdout(&one);
    assert_eq!(
        text.lines().next(),
        Some("design,BR,SE,REVAR,CV,coverage,reps,excluded")
    );
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn simulate_requires_a_seed() {
    let o = spacing(&["simulate", "--config", r#"{"N":60,"n":12,"reps":10}"#]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "input");
}

#[test]
fn exit_codes() {
    assert_eq!(spacing(&["--help"]).status.code(), Some(0));
    assert_eq!(spacing(&["--version"]).status.code(), Some(0));
    let o = spacing(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "usage");
    let bad = r#"{"kind":"circular","N":5,"n":9,"spacings":{"family":"mnom"}}"#;
    let o = spacing(&["sample", "--design", bad, "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "domain");
}

fn dist_spec() -> impl Strategy<Value = DistSpec> {
    let leaf = prop_oneof![
        (0.0f64..=1.0).prop_map(|p| DistSpec::Bernoulli { p }),
        (0u64..50, 0.0f64..=1.0).prop_map(|(n, p)| DistSpec::Binomial { n, p }),
        (0.01f64..=1.0).prop_map(|p| DistSpec::Geometric { p }),
        (0.1f64..10.0, 0.01f64..=1.0).prop_map(|(r, p)| DistSpec::NegBinomial { r, p }),
        (0.0f64..30.0).prop_map(|lambda| DistSpec::Poisson { lambda }),
        (0u64..20).prop_map(|a| DistSpec::Uniform { a }),
        (0u64..20).prop_map(|c| DistSpec::Degenerate { c }),
    ];
    leaf.prop_recursive(2, 4, 1, |inner| {
        inner.prop_map(|d| DistSpec::Forward { inner: Box::new(d) })
    })
}

fn design_spec() -> impl Strategy<Value = DesignSpec> {
    prop_oneof![
        (2usize..500, 1usize..50, 0.01f64..100.0).prop_map(|(big_n, n, r)| DesignSpec::Circular {
            population: big_n.max(n),
            n,
            spacings: SpacingSpec::Mnh { r },
        }),
        (2usize..500, 1usize..50).prop_map(|(big_n, n)| DesignSpec::Circular {
            population: big_n.max(n),
            n,
            spacings: SpacingSpec::Mnom,
        }),
        (1usize..500, dist_spec()).prop_map(|(population, jump)| DesignSpec::Renewal { population, jump }),
        (1usize..500, dist_spec())
            .prop_map(|(population, jump)| DesignSpec::Equilibrium { population, jump }),
    ]
}

proptest! {
    #[test]
    fn design_json_round_trips(spec in design_spec()) {
        let text = serde_json::to_string(&spec).unwrap();
        let back: DesignSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        let design = spec.to_design().unwrap();
        prop_assert_eq!(DesignSpec::from_design(&design), spec);
    }
}
