use std::fs;

use serde_json::json;

use super::*;

fn write_config(dir: &Path, value: serde_json::Value) -> PathBuf {
    let path = dir.join("campaign.json");
    fs::write(&path, serde_json::to_vec_pretty(&value).unwrap()).unwrap();
    path
}

fn ou() -> serde_json::Value {
    json!({ "kind": "test", "rates": [1.0], "weights": [1.0], "amplitudes": [2.0f64.sqrt()] })
}

#[test]
fn registry_is_sorted_and_referenced() {
    let probes = list_probes();
    assert!(probes.len() >= 10);
    assert!(probes.windows(2).all(|w| w[0].name < w[1].name));
    assert!(probes.iter().all(|p| !p.paper_ref.is_empty() && !p.kinds.is_empty()));
}

#[test]
fn empty_probe_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "schema": CAMPAIGN_SCHEMA, "kind": "chainlab", "seed": 1, "output_dir": "out" }));
    let m = run_campaign(&cfg, &RunOptions::default()).unwrap();
    assert!(m.verdicts.is_empty() && m.passed);
    let rep = emit_report(&dir.path().join("out")).unwrap();
    assert!(rep.summary.contains("no probes"));
    assert!(rep.summary.contains(&m.config_digest));
}

#[test]
fn schema_and_field_violations() {
    let bad = [
        json!({ "schema": "ergoverify-campaign-v0", "kind": "chainlab", "seed": 1 }),
        json!({ "schema": CAMPAIGN_SCHEMA, "kind": "chainlab", "seed": 1, "surprise": 2 }),
        json!({ "schema": CAMPAIGN_SCHEMA, "kind": "chainlab" }),
        json!({ "schema": CAMPAIGN_SCHEMA, "kind": "explore", "seed": 1 }),
    ];
    for v in bad {
        assert!(CampaignConfig::from_json(&v.to_string()).is_err(), "{v}");
    }
    let dir = tempfile::tempdir().unwrap();
    let run = |v: serde_json::Value| run_config(&serde_json::from_value(v).unwrap(), dir.path(), &RunOptions { out: Some(dir.path().join("o")), seed_override: None });
    let unknown = run(json!({ "schema": CAMPAIGN_SCHEMA, "kind": "chainlab", "seed": 1, "probes": [{ "probe": "telepathy" }] }));
    assert!(matches!(unknown, Err(Error::UnknownProbe(_))));
    let typo = run(json!({ "schema": CAMPAIGN_SCHEMA, "kind": "chainlab", "seed": 1, "probes": [{ "probe": "grid_kernel", "params": { "cels": 8 } }] }));
    assert!(matches!(typo, Err(Error::Config(_))));
    let wrong_kind = run(json!({ "schema": CAMPAIGN_SCHEMA, "kind": "chainlab", "seed": 1, "model": ou(), "probes": [{ "probe": "lyapunov" }] }));
    assert!(matches!(wrong_kind, Err(Error::Config(_))));
    let no_model = run(json!({ "schema": CAMPAIGN_SCHEMA, "kind": "verify", "seed": 1, "probes": [{ "probe": "lyapunov" }] }));
    assert!(matches!(no_model, Err(Error::Config(_))));
    let missing = run(json!({ "schema": CAMPAIGN_SCHEMA, "kind": "verify", "seed": 1, "model_file": "absent.json" }));
    assert!(matches!(missing, Err(Error::Config(msg)) if msg.contains("missing model file")));
}

fn chainlab_config() -> serde_json::Value {
    json!({
        "schema": CAMPAIGN_SCHEMA,
        "name": "chains",
        "kind": "chainlab",
        "seed": 7,
        "probes": [
            { "probe": "chain_consistency", "params": { "count": 50 } },
            { "probe": "measure_decomposition", "params": { "count": 10 } },
            { "probe": "grid_kernel", "params": { "cells": 32, "refine": 64, "tv_tolerance": 0.05 } }
        ]
    })
}

#[test]
fn chainlab_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), chainlab_config());
    let a = run_campaign(&cfg, &RunOptions { out: Some(dir.path().join("a")), seed_override: None }).unwrap();
    let b = run_campaign(&cfg, &RunOptions { out: Some(dir.path().join("b")), seed_override: None }).unwrap();
    assert!(a.passed, "{:#?}", a.verdicts);
    assert_eq!(a.config_digest, b.config_digest);
    assert_eq!(a.verdict_digest, b.verdict_digest);
    assert_eq!(a.verdicts, b.verdicts);
    for f in &a.artifacts {
        assert!(fs::metadata(dir.path().join("a").join(f)).unwrap().len() > 0, "{f}");
    }
    let c = run_campaign(&cfg, &RunOptions { out: Some(dir.path().join("c")), seed_override: Some(8) }).unwrap();
    assert_ne!(a.config_digest, c.config_digest);
    assert_eq!(c.seed, 8);
}

#[test]
fn report_flags_missing_artifacts_and_counts_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = chainlab_config();
    v["probes"] = json!([{ "probe": "grid_kernel", "params": { "cells": 16, "refine": 32, "tv_tolerance": 1.0 } }]);
    let cfg = write_config(dir.path(), v);
    let out = dir.path().join("run");
    let m = run_campaign(&cfg, &RunOptions { out: Some(out.clone()), seed_override: None }).unwrap();
    let rep = emit_report(&out).unwrap();
    assert_eq!(rep.summary.matches("PASS").count(), 1);
    assert!(rep.summary.contains(&m.config_digest));
    let table = fs::read_to_string(&rep.tables[0]).unwrap();
    assert!(table.starts_with("probe,x,t,value,lo,hi\n"));
    fs::remove_file(out.join(&m.artifacts[0])).unwrap();
    assert!(matches!(emit_report(&out), Err(Error::MissingArtifact(_))));
    assert!(matches!(emit_report(&dir.path().join("nowhere")), Err(Error::MissingArtifact(_))));
}

#[test]
fn report_only_failures_do_not_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "schema": CAMPAIGN_SCHEMA, "kind": "chainlab", "seed": 3,
        "probes": [{ "probe": "grid_kernel", "assert": false, "params": { "cells": 16, "refine": 32, "tv_tolerance": 0.0 } }]
    });
    let m = run_config(&serde_json::from_value(v.clone()).unwrap(), dir.path(), &RunOptions { out: Some(dir.path().join("r")), seed_override: None }).unwrap();
    assert!(!m.verdicts[0].verdict.pass && m.passed);
    let mut v = v;
    v["probes"][0]["assert"] = json!(true);
    let m = run_config(&serde_json::from_value(v).unwrap(), dir.path(), &RunOptions { out: Some(dir.path().join("s")), seed_override: None }).unwrap();
    assert!(!m.passed);
}

#[test]
fn ou_verify_campaign() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ou.json"), serde_json::to_vec(&json!({ "schema": "ergoverify-model-v1", "model": ou() })).unwrap()).unwrap();
    let v = json!({
        "schema": CAMPAIGN_SCHEMA, "kind": "verify", "seed": 11, "model_file": "ou.json",
        "budget": { "horizon": 4.0, "dt": 0.01, "stride": 20, "paths": 400 },
        "probes": [
            { "probe": "simulate", "params": { "x0": { "coords": [2.0] } } },
            { "probe": "lyapunov", "params": { "x0s": [{ "coords": [2.0] }, "zero"] } },
            { "probe": "condition_c", "params": { "eps": 1.0, "x0s": ["zero", { "coords": [3.0] }] } },
            { "probe": "irreducibility", "params": { "eps": 1.0, "r": 4.0, "starts": 4 } },
            { "probe": "lbc_composition", "params": { "r": 8.0 } },
            { "probe": "stability", "params": { "x": "zero", "y": { "coords": [1.0] } } },
            { "probe": "hypotheses" }
        ]
    });
    let cfg = write_config(dir.path(), v);
    let m = run_campaign(&cfg, &RunOptions { out: Some(dir.path().join("o")), seed_override: None }).unwrap();
    let names: Vec<&str> = m.verdicts.iter().map(|e| e.verdict.probe.as_str()).collect();
    assert_eq!(names, ["simulate", "lyapunov", "condition_c", "irreducibility", "lbc_composition", "stability", "hypotheses"]);
    assert!(m.passed, "{}", summary_text(&m));
    assert!(m.artifacts.iter().any(|a| a.ends_with("simulate_paths.csv")));
    assert!(m.verdicts.iter().all(|e| e.verdict.config_digest == m.config_digest));
}

#[test]
fn state_specs_resolve() {
    let model = crate::models::ModelSpec::Test(serde_json::from_value(json!({ "rates": [1.0, 4.0], "weights": [1.0, 4.0], "amplitudes": [1.0, 1.0] })).unwrap()).build().unwrap();
    assert_eq!(StateSpec::Zero.resolve(&model).unwrap(), vec![0.0, 0.0]);
    assert_eq!(StateSpec::Mode { index: 1, amplitude: 2.0 }.resolve(&model).unwrap(), vec![0.0, 2.0]);
    assert!(StateSpec::Coords(vec![1.0]).resolve(&model).is_err());
    let x = StateSpec::Random { norm: 3.0, seed: 5 }.resolve(&model).unwrap();
    let r = model.metric_exponent();
    assert!((crate::sde::weighted_norm_sq(&[1.0, 4.0], &x, r).sqrt() - 3.0).abs() < 1e-12);
    let y = StateSpec::Shift { from: Box::new(StateSpec::Random { norm: 3.0, seed: 5 }), by: 0.1, seed: 9 }.resolve(&model).unwrap();
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    assert!((crate::sde::weighted_norm_sq(&[1.0, 4.0], &d, r).sqrt() - 0.1).abs() < 1e-12);
    let parsed: Vec<StateSpec> = serde_json::from_value(json!(["zero", { "coords": [1, 2] }, { "random": { "norm": 1, "seed": 2 } }])).unwrap();
    assert_eq!(parsed.len(), 3);
}
