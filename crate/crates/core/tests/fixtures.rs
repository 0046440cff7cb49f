use std::path::PathBuf;

use faultdrive::agent::{load_weights, nn_forward, nn_raw};
use faultdrive::campaign::{compute_metrics, parse_episodes, ResolvedCampaign};
use faultdrive::faultlib::{inject_ml_fault, select_locations, FaultSpec};
use faultdrive::rng::SimRng;
use faultdrive::world::load_scenario_file;
use serde_json::{json, Value};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read_json(rel: &str) -> Value {
    let text = std::fs::read_to_string(root().join(rel)).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn rng_stream_matches_reference() {
    let f = read_json("fixtures/rng-stream.json");
    let mut rng = SimRng::seed_from_u64(f["seed"].as_u64().unwrap());
    for v in f["u64"].as_array().unwrap() {
        assert_eq!(rng.next_u64(), v.as_str().unwrap().parse::<u64>().unwrap());
    }
    for v in f["uniform"].as_array().unwrap() {
        assert_eq!(rng.uniform(), v.as_f64().unwrap());
    }
    for v in f["normal"].as_array().unwrap() {
        let n = rng.normal();
        assert!((n - v.as_f64().unwrap()).abs() < 1e-12, "{n} vs {v}");
    }
}

#[test]
fn reference_mlp_matches_python_forward_pass() {
    let w = load_weights(&root().join("weights/ref-mlp.json")).unwrap();
    assert_eq!(w.layers.len(), 3);
    assert_eq!(w.shape(), vec![(16, 36), (8, 16), (3, 8)]);
    let f = read_json("fixtures/ref-mlp-io.json");
    let input: Vec<f64> = f["input"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let raw = nn_raw(&input, &w).unwrap();
    for (a, b) in raw.iter().zip(f["raw_output"].as_array().unwrap()) {
        assert!((a - b.as_f64().unwrap()).abs() < 1e-12);
    }
    let cmd = nn_forward(&input, &w, 0).unwrap();
    for (got, key) in [(cmd.steer, "steer"), (cmd.throttle, "throttle"), (cmd.brake, "brake")] {
        assert!((got - f["command"][key].as_f64().unwrap()).abs() < 1e-9, "{key}");
    }
}

#[test]
fn gaussian_weight_noise_matches_reference() {
    let w = load_weights(&root().join("weights/ref-mlp.json")).unwrap();
    let f = read_json("fixtures/ml-gaussian-layer0.json");
    let (rows, cols) = w.shape()[0];
    let spec: FaultSpec = serde_json::from_value(json!({
        "id": "layer0-noise", "class": "ml",
        "target": {"ml_location": {"kind": "explicit", "layer": 0,
                   "rows": (0..rows).collect::<Vec<_>>(), "cols": (0..cols).collect::<Vec<_>>()}},
        "params": {"model": "gaussian", "sigma": f["sigma"]},
        "trigger": {"start": 0, "duration": "persistent", "prob": 1.0}, "seed": 0
    }))
    .unwrap();
    let locs = select_locations(&w.shape(), &spec).unwrap();
    assert_eq!(locs.len(), rows * cols);
    let mut rng = SimRng::seed_from_u64(f["seed"].as_u64().unwrap());
    let out = inject_ml_fault(&w, &locs, &spec, &mut rng).unwrap();
    for (r, row) in f["w"].as_array().unwrap().iter().enumerate() {
        for (c, v) in row.as_array().unwrap().iter().enumerate() {
            assert!((out.layers[0].w[r][c] - v.as_f64().unwrap()).abs() < 1e-12, "({r}, {c})");
        }
    }
    assert_eq!(out.layers[1], w.layers[1]);
    assert_eq!(out.layers[0].b, w.layers[0].b);
}

#[test]
fn town_a_layout() {
    let w = load_scenario_file(&root().join("scenarios/calibration/town-A.json")).unwrap();
    assert_eq!(w.map.lanes().len(), 12);
    assert_eq!(w.actors.len(), 4);
    assert_eq!(w.tick_rate, 15);
}

#[test]
fn every_bundled_scenario_and_campaign_loads() {
    let mut n = 0;
    for e in std::fs::read_dir(root().join("scenarios/calibration")).unwrap() {
        load_scenario_file(&e.unwrap().path()).unwrap();
        n += 1;
    }
    assert_eq!(n, 20);
    for e in std::fs::read_dir(root().join("campaigns")).unwrap() {
        let p = e.unwrap().path();
        ResolvedCampaign::load(&p, &[]).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn metric_oracle() {
    let text = std::fs::read_to_string(root().join("fixtures/metric-oracle/episodes.jsonl")).unwrap();
    let records = parse_episodes(&text).unwrap();
    assert_eq!(records.len(), 6);
    let e = read_json("fixtures/metric-oracle/expected.json");
    let m = compute_metrics(&records).unwrap();
    assert_eq!(m.episodes as u64, e["episodes"].as_u64().unwrap());
    assert_eq!(m.successes as u64, e["successes"].as_u64().unwrap());
    assert_eq!(m.msr_percent, e["msr_percent"].as_f64().unwrap());
    assert_eq!(m.total_distance_km, e["total_distance_km"].as_f64().unwrap());
    assert_eq!(m.violations as u64, e["violations"].as_u64().unwrap());
    assert_eq!(m.accidents as u64, e["accidents"].as_u64().unwrap());
    assert_eq!(m.vpk, e["vpk"].as_f64());
    assert_eq!(m.apk, e["apk"].as_f64());
    assert_eq!(serde_json::to_value(&m.zero_distance_trials).unwrap(), e["zero_distance_trials"]);
    assert_eq!(serde_json::to_value(&m.ttv_samples).unwrap(), e["ttv_samples"]);
    let ttv = m.ttv.as_ref().unwrap();
    assert_eq!(ttv.mean, e["ttv_mean"].as_f64().unwrap());
    assert_eq!(ttv.p50, e["ttv_median"].as_f64().unwrap());
    let per = m.vpk_per_episode.as_ref().unwrap();
    assert_eq!(per.mean, e["vpk_per_episode_mean"].as_f64().unwrap());
    let expected_per: Vec<f64> = e["vpk_per_episode"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let got_per: Vec<f64> = m.trials.iter().filter(|t| t.km > 0.0).map(|t| t.violations as f64 / t.km).collect();
    assert_eq!(got_per, expected_per);
    // pooled-rate consistency
    assert!((m.vpk.unwrap() * m.total_distance_km - m.violations as f64).abs() < 1e-9);
    assert!(m.apk.unwrap() <= m.vpk.unwrap());
}
