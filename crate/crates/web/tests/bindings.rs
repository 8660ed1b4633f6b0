use gastridge_web::{simulate_json, train_json};
use serde_json::Value;

#[test]
fn simulate_returns_aligned_series() {
    let r: Value = serde_json::from_str(&simulate_json(r#"{"duration_s": 300, "diffusion": 1.2}"#).unwrap()).unwrap();
    let n = r["t"].as_array().unwrap().len();
    assert_eq!(n, 300);
    for key in ["current", "v_base", "v_scaled"] {
        assert_eq!(r[key].as_array().unwrap().len(), n);
    }
    assert_ne!(r["v_base"], r["v_scaled"]);
}

#[test]
fn simulate_rejects_bad_json() {
    assert!(simulate_json("{").is_err());
}

#[test]
fn train_recovers_planted_terms() {
    let r: Value = serde_json::from_str(&train_json("{}").unwrap()).unwrap();
    let labels: Vec<&str> = r["recovered"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["e_r", "I", "cos(c_sp)"]);
    assert!(r["rmse_hybrid"].as_f64().unwrap() < 1e-9);
    let ranking = r["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 3);
    let last = ranking[2]["cumulative_info"].as_f64().unwrap();
    assert!((last - 1.0).abs() < 1e-9);
}
