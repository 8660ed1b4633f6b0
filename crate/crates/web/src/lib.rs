//! JSON-in/JSON-out bindings used by `www/index.html`.
//!
//! Each exported function also has a plain Rust twin (`*_json`) so the
//! logic is testable natively.

use gastridge::analysis::{evaluate_hybrid, svd_rank, EvalMode};
use gastridge::config::Perturbation;
use gastridge::cycle::{DriveCycle, Segment};
use gastridge::ga::{run_ga, GaConfig, RegressionData};
use gastridge::library::{Family, FeatureLibrary, LibraryConfig, Signals};
use gastridge::lfm::{simulate_cycle, CellParameters};
use gastridge::reference::{
    compute_error_series, generate_surrogate, surrogate_normalization, PlantedTerm, SurrogateSpec,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SimulateRequest {
    /// "walk" or "pulse"
    pub profile: String,
    pub c_rate: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub diffusion: f64,
    pub reaction_rate: f64,
    pub conductivity: f64,
}

impl Default for SimulateRequest {
    fn default() -> Self {
        SimulateRequest {
            profile: "walk".into(),
            c_rate: 2.0,
            duration_s: 1200.0,
            seed: 1,
            diffusion: 1.0,
            reaction_rate: 1.0,
            conductivity: 1.0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateResponse {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub v_base: Vec<f64>,
    pub v_scaled: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct TrainRequest {
    pub noise_std: f64,
    pub seed: u64,
    pub duration_s: f64,
    /// Coefficients of e_r, I and cos(c_sp) in the planted recursion.
    pub planted: [f64; 3],
}

impl Default for TrainRequest {
    fn default() -> Self {
        TrainRequest {
            noise_std: 0.0,
            seed: 7,
            duration_s: 1500.0,
            planted: [0.6, 0.05, 0.04],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Term {
    pub label: String,
    pub coefficient: f64,
}

#[derive(Debug, Serialize)]
pub struct RankedTerm {
    pub label: String,
    pub xbar: f64,
    pub cumulative_info: f64,
}

#[derive(Debug, Serialize)]
pub struct TrainResponse {
    pub t: Vec<f64>,
    pub e_r: Vec<f64>,
    pub e_hat: Vec<f64>,
    pub planted: Vec<Term>,
    pub recovered: Vec<Term>,
    pub best_fitness: Vec<f64>,
    pub rmse_lfm: f64,
    pub rmse_hybrid: f64,
    pub pearson_rho: Option<f64>,
    pub ranking: Vec<RankedTerm>,
}

fn drive(profile: &str, c_rate: f64, duration_s: f64, seed: u64, capacity: f64) -> Result<DriveCycle, String> {
    let seg = match profile {
        "pulse" => Segment::Pulse {
            c_rate,
            on_s: 60.0,
            off_s: 60.0,
            duration_s,
        },
        _ => Segment::RandomWalk {
            duration_s,
            max_c_rate: c_rate,
            regen_c_rate: 0.4 * c_rate,
            max_hold_s: 20.0,
            seed,
        },
    };
    let current = seg.render(capacity, 1.0).map_err(|e| e.to_string())?;
    DriveCycle::from_current(profile, 1.0, current).map_err(|e| e.to_string())
}

pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let base = CellParameters::default();
    let scaled = Perturbation {
        diffusion: req.diffusion,
        reaction_rate: req.reaction_rate,
        conductivity: req.conductivity,
    }
    .apply(&base);
    let cycle = drive(&req.profile, req.c_rate, req.duration_s, req.seed, base.nominal_capacity_ah())?;
    let a = simulate_cycle(&base, &cycle).map_err(|e| e.to_string())?;
    let b = simulate_cycle(&scaled, &cycle).map_err(|e| e.to_string())?;
    serde_json::to_string(&SimulateResponse {
        t: a.t,
        current: a.current,
        v_base: a.v_lfm,
        v_scaled: b.v_lfm,
    })
    .map_err(|e| e.to_string())
}

/// Plants a three-term error recursion, searches for it with GA-STRidge and
/// ranks the recovered terms on a held-out cycle.
pub fn train_json(request: &str) -> Result<String, String> {
    let req: TrainRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let err = |e: gastridge::Error| e.to_string();
    let p = CellParameters::default();
    let cap = p.nominal_capacity_ah();
    let lib = FeatureLibrary::build(&LibraryConfig::default()).map_err(err)?;
    let term = |f, e, c| PlantedTerm {
        descriptor: lib.descriptors[lib.find(f, e).expect("term in default library")],
        coefficient: c,
    };
    let planted = vec![
        term(Family::Pol, [1, 0, 0, 0], req.planted[0]),
        term(Family::Pol, [0, 1, 0, 0], req.planted[1]),
        term(Family::Cos, [0, 0, 1, 0], req.planted[2]),
    ];
    let cycles = [
        drive("walk", 2.0, req.duration_s, req.seed, cap)?,
        drive("walk", 2.0, req.duration_s / 2.0, req.seed + 1, cap)?,
        drive("walk", 2.0, req.duration_s / 2.0, req.seed + 2, cap)?,
    ];
    let base = simulate_cycle(&p, &cycles[0]).map_err(err)?;
    let mut spec = SurrogateSpec::identity(&p);
    spec.planted_terms = planted.clone();
    spec.noise_std = req.noise_std;
    spec.seed = req.seed;
    spec.normalization = Some(surrogate_normalization(&base).map_err(err)?);
    let runs = cycles
        .iter()
        .map(|c| generate_surrogate(&spec, c, &p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let signals = |i: usize| -> Result<Signals, String> {
        let r = &runs[i];
        let e = compute_error_series(&r.reference, &r.base).map_err(err)?;
        Signals::new(e, r.base.current.clone(), r.base.c_sp.clone(), r.base.c_sn.clone()).map_err(err)
    };
    let lib = lib.with_normalization(runs[0].normalization);
    let train = RegressionData::new(&lib, &[signals(0)?]).map_err(err)?;
    let valid = RegressionData::new(&lib, &[signals(1)?]).map_err(err)?;
    let cfg = GaConfig {
        seed: req.seed,
        ..GaConfig::default()
    };
    let result = run_ga(&cfg, &train, &valid, &lib).map_err(err)?;
    let model = &result.best.model;
    let test = &runs[2];
    let eval = evaluate_hybrid(model, &test.base, &test.reference, "test", EvalMode::FreeRunning, 0.0)
        .map_err(err)?;
    let ranking = svd_rank(model, &test.base, &eval.e_r)
        .map(|r| {
            r.features
                .iter()
                .map(|f| RankedTerm {
                    label: lib.descriptors[f.descriptor_id].label(),
                    xbar: f.xbar,
                    cumulative_info: f.cumulative_info,
                })
                .collect()
        })
        .unwrap_or_default();
    let response = TrainResponse {
        t: test.base.t.clone(),
        planted: planted
            .iter()
            .map(|t| Term {
                label: t.descriptor.label(),
                coefficient: t.coefficient,
            })
            .collect(),
        recovered: model
            .selected
            .descriptors
            .iter()
            .zip(&model.xi)
            .filter(|(_, x)| **x != 0.0)
            .map(|(d, x)| Term {
                label: d.label(),
                coefficient: *x,
            })
            .collect(),
        best_fitness: result.history.iter().map(|h| h.best_fitness).collect(),
        rmse_lfm: eval.lfm.rmse,
        rmse_hybrid: eval.hybrid.rmse,
        pearson_rho: eval.hybrid.pearson_rho,
        e_r: eval.e_r,
        e_hat: eval.e_hat,
        ranking,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    simulate_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn train(request: &str) -> Result<String, JsError> {
    train_json(request).map_err(|e| JsError::new(&e))
}
