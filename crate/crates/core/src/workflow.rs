//! File-level pipeline steps behind the command-line subcommands.
//!
//! Every step reads and writes plain CSV/JSON under a data directory:
//! `<name>.csv` (drive cycle), `<name>.trace.csv`, `<name>.reference.csv`,
//! `<name>.error.csv`, `normalization.json`, `model.json`, `history.csv`,
//! `metrics.csv`, `ranking.csv`.

use std::path::{Path, PathBuf};

use crate::analysis::{evaluate_hybrid, save_metrics, svd_rank, EvalMode, HybridEvaluation, RankingReport};
use crate::config::RunConfig;
use crate::cycle::{build_cycle, DriveCycle, Segment};
use crate::error::{Error, Result};
use crate::ga::{run_ga, GaResult, RegressionData};
use crate::io;
use crate::lfm::{simulate_cycle, VoltageTrace};
use crate::library::{FeatureLibrary, Normalization, Signals};
use crate::reference::{
    compute_error_series, generate_surrogate, surrogate_normalization, ReferenceTrace, ERROR_HEADER,
};
use crate::stridge::SparseErrorModel;

pub const NORMALIZATION_FILE: &str = "normalization.json";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RANKING_FILE: &str = "ranking.csv";

pub fn trace_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.trace.csv"))
}

pub fn reference_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.reference.csv"))
}

pub fn error_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.error.csv"))
}

/// A cycle argument is either an existing path or a name under `cycles_dir`.
pub fn resolve_cycle(cfg: &RunConfig, arg: &str) -> PathBuf {
    let direct = PathBuf::from(arg);
    if direct.is_file() {
        return direct;
    }
    let under = cfg.paths.cycles_dir.join(arg);
    if under.is_file() {
        return under;
    }
    cfg.paths.cycles_dir.join(format!("{arg}.csv"))
}

fn cycle_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cycle".into())
}

pub fn load_cycle(path: &Path) -> Result<DriveCycle> {
    let mut c = DriveCycle::load_csv(path)?;
    c.name = cycle_name(path);
    Ok(c)
}

/// Renders `segments` (ingested files resolve against `cycles_dir`) to `<out>/<name>.csv`.
pub fn cmd_build_cycle(cfg: &RunConfig, name: &str, segments: &[Segment], out: &Path) -> Result<PathBuf> {
    let segments: Vec<Segment> = segments
        .iter()
        .map(|s| match s {
            Segment::File(p) if p.is_relative() && !p.is_file() => {
                Segment::File(cfg.paths.cycles_dir.join(p))
            }
            other => other.clone(),
        })
        .collect();
    let cell = cfg.cell();
    let cycle = build_cycle(
        name,
        &segments,
        cell.nominal_capacity_ah(),
        cfg.dt,
        cfg.cycles.charge(),
    )?;
    let path = out.join(format!("{name}.csv"));
    cycle.save_csv(&path)?;
    Ok(path)
}

pub fn cmd_simulate(cfg: &RunConfig, cycle: &Path, out: &Path) -> Result<PathBuf> {
    let c = load_cycle(cycle)?;
    let trace = simulate_cycle(&cfg.cell(), &c)?;
    let path = trace_path(out, &c.name);
    trace.save_csv(&path)?;
    Ok(path)
}

/// For each cycle: the base trace, a reference (surrogate, or ingested from
/// `references_dir/<name>.csv`) and the error series. Surrogates with planted
/// terms pin their normalization in `normalization.json`, reusing an existing one.
pub fn cmd_gen_data(cfg: &RunConfig, cycles: &[PathBuf], out: &Path) -> Result<Vec<String>> {
    if cycles.is_empty() {
        return Err(Error::Config("gen-data needs at least one cycle".into()));
    }
    let cell = cfg.cell();
    let loaded: Vec<DriveCycle> = cycles.iter().map(|p| load_cycle(p)).collect::<Result<_>>()?;
    let mut names = Vec::new();
    if let Some(dir) = &cfg.paths.references_dir {
        for c in &loaded {
            let base = simulate_cycle(&cell, c)?;
            let reference = ReferenceTrace::load_csv(&dir.join(format!("{}.csv", c.name)))?;
            write_pair(out, &c.name, &base, &reference)?;
            names.push(c.name.clone());
        }
        return Ok(names);
    }

    let lib = FeatureLibrary::build(&cfg.library)?;
    let mut spec = cfg.surrogate.spec(&cell, &lib)?;
    let norm_path = out.join(NORMALIZATION_FILE);
    if norm_path.is_file() {
        spec.normalization = Some(load_normalization(&norm_path)?);
    } else if !spec.planted_terms.is_empty() {
        let bases: Vec<VoltageTrace> = loaded
            .iter()
            .map(|c| simulate_cycle(&cell, c))
            .collect::<Result<_>>()?;
        let n = surrogate_normalization(&concat_traces(&bases))?;
        io::atomic_write(&norm_path, serde_json::to_string_pretty(&n)?.as_bytes())?;
        spec.normalization = Some(n);
    }
    for (i, c) in loaded.iter().enumerate() {
        // distinct noise stream per cycle
        spec.seed = cfg.surrogate.seed.wrapping_add(i as u64);
        let run = generate_surrogate(&spec, c, &cell)?;
        write_pair(out, &c.name, &run.base, &run.reference)?;
        names.push(c.name.clone());
    }
    Ok(names)
}

fn write_pair(out: &Path, name: &str, base: &VoltageTrace, reference: &ReferenceTrace) -> Result<()> {
    let e_r = compute_error_series(reference, base)?;
    base.save_csv(&trace_path(out, name))?;
    reference.save_csv(&reference_path(out, name))?;
    io::write_csv(&error_path(out, name), &ERROR_HEADER, &[&base.t, &e_r])
}

fn concat_traces(traces: &[VoltageTrace]) -> VoltageTrace {
    let mut out = VoltageTrace::default();
    for t in traces {
        out.t.extend(&t.t);
        out.current.extend(&t.current);
        out.v_lfm.extend(&t.v_lfm);
        out.c_sp.extend(&t.c_sp);
        out.c_sn.extend(&t.c_sn);
    }
    out
}

pub fn load_normalization(path: &Path) -> Result<Normalization> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let n: Normalization = serde_json::from_str(&text)?;
    n.validate()?;
    Ok(n)
}

/// Base trace and error series of a generated cycle.
pub fn load_pair(dir: &Path, name: &str) -> Result<(VoltageTrace, Vec<f64>)> {
    let trace = VoltageTrace::load_csv(&trace_path(dir, name))?;
    let (t, e_r) = io::read_columns2(&error_path(dir, name), ERROR_HEADER)?;
    if t.len() != trace.len() {
        return Err(Error::Alignment {
            index: t.len().min(trace.len()),
            reason: format!("{name}: error series and trace lengths differ"),
        });
    }
    Ok((trace, e_r))
}

fn signals(trace: VoltageTrace, e_r: Vec<f64>) -> Result<Signals> {
    Signals::new(e_r, trace.current, trace.c_sp, trace.c_sn)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub result: GaResult,
}

impl TrainOutcome {
    pub fn feasible(&self) -> bool {
        !self.result.infeasible
    }
}

/// GA-STRidge on the named cycles in `data`; writes `model.json` and `history.csv` to `out`.
pub fn cmd_train(
    cfg: &RunConfig,
    data: &Path,
    train: &[String],
    valid: &str,
    out: &Path,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Config("train needs at least one training cycle".into()));
    }
    if train.iter().any(|t| t == valid) {
        return Err(Error::Config(format!("`{valid}` is both a training and the validation cycle")));
    }
    let ga = cfg.ga_with_seed()?;
    let train_signals: Vec<Signals> = train
        .iter()
        .map(|n| load_pair(data, n).and_then(|(t, e)| signals(t, e)))
        .collect::<Result<_>>()?;
    let (vt, ve) = load_pair(data, valid)?;
    let valid_signals = signals(vt, ve)?;

    let norm_path = data.join(NORMALIZATION_FILE);
    let normalization = if norm_path.is_file() {
        load_normalization(&norm_path)?
    } else {
        let mut all = Signals::default();
        for s in &train_signals {
            all.e_r.extend(&s.e_r);
            all.current.extend(&s.current);
            all.c_sp.extend(&s.c_sp);
            all.c_sn.extend(&s.c_sn);
        }
        Normalization::fit(all.columns())?
    };
    let lib = FeatureLibrary::build(&cfg.library)?.with_normalization(normalization);
    let train_data = RegressionData::new(&lib, &train_signals)?;
    let valid_data = RegressionData::new(&lib, &[valid_signals])?;
    let mut result = run_ga(&ga, &train_data, &valid_data, &lib)?;

    let meta = &mut result.best.model.metadata;
    meta.cycle_names = train.to_vec();
    meta.validation_cycle = Some(valid.to_string());
    meta.seed = Some(ga.seed);
    if cfg.record_timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        meta.timestamp = Some(format!("{secs}"));
    }
    let model_path = out.join(MODEL_FILE);
    let history_path = out.join(HISTORY_FILE);
    io::atomic_write(&model_path, result.best.model.to_json()?.as_bytes())?;
    result.save_history(&history_path)?;
    Ok(TrainOutcome {
        model_path,
        history_path,
        result,
    })
}

pub fn load_model(path: &Path) -> Result<SparseErrorModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SparseErrorModel::from_json(&text)
}

/// Free-running and one-step metrics for each named cycle; writes `metrics.csv`.
pub fn cmd_evaluate(
    model_path: &Path,
    data: &Path,
    cycles: &[String],
    out: &Path,
) -> Result<Vec<HybridEvaluation>> {
    let model = load_model(model_path)?;
    let mut reports = Vec::new();
    for name in cycles {
        let trace = VoltageTrace::load_csv(&trace_path(data, name))?;
        let reference = ReferenceTrace::load_csv(&reference_path(data, name))?;
        for mode in [EvalMode::FreeRunning, EvalMode::OneStep] {
            reports.push(evaluate_hybrid(&model, &trace, &reference, name, mode, 0.0)?);
        }
    }
    save_metrics(&out.join(METRICS_FILE), &reports)?;
    Ok(reports)
}

/// SVD ranking of the model's active features on one cycle; writes `ranking.csv`.
pub fn cmd_rank(model_path: &Path, data: &Path, cycle: &str, out: &Path) -> Result<RankingReport> {
    let model = load_model(model_path)?;
    let (trace, e_r) = load_pair(data, cycle)?;
    let report = svd_rank(&model, &trace, &e_r)?;
    report.save_csv(&out.join(RANKING_FILE))?;
    Ok(report)
}
