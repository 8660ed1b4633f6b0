//! Error metrics, hybrid evaluation and SVD feature ranking.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::library::{Family, Signals, N_SIGNALS};
use crate::lfm::VoltageTrace;
use crate::reference::{compute_error_series, ReferenceTrace};
use crate::stridge::SparseErrorModel;

pub const METRICS_HEADER: [&str; 7] = [
    "cycle",
    "mode",
    "rmse_lfm_v",
    "rmse_hybrid_v",
    "rrr_pct",
    "mse_er_v2",
    "pearson_rho",
];

pub const RANKING_HEADER: [&str; 6] = [
    "rank",
    "descriptor_id",
    "family",
    "exponents",
    "xbar",
    "cumulative_info",
];

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    mse(a, b).sqrt()
}

/// Sample Pearson correlation; `None` when either series is constant or too short.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Relative RMSE reduction in percent; `None` when the baseline is exact.
pub fn rrr(rmse_lfm: f64, rmse_hybrid: f64) -> Option<f64> {
    if rmse_lfm > 0.0 {
        Some(100.0 * (rmse_lfm - rmse_hybrid) / rmse_lfm)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    OneStep,
    FreeRunning,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::OneStep => "one_step",
            EvalMode::FreeRunning => "free_running",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cycle_name: String,
    pub mode: EvalMode,
    /// Voltage error against the reference, V^2.
    pub mse: f64,
    pub rmse: f64,
    /// Correlation of e_r with the estimate; `None` when undefined.
    pub pearson_rho: Option<f64>,
    pub rrr_percent: Option<f64>,
}

/// Baseline and hybrid reports for one cycle, plus the series behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridEvaluation {
    pub lfm: MetricsReport,
    pub hybrid: MetricsReport,
    pub e_r: Vec<f64>,
    pub e_hat: Vec<f64>,
    pub v_hybrid: Vec<f64>,
    pub mse_er: f64,
}

impl HybridEvaluation {
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), io::fmt_f64);
        vec![
            self.hybrid.cycle_name.clone(),
            self.hybrid.mode.name().to_string(),
            io::fmt_f64(self.lfm.rmse),
            io::fmt_f64(self.hybrid.rmse),
            opt(self.hybrid.rrr_percent),
            io::fmt_f64(self.mse_er),
            opt(self.hybrid.pearson_rho),
        ]
    }
}

pub fn save_metrics(path: &Path, reports: &[HybridEvaluation]) -> Result<()> {
    let rows: Vec<Vec<String>> = reports.iter().map(HybridEvaluation::csv_row).collect();
    io::write_rows(path, &METRICS_HEADER, &rows)
}

/// `V_hybrid = V_lfm + e_hat`, with `e_hat` free-running from `e_r0`
/// (or teacher-forced in [`EvalMode::OneStep`]).
pub fn evaluate_hybrid(
    model: &SparseErrorModel,
    lfm: &VoltageTrace,
    reference: &ReferenceTrace,
    cycle_name: &str,
    mode: EvalMode,
    e_r0: f64,
) -> Result<HybridEvaluation> {
    let e_r = compute_error_series(reference, lfm)?;
    let e_hat = match mode {
        EvalMode::FreeRunning => model.simulate_recursive(lfm, e_r0)?,
        EvalMode::OneStep => {
            let signals = Signals::new(
                e_r.clone(),
                lfm.current.clone(),
                lfm.c_sp.clone(),
                lfm.c_sn.clone(),
            )?;
            let mut out = vec![e_r0];
            out.extend(model.predict_teacher_forced(&signals).into_iter().take(e_r.len().saturating_sub(1)));
            out.truncate(e_r.len());
            out
        }
    };
    let v_hybrid: Vec<f64> = lfm.v_lfm.iter().zip(&e_hat).map(|(v, e)| v + e).collect();
    let mse_lfm = mse(&lfm.v_lfm, &reference.v_ref);
    let mse_hyb = mse(&v_hybrid, &reference.v_ref);
    let rho = pearson(&e_r, &e_hat);
    let lfm_report = MetricsReport {
        cycle_name: cycle_name.to_string(),
        mode,
        mse: mse_lfm,
        rmse: mse_lfm.sqrt(),
        pearson_rho: None,
        rrr_percent: Some(0.0),
    };
    let hybrid = MetricsReport {
        cycle_name: cycle_name.to_string(),
        mode,
        mse: mse_hyb,
        rmse: mse_hyb.sqrt(),
        pearson_rho: rho,
        rrr_percent: rrr(mse_lfm.sqrt(), mse_hyb.sqrt()),
    };
    Ok(HybridEvaluation {
        lfm: lfm_report,
        hybrid,
        mse_er: mse(&e_r, &e_hat),
        e_r,
        e_hat,
        v_hybrid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub descriptor_id: usize,
    pub family: Family,
    pub exponents: [u8; N_SIGNALS],
    pub xbar: f64,
    pub cumulative_info: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Sorted by rank.
    pub features: Vec<RankedFeature>,
    pub singular_values: Vec<f64>,
    /// Every weight is zero.
    pub all_zero: bool,
}

impl RankingReport {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .features
            .iter()
            .map(|f| {
                vec![
                    f.rank.to_string(),
                    f.descriptor_id.to_string(),
                    f.family.to_string(),
                    f.exponents.map(|e| e.to_string()).join(" "),
                    io::fmt_f64(f.xbar),
                    io::fmt_f64(f.cumulative_info),
                ]
            })
            .collect();
        io::write_rows(path, &RANKING_HEADER, &rows)
    }
}

/// Raw SVD ranking of the columns of `s`, before attaching descriptor labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdRanking {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
    /// Least-squares coefficients of each column of `s` in the basis of U.
    pub coefficients: DMatrix<f64>,
    pub xbar: Vec<f64>,
    /// Column indices, most important first.
    pub order: Vec<usize>,
    pub cumulative_info: Vec<f64>,
}

/// Thin SVD of `s`, coefficients `u_ik` from a least-squares solve
/// (cross-checked against the projection `U^T s`), and weights
/// `xbar_i = sum_k u_ik sigma_k / sum_k sigma_k`. Ties in `|xbar|` go to the lower `ids`.
pub fn svd_rank_matrix(s: &DMatrix<f64>, ids: &[usize]) -> Result<SvdRanking> {
    let (n, m) = s.shape();
    if m == 0 || n < m {
        return Err(Error::Problem(format!("ranking needs n >= m >= 1, got {n} x {m}")));
    }
    if ids.len() != m {
        return Err(Error::Problem("one id per column required".into()));
    }
    let mut svd = s.clone().svd(true, true);
    svd.sort_by_singular_values();
    let mut u = svd.u.clone().expect("requested U");
    let mut v_t = svd.v_t.clone().expect("requested V^T");
    // singular pairs are only defined up to sign; orient each so its
    // right vector sums non-negative, which keeps xbar independent of column order
    for k in 0..v_t.nrows() {
        if v_t.row(k).sum() < 0.0 {
            v_t.row_mut(k).neg_mut();
            u.column_mut(k).neg_mut();
        }
    }
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    // min ||U c - s_j|| for every column j at once
    let coefficients = u
        .clone()
        .svd(true, true)
        .solve(s, 0.0)
        .map_err(|e| Error::Linalg(e.to_string()))?;
    let projection = u.tr_mul(s);
    let gap = (&coefficients - &projection).amax();
    if gap > 1e-9 * (1.0 + s.amax()) {
        return Err(Error::Linalg(format!(
            "least-squares coefficients differ from projection by {gap:e}"
        )));
    }

    let total: f64 = sigma.iter().sum();
    let xbar: Vec<f64> = if total > 0.0 {
        (0..m)
            .map(|i| (0..sigma.len()).map(|k| coefficients[(k, i)] * sigma[k]).sum::<f64>() / total)
            .collect()
    } else {
        vec![0.0; m]
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        xbar[b]
            .abs()
            .total_cmp(&xbar[a].abs())
            .then(ids[a].cmp(&ids[b]))
    });
    let mass: f64 = xbar.iter().map(|x| x.abs()).sum();
    let mut acc = 0.0;
    let cumulative_info = order
        .iter()
        .map(|&i| {
            acc += xbar[i].abs();
            if mass > 0.0 {
                acc / mass
            } else {
                0.0
            }
        })
        .collect();
    Ok(SvdRanking {
        u,
        singular_values: sigma,
        v_t,
        coefficients,
        xbar,
        order,
        cumulative_info,
    })
}

/// Ranks the model's active features by their weighted columns `theta_j * xi_j`
/// over the rows of `lfm` (teacher-forced on `e_r`).
pub fn svd_rank(model: &SparseErrorModel, lfm: &VoltageTrace, e_r: &[f64]) -> Result<RankingReport> {
    let active: Vec<usize> = (0..model.xi.len()).filter(|&j| model.xi[j] != 0.0).collect();
    if active.is_empty() {
        return Err(Error::Problem("model has no active features to rank".into()));
    }
    let signals = Signals::new(
        e_r.to_vec(),
        lfm.current.clone(),
        lfm.c_sp.clone(),
        lfm.c_sn.clone(),
    )?;
    let theta = model.selected.evaluate(&signals)?;
    let mut s = theta.select_columns(&active);
    for (c, &j) in active.iter().enumerate() {
        s.column_mut(c).scale_mut(model.xi[j]);
    }
    let ids: Vec<usize> = active.iter().map(|&j| model.selected.descriptors[j].id).collect();
    let r = svd_rank_matrix(&s, &ids)?;
    let all_zero = r.xbar.iter().all(|x| *x == 0.0);
    let features = r
        .order
        .iter()
        .enumerate()
        .map(|(rank, &c)| {
            let d = &model.selected.descriptors[active[c]];
            RankedFeature {
                rank: rank + 1,
                descriptor_id: d.id,
                family: d.family,
                exponents: d.exponents,
                xbar: r.xbar[c],
                cumulative_info: r.cumulative_info[rank],
            }
        })
        .collect();
    Ok(RankingReport {
        features,
        singular_values: r.singular_values,
        all_zero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimedComponent {
    Lfm,
    Hybrid,
    Surrogate,
}

/// Median wall-clock seconds of `runs` (at least 5) calls of `f`.
pub fn timing_report<T>(runs: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let runs = runs.max(5);
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        std::hint::black_box(f()?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(if runs % 2 == 1 {
        times[runs / 2]
    } else {
        0.5 * (times[runs / 2 - 1] + times[runs / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_identities() {
        let a = [1.0, 2.0, 4.0, 3.0, -1.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &[2.0; 5]), None);
    }

    #[test]
    fn rrr_edges() {
        assert_eq!(rrr(0.02, 0.02), Some(0.0));
        assert_eq!(rrr(0.02, 0.0), Some(100.0));
        assert_eq!(rrr(0.0, 0.01), None);
        assert!((rrr(0.0160, 0.0070).unwrap() - 56.25).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_columns_rank_by_norm() {
        let mut s = DMatrix::zeros(6, 3);
        s[(0, 0)] = 1.0;
        s[(1, 1)] = 3.0;
        s[(2, 2)] = 2.0;
        let r = svd_rank_matrix(&s, &[10, 11, 12]).unwrap();
        assert_eq!(r.order, vec![1, 2, 0]);
        assert!((r.cumulative_info[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_column_takes_all_mass() {
        let mut s = DMatrix::zeros(5, 3);
        for k in 0..5 {
            s[(k, 2)] = k as f64 + 1.0;
        }
        let r = svd_rank_matrix(&s, &[0, 1, 2]).unwrap();
        assert_eq!(r.order[0], 2);
        assert!((r.cumulative_info[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let s = DMatrix::zeros(4, 2);
        let r = svd_rank_matrix(&s, &[9, 3]).unwrap();
        assert_eq!(r.order, vec![1, 0]);
    }

    #[test]
    fn median_of_runs() {
        let mut n = 0;
        let t = timing_report(3, || {
            n += 1;
            Ok(n)
        })
        .unwrap();
        assert!(t >= 0.0);
        assert_eq!(n, 5);
    }
}
