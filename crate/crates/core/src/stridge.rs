//! Sequentially thresholded ridge regression and the learned error recursion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{SelectedLibrary, Signals, N_SIGNALS};
use crate::lfm::VoltageTrace;

/// Free-running estimates beyond this magnitude (V) count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

/// Solves `(G + lambda I) x = rhs` for a symmetric positive semi-definite `G`.
///
/// Cholesky with one step of iterative refinement; when the system is
/// singular or the residual check fails, falls back to the minimum-norm
/// solution through a symmetric eigendecomposition.
pub fn solve_normal_equations(gram: &DMatrix<f64>, rhs: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let m = gram.nrows();
    let mut a = gram.clone();
    for i in 0..m {
        a[(i, i)] += lambda;
    }
    let tol = 1e-10 * (1.0 + rhs.norm());
    if let Some(chol) = a.clone().cholesky() {
        let mut x = chol.solve(rhs);
        let r = rhs - &a * &x;
        x += chol.solve(&r);
        let res = (rhs - &a * &x).norm();
        if x.iter().all(|v| v.is_finite()) && res <= tol {
            return x;
        }
    }
    min_norm_solve(&a, rhs)
}

fn min_norm_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = max * a.nrows() as f64 * f64::EPSILON;
    let proj = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(p, l)| if l.abs() > cutoff { p / l } else { 0.0 }),
    );
    &eig.eigenvectors * scaled
}

/// Ridge estimate `(Theta^T Theta + lambda1 I)^{-1} Theta^T y`; with
/// `lambda1 = 0` and rank-deficient Theta, the minimum-norm least-squares solution.
pub fn ridge_solve(theta: &DMatrix<f64>, y: &DVector<f64>, lambda1: f64) -> Result<DVector<f64>> {
    if theta.nrows() != y.len() {
        return Err(Error::Problem(format!(
            "design has {} rows, target has {}",
            theta.nrows(),
            y.len()
        )));
    }
    if !(lambda1 >= 0.0 && lambda1.is_finite()) {
        return Err(Error::Problem(format!("lambda1 = {lambda1} must be >= 0")));
    }
    if theta.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Problem("non-finite entries in regression data".into()));
    }
    let gram = theta.tr_mul(theta);
    let rhs = theta.tr_mul(y);
    Ok(solve_normal_equations(&gram, &rhs, lambda1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeProblem {
    pub theta: DMatrix<f64>,
    /// One-step-ahead targets e_r[k+1].
    pub target: DVector<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_iters: usize,
}

impl RidgeProblem {
    pub fn new(theta: DMatrix<f64>, target: DVector<f64>, lambda1: f64, lambda2: f64) -> Self {
        RidgeProblem {
            theta,
            target,
            lambda1,
            lambda2,
            max_iters: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.theta.nrows() != self.target.len() {
            return Err(Error::Problem("design and target lengths differ".into()));
        }
        if self.theta.ncols() == 0 {
            return Err(Error::Problem("design has no columns".into()));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Problem("lambda1 and lambda2 must be >= 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Problem("max_iters must be positive".into()));
        }
        if self.theta.iter().chain(self.target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Problem("non-finite entries in regression data".into()));
        }
        if self.theta.nrows() <= self.theta.ncols() {
            log::warn!(
                "underdetermined STRidge problem: {} rows, {} columns",
                self.theta.nrows(),
                self.theta.ncols()
            );
        }
        Ok(())
    }
}

/// Result of the thresholding loop.
#[derive(Debug, Clone, PartialEq)]
pub struct StridgeFit {
    /// Full-length coefficients; zero outside the support.
    pub xi: DVector<f64>,
    /// Active column indices, ascending.
    pub support: Vec<usize>,
    /// Support after the initial solve and after each thresholding pass.
    pub support_history: Vec<Vec<usize>>,
    /// Every coefficient fell below the threshold.
    pub zero_model: bool,
}

impl StridgeFit {
    pub fn active_count(&self) -> usize {
        self.xi.iter().filter(|v| **v != 0.0).count()
    }
}

/// STRidge on a precomputed normal system `G = Theta^T Theta`, `b = Theta^T y`.
pub fn stridge_normal(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    lambda1: f64,
    lambda2: f64,
    max_iters: usize,
) -> StridgeFit {
    let m = gram.nrows();
    let mut xi = solve_normal_equations(gram, rhs, lambda1);
    let mut support: Vec<usize> = (0..m).collect();
    let mut history = vec![support.clone()];
    let mut zero_model = false;
    for _ in 0..max_iters {
        let large: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&i| xi[i].abs() >= lambda2)
            .collect();
        if large.len() == support.len() {
            break;
        }
        for &i in &support {
            if xi[i].abs() < lambda2 {
                xi[i] = 0.0;
            }
        }
        support = large;
        history.push(support.clone());
        if support.is_empty() {
            zero_model = true;
            break;
        }
        let sub_gram = gram.select_rows(&support).select_columns(&support);
        let sub_rhs = rhs.select_rows(&support);
        let sol = solve_normal_equations(&sub_gram, &sub_rhs, lambda1);
        for (v, &i) in sol.iter().zip(&support) {
            xi[i] = *v;
        }
    }
    StridgeFit {
        xi,
        support,
        support_history: history,
        zero_model,
    }
}

/// Alternates ridge solves and hard thresholding at `lambda2`; removed
/// columns never re-enter and the loop stops once the support is stable.
pub fn stridge_fit(problem: &RidgeProblem) -> Result<StridgeFit> {
    problem.validate()?;
    let gram = problem.theta.tr_mul(&problem.theta);
    let rhs = problem.theta.tr_mul(&problem.target);
    Ok(stridge_normal(
        &gram,
        &rhs,
        problem.lambda1,
        problem.lambda2,
        problem.max_iters,
    ))
}

/// Provenance stored alongside a trained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub cycle_names: Vec<String>,
    pub validation_cycle: Option<String>,
    pub seed: Option<u64>,
    pub timestamp: Option<String>,
}

/// Learned error dynamics `e[k+1] = Theta(e[k], I[k], c_sp[k], c_sn[k]) xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseErrorModel {
    pub selected: SelectedLibrary,
    pub xi: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub active_count: usize,
    pub training_mse: f64,
    pub zero_model: bool,
    pub metadata: ModelMetadata,
}

impl SparseErrorModel {
    pub fn new(selected: SelectedLibrary, xi: Vec<f64>, lambda1: f64, lambda2: f64) -> Result<Self> {
        if xi.len() != selected.m() {
            return Err(Error::Problem(format!(
                "{} coefficients for {} features",
                xi.len(),
                selected.m()
            )));
        }
        let active_count = xi.iter().filter(|v| **v != 0.0).count();
        Ok(SparseErrorModel {
            selected,
            xi,
            lambda1,
            lambda2,
            active_count,
            training_mse: f64::NAN,
            zero_model: active_count == 0,
            metadata: ModelMetadata::default(),
        })
    }

    /// Fits on teacher-forced data: rows are the signals at k, targets e_r[k+1].
    pub fn fit(
        selected: SelectedLibrary,
        signals: &Signals,
        targets: &[f64],
        lambda1: f64,
        lambda2: f64,
        max_iters: usize,
    ) -> Result<Self> {
        let theta = selected.evaluate(signals)?;
        let target = DVector::from_column_slice(targets);
        let mut problem = RidgeProblem::new(theta, target, lambda1, lambda2);
        problem.max_iters = max_iters;
        let fit = stridge_fit(&problem)?;
        let resid = &problem.theta * &fit.xi - &problem.target;
        let mut model = SparseErrorModel::new(selected, fit.xi.iter().copied().collect(), lambda1, lambda2)?;
        model.training_mse = resid.norm_squared() / resid.len() as f64;
        model.zero_model = fit.zero_model;
        Ok(model)
    }

    /// Ids of descriptors with nonzero coefficients.
    pub fn active_ids(&self) -> Vec<usize> {
        self.selected
            .descriptors
            .iter()
            .zip(&self.xi)
            .filter(|(_, x)| **x != 0.0)
            .map(|(d, _)| d.id)
            .collect()
    }

    /// One-step prediction of e_r[k+1] from raw signals at step k.
    pub fn predict_one_step(&self, raw: &[f64; N_SIGNALS]) -> f64 {
        let z = self.selected.normalization.apply(raw);
        self.selected
            .descriptors
            .iter()
            .zip(&self.xi)
            .filter(|(_, x)| **x != 0.0)
            .map(|(d, x)| d.eval(&z) * x)
            .sum()
    }

    /// Teacher-forced predictions for every row of `signals`.
    pub fn predict_teacher_forced(&self, signals: &Signals) -> Vec<f64> {
        (0..signals.len())
            .map(|k| self.predict_one_step(&signals.row(k)))
            .collect()
    }

    /// Free-running rollout: the model's own estimate is fed back as the error state.
    pub fn simulate_recursive(&self, trace: &VoltageTrace, e0: f64) -> Result<Vec<f64>> {
        self.rollout(&trace.current, &trace.c_sp, &trace.c_sn, e0)
    }

    pub fn rollout(&self, current: &[f64], c_sp: &[f64], c_sn: &[f64], e0: f64) -> Result<Vec<f64>> {
        let n = current.len();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return Ok(out);
        }
        out.push(e0);
        for k in 0..n - 1 {
            let next = self.predict_one_step(&[out[k], current[k], c_sp[k], c_sn[k]]);
            if !next.is_finite() || next.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    step: k + 1,
                    value: next,
                });
            }
            out.push(next);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SparseErrorModel = serde_json::from_str(text)?;
        model.selected.normalization.validate()?;
        if model.xi.len() != model.selected.m() {
            return Err(Error::Problem("coefficient count does not match features".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{Family, FeatureLibrary, LibraryConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_design() {
        let theta = DMatrix::<f64>::identity(4, 4);
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        assert!((ridge_solve(&theta, &y, 0.0).unwrap() - &y).norm() < 1e-14);
        assert!((ridge_solve(&theta, &y, 1.0).unwrap() - &y / 2.0).norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_least_squares_is_minimum_norm() {
        // two identical columns: minimum-norm solution splits the weight evenly
        let theta = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let x = ridge_solve(&theta, &y, 0.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9, "{x}");
    }

    #[test]
    fn zero_threshold_equals_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = DMatrix::from_fn(30, 5, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let fit = stridge_fit(&RidgeProblem::new(theta.clone(), y.clone(), 0.1, 0.0)).unwrap();
        assert_eq!(fit.xi, ridge_solve(&theta, &y, 0.1).unwrap());
        assert_eq!(fit.support.len(), 5);
    }

    #[test]
    fn recovers_planted_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = DMatrix::from_fn(200, 10, |_, _| rng.random_range(-1.0..1.0));
        let mut truth = DVector::zeros(10);
        truth[3] = 0.9;
        truth[7] = 0.001;
        let y = &theta * &truth;
        let fit = stridge_fit(&RidgeProblem::new(theta, y, 1e-8, 1e-4)).unwrap();
        assert_eq!(fit.support, vec![3, 7]);
        assert!((fit.xi.clone() - truth).amax() < 1e-6);
    }

    #[test]
    fn large_threshold_gives_zero_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = DMatrix::from_fn(50, 4, |_, _| rng.random_range(-1.0..1.0));
        let truth = DVector::from_vec(vec![0.9, -0.5, 0.2, 0.0]);
        let y = &theta * &truth;
        let fit = stridge_fit(&RidgeProblem::new(theta, y, 1e-8, 10.0)).unwrap();
        assert!(fit.zero_model);
        assert_eq!(fit.active_count(), 0);
    }

    fn toy_signals(n: usize) -> Signals {
        let i: Vec<f64> = (0..n).map(|k| (k as f64 * 0.07).sin() * 3.0).collect();
        let p: Vec<f64> = (0..n).map(|k| 2e4 + 10.0 * k as f64).collect();
        let q: Vec<f64> = (0..n).map(|k| 2.5e4 - 7.0 * k as f64).collect();
        Signals::new(vec![0.0; n], i, p, q).unwrap()
    }

    #[test]
    fn constant_only_model_rolls_out_constant() {
        let lib = FeatureLibrary::build(&LibraryConfig::default()).unwrap();
        let sel = lib.select_ids(&[0]).unwrap();
        let m = SparseErrorModel::new(sel, vec![0.004], 0.0, 0.0).unwrap();
        let s = toy_signals(20);
        let e = m.rollout(&s.current, &s.c_sp, &s.c_sn, 0.1).unwrap();
        assert_eq!(e[0], 0.1);
        assert!(e[1..].iter().all(|v| *v == 0.004));
    }

    #[test]
    fn zero_model_rolls_out_zero() {
        let lib = FeatureLibrary::build(&LibraryConfig::default()).unwrap();
        let sel = lib.select_ids(&[1, 2]).unwrap();
        let m = SparseErrorModel::new(sel, vec![0.0, 0.0], 0.0, 0.0).unwrap();
        assert!(m.zero_model);
        let s = toy_signals(10);
        let e = m.rollout(&s.current, &s.c_sp, &s.c_sn, 0.05).unwrap();
        assert!(e[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_is_reported() {
        let lib = FeatureLibrary::build(&LibraryConfig::default()).unwrap();
        let id = lib.find(Family::Pol, [1, 0, 0, 0]).unwrap();
        let sel = lib.select_ids(&[id]).unwrap();
        let m = SparseErrorModel::new(sel, vec![2.0], 0.0, 0.0).unwrap();
        let s = toy_signals(100);
        match m.rollout(&s.current, &s.c_sp, &s.c_sn, 0.01) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let lib = FeatureLibrary::build(&LibraryConfig::default()).unwrap();
        let sel = lib.select_ids(&[0, 5, 33]).unwrap();
        let mut m =
            SparseErrorModel::new(sel, vec![0.1 + 0.2, -1.0 / 3.0, 1e-17], 1e-7, 2e-3).unwrap();
        m.training_mse = 2.0f64.sqrt() * 1e-9;
        let back = SparseErrorModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.xi.iter().zip(&m.xi) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
