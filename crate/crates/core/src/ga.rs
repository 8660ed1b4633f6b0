//! Genetic search over library masks and STRidge hyperparameters.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::library::{FeatureLibrary, Signals};
use crate::stridge::{solve_normal_equations, stridge_normal, SparseErrorModel};

pub const HISTORY_HEADER: [&str; 6] = [
    "generation",
    "best_fitness",
    "mean_fitness",
    "best_n_active",
    "best_mse_train",
    "best_mse_valid",
];

/// Minimum best-fitness gain that resets the stagnation counter.
const IMPROVEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub mask: Vec<bool>,
    pub log_lambda1: f64,
    pub log_lambda2: f64,
}

impl Genome {
    pub fn lambda1(&self) -> f64 {
        10f64.powf(self.log_lambda1)
    }

    pub fn lambda2(&self) -> f64 {
        10f64.powf(self.log_lambda2)
    }

    pub fn selected_ids(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
            .collect()
    }

    fn repair(&mut self, rng: &mut impl Rng) {
        if !self.mask.iter().any(|b| *b) {
            let i = rng.random_range(0..self.mask.len());
            self.mask[i] = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityMode {
    /// Active count divided by the library size.
    Normalized,
    RawCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    OneStep,
    FreeRunning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means 1 / library size.
    pub mutation_rate_mask: Option<f64>,
    pub mutation_sigma_lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub stagnation_patience: usize,
    pub seed: u64,
    pub log_lambda1_bounds: [f64; 2],
    pub log_lambda2_bounds: [f64; 2],
    pub initial_mask_density: f64,
    pub stridge_max_iters: usize,
    pub complexity: ComplexityMode,
    pub validation: ValidationMode,
    /// Refit the winning support by least squares when that lowers the loss.
    pub debias: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 64,
            generations: 100,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate_mask: None,
            mutation_sigma_lambda: 0.25,
            alpha: 0.45,
            beta: 0.45,
            epsilon: 1e-4,
            stagnation_patience: 20,
            seed: 0,
            log_lambda1_bounds: [-12.0, 2.0],
            log_lambda2_bounds: [-8.0, 1.0],
            initial_mask_density: 0.5,
            stridge_max_iters: 10,
            complexity: ComplexityMode::Normalized,
            validation: ValidationMode::OneStep,
            debias: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size < 2 {
            return bad("population_size must be >= 2".into());
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be >= 1".into());
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta < 1.0) {
            return bad(format!(
                "need alpha, beta >= 0 and alpha + beta < 1 (got {}, {})",
                self.alpha, self.beta
            ));
        }
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if !rate(self.crossover_rate)
            || !rate(self.initial_mask_density)
            || !self.mutation_rate_mask.is_none_or(rate)
        {
            return bad("rates must lie in [0, 1]".into());
        }
        if !(self.mutation_sigma_lambda >= 0.0) {
            return bad("mutation_sigma_lambda must be >= 0".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        for (name, b) in [
            ("log_lambda1_bounds", self.log_lambda1_bounds),
            ("log_lambda2_bounds", self.log_lambda2_bounds),
        ] {
            if !(b[0] <= b[1] && b[0].is_finite() && b[1].is_finite()) {
                return bad(format!("{name} must be an ordered finite pair"));
            }
        }
        if self.stridge_max_iters == 0 {
            return bad("stridge_max_iters must be positive".into());
        }
        Ok(())
    }

    fn mask_rate(&self, library_size: usize) -> f64 {
        self.mutation_rate_mask
            .unwrap_or(1.0 / library_size as f64)
    }
}

/// One split, evaluated once against the full library.
#[derive(Debug, Clone)]
pub struct RegressionData {
    /// Rows are signals at k, one row per (series, k < len - 1).
    pub theta: DMatrix<f64>,
    /// e_r[k + 1] for each row.
    pub target: DVector<f64>,
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Columns containing a non-finite value on this split.
    pub bad_columns: Vec<bool>,
    pub series: Vec<Signals>,
}

impl RegressionData {
    pub fn new(lib: &FeatureLibrary, series: &[Signals]) -> Result<Self> {
        let n: usize = series.iter().map(|s| s.len().saturating_sub(1)).sum();
        if n == 0 {
            return Err(Error::Problem("no one-step pairs in data".into()));
        }
        let all = lib.all();
        let m = all.m();
        let mut theta = DMatrix::zeros(n, m);
        let mut target = DVector::zeros(n);
        let mut bad_columns = vec![false; m];
        let mut row = vec![0.0; m];
        let mut r = 0;
        for s in series {
            for k in 0..s.len().saturating_sub(1) {
                all.row_into(&s.row(k), &mut row);
                for (j, v) in row.iter().enumerate() {
                    if v.is_finite() {
                        theta[(r, j)] = *v;
                    } else {
                        bad_columns[j] = true;
                    }
                }
                target[r] = s.e_r[k + 1];
                r += 1;
            }
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::Problem("non-finite error target".into()));
        }
        for j in (0..m).filter(|&j| bad_columns[j]) {
            theta.column_mut(j).fill(0.0);
        }
        let gram = theta.tr_mul(&theta);
        let rhs = theta.tr_mul(&target);
        Ok(RegressionData {
            theta,
            target,
            gram,
            rhs,
            bad_columns,
            series: series.to_vec(),
        })
    }

    pub fn rows(&self) -> usize {
        self.target.len()
    }

    /// Mean squared one-step residual of the sparse model given as `(column, coefficient)` pairs.
    fn one_step_mse(&self, terms: &[(usize, f64)]) -> f64 {
        let mut pred = -self.target.clone();
        for &(j, x) in terms {
            pred.axpy(x, &self.theta.column(j), 1.0);
        }
        pred.norm_squared() / self.rows() as f64
    }

    /// Rollouts start from zero error, as they do at inference.
    fn free_running_mse(&self, model: &SparseErrorModel) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in &self.series {
            match model.rollout(&s.current, &s.c_sp, &s.c_sn, 0.0) {
                Ok(e) => {
                    for k in 1..s.len() {
                        sum += (e[k] - s.e_r[k]).powi(2);
                    }
                    count += s.len() - 1;
                }
                Err(_) => return f64::INFINITY,
            }
        }
        sum / count.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedCandidate {
    pub genome: Genome,
    pub model: SparseErrorModel,
    pub mse_train: f64,
    pub mse_valid: f64,
    pub n_active: usize,
    pub loss: f64,
    pub fitness: f64,
    pub feasible: bool,
}

impl EvaluatedCandidate {
    /// Feasible candidates first, then by descending fitness.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .feasible
            .cmp(&self.feasible)
            .then_with(|| other.fitness.total_cmp(&self.fitness))
    }
}

fn score(
    config: &GaConfig,
    library_size: usize,
    mse_train: f64,
    mse_valid: f64,
    n_active: usize,
) -> (f64, f64, bool) {
    let complexity = match config.complexity {
        ComplexityMode::Normalized => n_active as f64 / library_size as f64,
        ComplexityMode::RawCount => n_active as f64,
    };
    let mut loss = config.alpha * mse_train
        + config.beta * mse_valid
        + (1.0 - config.alpha - config.beta) * complexity;
    if !loss.is_finite() {
        loss = f64::INFINITY;
    }
    (loss, 1.0 - loss, mse_train < config.epsilon)
}

fn finish(
    genome: Genome,
    model: SparseErrorModel,
    mse_train: f64,
    valid: &RegressionData,
    config: &GaConfig,
) -> EvaluatedCandidate {
    let library_size = model.selected.library_size;
    let mse_valid = match config.validation {
        ValidationMode::OneStep => {
            let xi = active_pairs(&model);
            valid.one_step_mse(&xi)
        }
        ValidationMode::FreeRunning => valid.free_running_mse(&model),
    };
    let n_active = model.active_count;
    let (loss, fitness, feasible) = score(config, library_size, mse_train, mse_valid, n_active);
    let mut model = model;
    model.training_mse = mse_train;
    EvaluatedCandidate {
        genome,
        model,
        mse_train,
        mse_valid,
        n_active,
        loss,
        fitness,
        feasible: feasible && loss.is_finite(),
    }
}

fn active_pairs(model: &SparseErrorModel) -> Vec<(usize, f64)> {
    model
        .selected
        .descriptors
        .iter()
        .zip(&model.xi)
        .filter(|(_, x)| **x != 0.0)
        .map(|(d, x)| (d.id, *x))
        .collect()
}

fn failed(genome: Genome, lib: &FeatureLibrary) -> Result<EvaluatedCandidate> {
    let selected = lib.select(&genome.mask)?;
    let m = selected.m();
    let model = SparseErrorModel::new(selected, vec![0.0; m], genome.lambda1(), genome.lambda2())?;
    Ok(EvaluatedCandidate {
        genome,
        model,
        mse_train: f64::INFINITY,
        mse_valid: f64::INFINITY,
        n_active: 0,
        loss: f64::INFINITY,
        fitness: f64::NEG_INFINITY,
        feasible: false,
    })
}

/// Inner STRidge fit on the genome's mask, scored by the composite loss.
pub fn evaluate_candidate(
    genome: &Genome,
    train: &RegressionData,
    valid: &RegressionData,
    lib: &FeatureLibrary,
    config: &GaConfig,
) -> Result<EvaluatedCandidate> {
    if genome.mask.len() != lib.len() {
        return Err(Error::Problem(format!(
            "mask has {} bits for a {}-term library",
            genome.mask.len(),
            lib.len()
        )));
    }
    let ids = genome.selected_ids();
    if ids.is_empty() {
        return Err(Error::Problem("genome mask is empty".into()));
    }
    if ids.iter().any(|&j| train.bad_columns[j] || valid.bad_columns[j]) {
        return failed(genome.clone(), lib);
    }
    let gram = train.gram.select_rows(&ids).select_columns(&ids);
    let rhs = train.rhs.select_rows(&ids);
    let fit = stridge_normal(
        &gram,
        &rhs,
        genome.lambda1(),
        genome.lambda2(),
        config.stridge_max_iters,
    );
    if fit.xi.iter().any(|v| !v.is_finite()) {
        return failed(genome.clone(), lib);
    }
    let selected = lib.select(&genome.mask)?;
    let mut model = SparseErrorModel::new(
        selected,
        fit.xi.iter().copied().collect(),
        genome.lambda1(),
        genome.lambda2(),
    )?;
    model.zero_model = fit.zero_model;
    let mse_train = train.one_step_mse(&active_pairs(&model));
    Ok(finish(genome.clone(), model, mse_train, valid, config))
}

/// Best of `k` uniform draws (with replacement).
pub fn tournament_select<'a>(
    population: &'a [EvaluatedCandidate],
    k: usize,
    rng: &mut impl Rng,
) -> &'a EvaluatedCandidate {
    let mut best = &population[rng.random_range(0..population.len())];
    for _ in 1..k {
        let c = &population[rng.random_range(0..population.len())];
        if c.rank_cmp(best) == Ordering::Less {
            best = c;
        }
    }
    best
}

/// Uniform mask crossover and a log-space arithmetic blend of the lambdas.
pub fn crossover(a: &Genome, b: &Genome, rng: &mut impl Rng) -> (Genome, Genome) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for i in 0..a.mask.len() {
        if rng.random::<bool>() {
            c1.mask[i] = b.mask[i];
            c2.mask[i] = a.mask[i];
        }
    }
    let w: f64 = rng.random();
    c1.log_lambda1 = w * a.log_lambda1 + (1.0 - w) * b.log_lambda1;
    c2.log_lambda1 = (1.0 - w) * a.log_lambda1 + w * b.log_lambda1;
    c1.log_lambda2 = w * a.log_lambda2 + (1.0 - w) * b.log_lambda2;
    c2.log_lambda2 = (1.0 - w) * a.log_lambda2 + w * b.log_lambda2;
    c1.repair(rng);
    c2.repair(rng);
    (c1, c2)
}

pub fn mutate(g: &Genome, config: &GaConfig, rng: &mut impl Rng) -> Genome {
    let mut out = g.clone();
    let rate = config.mask_rate(g.mask.len());
    for bit in out.mask.iter_mut() {
        if rng.random_bool(rate) {
            *bit = !*bit;
        }
    }
    if config.mutation_sigma_lambda > 0.0 {
        let normal = Normal::new(0.0, config.mutation_sigma_lambda).expect("sigma checked");
        let [lo1, hi1] = config.log_lambda1_bounds;
        let [lo2, hi2] = config.log_lambda2_bounds;
        out.log_lambda1 = (out.log_lambda1 + normal.sample(rng)).clamp(lo1, hi1);
        out.log_lambda2 = (out.log_lambda2 + normal.sample(rng)).clamp(lo2, hi2);
    }
    out.repair(rng);
    out
}

pub fn random_genome(library_size: usize, config: &GaConfig, rng: &mut impl Rng) -> Genome {
    let [lo1, hi1] = config.log_lambda1_bounds;
    let [lo2, hi2] = config.log_lambda2_bounds;
    let mut g = Genome {
        mask: (0..library_size)
            .map(|_| rng.random_bool(config.initial_mask_density))
            .collect(),
        log_lambda1: if lo1 < hi1 { rng.random_range(lo1..hi1) } else { lo1 },
        log_lambda2: if lo2 < hi2 { rng.random_range(lo2..hi2) } else { lo2 },
    };
    g.repair(rng);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    /// Mean over candidates with finite fitness.
    pub mean_fitness: f64,
    pub best_n_active: usize,
    pub best_mse_train: f64,
    pub best_mse_valid: f64,
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: EvaluatedCandidate,
    pub history: Vec<GenerationStats>,
    /// No feasible candidate survived the final generation.
    pub infeasible: bool,
    pub evaluations: usize,
}

impl GaResult {
    pub fn history_csv(&self) -> String {
        let mut out = HISTORY_HEADER.join(",");
        out.push('\n');
        for h in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                h.generation,
                io::fmt_f64(h.best_fitness),
                io::fmt_f64(h.mean_fitness),
                h.best_n_active,
                io::fmt_f64(h.best_mse_train),
                io::fmt_f64(h.best_mse_valid)
            ));
        }
        out
    }

    pub fn save_history(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.history_csv().as_bytes())
    }
}

fn evaluate_all(
    genomes: Vec<Genome>,
    train: &RegressionData,
    valid: &RegressionData,
    lib: &FeatureLibrary,
    config: &GaConfig,
) -> Result<Vec<EvaluatedCandidate>> {
    #[cfg(feature = "parallel")]
    let iter = genomes.into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = genomes.into_iter();
    iter.map(|g| evaluate_candidate(&g, train, valid, lib, config))
        .collect()
}

fn stats(generation: usize, population: &[EvaluatedCandidate]) -> GenerationStats {
    let best = &population[0];
    let finite: Vec<f64> = population
        .iter()
        .map(|c| c.fitness)
        .filter(|f| f.is_finite())
        .collect();
    let mean_fitness = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GenerationStats {
        generation,
        best_fitness: best.fitness,
        mean_fitness,
        best_n_active: best.n_active,
        best_mse_train: best.mse_train,
        best_mse_valid: best.mse_valid,
    }
}

/// Random initial population, then [`run_ga_from`].
pub fn run_ga(
    config: &GaConfig,
    train: &RegressionData,
    valid: &RegressionData,
    lib: &FeatureLibrary,
) -> Result<GaResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = (0..config.population_size)
        .map(|_| random_genome(lib.len(), config, &mut rng))
        .collect();
    run_ga_from(config, initial, train, valid, lib)
}

/// Generational loop with (mu + lambda) truncation; the best candidate always survives.
pub fn run_ga_from(
    config: &GaConfig,
    initial: Vec<Genome>,
    train: &RegressionData,
    valid: &RegressionData,
    lib: &FeatureLibrary,
) -> Result<GaResult> {
    config.validate()?;
    if initial.is_empty() {
        return Err(Error::Config("empty initial population".into()));
    }
    let n = initial.len();
    let mut population = evaluate_all(initial, train, valid, lib, config)?;
    population.sort_by(EvaluatedCandidate::rank_cmp);
    let mut evaluations = population.len();
    let mut history = vec![stats(0, &population)];
    let mut best_fitness = population[0].fitness;
    let mut stagnant = 0;

    for generation in 1..=config.generations {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(generation as u64);
        let mut children = Vec::with_capacity(n + 1);
        while children.len() < n {
            let a = &tournament_select(&population, config.tournament_size, &mut rng).genome;
            let b = &tournament_select(&population, config.tournament_size, &mut rng).genome;
            let (c1, c2) = if rng.random_bool(config.crossover_rate) {
                crossover(a, b, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            children.push(mutate(&c1, config, &mut rng));
            children.push(mutate(&c2, config, &mut rng));
        }
        children.truncate(n);
        let children = evaluate_all(children, train, valid, lib, config)?;
        evaluations += children.len();

        let feasible = population.iter().chain(&children).filter(|c| c.feasible).count();
        if feasible >= 2 {
            population.extend(children.into_iter().filter(|c| c.feasible));
        } else {
            population.extend(children);
        }
        population.sort_by(EvaluatedCandidate::rank_cmp);
        population.truncate(n);
        history.push(stats(generation, &population));

        if population[0].fitness > best_fitness + IMPROVEMENT_TOL {
            best_fitness = population[0].fitness;
            stagnant = 0;
        } else {
            best_fitness = best_fitness.max(population[0].fitness);
            stagnant += 1;
            if stagnant >= config.stagnation_patience {
                break;
            }
        }
    }

    let mut best = population.swap_remove(0);
    if config.debias {
        if let Some(refit) = debias(&best, train, valid, lib, config)? {
            if refit.rank_cmp(&best) != Ordering::Greater {
                best = refit;
            }
        }
    }
    let infeasible = !best.feasible;
    if infeasible {
        log::warn!(
            "no feasible candidate: best training MSE {} exceeds epsilon {}",
            best.mse_train,
            config.epsilon
        );
    }
    Ok(GaResult {
        best,
        history,
        infeasible,
        evaluations,
    })
}

/// Unregularized least-squares refit on the winning support.
fn debias(
    best: &EvaluatedCandidate,
    train: &RegressionData,
    valid: &RegressionData,
    lib: &FeatureLibrary,
    config: &GaConfig,
) -> Result<Option<EvaluatedCandidate>> {
    let support = best.model.active_ids();
    if support.is_empty() || !best.loss.is_finite() {
        return Ok(None);
    }
    let gram = train.gram.select_rows(&support).select_columns(&support);
    let rhs = train.rhs.select_rows(&support);
    let sol = solve_normal_equations(&gram, &rhs, 0.0);
    if sol.iter().any(|v| !v.is_finite() || *v == 0.0) {
        return Ok(None);
    }
    let selected = lib.select(&best.genome.mask)?;
    let xi = selected
        .descriptors
        .iter()
        .map(|d| support.iter().position(|&s| s == d.id).map_or(0.0, |p| sol[p]))
        .collect();
    let model = SparseErrorModel::new(selected, xi, 0.0, best.genome.lambda2())?;
    let mse_train = train.one_step_mse(&active_pairs(&model));
    Ok(Some(finish(best.genome.clone(), model, mse_train, valid, config)))
}
