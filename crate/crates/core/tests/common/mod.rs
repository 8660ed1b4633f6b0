//! Shared fixtures for the integration and acceptance tests.
#![allow(dead_code)]

use gastridge::cycle::{DriveCycle, Segment};
use gastridge::ga::RegressionData;
use gastridge::library::{Family, FeatureLibrary, LibraryConfig, Signals};
use gastridge::lfm::{simulate_cycle, CellParameters};
use gastridge::reference::{
    compute_error_series, generate_surrogate, surrogate_normalization, PlantedTerm, SurrogateRun,
    SurrogateSpec,
};

/// e_r[k+1] = 0.6 e_r[k] + 0.05 I~[k] + 0.04 cos(c_sp~[k]); each term moves
/// the one-step error by more than the default per-term complexity cost.
pub const PLANTED: [(Family, [u8; 4], f64); 3] = [
    (Family::Pol, [1, 0, 0, 0], 0.6),
    (Family::Pol, [0, 1, 0, 0], 0.05),
    (Family::Cos, [0, 0, 1, 0], 0.04),
];

pub fn walk(name: &str, seed: u64, samples: usize) -> DriveCycle {
    let p = CellParameters::default();
    let seg = Segment::RandomWalk {
        duration_s: samples as f64,
        max_c_rate: 2.0,
        regen_c_rate: 0.8,
        max_hold_s: 20.0,
        seed,
    };
    let current = seg.render(p.nominal_capacity_ah(), 1.0).unwrap();
    DriveCycle::from_current(name, 1.0, current).unwrap()
}

pub fn signals(run: &SurrogateRun) -> Signals {
    let e = compute_error_series(&run.reference, &run.base).unwrap();
    Signals::new(
        e,
        run.base.current.clone(),
        run.base.c_sp.clone(),
        run.base.c_sn.clone(),
    )
    .unwrap()
}

pub struct Setup {
    pub cell: CellParameters,
    pub lib: FeatureLibrary,
    pub spec: SurrogateSpec,
    pub train: RegressionData,
    pub valid: RegressionData,
    pub valid_run: SurrogateRun,
    pub test_run: SurrogateRun,
    /// Sorted descriptor ids of the planted terms.
    pub planted_ids: Vec<usize>,
}

/// Planted surrogate on three independent random-walk cycles
/// (train 2001, validation 1001, test 2001 samples).
pub fn planted_setup(noise_std: f64) -> Setup {
    let cell = CellParameters::default();
    let lib = FeatureLibrary::build(&LibraryConfig::default()).unwrap();
    let planted_terms: Vec<PlantedTerm> = PLANTED
        .iter()
        .map(|(f, e, c)| PlantedTerm {
            descriptor: lib.descriptors[lib.find(*f, *e).unwrap()],
            coefficient: *c,
        })
        .collect();
    let mut planted_ids: Vec<usize> = planted_terms.iter().map(|t| t.descriptor.id).collect();
    planted_ids.sort();
    let train_cycle = walk("train", 1, 2001);
    let base = simulate_cycle(&cell, &train_cycle).unwrap();
    let mut spec = SurrogateSpec::identity(&cell);
    spec.planted_terms = planted_terms;
    spec.noise_std = noise_std;
    spec.seed = 5;
    spec.normalization = Some(surrogate_normalization(&base).unwrap());
    let run = |c: &DriveCycle, seed: u64| {
        let mut s = spec.clone();
        s.seed = seed;
        generate_surrogate(&s, c, &cell).unwrap()
    };
    let train_run = run(&train_cycle, 5);
    let valid_run = run(&walk("valid", 2, 1001), 6);
    let test_run = run(&walk("test", 3, 2001), 7);
    let lib = lib.with_normalization(train_run.normalization);
    let train = RegressionData::new(&lib, &[signals(&train_run)]).unwrap();
    let valid = RegressionData::new(&lib, &[signals(&valid_run)]).unwrap();
    Setup {
        cell,
        lib,
        spec,
        train,
        valid,
        valid_run,
        test_run,
        planted_ids,
    }
}

/// Independent dense solve of `(A^T A + lambda I) x = A^T y` by Gaussian
/// elimination with partial pivoting on plain nested vectors.
pub fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let m = rows[0].len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (r, yr) in rows.iter().zip(y) {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += r[i] * r[j];
            }
            a[i][m] += r[i] * yr;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for row in rest {
            let f = row[col] / pivot[col];
            for c in col..=m {
                row[c] -= f * pivot[c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][m] - s) / a[i][i];
    }
    x
}
