//! Candidate basis functions over the four regression signals
//! (error, current, positive and negative surface concentration).

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_SIGNALS: usize = 4;
pub const SIGNAL_NAMES: [&str; N_SIGNALS] = ["e_r", "I", "c_sp", "c_sn"];

/// Offset added to |x| before ln/sqrt when the argument is out of domain.
pub const DOMAIN_EPS: f64 = 1e-12;
/// tan arguments are clipped to (-pi/2 + margin, pi/2 - margin).
pub const TAN_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pol,
    Cos,
    Sin,
    Tan,
    Cosh,
    Sinh,
    Tanh,
    Ln,
    Exp,
    Sqrt,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::Pol,
        Family::Cos,
        Family::Sin,
        Family::Tan,
        Family::Cosh,
        Family::Sinh,
        Family::Tanh,
        Family::Ln,
        Family::Exp,
        Family::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Pol => "pol",
            Family::Cos => "cos",
            Family::Sin => "sin",
            Family::Tan => "tan",
            Family::Cosh => "cosh",
            Family::Sinh => "sinh",
            Family::Tanh => "tanh",
            Family::Ln => "ln",
            Family::Exp => "exp",
            Family::Sqrt => "sqrt",
        }
    }

    /// Applies the family, with guards only outside the nominal domain.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Family::Pol => x,
            Family::Cos => x.cos(),
            Family::Sin => x.sin(),
            Family::Tan => {
                let lim = std::f64::consts::FRAC_PI_2 - TAN_MARGIN;
                x.clamp(-lim, lim).tan()
            }
            Family::Cosh => x.cosh(),
            Family::Sinh => x.sinh(),
            Family::Tanh => x.tanh(),
            Family::Ln => {
                if x > 0.0 {
                    x.ln()
                } else {
                    (x.abs() + DOMAIN_EPS).ln()
                }
            }
            Family::Exp => x.exp(),
            Family::Sqrt => {
                if x >= 0.0 {
                    x.sqrt()
                } else {
                    (x.abs() + DOMAIN_EPS).sqrt()
                }
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One basis function: a family applied to a monomial of normalized signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub id: usize,
    pub family: Family,
    pub exponents: [u8; N_SIGNALS],
}

impl BasisDescriptor {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().map(|&e| e as u32).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.family == Family::Pol && self.degree() == 0
    }

    #[inline]
    pub fn eval(&self, z: &[f64; N_SIGNALS]) -> f64 {
        let mut arg = 1.0;
        for (x, &e) in z.iter().zip(&self.exponents) {
            if e > 0 {
                arg *= x.powi(e as i32);
            }
        }
        self.family.apply(arg)
    }

    /// Human-readable form such as `tanh(I)` or `e_r*c_sp^2`.
    pub fn label(&self) -> String {
        let mono: Vec<String> = self
            .exponents
            .iter()
            .zip(SIGNAL_NAMES)
            .filter(|(e, _)| **e > 0)
            .map(|(e, n)| if *e == 1 { n.to_string() } else { format!("{n}^{e}") })
            .collect();
        let mono = if mono.is_empty() { "1".to_string() } else { mono.join("*") };
        match self.family {
            Family::Pol => mono,
            f => format!("{f}({mono})"),
        }
    }
}

/// Z-score statistics per signal, shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; N_SIGNALS],
    pub std: [f64; N_SIGNALS],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::identity()
    }
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            mean: [0.0; N_SIGNALS],
            std: [1.0; N_SIGNALS],
        }
    }

    /// Population mean and standard deviation of each signal.
    pub fn fit(signals: [&[f64]; N_SIGNALS]) -> Result<Self> {
        let mut out = Normalization::identity();
        for (j, s) in signals.iter().enumerate() {
            if s.len() < 2 {
                return Err(Error::Normalization {
                    signal: SIGNAL_NAMES[j],
                });
            }
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if !(std > 0.0 && std.is_finite()) || std <= 1e-12 * mean.abs() {
                return Err(Error::Normalization {
                    signal: SIGNAL_NAMES[j],
                });
            }
            out.mean[j] = mean;
            out.std[j] = std;
        }
        Ok(out)
    }

    #[inline]
    pub fn apply(&self, raw: &[f64; N_SIGNALS]) -> [f64; N_SIGNALS] {
        std::array::from_fn(|j| (raw[j] - self.mean[j]) / self.std[j])
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..N_SIGNALS {
            if !(self.std[j] > 0.0 && self.std[j].is_finite() && self.mean[j].is_finite()) {
                return Err(Error::Normalization {
                    signal: SIGNAL_NAMES[j],
                });
            }
        }
        Ok(())
    }
}

/// Raw regression signals, one entry per time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signals {
    pub e_r: Vec<f64>,
    pub current: Vec<f64>,
    pub c_sp: Vec<f64>,
    pub c_sn: Vec<f64>,
}

impl Signals {
    pub fn new(e_r: Vec<f64>, current: Vec<f64>, c_sp: Vec<f64>, c_sn: Vec<f64>) -> Result<Self> {
        let n = e_r.len();
        if current.len() != n || c_sp.len() != n || c_sn.len() != n {
            return Err(Error::Alignment {
                index: n.min(current.len()).min(c_sp.len()).min(c_sn.len()),
                reason: "signal lengths differ".into(),
            });
        }
        Ok(Signals {
            e_r,
            current,
            c_sp,
            c_sn,
        })
    }

    pub fn len(&self) -> usize {
        self.e_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_r.is_empty()
    }

    #[inline]
    pub fn row(&self, k: usize) -> [f64; N_SIGNALS] {
        [self.e_r[k], self.current[k], self.c_sp[k], self.c_sn[k]]
    }

    pub fn columns(&self) -> [&[f64]; N_SIGNALS] {
        [&self.e_r, &self.current, &self.c_sp, &self.c_sn]
    }
}

/// What goes into the candidate library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryConfig {
    /// Highest total degree of the polynomial monomials.
    pub max_degree: u32,
    pub families: Vec<Family>,
    /// Families additionally applied to every degree-2 monomial.
    pub composite_families: Vec<Family>,
}

impl Default for LibraryConfig {
    /// 1 constant + 14 monomials + 9 families x 4 signals = 51 terms.
    fn default() -> Self {
        LibraryConfig {
            max_degree: 2,
            families: Family::ALL.to_vec(),
            composite_families: Vec::new(),
        }
    }
}

impl LibraryConfig {
    /// 81 terms: 1 + 34 monomials (degree <= 3) + 36 single-signal
    /// transcendental terms + tanh of the 10 degree-2 monomials.
    pub fn extended() -> Self {
        LibraryConfig {
            max_degree: 3,
            families: Family::ALL.to_vec(),
            composite_families: vec![Family::Tanh],
        }
    }
}

/// Monomial exponent vectors of exactly `degree`, in graded-lex order.
fn monomials(degree: u32) -> Vec<[u8; N_SIGNALS]> {
    fn rec(pos: usize, left: u32, cur: &mut [u8; N_SIGNALS], out: &mut Vec<[u8; N_SIGNALS]>) {
        if pos == N_SIGNALS - 1 {
            cur[pos] = left as u8;
            out.push(*cur);
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, degree, &mut [0; N_SIGNALS], &mut out);
    out
}

fn unit(j: usize) -> [u8; N_SIGNALS] {
    let mut e = [0; N_SIGNALS];
    e[j] = 1;
    e
}

/// The full candidate library plus its normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLibrary {
    pub descriptors: Vec<BasisDescriptor>,
    pub normalization: Normalization,
}

impl FeatureLibrary {
    pub fn build(config: &LibraryConfig) -> Result<Self> {
        if config.max_degree < 1 {
            return Err(Error::Config("library max_degree must be >= 1".into()));
        }
        if config.families.is_empty() {
            return Err(Error::Config("library needs at least one family".into()));
        }
        let mut specs: Vec<(Family, [u8; N_SIGNALS])> = vec![(Family::Pol, [0; N_SIGNALS])];
        if config.families.contains(&Family::Pol) {
            for d in 1..=config.max_degree {
                specs.extend(monomials(d).into_iter().map(|e| (Family::Pol, e)));
            }
        }
        for f in Family::ALL.iter().skip(1) {
            if config.families.contains(f) {
                specs.extend((0..N_SIGNALS).map(|j| (*f, unit(j))));
            }
        }
        for f in Family::ALL.iter().skip(1) {
            if config.composite_families.contains(f) {
                specs.extend(monomials(2).into_iter().map(|e| (*f, e)));
            }
        }
        let mut seen = std::collections::HashSet::new();
        let descriptors = specs
            .into_iter()
            .filter(|s| seen.insert(*s))
            .enumerate()
            .map(|(id, (family, exponents))| BasisDescriptor {
                id,
                family,
                exponents,
            })
            .collect();
        Ok(FeatureLibrary {
            descriptors,
            normalization: Normalization::identity(),
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn fit_normalization(&mut self, signals: &Signals) -> Result<()> {
        self.normalization = Normalization::fit(signals.columns())?;
        Ok(())
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Id of the descriptor with this family and exponents, if present.
    pub fn find(&self, family: Family, exponents: [u8; N_SIGNALS]) -> Option<usize> {
        self.descriptors
            .iter()
            .find(|d| d.family == family && d.exponents == exponents)
            .map(|d| d.id)
    }

    pub fn select(&self, mask: &[bool]) -> Result<SelectedLibrary> {
        if mask.len() != self.len() {
            return Err(Error::Config(format!(
                "mask has {} entries, library has {}",
                mask.len(),
                self.len()
            )));
        }
        let descriptors: Vec<_> = self
            .descriptors
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(d, _)| *d)
            .collect();
        if descriptors.is_empty() {
            return Err(Error::Config("mask selects no descriptors".into()));
        }
        Ok(SelectedLibrary {
            descriptors,
            normalization: self.normalization,
            library_size: self.len(),
        })
    }

    pub fn select_ids(&self, ids: &[usize]) -> Result<SelectedLibrary> {
        let mut mask = vec![false; self.len()];
        for &id in ids {
            *mask
                .get_mut(id)
                .ok_or_else(|| Error::Config(format!("no descriptor with id {id}")))? = true;
        }
        self.select(&mask)
    }

    pub fn all(&self) -> SelectedLibrary {
        self.select(&vec![true; self.len()]).expect("library is never empty")
    }
}

/// A masked subset of a library; column j maps to `descriptors[j].id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedLibrary {
    pub descriptors: Vec<BasisDescriptor>,
    pub normalization: Normalization,
    /// Size of the parent library.
    pub library_size: usize,
}

impl SelectedLibrary {
    pub fn m(&self) -> usize {
        self.descriptors.len()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.library_size];
        for d in &self.descriptors {
            mask[d.id] = true;
        }
        mask
    }

    /// Feature row for one set of raw signal values.
    #[inline]
    pub fn row_into(&self, raw: &[f64; N_SIGNALS], out: &mut [f64]) {
        let z = self.normalization.apply(raw);
        for (o, d) in out.iter_mut().zip(&self.descriptors) {
            *o = d.eval(&z);
        }
    }

    /// `n x m` design matrix; errors on the first non-finite entry.
    pub fn evaluate(&self, signals: &Signals) -> Result<DMatrix<f64>> {
        let n = signals.len();
        let m = self.m();
        let mut theta = DMatrix::zeros(n, m);
        let mut row = vec![0.0; m];
        for k in 0..n {
            self.row_into(&signals.row(k), &mut row);
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Evaluation {
                        id: self.descriptors[j].id,
                        row: k,
                    });
                }
                theta[(k, j)] = *v;
            }
        }
        Ok(theta)
    }
}
