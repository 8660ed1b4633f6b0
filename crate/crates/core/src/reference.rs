//! Reference ("high-fidelity") voltage traces and the error signal.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::io;
use crate::lfm::{simulate_cycle, CellParameters, VoltageTrace};
use crate::library::{BasisDescriptor, Normalization, N_SIGNALS};

pub const REFERENCE_HEADER: [&str; 3] = ["t_s", "current_a", "v_ref_v"];
pub const ERROR_HEADER: [&str; 2] = ["t_s", "e_r_v"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Ingested,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrace {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub v_ref: Vec<f64>,
    pub source: SourceTag,
}

impl ReferenceTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Loads `t_s,current_a,v_ref_v`; timestamps must be uniform and increasing.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let [t, current, v_ref] = io::read_columns(path, REFERENCE_HEADER)?;
        DriveCycle::new("reference", t.clone(), current.clone()).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })?;
        Ok(ReferenceTrace {
            t,
            current,
            v_ref,
            source: SourceTag::Ingested,
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        io::write_csv(path, &REFERENCE_HEADER, &[&self.t, &self.current, &self.v_ref])
    }
}

pub fn load_reference_csv(path: &Path) -> Result<ReferenceTrace> {
    ReferenceTrace::load_csv(path)
}

/// `e_r[k] = v_ref[k] - v_lfm[k]`, after checking the traces share timestamps.
pub fn compute_error_series(reference: &ReferenceTrace, lfm: &VoltageTrace) -> Result<Vec<f64>> {
    if reference.len() != lfm.len() {
        return Err(Error::Alignment {
            index: reference.len().min(lfm.len()),
            reason: format!("lengths {} and {}", reference.len(), lfm.len()),
        });
    }
    let tol = |a: f64| 1e-9 * a.abs().max(1.0);
    if let Some(k) = (0..lfm.len()).find(|&k| (reference.t[k] - lfm.t[k]).abs() > tol(lfm.t[k])) {
        return Err(Error::Alignment {
            index: k,
            reason: format!("timestamps {} and {}", reference.t[k], lfm.t[k]),
        });
    }
    Ok(reference
        .v_ref
        .iter()
        .zip(&lfm.v_lfm)
        .map(|(r, v)| r - v)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTerm {
    pub descriptor: BasisDescriptor,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSpec {
    pub perturbed: CellParameters,
    pub planted_terms: Vec<PlantedTerm>,
    pub noise_std: f64,
    pub seed: u64,
    /// Normalization the planted recursion is written in. `None` derives it
    /// from the base trace of the cycle being generated.
    pub normalization: Option<Normalization>,
}

impl SurrogateSpec {
    /// Unperturbed, noiseless, no planted dynamics.
    pub fn identity(base: &CellParameters) -> Self {
        SurrogateSpec {
            perturbed: base.clone(),
            planted_terms: Vec::new(),
            noise_std: 0.0,
            seed: 0,
            normalization: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std = {} must be >= 0", self.noise_std)));
        }
        if self.planted_terms.iter().any(|p| !p.coefficient.is_finite()) {
            return Err(Error::Config("planted coefficient is not finite".into()));
        }
        if let Some(n) = &self.normalization {
            n.validate()?;
        }
        self.perturbed.validate()
    }
}

/// Raw error state, z-scored current and surface concentrations.
pub fn surrogate_normalization(base: &VoltageTrace) -> Result<Normalization> {
    let mut n = Normalization::fit([&base.current, &base.current, &base.c_sp, &base.c_sn])?;
    n.mean[0] = 0.0;
    n.std[0] = 1.0;
    Ok(n)
}

/// Free-running planted recursion driven by the base model's signals.
pub fn planted_rollout(
    terms: &[PlantedTerm],
    normalization: &Normalization,
    base: &VoltageTrace,
) -> Result<Vec<f64>> {
    let n = base.len();
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let raw: [f64; N_SIGNALS] = [e[k], base.current[k], base.c_sp[k], base.c_sn[k]];
        let z = normalization.apply(&raw);
        let mut next = 0.0;
        for t in terms {
            let v = t.descriptor.eval(&z);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    id: t.descriptor.id,
                    row: k,
                });
            }
            next += t.coefficient * v;
        }
        if !next.is_finite() {
            return Err(Error::Divergence { step: k + 1, value: next });
        }
        e[k + 1] = next;
    }
    Ok(e)
}

/// Everything a surrogate run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateRun {
    pub reference: ReferenceTrace,
    pub base: VoltageTrace,
    pub planted_error: Vec<f64>,
    pub normalization: Normalization,
}

/// `v_ref = V_lfm(perturbed) + planted error + N(0, noise_std)`.
pub fn generate_surrogate_trace(
    spec: &SurrogateSpec,
    cycle: &DriveCycle,
    p_base: &CellParameters,
) -> Result<ReferenceTrace> {
    Ok(generate_surrogate(spec, cycle, p_base)?.reference)
}

pub fn generate_surrogate(
    spec: &SurrogateSpec,
    cycle: &DriveCycle,
    p_base: &CellParameters,
) -> Result<SurrogateRun> {
    spec.validate()?;
    let base = simulate_cycle(p_base, cycle)?;
    let perturbed = if spec.perturbed == *p_base {
        base.clone()
    } else {
        simulate_cycle(&spec.perturbed, cycle)?
    };
    let normalization = match &spec.normalization {
        Some(n) => *n,
        None => surrogate_normalization(&base)?,
    };
    let planted_error = planted_rollout(&spec.planted_terms, &normalization, &base)?;
    let mut v_ref: Vec<f64> = perturbed
        .v_lfm
        .iter()
        .zip(&planted_error)
        .map(|(v, e)| v + e)
        .collect();
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        for v in &mut v_ref {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(SurrogateRun {
        reference: ReferenceTrace {
            t: base.t.clone(),
            current: base.current.clone(),
            v_ref,
            source: SourceTag::Surrogate,
        },
        base,
        planted_error,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{Family, FeatureLibrary, LibraryConfig};

    fn cycle() -> DriveCycle {
        let i: Vec<f64> = (0..300).map(|k| 3.0 * (k as f64 / 17.0).sin() + 1.0).collect();
        DriveCycle::from_current("wave", 1.0, i).unwrap()
    }

    #[test]
    fn identity_surrogate_has_zero_error() {
        let p = CellParameters::default();
        let c = cycle();
        let r = generate_surrogate_trace(&SurrogateSpec::identity(&p), &c, &p).unwrap();
        let lfm = simulate_cycle(&p, &c).unwrap();
        assert!(compute_error_series(&r, &lfm).unwrap().iter().all(|e| *e == 0.0));
    }

    #[test]
    fn constant_offset() {
        let p = CellParameters::default();
        let lfm = simulate_cycle(&p, &cycle()).unwrap();
        let r = ReferenceTrace {
            t: lfm.t.clone(),
            current: lfm.current.clone(),
            v_ref: lfm.v_lfm.iter().map(|v| v + 0.01).collect(),
            source: SourceTag::Ingested,
        };
        let e = compute_error_series(&r, &lfm).unwrap();
        assert!(e.iter().all(|v| (v - 0.01).abs() < 1e-14));
    }

    #[test]
    fn misaligned_traces_report_index() {
        let p = CellParameters::default();
        let lfm = simulate_cycle(&p, &cycle()).unwrap();
        let mut t = lfm.t.clone();
        t[7] += 0.5;
        let r = ReferenceTrace {
            t,
            current: lfm.current.clone(),
            v_ref: lfm.v_lfm.clone(),
            source: SourceTag::Ingested,
        };
        assert!(matches!(
            compute_error_series(&r, &lfm),
            Err(Error::Alignment { index: 7, .. })
        ));
    }

    #[test]
    fn planted_linear_recursion_is_recovered_exactly() {
        let p = CellParameters::default();
        let c = cycle();
        let lib = FeatureLibrary::build(&LibraryConfig::default()).unwrap();
        let d = |e| lib.descriptors[lib.find(Family::Pol, e).unwrap()];
        let mut spec = SurrogateSpec::identity(&p);
        spec.planted_terms = vec![
            PlantedTerm { descriptor: d([1, 0, 0, 0]), coefficient: 0.9 },
            PlantedTerm { descriptor: d([0, 1, 0, 0]), coefficient: 0.001 },
        ];
        let run = generate_surrogate(&spec, &c, &p).unwrap();
        let e = compute_error_series(&run.reference, &run.base).unwrap();
        // independent forward simulation with hand-rolled z-scores
        let n = c.len() as f64;
        let mean = c.current().iter().sum::<f64>() / n;
        let std = (c.current().iter().map(|i| (i - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut x = 0.0;
        for k in 0..c.len() {
            assert!((e[k] - x).abs() < 1e-12, "k={k}");
            x = 0.9 * x + 0.001 * (c.current()[k] - mean) / std;
        }
    }

    #[test]
    fn noise_is_seeded() {
        let p = CellParameters::default();
        let mut spec = SurrogateSpec::identity(&p);
        spec.noise_std = 1e-3;
        spec.seed = 11;
        let a = generate_surrogate_trace(&spec, &cycle(), &p).unwrap();
        let b = generate_surrogate_trace(&spec, &cycle(), &p).unwrap();
        assert_eq!(a, b);
        spec.seed = 12;
        assert_ne!(a, generate_surrogate_trace(&spec, &cycle(), &p).unwrap());
    }

    #[test]
    fn negative_noise_rejected() {
        let p = CellParameters::default();
        let mut spec = SurrogateSpec::identity(&p);
        spec.noise_std = -1.0;
        assert!(generate_surrogate_trace(&spec, &cycle(), &p).is_err());
    }
}
