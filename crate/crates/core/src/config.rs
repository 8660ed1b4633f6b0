//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cycle::InterSegmentCharge;
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::library::{Family, FeatureLibrary, LibraryConfig, N_SIGNALS};
use crate::lfm::CellParameters;
use crate::reference::{PlantedTerm, SurrogateSpec};

/// Multiplicative factors applied to the base cell to obtain the surrogate cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// Solid-phase diffusion coefficient, both electrodes.
    pub diffusion: f64,
    /// Reaction rate constant, both electrodes.
    pub reaction_rate: f64,
    /// Electrolyte conductivity.
    pub conductivity: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            diffusion: 1.0,
            reaction_rate: 1.0,
            conductivity: 1.0,
        }
    }
}

impl Perturbation {
    pub fn apply(&self, base: &CellParameters) -> CellParameters {
        let mut p = base.clone();
        for e in [&mut p.positive, &mut p.negative] {
            e.diffusion_coefficient *= self.diffusion;
            e.reaction_rate *= self.reaction_rate;
        }
        p.conductivity *= self.conductivity;
        if let Some(rows) = &mut p.conductivity_poly {
            for r in rows.iter_mut() {
                r[0] *= self.conductivity;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedTermConfig {
    pub family: Family,
    pub exponents: [u8; N_SIGNALS],
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub perturbation: Perturbation,
    pub planted_terms: Vec<PlantedTermConfig>,
    /// V
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            perturbation: Perturbation::default(),
            planted_terms: Vec::new(),
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    /// Resolves planted terms against `lib`; unknown descriptors are config errors.
    pub fn spec(&self, base: &CellParameters, lib: &FeatureLibrary) -> Result<SurrogateSpec> {
        let planted_terms = self
            .planted_terms
            .iter()
            .map(|t| {
                let id = lib.find(t.family, t.exponents).ok_or_else(|| {
                    Error::Config(format!(
                        "planted term {}{:?} is not in the candidate library",
                        t.family, t.exponents
                    ))
                })?;
                Ok(PlantedTerm {
                    descriptor: lib.descriptors[id],
                    coefficient: t.coefficient,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = SurrogateSpec {
            perturbed: self.perturbation.apply(base),
            planted_terms,
            noise_std: self.noise_std,
            seed: self.seed,
            normalization: None,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    /// Charge inserted between segments; zero duration disables it.
    pub charge_c_rate: f64,
    pub charge_duration_s: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            charge_c_rate: 0.5,
            charge_duration_s: 0.0,
        }
    }
}

impl CycleConfig {
    pub fn charge(&self) -> Option<InterSegmentCharge> {
        (self.charge_duration_s > 0.0).then_some(InterSegmentCharge {
            c_rate: self.charge_c_rate,
            duration_s: self.charge_duration_s,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub cycles_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Ingested reference traces `<name>.csv`; when set, gen-data reads
    /// references from here instead of running the surrogate.
    pub references_dir: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            cycles_dir: PathBuf::from("."),
            out_dir: PathBuf::from("out"),
            references_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// s
    pub dt: f64,
    /// Overrides the cell's initial concentrations when set.
    pub initial_soc: Option<f64>,
    /// Store the wall-clock time in model metadata (breaks byte-identical reruns).
    pub record_timestamp: bool,
    pub cell: CellParameters,
    pub surrogate: SurrogateConfig,
    pub library: LibraryConfig,
    pub ga: GaConfig,
    pub cycles: CycleConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            dt: 1.0,
            initial_soc: None,
            record_timestamp: false,
            cell: CellParameters::default(),
            surrogate: SurrogateConfig::default(),
            library: LibraryConfig::default(),
            ga: GaConfig::default(),
            cycles: CycleConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let root = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.paths.cycles_dir, &mut cfg.paths.out_dir] {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        }
        if let Some(r) = &mut cfg.paths.references_dir {
            if r.is_relative() {
                *r = root.join(&*r);
            }
            if !r.is_dir() {
                return Err(Error::Config(format!(
                    "references_dir {} does not exist",
                    r.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if let Some(soc) = self.initial_soc {
            if !(0.0..=1.0).contains(&soc) {
                return Err(Error::Config(format!("initial_soc = {soc} outside [0, 1]")));
            }
        }
        self.cell.validate()?;
        self.ga.validate()?;
        FeatureLibrary::build(&self.library)?;
        Ok(())
    }

    /// The cell with the initial state of charge applied.
    pub fn cell(&self) -> CellParameters {
        let mut p = self.cell.clone();
        if let Some(soc) = self.initial_soc {
            p.set_initial_soc(soc);
        }
        p
    }

    /// GA settings with the run seed; training without a seed is an error.
    pub fn ga_with_seed(&self) -> Result<GaConfig> {
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("a seed is required for training (--seed or `seed =`)".into()))?;
        Ok(GaConfig {
            seed,
            ..self.ga.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
seed = 7
initial_soc = 0.9

[surrogate]
noise_std = 1e-3
planted_terms = [
  { family = "pol", exponents = [1, 0, 0, 0], coefficient = 0.6 },
  { family = "cos", exponents = [0, 0, 1, 0], coefficient = 0.04 },
]
[surrogate.perturbation]
diffusion = 1.05

[ga]
population_size = 16
validation = "free_running"

[cycles]
charge_duration_s = 300
"#,
        )
        .unwrap();
        assert_eq!(cfg.ga.population_size, 16);
        assert_eq!(cfg.ga_with_seed().unwrap().seed, 7);
        assert_eq!(cfg.cycles.charge().unwrap().duration_s, 300.0);
        let lib = FeatureLibrary::build(&cfg.library).unwrap();
        let spec = cfg.surrogate.spec(&cfg.cell(), &lib).unwrap();
        assert_eq!(spec.planted_terms.len(), 2);
        assert_eq!(
            spec.perturbed.positive.diffusion_coefficient,
            cfg.cell.positive.diffusion_coefficient * 1.05
        );
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml("sede = 1").is_err());
        assert!(RunConfig::from_toml("[ga]\nalpha = 0.6\nbeta = 0.6").is_err());
        assert!(RunConfig::from_toml("dt = 0").is_err());
        assert!(RunConfig::default().ga_with_seed().is_err());
    }

    #[test]
    fn planted_term_outside_library() {
        let cfg = RunConfig::from_toml(
            "[surrogate]\nplanted_terms = [{ family = \"tanh\", exponents = [1, 1, 0, 0], coefficient = 1.0 }]",
        )
        .unwrap();
        let lib = FeatureLibrary::build(&cfg.library).unwrap();
        assert!(cfg.surrogate.spec(&cfg.cell(), &lib).is_err());
    }

    #[test]
    fn shipped_configs_parse() {
        let planted = RunConfig::from_toml(include_str!("../../../configs/planted.toml")).unwrap();
        assert_eq!(planted.surrogate.planted_terms.len(), 3);
        let perturbed = RunConfig::from_toml(include_str!("../../../configs/perturbed.toml")).unwrap();
        assert_eq!(perturbed.surrogate.perturbation.diffusion, 1.05);
    }
}
