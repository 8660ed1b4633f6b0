use serde::{Deserialize, Serialize};

use super::ocv::OcvCurve;
use crate::error::{Electrode, Error, Result};

/// Per-electrode physical constants (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeParameters {
    /// Particle radius, m.
    pub particle_radius: f64,
    /// Solid-phase diffusion coefficient, m^2/s.
    pub diffusion_coefficient: f64,
    pub active_material_fraction: f64,
    /// Electrode thickness, m.
    pub thickness: f64,
    /// mol/m^3
    pub max_concentration: f64,
    /// mol/m^3
    pub initial_concentration: f64,
    /// Reaction rate constant, m^2.5 mol^-0.5 s^-1.
    pub reaction_rate: f64,
    /// J/mol
    pub activation_energy: f64,
    /// mol/m^3
    pub electrolyte_concentration: f64,
    /// Signed factor converting cell current (A) to interfacial current
    /// density (A/m^2); negative for the positive electrode.
    pub current_density_scaling: f64,
}

impl ElectrodeParameters {
    pub fn validate(&self, which: Electrode) -> Result<()> {
        let positive = [
            ("particle_radius", self.particle_radius),
            ("diffusion_coefficient", self.diffusion_coefficient),
            ("active_material_fraction", self.active_material_fraction),
            ("thickness", self.thickness),
            ("max_concentration", self.max_concentration),
            ("initial_concentration", self.initial_concentration),
            ("reaction_rate", self.reaction_rate),
            ("activation_energy", self.activation_energy),
            ("electrolyte_concentration", self.electrolyte_concentration),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::ParameterDomain {
                    name,
                    value,
                    reason: match which {
                        Electrode::Positive => "positive electrode value must be > 0",
                        Electrode::Negative => "negative electrode value must be > 0",
                    },
                });
            }
        }
        if self.initial_concentration >= self.max_concentration {
            return Err(Error::ParameterDomain {
                name: "initial_concentration",
                value: self.initial_concentration,
                reason: "must be below max_concentration",
            });
        }
        if !self.current_density_scaling.is_finite() {
            return Err(Error::ParameterDomain {
                name: "current_density_scaling",
                value: self.current_density_scaling,
                reason: "must be finite",
            });
        }
        Ok(())
    }

    /// Specific interfacial area 3 eps / R, 1/m.
    pub fn specific_area(&self) -> f64 {
        3.0 * self.active_material_fraction / self.particle_radius
    }

    /// Moles of lithium per unit stoichiometry change over the electrode volume.
    pub fn moles_per_stoichiometry(&self, area: f64) -> f64 {
        self.active_material_fraction * self.thickness * area * self.max_concentration
    }
}

/// Stoichiometry window mapping state of charge onto each electrode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocWindow {
    pub theta_pos_0: f64,
    pub theta_pos_100: f64,
    pub theta_neg_0: f64,
    pub theta_neg_100: f64,
}

impl SocWindow {
    pub fn theta_pos(&self, soc: f64) -> f64 {
        self.theta_pos_0 + soc * (self.theta_pos_100 - self.theta_pos_0)
    }

    pub fn theta_neg(&self, soc: f64) -> f64 {
        self.theta_neg_0 + soc * (self.theta_neg_100 - self.theta_neg_0)
    }
}

/// Optional electrolyte-conductivity polynomial
/// `kappa = sum coef * (c_e0 / 1000)^p_c * T^p_T`; each row is `[coef, p_c, p_T]`.
pub type ConductivityPolynomial = Vec<[f64; 3]>;

/// All constants of the reduced-order cell model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellParameters {
    pub positive: ElectrodeParameters,
    pub negative: ElectrodeParameters,
    /// m
    pub cell_thickness: f64,
    /// Electrode plate area, m^2.
    pub area: f64,
    /// m^2
    pub surface_area: f64,
    /// Ohm
    pub contact_resistance: f64,
    /// m^2/s
    pub electrolyte_diffusivity: f64,
    /// mol/m^3
    pub initial_electrolyte_concentration: f64,
    pub transference_number: f64,
    pub beta: f64,
    pub gamma_pos: f64,
    pub gamma_neg: f64,
    /// S/m; used when `conductivity_poly` is absent.
    pub conductivity: f64,
    pub conductivity_poly: Option<ConductivityPolynomial>,
    /// K
    pub temperature: f64,
    /// K
    pub reference_temperature: f64,
    pub gas_constant: f64,
    pub faraday_constant: f64,
    pub ocv_positive: OcvCurve,
    pub ocv_negative: OcvCurve,
    pub soc_window: SocWindow,
}

/// Constants shared by both kinetic-overpotential evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticConstants {
    pub gas_constant: f64,
    pub faraday_constant: f64,
    /// Cell temperature T_0 used in the overpotential numerator.
    pub temperature: f64,
    pub reference_temperature: f64,
}

impl Default for CellParameters {
    /// NMC/graphite cell of roughly 3.15 Ah; 100% SOC sits at 4.20 V open circuit.
    fn default() -> Self {
        let area = 0.1;
        let mut positive = ElectrodeParameters {
            particle_radius: 5.0e-6,
            diffusion_coefficient: 1.0e-14,
            active_material_fraction: 0.5,
            thickness: 70.0e-6,
            max_concentration: 51_555.0,
            initial_concentration: 0.0,
            reaction_rate: 2.0e-11,
            activation_energy: 3.0e4,
            electrolyte_concentration: 1000.0,
            current_density_scaling: 0.0,
        };
        let mut negative = ElectrodeParameters {
            particle_radius: 8.0e-6,
            diffusion_coefficient: 3.9e-14,
            active_material_fraction: 0.58,
            thickness: 80.0e-6,
            max_concentration: 30_555.0,
            initial_concentration: 0.0,
            reaction_rate: 4.0e-11,
            activation_energy: 3.7e4,
            electrolyte_concentration: 1000.0,
            current_density_scaling: 0.0,
        };
        positive.current_density_scaling =
            -1.0 / (positive.specific_area() * positive.thickness * area);
        negative.current_density_scaling =
            1.0 / (negative.specific_area() * negative.thickness * area);

        let soc_window = SocWindow {
            theta_pos_0: 0.90,
            theta_pos_100: 0.25,
            theta_neg_0: 0.02,
            theta_neg_100: 0.85,
        };
        positive.initial_concentration = soc_window.theta_pos_100 * positive.max_concentration;
        negative.initial_concentration = soc_window.theta_neg_100 * negative.max_concentration;

        let ocv_positive = OcvCurve::new(
            vec![0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0],
            vec![
                4.60, 4.48, 4.34, 4.28, 4.22, 4.11, 4.01, 3.92, 3.83, 3.73, 3.59, 3.45, 3.00,
            ],
        )
        .expect("default positive OCV table");
        let ocv_negative = OcvCurve::new(
            vec![
                0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 1.0,
            ],
            vec![
                1.20, 0.60, 0.35, 0.24, 0.18, 0.14, 0.125, 0.12, 0.10, 0.09, 0.085, 0.08, 0.075,
                0.05,
            ],
        )
        .expect("default negative OCV table");

        CellParameters {
            positive,
            negative,
            cell_thickness: 175.0e-6,
            area,
            surface_area: area,
            contact_resistance: 0.01,
            electrolyte_diffusivity: 2.5e-10,
            initial_electrolyte_concentration: 1000.0,
            transference_number: 0.38,
            beta: 0.3,
            gamma_pos: 1.0,
            gamma_neg: 1.0,
            conductivity: 1.0,
            conductivity_poly: None,
            temperature: 298.15,
            reference_temperature: 298.15,
            gas_constant: 8.314_462_618,
            faraday_constant: 96_485.332_12,
            ocv_positive,
            ocv_negative,
            soc_window,
        }
    }
}

impl CellParameters {
    pub fn validate(&self) -> Result<()> {
        self.positive.validate(Electrode::Positive)?;
        self.negative.validate(Electrode::Negative)?;
        let positive = [
            ("cell_thickness", self.cell_thickness),
            ("area", self.area),
            ("surface_area", self.surface_area),
            ("contact_resistance", self.contact_resistance),
            ("electrolyte_diffusivity", self.electrolyte_diffusivity),
            (
                "initial_electrolyte_concentration",
                self.initial_electrolyte_concentration,
            ),
            ("beta", self.beta),
            ("gamma_pos", self.gamma_pos),
            ("gamma_neg", self.gamma_neg),
            ("temperature", self.temperature),
            ("reference_temperature", self.reference_temperature),
            ("gas_constant", self.gas_constant),
            ("faraday_constant", self.faraday_constant),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::ParameterDomain {
                    name,
                    value,
                    reason: "must be > 0",
                });
            }
        }
        let t = self.transference_number;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::ParameterDomain {
                name: "transference_number",
                value: t,
                reason: "must lie in (0, 1)",
            });
        }
        let kappa = self.conductivity_value();
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::ParameterDomain {
                name: "conductivity",
                value: kappa,
                reason: "must be > 0",
            });
        }
        let w = &self.soc_window;
        for (name, value) in [
            ("theta_pos_0", w.theta_pos_0),
            ("theta_pos_100", w.theta_pos_100),
            ("theta_neg_0", w.theta_neg_0),
            ("theta_neg_100", w.theta_neg_100),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::ParameterDomain {
                    name,
                    value,
                    reason: "stoichiometry must lie in (0, 1)",
                });
            }
        }
        Ok(())
    }

    /// Electrolyte conductivity, either the constant or the polynomial hook.
    pub fn conductivity_value(&self) -> f64 {
        match &self.conductivity_poly {
            None => self.conductivity,
            Some(rows) => {
                let c = self.initial_electrolyte_concentration / 1000.0;
                rows.iter()
                    .map(|[coef, pc, pt]| coef * c.powf(*pc) * self.temperature.powf(*pt))
                    .sum()
            }
        }
    }

    pub fn electrode(&self, which: Electrode) -> &ElectrodeParameters {
        match which {
            Electrode::Positive => &self.positive,
            Electrode::Negative => &self.negative,
        }
    }

    pub fn kinetic_constants(&self) -> KineticConstants {
        KineticConstants {
            gas_constant: self.gas_constant,
            faraday_constant: self.faraday_constant,
            temperature: self.temperature,
            reference_temperature: self.reference_temperature,
        }
    }

    /// Sets both initial surface concentrations from a state of charge in [0, 1].
    pub fn set_initial_soc(&mut self, soc: f64) {
        self.positive.initial_concentration =
            self.soc_window.theta_pos(soc) * self.positive.max_concentration;
        self.negative.initial_concentration =
            self.soc_window.theta_neg(soc) * self.negative.max_concentration;
    }

    /// Usable capacity in ampere-hours, limited by the negative-electrode window.
    pub fn nominal_capacity_ah(&self) -> f64 {
        let dtheta = (self.soc_window.theta_neg_100 - self.soc_window.theta_neg_0).abs();
        self.negative.moles_per_stoichiometry(self.area) * dtheta * self.faraday_constant / 3600.0
    }

    /// Open-circuit voltage at the configured initial concentrations.
    pub fn initial_ocv(&self) -> f64 {
        let tp = self.positive.initial_concentration / self.positive.max_concentration;
        let tn = self.negative.initial_concentration / self.negative.max_concentration;
        self.ocv_positive.eval(tp) - self.ocv_negative.eval(tn)
    }

    /// Electrolyte potential coefficient C_1.
    ///
    /// Read as printed: the 0.982 term multiplies
    /// `(1 - 0.0052 (T_0 - T_ref) (c_e0/1000)^1.5)` and is added to
    /// `0.601 - 0.24 sqrt(c_e0/1000)`; the leading `2 R T` uses T_0.
    pub fn electrolyte_coefficient(&self) -> f64 {
        let ce = self.initial_electrolyte_concentration / 1000.0;
        let f = self.faraday_constant;
        let activity = 0.601 - 0.24 * ce.sqrt()
            + 0.982 * (1.0 - 0.0052 * (self.temperature - self.reference_temperature) * ce.powf(1.5));
        2.0 * self.gas_constant
            * self.temperature
            * (-self.cell_thickness / self.surface_area / (f * f * self.initial_electrolyte_concentration))
            * (1.0 - self.transference_number)
            * (1.0 + self.beta)
            * activity
    }

    /// Ohmic potential drop for a given current.
    pub fn ohmic_potential(&self, current: f64) -> f64 {
        -current * self.cell_thickness / (self.conductivity_value() * self.area)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_start_near_4v2() {
        let p = CellParameters::default();
        p.validate().unwrap();
        assert!((p.initial_ocv() - 4.2).abs() < 1e-9, "{}", p.initial_ocv());
        let cap = p.nominal_capacity_ah();
        assert!(cap > 3.0 && cap < 3.3, "{cap}");
    }

    #[test]
    fn electrolyte_coefficient_is_negative_at_reference_temperature() {
        let p = CellParameters::default();
        assert_eq!(p.temperature, p.reference_temperature);
        // direct evaluation of the closed form
        let r = p.gas_constant;
        let t = p.temperature;
        let f = p.faraday_constant;
        let expected = 2.0 * r * t * (-p.cell_thickness / p.surface_area) / (f * f * 1000.0)
            * (1.0 - 0.38)
            * 1.3
            * (0.601 - 0.24 + 0.982);
        let c1 = p.electrolyte_coefficient();
        assert!(c1 < 0.0);
        assert!(((c1 - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn soc_window_maps_endpoints() {
        let mut p = CellParameters::default();
        p.set_initial_soc(0.0);
        let tn = p.negative.initial_concentration / p.negative.max_concentration;
        assert!((tn - 0.02).abs() < 1e-12);
        p.set_initial_soc(1.0);
        assert!((p.initial_ocv() - 4.2).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_values() {
        let mut p = CellParameters::default();
        p.positive.diffusion_coefficient = 0.0;
        assert!(p.validate().is_err());
        let p = CellParameters {
            transference_number: 1.2,
            ..CellParameters::default()
        };
        assert!(p.validate().is_err());
        let mut p = CellParameters::default();
        p.negative.initial_concentration = p.negative.max_concentration;
        assert!(p.validate().is_err());
    }

    #[test]
    fn conductivity_polynomial_hook() {
        let p = CellParameters {
            conductivity_poly: Some(vec![[0.5, 1.0, 0.0], [0.5, 0.0, 0.0]]),
            ..CellParameters::default()
        };
        assert!((p.conductivity_value() - 1.0).abs() < 1e-15);
    }
}
