//! Reduced-order electrochemical equivalent-circuit cell model.
//!
//! Terminal voltage is assembled from open-circuit potentials at the particle
//! surface, linearised kinetic overpotentials, electrolyte and ohmic losses and
//! a contact resistance. Solid diffusion uses a second-order Padé model
//! (bulk integrator plus a lag) and the electrolyte potential two first-order
//! lags; every linear block is discretised with the bilinear transform.

pub mod ocv;
pub mod params;
pub mod state_space;

use std::path::Path;

pub use ocv::OcvCurve;
pub use params::{CellParameters, ElectrodeParameters, KineticConstants, SocWindow};
pub use state_space::{ContinuousStateSpace, DiscreteStateSpace};

use crate::cycle::DriveCycle;
use crate::error::{Electrode, Error, Result};
use crate::io;

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain {
            name,
            value,
            reason: "must be > 0",
        })
    }
}

/// Padé time constant R^2 / (35 D).
fn pade_time_constant(e: &ElectrodeParameters) -> f64 {
    e.particle_radius.powi(2) / (35.0 * e.diffusion_coefficient)
}

/// Bulk-concentration transfer function
/// `((2/7)(R/D) s + 3/R) / ((1/35)(R^2/D) s^2 + s)`, split into an
/// integrator `3/R / s` and a lag with gain `(2/7)(R/D) - (3/R)(R^2/(35 D))`.
pub fn pade_bulk(e: &ElectrodeParameters) -> ContinuousStateSpace {
    let (r, d) = (e.particle_radius, e.diffusion_coefficient);
    let num_s = 2.0 / 7.0 * r / d;
    let num_0 = 3.0 / r;
    let tau = pade_time_constant(e);
    ContinuousStateSpace::parallel(&[
        ContinuousStateSpace::integrator(num_0),
        ContinuousStateSpace::first_order_lag(num_s - num_0 * tau, tau),
    ])
}

/// Diffusion transfer function `(R/(5D)) / ((1/35)(R^2/D) s + 1)`.
pub fn pade_diffusion(e: &ElectrodeParameters) -> ContinuousStateSpace {
    let gain = e.particle_radius / (5.0 * e.diffusion_coefficient);
    ContinuousStateSpace::first_order_lag(gain, pade_time_constant(e))
}

/// Input scaling `-R / (3 F eps L A)` from electrode current to concentration.
pub fn solid_input_scale(e: &ElectrodeParameters, faraday: f64, area: f64) -> f64 {
    -e.particle_radius / (3.0 * faraday * e.active_material_fraction * e.thickness * area)
}

/// Discrete block mapping electrode current (A) to surface-concentration
/// deviation from the initial value (mol/m^3). States: bulk integrator,
/// bulk lag, diffusion lag.
pub fn realize_solid_diffusion(
    e: &ElectrodeParameters,
    faraday: f64,
    area: f64,
    dt: f64,
) -> Result<DiscreteStateSpace> {
    check_positive("particle_radius", e.particle_radius)?;
    check_positive("diffusion_coefficient", e.diffusion_coefficient)?;
    check_positive("active_material_fraction", e.active_material_fraction)?;
    check_positive("thickness", e.thickness)?;
    check_positive("area", area)?;
    check_positive("dt", dt)?;
    let blocks = [pade_bulk(e), pade_diffusion(e)];
    let sys = ContinuousStateSpace::parallel(&blocks).scaled(solid_input_scale(e, faraday, area));
    let d = sys.tustin(dt)?;
    d.validate()?;
    Ok(d)
}

/// Discrete block mapping cell current (A) to electrolyte potential (V).
pub fn realize_electrolyte(p: &CellParameters, dt: f64) -> Result<DiscreteStateSpace> {
    check_positive(
        "initial_electrolyte_concentration",
        p.initial_electrolyte_concentration,
    )?;
    check_positive("electrolyte_diffusivity", p.electrolyte_diffusivity)?;
    check_positive("cell_thickness", p.cell_thickness)?;
    check_positive("dt", dt)?;
    let l2 = p.cell_thickness.powi(2);
    let de = p.electrolyte_diffusivity;
    let sys = ContinuousStateSpace::parallel(&[
        ContinuousStateSpace::first_order_lag(0.124 * p.gamma_pos, 0.1052 * l2 / de),
        ContinuousStateSpace::first_order_lag(0.117 * p.gamma_neg, 0.0997 * l2 / de),
    ])
    .scaled(p.electrolyte_coefficient() / de);
    let d = sys.tustin(dt)?;
    d.validate()?;
    Ok(d)
}

/// Arrhenius-corrected exchange current density, A/m^2.
pub fn exchange_current_density(
    c_s: f64,
    e: &ElectrodeParameters,
    temperature: f64,
    k: &KineticConstants,
) -> Result<f64> {
    if !(c_s > 0.0 && c_s < e.max_concentration) {
        return Err(Error::ParameterDomain {
            name: "surface_concentration",
            value: c_s,
            reason: "must lie in (0, c_s,max)",
        });
    }
    check_positive("electrolyte_concentration", e.electrolyte_concentration)?;
    check_positive("temperature", temperature)?;
    let arrhenius = ((1.0 / k.reference_temperature - 1.0 / temperature) * e.activation_energy
        / k.gas_constant)
        .exp();
    Ok(arrhenius
        * k.faraday_constant
        * e.reaction_rate
        * (c_s * (e.max_concentration - c_s) * e.electrolyte_concentration).sqrt())
}

/// Linearised kinetic overpotential `R T_0 (-J I) / (F i_0)`, volts.
pub fn kinetic_overpotential(
    c_s: f64,
    e: &ElectrodeParameters,
    current: f64,
    temperature: f64,
    k: &KineticConstants,
) -> Result<f64> {
    let i0 = exchange_current_density(c_s, e, temperature, k)?;
    Ok(k.gas_constant * k.temperature * (-e.current_density_scaling * current)
        / (k.faraday_constant * i0))
}

/// Discrete-time simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct LfmState {
    pub solid_pos: [f64; 3],
    pub solid_neg: [f64; 3],
    pub electrolyte: [f64; 2],
    /// Seconds.
    pub clock: f64,
}

/// Per-sample simulator output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfmOutput {
    pub voltage: f64,
    pub c_sp: f64,
    pub c_sn: f64,
}

/// Simulated signals aligned with a drive cycle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoltageTrace {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub v_lfm: Vec<f64>,
    pub c_sp: Vec<f64>,
    pub c_sn: Vec<f64>,
}

pub const TRACE_HEADER: [&str; 5] = ["t_s", "current_a", "v_lfm_v", "c_sp_molm3", "c_sn_molm3"];

impl VoltageTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        io::write_csv(
            path,
            &TRACE_HEADER,
            &[&self.t, &self.current, &self.v_lfm, &self.c_sp, &self.c_sn],
        )
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let [t, current, v_lfm, c_sp, c_sn] = io::read_columns(path, TRACE_HEADER)?;
        DriveCycle::new("trace", t.clone(), current.clone()).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })?;
        Ok(VoltageTrace {
            t,
            current,
            v_lfm,
            c_sp,
            c_sn,
        })
    }
}

/// The cell simulator: parameters plus their discretised linear blocks.
#[derive(Debug, Clone)]
pub struct Lfm {
    params: CellParameters,
    solid_pos: DiscreteStateSpace,
    solid_neg: DiscreteStateSpace,
    electrolyte: DiscreteStateSpace,
}

impl Lfm {
    pub fn new(params: CellParameters, dt: f64) -> Result<Self> {
        params.validate()?;
        let f = params.faraday_constant;
        let solid_pos = realize_solid_diffusion(&params.positive, f, params.area, dt)?;
        let solid_neg = realize_solid_diffusion(&params.negative, f, params.area, dt)?;
        let electrolyte = realize_electrolyte(&params, dt)?;
        Ok(Lfm {
            params,
            solid_pos,
            solid_neg,
            electrolyte,
        })
    }

    pub fn params(&self) -> &CellParameters {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.solid_pos.dt
    }

    pub fn initial_state(&self) -> LfmState {
        LfmState {
            solid_pos: [0.0; 3],
            solid_neg: [0.0; 3],
            electrolyte: [0.0; 2],
            clock: 0.0,
        }
    }

    /// Outputs at the current sample and the state for the next one.
    ///
    /// Discharge (I > 0) delithiates the negative electrode and lithiates the
    /// positive one, so the positive solid block is driven by -I.
    pub fn step(&self, state: &LfmState, current: f64) -> Result<(LfmState, LfmOutput)> {
        let p = &self.params;
        let (i_pos, i_neg) = (-current, current);
        let c_sp = p.positive.initial_concentration + self.solid_pos.output(&state.solid_pos, i_pos);
        let c_sn = p.negative.initial_concentration + self.solid_neg.output(&state.solid_neg, i_neg);
        for (electrode, c, e) in [
            (Electrode::Positive, c_sp, &p.positive),
            (Electrode::Negative, c_sn, &p.negative),
        ] {
            if !(c > 0.0 && c < e.max_concentration) {
                return Err(Error::Saturation {
                    electrode,
                    concentration: c,
                    max: e.max_concentration,
                    time: state.clock,
                });
            }
        }
        let k = p.kinetic_constants();
        let eta_p = kinetic_overpotential(c_sp, &p.positive, current, p.temperature, &k)?;
        let eta_n = kinetic_overpotential(c_sn, &p.negative, current, p.temperature, &k)?;
        let u_p = p.ocv_positive.eval(c_sp / p.positive.max_concentration);
        let u_n = p.ocv_negative.eval(c_sn / p.negative.max_concentration);
        let phi_e = self.electrolyte.output(&state.electrolyte, current);
        let voltage = u_p - u_n - (eta_p - eta_n) + p.ohmic_potential(current)
            - current * p.contact_resistance
            + phi_e;

        let mut next = state.clone();
        self.solid_pos.advance(&mut next.solid_pos, i_pos);
        self.solid_neg.advance(&mut next.solid_neg, i_neg);
        self.electrolyte.advance(&mut next.electrolyte, current);
        next.clock += self.dt();
        Ok((next, LfmOutput { voltage, c_sp, c_sn }))
    }

    pub fn simulate(&self, cycle: &DriveCycle) -> Result<VoltageTrace> {
        self.simulate_from(&self.initial_state(), cycle).map(|(t, _)| t)
    }

    /// Runs `cycle` starting from `state`; returns the trace and final state.
    pub fn simulate_from(
        &self,
        state: &LfmState,
        cycle: &DriveCycle,
    ) -> Result<(VoltageTrace, LfmState)> {
        if (cycle.dt() - self.dt()).abs() > 1e-9 {
            return Err(Error::Cycle(format!(
                "cycle dt {} s differs from simulator dt {} s",
                cycle.dt(),
                self.dt()
            )));
        }
        let n = cycle.len();
        let mut trace = VoltageTrace {
            t: cycle.timestamps().to_vec(),
            current: cycle.current().to_vec(),
            v_lfm: Vec::with_capacity(n),
            c_sp: Vec::with_capacity(n),
            c_sn: Vec::with_capacity(n),
        };
        let mut state = state.clone();
        for (k, &i) in cycle.current().iter().enumerate() {
            let (next, out) = self.step(&state, i).map_err(|e| e.at_sample(k))?;
            trace.v_lfm.push(out.voltage);
            trace.c_sp.push(out.c_sp);
            trace.c_sn.push(out.c_sn);
            state = next;
        }
        Ok((trace, state))
    }
}

/// Simulates `cycle` from the parameters' initial concentrations at the cycle's dt.
pub fn simulate_cycle(params: &CellParameters, cycle: &DriveCycle) -> Result<VoltageTrace> {
    Lfm::new(params.clone(), cycle.dt())?.simulate(cycle)
}
