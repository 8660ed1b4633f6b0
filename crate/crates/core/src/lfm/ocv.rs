//! Open-circuit potential curves as monotone piecewise-cubic lookup tables.
//!
//! Interpolation uses the Fritsch–Carlson slope limiter so a monotone table
//! yields a monotone curve with a continuous first derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A monotone map from stoichiometry (0..=1) to volts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OcvTable", into = "OcvTable")]
pub struct OcvCurve {
    theta: Vec<f64>,
    volts: Vec<f64>,
    slopes: Vec<f64>,
}

/// Serialized form: paired arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcvTable {
    pub theta: Vec<f64>,
    pub volts: Vec<f64>,
}

impl TryFrom<OcvTable> for OcvCurve {
    type Error = Error;

    fn try_from(t: OcvTable) -> Result<Self> {
        OcvCurve::new(t.theta, t.volts)
    }
}

impl From<OcvCurve> for OcvTable {
    fn from(c: OcvCurve) -> Self {
        OcvTable {
            theta: c.theta,
            volts: c.volts,
        }
    }
}

impl OcvCurve {
    pub fn new(theta: Vec<f64>, volts: Vec<f64>) -> Result<Self> {
        if theta.len() != volts.len() || theta.len() < 2 {
            return Err(Error::Config(
                "OCV table needs at least two paired (theta, volts) points".into(),
            ));
        }
        if theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("OCV stoichiometry grid must be strictly increasing".into()));
        }
        if theta[0] > 0.0 || theta[theta.len() - 1] < 1.0 {
            return Err(Error::Config("OCV table must cover stoichiometry [0, 1]".into()));
        }
        let rising = volts.windows(2).all(|w| w[1] > w[0]);
        let falling = volts.windows(2).all(|w| w[1] < w[0]);
        if !(rising || falling) {
            return Err(Error::Config("OCV table must be strictly monotone".into()));
        }
        if volts.iter().chain(theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("OCV table contains non-finite values".into()));
        }
        let slopes = fritsch_carlson_slopes(&theta, &volts);
        Ok(OcvCurve {
            theta,
            volts,
            slopes,
        })
    }

    /// Evaluates the curve; stoichiometries outside the table are clamped.
    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.theta.len();
        let x = theta.clamp(self.theta[0], self.theta[n - 1]);
        // index of the interval [x_i, x_{i+1}] containing x
        let i = match self.theta.partition_point(|&t| t <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.theta[i + 1] - self.theta[i];
        let s = (x - self.theta[i]) / h;
        let (y0, y1) = (self.volts[i], self.volts[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn volts(&self) -> &[f64] {
        &self.volts
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            (delta[i - 1] + delta[i]) / 2.0
        };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta[i];
        let b = m[i + 1] / delta[i];
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[i] = tau * a * delta[i];
            m[i + 1] = tau * b * delta[i];
        }
    }
    m
}
