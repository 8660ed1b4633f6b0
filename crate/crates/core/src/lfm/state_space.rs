//! Single-input single-output linear state-space blocks and their bilinear
//! (Tustin) discretization.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Largest block order the simulator steps without allocating.
pub const MAX_ORDER: usize = 8;

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

/// `x[k+1] = A x[k] + B u[k]`, `y[k] = C x[k] + D u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub dt: f64,
}

impl ContinuousStateSpace {
    /// First-order lag `gain / (tau s + 1)` with the state equal to the output.
    pub fn first_order_lag(gain: f64, tau: f64) -> Self {
        ContinuousStateSpace {
            a: DMatrix::from_element(1, 1, -1.0 / tau),
            b: DVector::from_element(1, gain / tau),
            c: RowDVector::from_element(1, 1.0),
            d: 0.0,
        }
    }

    /// Pure integrator `gain / s`.
    pub fn integrator(gain: f64) -> Self {
        ContinuousStateSpace {
            a: DMatrix::zeros(1, 1),
            b: DVector::from_element(1, gain),
            c: RowDVector::from_element(1, 1.0),
            d: 0.0,
        }
    }

    /// Parallel connection: outputs summed, input shared.
    pub fn parallel(blocks: &[ContinuousStateSpace]) -> Self {
        let n: usize = blocks.iter().map(|b| b.order()).sum();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = RowDVector::zeros(n);
        let mut d = 0.0;
        let mut off = 0;
        for blk in blocks {
            let k = blk.order();
            a.view_mut((off, off), (k, k)).copy_from(&blk.a);
            b.rows_mut(off, k).copy_from(&blk.b);
            c.columns_mut(off, k).copy_from(&blk.c);
            d += blk.d;
            off += k;
        }
        ContinuousStateSpace { a, b, c, d }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Scales the input channel, i.e. `G(s) -> k G(s)`.
    pub fn scaled(mut self, k: f64) -> Self {
        self.b *= k;
        self.d *= k;
        self
    }

    /// `-C A^{-1} B + D`; `None` when A is singular (integrating block).
    pub fn dc_gain(&self) -> Option<f64> {
        let lu = self.a.clone().lu();
        let x = lu.solve(&self.b)?;
        let g = -(&self.c * x)[(0, 0)] + self.d;
        g.is_finite().then_some(g)
    }

    /// Bilinear transform with sampling period `dt`:
    /// `Ad = M (I + A dt/2)`, `Bd = M B dt`, `Cd = C M`, `Dd = D + C M B dt/2`
    /// where `M = (I - A dt/2)^{-1}`.
    pub fn tustin(&self, dt: f64) -> Result<DiscreteStateSpace> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::ParameterDomain {
                name: "dt",
                value: dt,
                reason: "sampling period must be > 0",
            });
        }
        let n = self.order();
        let eye = DMatrix::<f64>::identity(n, n);
        let half = &self.a * (dt / 2.0);
        let m = (&eye - &half)
            .try_inverse()
            .ok_or_else(|| Error::Linalg("I - A dt/2 is singular".into()))?;
        let a = &m * (&eye + &half);
        let b = &m * &self.b * dt;
        let c = &self.c * &m;
        let d = self.d + (&self.c * &m * &self.b)[(0, 0)] * dt / 2.0;
        Ok(DiscreteStateSpace { a, b, c, d, dt })
    }
}

impl DiscreteStateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        if self.a.ncols() != n || self.b.len() != n || self.c.len() != n {
            return Err(Error::Linalg("inconsistent state-space dimensions".into()));
        }
        if n > MAX_ORDER {
            return Err(Error::Linalg(format!("block order {n} exceeds {MAX_ORDER}")));
        }
        if !(self.dt > 0.0) {
            return Err(Error::ParameterDomain {
                name: "dt",
                value: self.dt,
                reason: "sampling period must be > 0",
            });
        }
        let rho = self.spectral_radius();
        if rho > 1.0 + 1e-9 {
            return Err(Error::Linalg(format!("unstable discrete block, spectral radius {rho}")));
        }
        Ok(())
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `C (I - A)^{-1} B + D`; `None` for blocks with a pole at z = 1.
    pub fn dc_gain(&self) -> Option<f64> {
        let n = self.order();
        let lhs = DMatrix::<f64>::identity(n, n) - &self.a;
        let x = lhs.lu().solve(&self.b)?;
        let g = (&self.c * x)[(0, 0)] + self.d;
        g.is_finite().then_some(g)
    }

    #[inline]
    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        let mut y = self.d * u;
        for (i, xi) in x.iter().enumerate() {
            y += self.c[i] * xi;
        }
        y
    }

    /// Advances `x` in place by one sample.
    #[inline]
    pub fn advance(&self, x: &mut [f64], u: f64) {
        let n = x.len();
        debug_assert_eq!(n, self.order());
        let mut next = [0.0; MAX_ORDER];
        for (i, slot) in next.iter_mut().enumerate().take(n) {
            let mut acc = self.b[i] * u;
            for (j, xj) in x.iter().enumerate() {
                acc += self.a[(i, j)] * xj;
            }
            *slot = acc;
        }
        x.copy_from_slice(&next[..n]);
    }

    /// Output sequence for an input sequence, from a zero initial state.
    pub fn response(&self, input: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.order()];
        input
            .iter()
            .map(|&u| {
                let y = self.output(&x, u);
                self.advance(&mut x, u);
                y
            })
            .collect()
    }
}
