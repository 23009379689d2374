//! Numerical ground truth: backward finite differences for the PDE, flows of
//! symmetry fields, pushforwards of solutions, Monte-Carlo FBSDE defects and
//! the Brownian time-change check.

pub mod export;
mod flow;
mod mc;
mod pde;

pub use flow::{flow, pushforward_and_residual, FlowSpec, PushforwardReport};
pub use mc::{
    simulate_fbsde_residual, time_change_check, FbsdeConfig, FbsdeStats, TimeChangeConfig,
    TimeChangeForm, TimeChangeStats,
};
pub use pde::{
    pde_residual, residual_floor, residual_stats, solve_pde_backward, GridSpec, ResidualStats,
};

use serde::Serialize;

use crate::expr::{Compiled, ExprError, VarEnv};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("sigma must be positive on the domain, got {value} at (t, x) = ({t}, {x})")]
    Sigma { t: f64, x: f64, value: f64 },
    #[error("tridiagonal solve broke down at time step {step}")]
    Breakdown { step: usize },
    #[error("non-finite value at time step {step} (t = {t}): the scheme blew up")]
    BlowUp { step: usize, t: f64 },
    #[error("non-finite value along the flow at eps = {eps}")]
    FlowDiverged { eps: f64 },
    #[error("point ({t}, {x}) lies outside the grid")]
    OutsideGrid { t: f64, x: f64 },
    #[error("transformed domain has no overlap with the grid")]
    EmptyOverlap,
    #[error("{exits} of {paths} paths left the spatial grid ({:.1}%); widen the domain", 100.0 * *exits as f64 / *paths as f64)]
    Exits { exits: usize, paths: usize },
    #[error("time map is not monotone: 1 + eps*tau'({t}) = {value}")]
    NonMonotoneTime { t: f64, value: f64 },
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub type Result<T, E = NumericsError> = std::result::Result<T, E>;

/// Coefficients of u_t + b u_x + ½σ² u_xx + g(t,x,u,σu_x) = 0, u(T,·) = H.
pub trait Coefficients: Send + Sync {
    fn horizon(&self) -> f64;
    fn b(&self, t: f64, x: f64) -> Result<f64>;
    fn sigma(&self, t: f64, x: f64) -> Result<f64>;
    fn g(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64>;
    fn terminal(&self, x: f64) -> Result<f64>;
}

/// A [`ProblemSpec`] compiled for fast evaluation.
#[derive(Clone)]
pub struct CompiledProblem {
    b: Compiled,
    sigma: Compiled,
    g: Compiled,
    h: Compiled,
    horizon: f64,
}

impl CompiledProblem {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        Self::with_env(spec, &VarEnv::new())
    }

    /// `env` supplies numeric implementations of opaque symbols.
    pub fn with_env(spec: &ProblemSpec, env: &VarEnv) -> Result<Self> {
        Ok(CompiledProblem {
            b: spec.b.compile(&["t", "x"], env)?,
            sigma: spec.sigma.compile(&["t", "x"], env)?,
            g: spec.g.compile(&["t", "x", "y", "z"], env)?,
            h: spec.terminal.compile(&["x"], env)?,
            horizon: spec.horizon,
        })
    }
}

impl Coefficients for CompiledProblem {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn b(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.b.eval(&[t, x])?)
    }
    fn sigma(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.sigma.eval(&[t, x])?)
    }
    fn g(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
        Ok(self.g.eval(&[t, x, y, z])?)
    }
    fn terminal(&self, x: f64) -> Result<f64> {
        Ok(self.h.eval(&[x])?)
    }
}

/// Values on a uniform (t, x) grid; `values[m][i]` is u(times[m], xs[i]).
/// Entries outside a pushforward's overlap are NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn h(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .filter(|v| v.is_finite())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Max |u − f| over finite nodes.
    pub fn max_error(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut e: f64 = 0.0;
        for (m, row) in self.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if v.is_finite() {
                    e = e.max((v - f(self.times[m], self.xs[i])).abs());
                }
            }
        }
        e
    }

    fn locate_t(&self, t: f64) -> Option<(usize, f64)> {
        let (t0, tn) = (self.times[0], self.horizon());
        let tol = 1e-12 * (1.0 + tn.abs());
        if !(t >= t0 - tol && t <= tn + tol) {
            return None;
        }
        let m_max = self.times.len() - 1;
        let s = ((t - t0) / self.dt()).clamp(0.0, m_max as f64);
        let m = (s.floor() as usize).min(m_max - 1);
        Some((m, s - m as f64))
    }

    /// Cubic Lagrange stencil: start index and weights (value, derivative).
    fn stencil_x(&self, x: f64) -> Option<(usize, [f64; 4], [f64; 4])> {
        let n = self.xs.len() - 1;
        let (x0, xn) = (self.xs[0], self.xs[n]);
        let tol = 1e-12 * (1.0 + xn.abs().max(x0.abs()));
        if !(x >= x0 - tol && x <= xn + tol) || n < 3 {
            return None;
        }
        let h = self.h();
        let s = (x - x0) / h;
        let i = (s.floor() as isize).clamp(1, n as isize - 2) as usize;
        let start = i - 1;
        let r = s - start as f64; // local coordinate, nodes at 0,1,2,3
        let nodes = [0.0, 1.0, 2.0, 3.0];
        let mut w = [0.0; 4];
        let mut dw = [0.0; 4];
        for j in 0..4 {
            let denom: f64 = (0..4)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            w[j] = (0..4)
                .filter(|&k| k != j)
                .map(|k| r - nodes[k])
                .product::<f64>()
                / denom;
            let mut d = 0.0;
            for skip in (0..4).filter(|&k| k != j) {
                d += (0..4)
                    .filter(|&k| k != j && k != skip)
                    .map(|k| r - nodes[k])
                    .product::<f64>();
            }
            dw[j] = d / denom / h;
        }
        Some((start, w, dw))
    }

    fn interp(&self, t: f64, x: f64, deriv: bool) -> Result<f64> {
        let (m, a) = self
            .locate_t(t)
            .ok_or(NumericsError::OutsideGrid { t, x })?;
        let (start, w, dw) = self
            .stencil_x(x)
            .ok_or(NumericsError::OutsideGrid { t, x })?;
        let weights = if deriv { dw } else { w };
        let level = |row: &Vec<f64>| (0..4).map(|j| weights[j] * row[start + j]).sum::<f64>();
        let lo = level(&self.values[m]);
        if a == 0.0 {
            return Ok(lo);
        }
        let hi = level(&self.values[m + 1]);
        if a == 1.0 {
            return Ok(hi);
        }
        Ok((1.0 - a) * lo + a * hi)
    }

    /// u(t, x): cubic Lagrange in x, linear in t.
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64> {
        self.interp(t, x, false)
    }

    /// u_x(t, x): derivative of the cubic interpolant, linear in t.
    pub fn derivative_at(&self, t: f64, x: f64) -> Result<f64> {
        self.interp(t, x, true)
    }
}
