use serde::Serialize;

use super::{pde::residual_stats, Coefficients, GridFunction, NumericsError, Result};
use crate::calculus::VectorField;
use crate::expr::{Compiled, VarEnv};
use crate::par::{self, Execution};

/// Flow of a vector field up to parameter `epsilon`, integrated with
/// classical RK4 in `steps` steps.
#[derive(Clone)]
pub struct FlowSpec {
    pub field: VectorField,
    pub epsilon: f64,
    pub steps: usize,
    compiled: [Compiled; 3],
}

impl std::fmt::Debug for FlowSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowSpec")
            .field("field", &self.field.to_string())
            .field("epsilon", &self.epsilon)
            .field("steps", &self.steps)
            .finish()
    }
}

impl FlowSpec {
    pub fn new(field: VectorField, epsilon: f64, steps: usize) -> Result<Self> {
        Self::with_env(field, epsilon, steps, &VarEnv::new())
    }

    pub fn with_env(field: VectorField, epsilon: f64, steps: usize, env: &VarEnv) -> Result<Self> {
        if steps == 0 || !epsilon.is_finite() {
            return Err(NumericsError::Parameter(format!(
                "flow needs steps >= 1 and finite eps, got {steps}, {epsilon}"
            )));
        }
        let compiled = field.compile(env)?;
        Ok(FlowSpec {
            field,
            epsilon,
            steps,
            compiled,
        })
    }

    fn rhs(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        Ok([
            self.compiled[0].eval(&p)?,
            self.compiled[1].eval(&p)?,
            self.compiled[2].eval(&p)?,
        ])
    }

    fn integrate(&self, mut p: [f64; 3], eps: f64) -> Result<[f64; 3]> {
        if eps == 0.0 {
            return Ok(p);
        }
        let h = eps / self.steps as f64;
        let add =
            |p: [f64; 3], k: [f64; 3], s: f64| [p[0] + s * k[0], p[1] + s * k[1], p[2] + s * k[2]];
        for _ in 0..self.steps {
            let k1 = self.rhs(p)?;
            let k2 = self.rhs(add(p, k1, h / 2.0))?;
            let k3 = self.rhs(add(p, k2, h / 2.0))?;
            let k4 = self.rhs(add(p, k3, h))?;
            for j in 0..3 {
                p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(NumericsError::FlowDiverged { eps });
            }
        }
        Ok(p)
    }
}

/// (t, x, y) ↦ (t̃, x̃, ỹ) at parameter `fs.epsilon`.
pub fn flow(fs: &FlowSpec, point: (f64, f64, f64)) -> Result<(f64, f64, f64)> {
    let [t, x, y] = fs.integrate([point.0, point.1, point.2], fs.epsilon)?;
    Ok((t, x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardReport {
    #[serde(skip)]
    pub transformed: GridFunction,
    pub residual: f64,
    pub residual_nodes: usize,
    pub overlap_nodes: usize,
    /// max |ũ(T,x) − H(x)| when the field fixes the terminal time (τ(T) = 0).
    pub terminal_mismatch: Option<f64>,
}

/// Transform a grid solution by the flow and measure the PDE residual of
/// the result. The base map (t, x) ↦ (t̃, x̃) does not involve u, so each
/// target node is pulled back with −ε, u is interpolated there, and the
/// full flow carries (t, x, u) forward to give ũ. Nodes whose preimage
/// leaves the grid are NaN.
pub fn pushforward_and_residual(
    u: &GridFunction,
    fs: &FlowSpec,
    c: &dyn Coefficients,
    exec: Execution,
) -> Result<PushforwardReport> {
    fs.field
        .check_projectable()
        .map_err(|e| NumericsError::Parameter(e.to_string()))?;
    let transformed = if fs.epsilon == 0.0 {
        u.clone()
    } else {
        // t ↦ t̃ must stay monotone across the time grid
        let mut prev = f64::NEG_INFINITY;
        for &t in &u.times {
            let tt = fs.integrate([t, 0.0, 0.0], fs.epsilon)?[0];
            if tt <= prev {
                return Err(NumericsError::NonMonotoneTime {
                    t,
                    value: tt - prev,
                });
            }
            prev = tt;
        }
        let nx = u.xs.len();
        let flat = par::map_range(exec, u.times.len() * nx, |k| -> Result<f64> {
            let (tt, xt) = (u.times[k / nx], u.xs[k % nx]);
            let [t, x, _] = fs.integrate([tt, xt, 0.0], -fs.epsilon)?;
            let Ok(y0) = u.value_at(t, x) else {
                return Ok(f64::NAN);
            };
            if !y0.is_finite() {
                return Ok(f64::NAN);
            }
            Ok(fs.integrate([t, x, y0], fs.epsilon)?[2])
        });
        let flat = flat.into_iter().collect::<Result<Vec<f64>>>()?;
        GridFunction {
            times: u.times.clone(),
            xs: u.xs.clone(),
            values: flat.chunks(nx).map(<[f64]>::to_vec).collect(),
        }
    };
    let overlap_nodes = transformed
        .values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .count();
    if overlap_nodes == 0 {
        return Err(NumericsError::EmptyOverlap);
    }
    let stats = residual_stats(&transformed, c)?;
    if stats.nodes == 0 {
        return Err(NumericsError::EmptyOverlap);
    }
    let horizon = u.horizon();
    let terminal_mismatch =
        if fs.field.tau.is_zero() || fs.compiled[0].eval(&[horizon, 0.0, 0.0])? == 0.0 {
            let last = transformed.values.last().unwrap();
            let mut worst: Option<f64> = None;
            for (v, &x) in last.iter().zip(&u.xs) {
                if v.is_finite() {
                    let e = (v - c.terminal(x)?).abs();
                    worst = Some(worst.map_or(e, |w: f64| w.max(e)));
                }
            }
            worst
        } else {
            None
        };
    Ok(PushforwardReport {
        transformed,
        residual: stats.max,
        residual_nodes: stats.nodes,
        overlap_nodes,
        terminal_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::numerics::{pde_residual, solve_pde_backward, CompiledProblem, GridSpec};
    use crate::problem::ProblemSpec;

    fn vf(t: &str, x: &str, y: &str) -> VectorField {
        VectorField::parse(t, x, y).unwrap()
    }

    #[test]
    fn translation_and_dilation_flows() {
        let fs = FlowSpec::new(vf("0", "1", "0"), 0.7, 8).unwrap();
        let (t, x, y) = flow(&fs, (0.2, 1.0, 3.0)).unwrap();
        assert_eq!((t, y), (0.2, 3.0));
        assert!((x - 1.7).abs() < 1e-15);
        let fs = FlowSpec::new(vf("t", "0", "0"), 0.1, 64).unwrap();
        let (t, _, _) = flow(&fs, (1.3, 0.0, 0.0)).unwrap();
        assert!((t - 1.3 * 0.1f64.exp()).abs() <= 1e-10);
    }

    #[test]
    fn scaling_generator_closed_form() {
        let eps = 0.3;
        let fs = FlowSpec::new(vf("t", "1/2*x", "1/2*x"), eps, 64).unwrap();
        let (t, x, y) = flow(&fs, (1.0, 1.0, 0.0)).unwrap();
        let e2 = (eps / 2.0f64).exp();
        assert!((t - eps.exp()).abs() < 1e-10);
        assert!((x - e2).abs() < 1e-10);
        assert!((y - (e2 - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn translation_maps_linear_solution_to_itself() {
        let c = CompiledProblem::new(&ProblemSpec::heat(parse("x").unwrap())).unwrap();
        let u = solve_pde_backward(&c, GridSpec::new(50, 120, (-6.0, 6.0)).unwrap()).unwrap();
        let fs = FlowSpec::new(vf("0", "1", "1"), 0.3, 16).unwrap();
        let rep = pushforward_and_residual(&u, &fs, &c, Execution::Sequential).unwrap();
        assert!(rep.residual <= 1e-10, "{}", rep.residual);
        assert!(rep.transformed.max_error(|_, x| x) < 1e-12);
        assert_eq!(rep.terminal_mismatch.map(|m| m < 1e-12), Some(true));
        let id = FlowSpec::new(vf("0", "1", "1"), 0.0, 16).unwrap();
        let rep = pushforward_and_residual(&u, &id, &c, Execution::Sequential).unwrap();
        assert_eq!(rep.residual, pde_residual(&u, &c).unwrap());
    }
}
