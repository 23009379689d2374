use serde::Serialize;

use super::{Coefficients, GridFunction, NumericsError, Result};

/// M time steps over [0, T], N cells over [x_min, x_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub steps: usize,
    pub cells: usize,
    pub domain: (f64, f64),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            steps: 200,
            cells: 400,
            domain: (-6.0, 6.0),
        }
    }
}

impl GridSpec {
    pub fn new(steps: usize, cells: usize, domain: (f64, f64)) -> Result<Self> {
        let g = GridSpec {
            steps,
            cells,
            domain,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(NumericsError::Parameter(
                "need at least one time step".into(),
            ));
        }
        if self.cells < 6 {
            return Err(NumericsError::Parameter(format!(
                "need at least 6 cells, got {}",
                self.cells
            )));
        }
        let (a, b) = self.domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(NumericsError::Parameter(format!(
                "invalid domain [{a}, {b}]"
            )));
        }
        Ok(())
    }

    fn axes(&self, horizon: f64) -> (Vec<f64>, Vec<f64>) {
        let dt = horizon / self.steps as f64;
        let h = (self.domain.1 - self.domain.0) / self.cells as f64;
        let times = (0..=self.steps)
            .map(|m| {
                if m == self.steps {
                    horizon
                } else {
                    m as f64 * dt
                }
            })
            .collect();
        let xs = (0..=self.cells)
            .map(|i| {
                if i == self.cells {
                    self.domain.1
                } else {
                    self.domain.0 + i as f64 * h
                }
            })
            .collect();
        (times, xs)
    }
}

/// Second difference with the cubic ghost node at the edges.
fn second_difference(u: &[f64], i: usize) -> f64 {
    let n = u.len() - 1;
    if i == 0 {
        2.0 * (u[0] - u[1]) - 3.0 * (u[1] - u[2]) + (u[2] - u[3])
    } else if i == n {
        2.0 * (u[n] - u[n - 1]) - 3.0 * (u[n - 1] - u[n - 2]) + (u[n - 2] - u[n - 3])
    } else {
        (u[i + 1] - u[i]) - (u[i] - u[i - 1])
    }
}

/// u_{i+1} − u_{i−1} with the cubic ghost node at the edges.
fn central_ghost(u: &[f64], i: usize) -> f64 {
    let n = u.len() - 1;
    if i == 0 {
        -4.0 * (u[0] - u[1]) + 3.0 * (u[1] - u[2]) - (u[2] - u[3])
    } else if i == n {
        4.0 * (u[n] - u[n - 1]) - 3.0 * (u[n - 1] - u[n - 2]) + (u[n - 2] - u[n - 3])
    } else {
        u[i + 1] - u[i - 1]
    }
}

/// Second-order first derivative: central inside, one-sided at the edges.
fn dx(u: &[f64], i: usize, h: f64) -> f64 {
    let n = u.len() - 1;
    if i == 0 {
        (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    } else if i == n {
        (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h)
    } else {
        (u[i + 1] - u[i - 1]) / (2.0 * h)
    }
}

fn positive_sigma(c: &dyn Coefficients, t: f64, x: f64) -> Result<f64> {
    let s = c.sigma(t, x)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(NumericsError::Sigma { t, x, value: s });
    }
    Ok(s)
}

/// Backward IMEX Euler: drift and diffusion implicit, g explicit from the
/// later level. Edge values come from a ghost node extrapolated with a
/// vanishing fourth difference, which keeps cubics exact; the resulting
/// band system is solved with partial pivoting.
pub fn solve_pde_backward(c: &dyn Coefficients, grid: GridSpec) -> Result<GridFunction> {
    grid.validate()?;
    let horizon = c.horizon();
    let (times, xs) = grid.axes(horizon);
    let (m_steps, n) = (grid.steps, grid.cells);
    let dt = horizon / m_steps as f64;
    let h = (grid.domain.1 - grid.domain.0) / n as f64;
    let mut values = vec![vec![0.0; n + 1]; m_steps + 1];
    for (i, &x) in xs.iter().enumerate() {
        values[m_steps][i] = c.terminal(x)?;
    }
    if values[m_steps].iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::BlowUp {
            step: m_steps,
            t: horizon,
        });
    }
    let (mut diff, mut adv, mut rhs) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    for m in (0..m_steps).rev() {
        let (t, t_next) = (times[m], times[m + 1]);
        let next = &values[m + 1];
        for i in 0..=n {
            let x = xs[i];
            let s = positive_sigma(c, t, x)?;
            diff[i] = 0.5 * s * s / (h * h);
            adv[i] = c.b(t, x)? / (2.0 * h);
        }
        // Solve for the increment v = u^m − u^{m+1}: (I − Δt L) v = Δt (L u^{m+1} + g).
        // Differences of u are formed before scaling, which keeps rounding
        // relative to the increment rather than to |u|.
        for i in 0..=n {
            let x = xs[i];
            let s_next = positive_sigma(c, t_next, x)?;
            let z = s_next * dx(next, i, h);
            let lu = diff[i] * second_difference(next, i) + adv[i] * central_ghost(next, i);
            rhs[i] = dt * (lu + c.g(t_next, x, next[i], z)?);
        }
        // ghost nodes u_{-1} = 4u0 - 6u1 + 4u2 - u3 and its mirror at the right edge
        let mut a = Banded::new(n + 1, 3, 3);
        for i in 1..n {
            a.set(i, i - 1, -dt * (diff[i] - adv[i]));
            a.set(i, i, 1.0 + 2.0 * dt * diff[i]);
            a.set(i, i + 1, -dt * (diff[i] + adv[i]));
        }
        let (d0, a0) = (dt * diff[0], dt * adv[0]);
        for (j, v) in [
            1.0 - 2.0 * d0 + 4.0 * a0,
            5.0 * d0 - 7.0 * a0,
            -4.0 * d0 + 4.0 * a0,
            d0 - a0,
        ]
        .into_iter()
        .enumerate()
        {
            a.set(0, j, v);
        }
        let (dn, an) = (dt * diff[n], dt * adv[n]);
        for (j, v) in [
            dn + an,
            -4.0 * dn - 4.0 * an,
            5.0 * dn + 7.0 * an,
            1.0 - 2.0 * dn - 4.0 * an,
        ]
        .into_iter()
        .enumerate()
        {
            a.set(n, n - 3 + j, v);
        }
        let mut sol = a
            .solve(rhs.clone())
            .ok_or(NumericsError::Breakdown { step: m })?;
        for (v, u) in sol.iter_mut().zip(next) {
            *v += u;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::BlowUp { step: m, t });
        }
        values[m] = sol;
    }
    Ok(GridFunction { times, xs, values })
}

/// Band matrix with `kl` sub- and `ku` super-diagonals, solved by Gaussian
/// elimination with partial pivoting. Row i stores columns
/// [i − kl, i + ku + kl]; the extra kl columns hold pivoting fill-in.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<f64>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            w,
            data: vec![0.0; n * w],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.w + j + self.kl - i
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    fn solve(mut self, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let (n, kl, reach) = (self.n, self.kl, self.ku + self.kl);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&r, &s| self.get(r, k).abs().total_cmp(&self.get(s, k).abs()))?;
            let pivot = self.get(p, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            if p != k {
                for j in k..=last_col {
                    let (x, y) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(x, y);
                }
                b.swap(k, p);
            }
            for r in k + 1..=last_row {
                let f = self.get(r, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..=last_col {
                    let v = self.get(k, j);
                    let at = self.idx(r, j);
                    self.data[at] -= f * v;
                }
                b[r] -= f * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= self.get(i, j) * b[j];
            }
            b[i] = acc / self.get(i, i);
        }
        Some(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStats {
    pub max: f64,
    /// Interior nodes with a complete finite stencil.
    pub nodes: usize,
}

/// Max over interior nodes of |u_t + b u_x + ½σ² u_xx + g(t,x,u,σu_x)|,
/// forward difference in t, central differences in x. Nodes whose stencil
/// touches a NaN are skipped.
pub fn residual_stats(u: &GridFunction, c: &dyn Coefficients) -> Result<ResidualStats> {
    let (dt, h) = (u.dt(), u.h());
    let mut max: f64 = 0.0;
    let mut nodes = 0;
    for m in 0..u.times.len() - 1 {
        let (row, next) = (&u.values[m], &u.values[m + 1]);
        let t = u.times[m];
        for i in 1..u.xs.len() - 1 {
            let (a, b0, d, e) = (row[i - 1], row[i], row[i + 1], next[i]);
            if !(a.is_finite() && b0.is_finite() && d.is_finite() && e.is_finite()) {
                continue;
            }
            let x = u.xs[i];
            let s = c.sigma(t, x)?;
            let ux = (d - a) / (2.0 * h);
            let uxx = (d - 2.0 * b0 + a) / (h * h);
            let r = (e - b0) / dt + c.b(t, x)? * ux + 0.5 * s * s * uxx + c.g(t, x, b0, s * ux)?;
            max = max.max(r.abs());
            nodes += 1;
        }
    }
    Ok(ResidualStats { max, nodes })
}

pub fn pde_residual(u: &GridFunction, c: &dyn Coefficients) -> Result<f64> {
    Ok(residual_stats(u, c)?.max)
}

/// Rounding level of the discrete residual on this grid:
/// 16·ε·max|u|·(1/Δt + max|b|/h + max σ²/h²). Residuals below it carry no
/// information about the scheme.
pub fn residual_floor(u: &GridFunction, c: &dyn Coefficients) -> Result<f64> {
    let (dt, h) = (u.dt(), u.h());
    let (mut bmax, mut smax): (f64, f64) = (0.0, 0.0);
    for &t in &u.times {
        for &x in &u.xs {
            bmax = bmax.max(c.b(t, x)?.abs());
            let s = c.sigma(t, x)?;
            smax = smax.max(s * s);
        }
    }
    Ok(16.0 * f64::EPSILON * u.max_abs().max(1.0) * (1.0 / dt + bmax / h + smax / (h * h)))
}
