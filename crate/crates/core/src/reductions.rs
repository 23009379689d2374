//! Generator reductions that remove z from g: a Girsanov shift for a linear
//! term αz, and the monotone change of variable ρ for a quadratic term r(y)z².

use std::sync::Arc;

use serde::Serialize;

use crate::expr::{Compiled, Expr, ExprError, Rational, VarEnv};
use crate::numerics::{Coefficients, NumericsError};
use crate::problem::{ProblemSpec, SpecError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("g is not of the form q(t,x,y) + alpha*z with constant alpha: {0}")]
    NotLinearInZ(String),
    #[error("g is not of the form q(t,x,y) + r(y)*z^2: {0}")]
    NotQuadraticInZ(String),
    #[error("the map was built for r = {built}, but g has r = {found}")]
    MapMismatch { built: String, found: String },
    #[error("rho needs an even grid size >= 16, got {0}")]
    GridSize(usize),
    #[error("invalid interval [{0}, {1}]")]
    Interval(f64, f64),
    #[error("rho is not strictly increasing near p = {0} (numerical breakdown)")]
    NonMonotone(f64),
    #[error("rho' overflowed near p = {0}")]
    Overflow(f64),
    #[error("value {value} outside the range of rho, [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// g = q + α z.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearZGenerator {
    pub q: Expr,
    pub alpha: Rational,
}

pub fn decompose_linear_z(g: &Expr) -> Result<LinearZGenerator, ReductionError> {
    let parts = g
        .collect(&["z"], true)
        .map_err(|e| ReductionError::NotLinearInZ(e.to_string()))?;
    let mut q = Expr::zero();
    let mut alpha = Rational::from_integer(0.into());
    for (k, c) in parts {
        match k[0] {
            0 => q = c,
            1 => {
                alpha = c.constant_value().ok_or_else(|| {
                    ReductionError::NotLinearInZ(format!("coefficient of z is {c}"))
                })?
            }
            d => {
                return Err(ReductionError::NotLinearInZ(format!(
                    "z appears with degree {d}"
                )))
            }
        }
    }
    Ok(LinearZGenerator { q, alpha })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    pub spec: ProblemSpec,
    pub notes: Vec<String>,
}

/// b̄ = b + ασ, ḡ = q; σ, H and T unchanged.
pub fn girsanov_reduce(
    spec: &ProblemSpec,
    d: &LinearZGenerator,
) -> Result<Reduced, ReductionError> {
    let rebuilt = &d.q + &(&Expr::constant(d.alpha.clone()) * &Expr::var("z"));
    if rebuilt != spec.g {
        return Err(ReductionError::NotLinearInZ(format!(
            "q + alpha*z = {rebuilt} does not reproduce g = {}",
            spec.g
        )));
    }
    let b = &spec.b + &(&Expr::constant(d.alpha.clone()) * &spec.sigma);
    let out = ProblemSpec::new(
        b,
        spec.sigma.clone(),
        d.q.clone(),
        spec.terminal.clone(),
        spec.horizon,
    )?;
    Ok(Reduced {
        spec: out,
        notes: vec![format!(
            "Brownian motion W replaced by W - {}*s under the equivalent measure Q; the measure change itself is not modelled",
            d.alpha
        )],
    })
}

/// ρ sampled on a uniform grid with ρ′ = exp(2∫₀^p r), ρ(0) = base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneMap {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    /// ρ″ = 2rρ′ at the nodes.
    pub second: Vec<f64>,
    #[serde(serialize_with = "ser_display")]
    pub r: Expr,
    pub step: f64,
    pub base: f64,
}

fn ser_display<S: serde::Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

fn simpson(
    f: impl Fn(f64) -> Result<f64, ReductionError>,
    a: f64,
    b: f64,
    panels: usize,
) -> Result<f64, ReductionError> {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let x = a + k as f64 * h;
        acc += f(x)? + 4.0 * f(x + h / 2.0)? + f(x + h)?;
    }
    Ok(acc * h / 6.0)
}

/// Build ρ with ½ρ″ = ρ′r on [p_min, p_max] using `n` cells. Both integrals
/// use Simpson's rule per half cell (midpoint and quarter points), so ρ and
/// ρ′ are fourth-order accurate at the nodes. Accumulation starts at the node
/// nearest 0 and runs outward, which keeps the error proportional to |ρ|
/// near the fixed point ρ(0) = base.
pub fn build_rho(
    r: &Expr,
    interval: (f64, f64),
    n: usize,
    base: f64,
) -> Result<MonotoneMap, ReductionError> {
    if n < 16 || n % 2 != 0 {
        return Err(ReductionError::GridSize(n));
    }
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(ReductionError::Interval(a, b));
    }
    if let Some(v) = r.free_vars().into_iter().find(|v| v != "y") {
        return Err(ReductionError::NotQuadraticInZ(format!(
            "r must depend on y only, found `{v}`"
        )));
    }
    let rc = r.compile(&["y"], &VarEnv::new())?;
    let rf = |p: f64| -> Result<f64, ReductionError> { Ok(rc.eval(&[p])?) };
    let h = (b - a) / n as f64;
    let grid: Vec<f64> = (0..=n)
        .map(|i| if i == n { b } else { a + i as f64 * h })
        .collect();
    let exp2 = |v: f64, p: f64| -> Result<f64, ReductionError> {
        let e = (2.0 * v).exp();
        if e.is_finite() {
            Ok(e)
        } else {
            Err(ReductionError::Overflow(p))
        }
    };
    let anchor = ((-a / h).round().max(0.0) as usize).min(n);
    let pa = grid[anchor];
    let panels = |len: f64| ((len.abs() / h).ceil() as usize).max(1) * 2;
    // ∫₀^p r on the nodes and cell midpoints
    let mut inner = vec![0.0; n + 1];
    let mut inner_mid = vec![0.0; n];
    inner[anchor] = simpson(&rf, 0.0, pa, panels(pa))?;
    let half_cell = |p: f64, q: f64| -> Result<f64, ReductionError> {
        Ok((q - p) / 6.0 * (rf(p)? + 4.0 * rf(0.5 * (p + q))? + rf(q)?))
    };
    for i in anchor..n {
        let m = 0.5 * (grid[i] + grid[i + 1]);
        inner_mid[i] = inner[i] + half_cell(grid[i], m)?;
        inner[i + 1] = inner_mid[i] + half_cell(m, grid[i + 1])?;
    }
    for i in (0..anchor).rev() {
        let m = 0.5 * (grid[i] + grid[i + 1]);
        inner_mid[i] = inner[i + 1] - half_cell(m, grid[i + 1])?;
        inner[i] = inner_mid[i] - half_cell(grid[i], m)?;
    }
    let derivs = grid
        .iter()
        .zip(&inner)
        .map(|(&p, &v)| exp2(v, p))
        .collect::<Result<Vec<_>, _>>()?;
    let second = grid
        .iter()
        .zip(&derivs)
        .map(|(&p, &d)| Ok(2.0 * rf(p)? * d))
        .collect::<Result<Vec<_>, ReductionError>>()?;
    // ρ(p_anchor) = base + ∫₀^p_anchor ρ′ with ρ′(s) = exp(2∫₀^s r) by nested quadrature
    let dens =
        |s: f64| -> Result<f64, ReductionError> { exp2(simpson(&rf, 0.0, s, panels(s))?, s) };
    let mut values = vec![0.0; n + 1];
    values[anchor] = base + simpson(dens, 0.0, pa, panels(pa))?;
    let cell = |i: usize| -> Result<f64, ReductionError> {
        let dm = exp2(inner_mid[i], grid[i])?;
        Ok((grid[i + 1] - grid[i]) / 6.0 * (derivs[i] + 4.0 * dm + derivs[i + 1]))
    };
    for i in anchor..n {
        values[i + 1] = values[i] + cell(i)?;
    }
    for i in (0..anchor).rev() {
        values[i] = values[i + 1] - cell(i)?;
    }
    for i in 0..n {
        if !(values[i + 1] > values[i]) {
            return Err(ReductionError::NonMonotone(grid[i]));
        }
    }
    Ok(MonotoneMap {
        grid,
        values,
        derivs,
        second,
        r: r.clone(),
        step: h,
        base,
    })
}

/// Max over interior nodes of |½ρ″ − ρ′r| with central differences, and
/// the constant C = max/h².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeResidual {
    pub max: f64,
    pub constant: f64,
}

impl MonotoneMap {
    pub fn identity(interval: (f64, f64), n: usize) -> Result<Self, ReductionError> {
        build_rho(&Expr::zero(), interval, n, 0.0)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.values[0], *self.values.last().unwrap())
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    fn cell_of(&self, p: f64) -> usize {
        let n = self.grid.len() - 1;
        (((p - self.grid[0]) / self.step).floor().max(0.0) as usize).min(n - 1)
    }

    /// Quintic Hermite interpolation of ρ, ρ′, ρ″ on cell `i`.
    fn hermite(&self, i: usize, p: f64) -> (f64, f64) {
        let (p0, p1) = (self.grid[i], self.grid[i + 1]);
        let h = p1 - p0;
        let s = (p - p0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivs[i] * h, self.derivs[i + 1] * h);
        let (c0, c1) = (self.second[i] * h * h, self.second[i + 1] * h * h);
        let (s2, s3, s4, s5) = (s * s, s.powi(3), s.powi(4), s.powi(5));
        let v = (1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5) * y0
            + (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5) * d0
            + (0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5) * c0
            + (0.5 * s3 - s4 + 0.5 * s5) * c1
            + (-4.0 * s3 + 7.0 * s4 - 3.0 * s5) * d1
            + (10.0 * s3 - 15.0 * s4 + 6.0 * s5) * y1;
        let dv = ((-30.0 * s2 + 60.0 * s3 - 30.0 * s4) * y0
            + (1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4) * d0
            + (s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4) * c0
            + (1.5 * s2 - 4.0 * s3 + 2.5 * s4) * c1
            + (-12.0 * s2 + 28.0 * s3 - 15.0 * s4) * d1
            + (30.0 * s2 - 60.0 * s3 + 30.0 * s4) * y1)
            / h;
        (v, dv)
    }

    fn check_arg(&self, p: f64) -> Result<(), ReductionError> {
        let (lo, hi) = self.interval();
        if !(p >= lo && p <= hi) {
            return Err(ReductionError::OutOfRange { value: p, lo, hi });
        }
        Ok(())
    }

    /// ρ(p) by quintic Hermite interpolation.
    pub fn eval(&self, p: f64) -> Result<f64, ReductionError> {
        self.check_arg(p)?;
        Ok(self.hermite(self.cell_of(p), p).0)
    }

    pub fn derivative(&self, p: f64) -> Result<f64, ReductionError> {
        self.check_arg(p)?;
        Ok(self.hermite(self.cell_of(p), p).1)
    }

    pub fn ode_residual(&self) -> OdeResidual {
        let h = self.step;
        let rc = self
            .r
            .compile(&["y"], &VarEnv::new())
            .expect("r compiled when the map was built");
        let mut max: f64 = 0.0;
        for i in 1..self.grid.len() - 1 {
            let (a, b, c) = (self.values[i - 1], self.values[i], self.values[i + 1]);
            let d2 = ((c - b) - (b - a)) / (h * h);
            let d1 = (c - a) / (2.0 * h);
            let r = rc.eval(&[self.grid[i]]).unwrap_or(f64::NAN);
            max = max.max((0.5 * d2 - d1 * r).abs());
        }
        OdeResidual {
            max,
            constant: max / (h * h),
        }
    }
}

/// ρ⁻¹(value): bisection to the grid cell, then safeguarded Newton on the
/// Hermite interpolant.
pub fn invert_rho(map: &MonotoneMap, value: f64) -> Result<f64, ReductionError> {
    let (lo, hi) = map.range();
    if !(value >= lo && value <= hi) {
        return Err(ReductionError::OutOfRange { value, lo, hi });
    }
    let i = match map.values.binary_search_by(|v| v.total_cmp(&value)) {
        Ok(i) => return Ok(map.grid[i]),
        Err(i) => i - 1,
    };
    let (mut a, mut b) = (map.grid[i], map.grid[i + 1]);
    let mut p = a + (b - a) * (value - map.values[i]) / (map.values[i + 1] - map.values[i]);
    let tol = 1e-13 * (1.0 + value.abs());
    for _ in 0..100 {
        let (v, dv) = map.hermite(i, p);
        let f = v - value;
        if f.abs() <= tol {
            break;
        }
        if f > 0.0 {
            b = p;
        } else {
            a = p;
        }
        let newton = p - f / dv;
        p = if dv > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a <= f64::EPSILON * (1.0 + p.abs()) {
            break;
        }
    }
    Ok(p)
}

/// g = q(t,x,y) + r(y) z².
pub fn decompose_quadratic_z(g: &Expr) -> Result<(Expr, Expr), ReductionError> {
    let parts = g
        .collect(&["z"], true)
        .map_err(|e| ReductionError::NotQuadraticInZ(e.to_string()))?;
    let (mut q, mut r) = (Expr::zero(), Expr::zero());
    for (k, c) in parts {
        match k[0] {
            0 => q = c,
            2 => r = c,
            d => {
                return Err(ReductionError::NotQuadraticInZ(format!(
                    "z appears with degree {d}"
                )))
            }
        }
    }
    if let Some(v) = r.free_vars().into_iter().find(|v| v != "y") {
        return Err(ReductionError::NotQuadraticInZ(format!(
            "r depends on `{v}`"
        )));
    }
    Ok((q, r))
}

/// The problem for Ȳ = ρ(Y): generator q̄(t,x,ȳ) = ρ′(ρ⁻¹ȳ) q(t,x,ρ⁻¹ȳ),
/// terminal H̄ = ρ∘H, b, σ and T unchanged.
#[derive(Clone)]
pub struct QuadraticReduced {
    pub q: Expr,
    pub map: Arc<MonotoneMap>,
    pub original: ProblemSpec,
    b: Compiled,
    sigma: Compiled,
    qc: Compiled,
    h: Compiled,
}

impl std::fmt::Debug for QuadraticReduced {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadraticReduced")
            .field("q", &self.q.to_string())
            .field("original", &self.original.to_string())
            .finish()
    }
}

pub fn quadratic_reduce(
    spec: &ProblemSpec,
    map: Arc<MonotoneMap>,
) -> Result<QuadraticReduced, ReductionError> {
    let (q, r) = decompose_quadratic_z(&spec.g)?;
    if r != map.r {
        return Err(ReductionError::MapMismatch {
            built: map.r.to_string(),
            found: r.to_string(),
        });
    }
    let env = VarEnv::new();
    Ok(QuadraticReduced {
        b: spec.b.compile(&["t", "x"], &env)?,
        sigma: spec.sigma.compile(&["t", "x"], &env)?,
        qc: q.compile(&["t", "x", "y"], &env)?,
        h: spec.terminal.compile(&["x"], &env)?,
        q,
        map,
        original: spec.clone(),
    })
}

impl QuadraticReduced {
    /// Whether the reduced generator vanishes identically.
    pub fn generator_is_zero(&self) -> bool {
        self.q.is_zero()
    }

    /// Check that H maps into the interval of ρ on `samples` points of `domain`.
    pub fn check_terminal_range(
        &self,
        domain: (f64, f64),
        samples: usize,
    ) -> Result<(), ReductionError> {
        let (lo, hi) = self.map.interval();
        for k in 0..=samples {
            let x = domain.0 + (domain.1 - domain.0) * k as f64 / samples as f64;
            let v = self.h.eval(&[x])?;
            if !(v >= lo && v <= hi) {
                return Err(ReductionError::OutOfRange { value: v, lo, hi });
            }
        }
        Ok(())
    }
}

fn numerics_err(e: ReductionError) -> NumericsError {
    match e {
        ReductionError::OutOfRange { value, lo, hi } => NumericsError::OutOfRange { value, lo, hi },
        ReductionError::Expr(e) => NumericsError::Expr(e),
        other => NumericsError::Parameter(other.to_string()),
    }
}

impl Coefficients for QuadraticReduced {
    fn horizon(&self) -> f64 {
        self.original.horizon
    }
    fn b(&self, t: f64, x: f64) -> crate::numerics::Result<f64> {
        Ok(self.b.eval(&[t, x])?)
    }
    fn sigma(&self, t: f64, x: f64) -> crate::numerics::Result<f64> {
        Ok(self.sigma.eval(&[t, x])?)
    }
    fn g(&self, t: f64, x: f64, y: f64, _z: f64) -> crate::numerics::Result<f64> {
        if self.q.is_zero() {
            return Ok(0.0);
        }
        let p = invert_rho(&self.map, y).map_err(numerics_err)?;
        let d = self.map.derivative(p).map_err(numerics_err)?;
        Ok(d * self.qc.eval(&[t, x, p])?)
    }
    fn terminal(&self, x: f64) -> crate::numerics::Result<f64> {
        let h = self.h.eval(&[x])?;
        self.map.eval(h).map_err(numerics_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, q};

    #[test]
    fn girsanov_shifts_drift() {
        let spec = ProblemSpec::parse("0", "1", "q(t,x,y) + 2*z", "x", 1.0).unwrap();
        let d = decompose_linear_z(&spec.g).unwrap();
        assert_eq!(d.alpha, q(2, 1));
        let red = girsanov_reduce(&spec, &d).unwrap();
        assert_eq!(red.spec.b, parse("2").unwrap());
        assert_eq!(red.spec.g, parse("q(t,x,y)").unwrap());
        assert_eq!(red.spec.pde_expr(), spec.pde_expr());
    }

    #[test]
    fn girsanov_rejects_variable_alpha() {
        assert!(matches!(
            decompose_linear_z(&parse("x*z").unwrap()),
            Err(ReductionError::NotLinearInZ(_))
        ));
        assert!(matches!(
            decompose_linear_z(&parse("z^2").unwrap()),
            Err(ReductionError::NotLinearInZ(_))
        ));
        assert!(matches!(
            decompose_linear_z(&parse("exp(z)").unwrap()),
            Err(ReductionError::NotLinearInZ(_))
        ));
    }

    #[test]
    fn zero_r_gives_identity() {
        let m = MonotoneMap::identity((-2.0, 2.0), 64).unwrap();
        for (p, v) in m.grid.iter().zip(&m.values) {
            assert!((p - v).abs() < 1e-14);
        }
        assert!((invert_rho(&m, 0.7).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn interval_away_from_zero() {
        // r = 1/2 on [1, 2]: ρ(p) = e^p − 1 still anchored at 0
        let m = build_rho(&parse("1/2").unwrap(), (1.0, 2.0), 32, 0.0).unwrap();
        for (p, v) in m.grid.iter().zip(&m.values) {
            assert!((v - (p.exp() - 1.0)).abs() <= 1e-9 * v.abs(), "{p}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_rho(&parse("y").unwrap(), (-1.0, 1.0), 15, 0.0),
            Err(ReductionError::GridSize(15))
        ));
        assert!(matches!(
            build_rho(&parse("x").unwrap(), (-1.0, 1.0), 16, 0.0),
            Err(ReductionError::NotQuadraticInZ(_))
        ));
        assert!(matches!(
            build_rho(&parse("exp(y)").unwrap(), (-1.0, 400.0), 16, 0.0),
            Err(ReductionError::Overflow(_))
        ));
        let m = MonotoneMap::identity((-1.0, 1.0), 16).unwrap();
        assert!(matches!(
            invert_rho(&m, 3.0),
            Err(ReductionError::OutOfRange { .. })
        ));
    }

    #[test]
    fn quadratic_reduction_of_pure_quadratic() {
        let spec = ProblemSpec::parse("0", "1", "1/2*z^2", "x", 1.0).unwrap();
        let map = Arc::new(build_rho(&parse("1/2").unwrap(), (-4.0, 4.0), 512, 0.0).unwrap());
        let red = quadratic_reduce(&spec, map).unwrap();
        assert!(red.generator_is_zero());
        for x in [-1.5, 0.0, 0.3, 2.0] {
            assert!((red.terminal(x).unwrap() - (x.exp() - 1.0)).abs() < 1e-9);
        }
        let other = Arc::new(MonotoneMap::identity((-4.0, 4.0), 64).unwrap());
        assert!(matches!(
            quadratic_reduce(&spec, other),
            Err(ReductionError::MapMismatch { .. })
        ));
    }
}
