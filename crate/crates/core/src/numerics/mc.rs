use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{Coefficients, GridFunction, NumericsError, Result};
use crate::expr::{Expr, VarEnv};
use crate::par::{self, Execution};

/// Path `k` draws from stream `k` of a ChaCha8 generator keyed by `seed`,
/// so results do not depend on how paths are scheduled.
fn path_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbsdeConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub x0: f64,
}

impl Default for FbsdeConfig {
    fn default() -> Self {
        FbsdeConfig {
            paths: 10_000,
            steps: 200,
            seed: 1,
            x0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FbsdeStats {
    pub config: FbsdeConfig,
    pub dt: f64,
    /// Paths that left the spatial grid; they are excluded from the stats.
    pub exits: usize,
    pub mean_defect: Vec<f64>,
    pub std_error: Vec<f64>,
    pub max_abs_mean: f64,
    /// max over steps of |mean| / SE.
    pub max_z: f64,
    pub steps_within_4se: usize,
    /// Mean over steps of the root-mean-square defect.
    pub rms_defect: f64,
    pub terminal_mismatch_mean: f64,
    pub terminal_mismatch_max: f64,
}

impl FbsdeStats {
    pub fn all_within_4se(&self) -> bool {
        self.steps_within_4se == self.mean_defect.len()
    }
}

/// Euler–Maruyama for X, Y = u(t, X), Z = σ u_x(t, X), and the one-step
/// defect D_m = Y_{m+1} − Y_m + g Δ − Z_m ΔW_m.
pub fn simulate_fbsde_residual(
    u: &GridFunction,
    c: &dyn Coefficients,
    cfg: FbsdeConfig,
    exec: Execution,
) -> Result<FbsdeStats> {
    if cfg.paths == 0 || cfg.steps == 0 {
        return Err(NumericsError::Parameter(
            "paths and steps must be positive".into(),
        ));
    }
    let horizon = c.horizon();
    let dt = horizon / cfg.steps as f64;
    let sq = dt.sqrt();
    let (lo, hi) = (u.xs[0], *u.xs.last().unwrap());
    let per_path = par::map_range(exec, cfg.paths, |k| -> Result<Option<(Vec<f64>, f64)>> {
        let mut rng = path_rng(cfg.seed, k);
        let mut x = cfg.x0;
        let mut defects = Vec::with_capacity(cfg.steps);
        let mut t = 0.0;
        if !(lo..=hi).contains(&x) {
            return Ok(None);
        }
        let mut y = u.value_at(t, x)?;
        for m in 0..cfg.steps {
            let s = c.sigma(t, x)?;
            let z = s * u.derivative_at(t, x)?;
            let dw = sq * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            let g = c.g(t, x, y, z)?;
            let x_next = x + c.b(t, x)? * dt + s * dw;
            let t_next = if m + 1 == cfg.steps {
                horizon
            } else {
                (m + 1) as f64 * dt
            };
            if !(lo..=hi).contains(&x_next) {
                return Ok(None);
            }
            let y_next = u.value_at(t_next, x_next)?;
            defects.push(y_next - y + g * dt - z * dw);
            (t, x, y) = (t_next, x_next, y_next);
        }
        Ok(Some((defects, (y - c.terminal(x)?).abs())))
    });
    let mut sum = vec![0.0; cfg.steps];
    let mut sum2 = vec![0.0; cfg.steps];
    let (mut kept, mut exits) = (0usize, 0usize);
    let (mut tm_sum, mut tm_max): (f64, f64) = (0.0, 0.0);
    for r in per_path {
        match r? {
            None => exits += 1,
            Some((d, tm)) => {
                kept += 1;
                for (m, v) in d.into_iter().enumerate() {
                    sum[m] += v;
                    sum2[m] += v * v;
                }
                tm_sum += tm;
                tm_max = tm_max.max(tm);
            }
        }
    }
    if exits * 20 > cfg.paths || kept < 2 {
        return Err(NumericsError::Exits {
            exits,
            paths: cfg.paths,
        });
    }
    let n = kept as f64;
    let mean_defect: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error: Vec<f64> = sum2
        .iter()
        .zip(&mean_defect)
        .map(|(s2, mu)| ((s2 / n - mu * mu).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    let mut max_z: f64 = 0.0;
    let mut within = 0;
    for (mu, se) in mean_defect.iter().zip(&std_error) {
        if mu.abs() <= 4.0 * se {
            within += 1;
        }
        let z = if *se > 0.0 {
            mu.abs() / se
        } else if *mu == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z);
    }
    let rms_defect = sum2.iter().map(|s2| (s2 / n).sqrt()).sum::<f64>() / cfg.steps as f64;
    Ok(FbsdeStats {
        config: cfg,
        dt,
        exits,
        max_abs_mean: mean_defect.iter().fold(0.0, |a: f64, v| a.max(v.abs())),
        mean_defect,
        std_error,
        max_z,
        steps_within_4se: within,
        rms_defect,
        terminal_mismatch_mean: tm_sum / n,
        terminal_mismatch_max: tm_max,
    })
}

/// How transformed Brownian increments are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeChangeForm {
    /// dw̃ = (1 + ετ′/2) dw, the first-order form.
    FirstOrder,
    /// dw̃ = √(1 + ετ′) dw.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChangeConfig {
    #[serde(serialize_with = "ser_display")]
    pub tau: Expr,
    pub epsilon: f64,
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Brownian sub-steps over [0, T].
    pub sub_steps: usize,
    pub probes: usize,
    /// Sub-steps per probe interval.
    pub probe_width: usize,
    pub form: TimeChangeForm,
}

fn ser_display<S: serde::Serializer>(e: &Expr, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

impl TimeChangeConfig {
    pub fn new(tau: Expr, epsilon: f64, paths: usize, seed: u64) -> Self {
        TimeChangeConfig {
            tau,
            epsilon,
            paths,
            seed,
            horizon: 1.0,
            sub_steps: 1000,
            probes: 10,
            probe_width: 10,
            form: TimeChangeForm::FirstOrder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub t: f64,
    pub width: f64,
    /// Mean of 1 + ετ′ over the probe interval.
    pub expected: f64,
    /// Exact expectation of the ratio under the configured increment form.
    pub form_expectation: f64,
    pub ratio: f64,
    pub std_error: f64,
    pub z: f64,
    pub within_4se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChangeStats {
    pub config: TimeChangeConfig,
    pub probes: Vec<Probe>,
    pub all_within_4se: bool,
}

/// Sample variance of transformed increments over probe intervals,
/// divided by the interval length, against 1 + ετ′(t).
pub fn time_change_check(cfg: &TimeChangeConfig, exec: Execution) -> Result<TimeChangeStats> {
    if cfg.paths < 2 || cfg.sub_steps == 0 || cfg.probes == 0 || cfg.probe_width == 0 {
        return Err(NumericsError::Parameter(
            "time-change check needs paths >= 2 and positive step counts".into(),
        ));
    }
    if cfg.probes * cfg.probe_width > cfg.sub_steps {
        return Err(NumericsError::Parameter(
            "probe intervals exceed the horizon".into(),
        ));
    }
    if cfg.tau.free_vars().iter().any(|v| v != "t") {
        return Err(NumericsError::Parameter(format!(
            "tau must depend on t only, got {}",
            cfg.tau
        )));
    }
    let dtau = cfg.tau.diff("t").compile(&["t"], &VarEnv::new())?;
    let dt = cfg.horizon / cfg.sub_steps as f64;
    let mut speed = Vec::with_capacity(cfg.sub_steps);
    for j in 0..cfg.sub_steps {
        let t = j as f64 * dt;
        let v = 1.0 + cfg.epsilon * dtau.eval(&[t])?;
        if !(v > 0.0) {
            return Err(NumericsError::NonMonotoneTime { t, value: v });
        }
        speed.push(v);
    }
    let factor: Vec<f64> = speed
        .iter()
        .map(|v| match cfg.form {
            TimeChangeForm::FirstOrder => 1.0 + (v - 1.0) / 2.0,
            TimeChangeForm::Exact => v.sqrt(),
        })
        .collect();
    let stride = cfg.sub_steps / cfg.probes;
    let starts: Vec<usize> = (0..cfg.probes).map(|p| p * stride).collect();
    let sq = dt.sqrt();
    let increments = par::map_range(exec, cfg.paths, |k| {
        let mut rng = path_rng(cfg.seed, k);
        let mut out = vec![0.0; cfg.probes];
        let mut next = 0;
        for j in 0..cfg.sub_steps {
            let dw = sq * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            while next < starts.len() && j >= starts[next] + cfg.probe_width {
                next += 1;
            }
            if next < starts.len() && j >= starts[next] {
                out[next] += factor[j] * dw;
            }
        }
        out
    });
    let n = cfg.paths as f64;
    let width = cfg.probe_width as f64 * dt;
    let probes: Vec<Probe> = starts
        .iter()
        .enumerate()
        .map(|(p, &s)| {
            let mean = increments.iter().map(|w| w[p]).sum::<f64>() / n;
            let (mut m2, mut m4) = (0.0, 0.0);
            for w in &increments {
                let d = w[p] - mean;
                m2 += d * d;
                m4 += d * d * d * d;
            }
            let var = m2 / (n - 1.0);
            let (c2, c4) = (m2 / n, m4 / n);
            let se = ((c4 - c2 * c2).max(0.0) / n).sqrt() / width;
            let range = s..s + cfg.probe_width;
            let expected = speed[range.clone()].iter().sum::<f64>() / cfg.probe_width as f64;
            let form_expectation =
                factor[range].iter().map(|f| f * f).sum::<f64>() / cfg.probe_width as f64;
            let ratio = var / width;
            let z = (ratio - expected) / se;
            Probe {
                t: s as f64 * dt,
                width,
                expected,
                form_expectation,
                ratio,
                std_error: se,
                z,
                within_4se: z.abs() <= 4.0,
            }
        })
        .collect();
    let all_within_4se = probes.iter().all(|p| p.within_4se);
    Ok(TimeChangeStats {
        config: cfg.clone(),
        probes,
        all_within_4se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::numerics::{solve_pde_backward, CompiledProblem, GridSpec};
    use crate::problem::ProblemSpec;

    #[test]
    fn linear_solution_has_zero_defect() {
        let c = CompiledProblem::new(&ProblemSpec::heat(parse("x").unwrap())).unwrap();
        let u = solve_pde_backward(&c, GridSpec::new(100, 240, (-6.0, 6.0)).unwrap()).unwrap();
        let cfg = FbsdeConfig {
            paths: 500,
            steps: 100,
            seed: 7,
            x0: 0.0,
        };
        let st = simulate_fbsde_residual(&u, &c, cfg, Execution::Sequential).unwrap();
        assert_eq!(st.exits, 0);
        assert!(
            st.max_abs_mean <= 1e-10 && st.rms_defect <= 1e-10,
            "{} {}",
            st.max_abs_mean,
            st.rms_defect
        );
        assert!(st.terminal_mismatch_max <= 1e-10);
    }

    #[test]
    fn identical_seeds_identical_statistics() {
        let c = CompiledProblem::new(&ProblemSpec::heat(parse("x^2").unwrap())).unwrap();
        let u = solve_pde_backward(&c, GridSpec::new(50, 120, (-6.0, 6.0)).unwrap()).unwrap();
        let cfg = FbsdeConfig {
            paths: 300,
            steps: 50,
            seed: 11,
            x0: 0.5,
        };
        let a = simulate_fbsde_residual(&u, &c, cfg, Execution::Sequential).unwrap();
        let b = simulate_fbsde_residual(&u, &c, cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_exits_is_an_error() {
        let c = CompiledProblem::new(&ProblemSpec::heat(parse("x").unwrap())).unwrap();
        let u = solve_pde_backward(&c, GridSpec::new(20, 20, (-0.2, 0.2)).unwrap()).unwrap();
        let cfg = FbsdeConfig {
            paths: 200,
            steps: 20,
            seed: 3,
            x0: 0.0,
        };
        assert!(matches!(
            simulate_fbsde_residual(&u, &c, cfg, Execution::Sequential),
            Err(NumericsError::Exits { .. })
        ));
    }

    #[test]
    fn zero_tau_has_unit_ratio() {
        let cfg = TimeChangeConfig::new(Expr::zero(), 0.2, 4000, 5);
        let st = time_change_check(&cfg, Execution::Sequential).unwrap();
        assert!(st.probes.iter().all(|p| p.expected == 1.0));
        assert!(st.all_within_4se, "{:?}", st.probes);
    }

    #[test]
    fn non_monotone_time_rejected() {
        let cfg = TimeChangeConfig::new(parse("-t^2").unwrap(), 2.0, 100, 5);
        assert!(matches!(
            time_change_check(&cfg, Execution::Sequential),
            Err(NumericsError::NonMonotoneTime { .. })
        ));
    }
}
