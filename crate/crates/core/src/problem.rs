//! The FBSDE / PDE pair under study and its text file format.
//!
//! ```text
//! # heat equation with linear terminal data
//! b = 0
//! sigma = 1
//! g = 0
//! H = x
//! T = 1
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::expr::{self, Bindings, Expr, ExprError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("`{field}` may only depend on {allowed}, found `{var}`")]
    Variables {
        field: &'static str,
        allowed: &'static str,
        var: String,
    },
    #[error("horizon T must be a positive finite number, got {0}")]
    Horizon(f64),
    #[error("line {line}: {message}")]
    File { line: usize, message: String },
    #[error("{field}: {source}")]
    Expr { field: String, source: ExprError },
}

/// b(t,x), σ(t,x), g(t,x,y,z), H(x) and the horizon T.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub b: Expr,
    pub sigma: Expr,
    pub g: Expr,
    /// Terminal function H(x).
    pub terminal: Expr,
    pub horizon: f64,
    g_has_z: bool,
}

fn check_vars(
    e: &Expr,
    field: &'static str,
    allowed: &'static [&'static str],
    shown: &'static str,
) -> Result<(), SpecError> {
    let ok: BTreeSet<&str> = allowed.iter().copied().collect();
    match e.free_vars().into_iter().find(|v| !ok.contains(v.as_str())) {
        Some(var) => Err(SpecError::Variables {
            field,
            allowed: shown,
            var,
        }),
        None => Ok(()),
    }
}

impl ProblemSpec {
    pub fn new(
        b: Expr,
        sigma: Expr,
        g: Expr,
        terminal: Expr,
        horizon: f64,
    ) -> Result<Self, SpecError> {
        check_vars(&b, "b", &["t", "x"], "t, x")?;
        check_vars(&sigma, "sigma", &["t", "x"], "t, x")?;
        check_vars(&g, "g", &["t", "x", "y", "z"], "t, x, y, z")?;
        check_vars(&terminal, "H", &["x"], "x")?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SpecError::Horizon(horizon));
        }
        let g_has_z = g.contains_var("z");
        Ok(ProblemSpec {
            b,
            sigma,
            g,
            terminal,
            horizon,
            g_has_z,
        })
    }

    pub fn parse(
        b: &str,
        sigma: &str,
        g: &str,
        terminal: &str,
        horizon: f64,
    ) -> Result<Self, SpecError> {
        let p = |field: &str, s: &str| {
            expr::parse(s).map_err(|source| SpecError::Expr {
                field: field.to_string(),
                source,
            })
        };
        ProblemSpec::new(
            p("b", b)?,
            p("sigma", sigma)?,
            p("g", g)?,
            p("H", terminal)?,
            horizon,
        )
    }

    /// b = 0, σ = 1, g = 0, T = 1: u_t + ½u_xx = 0.
    pub fn heat(terminal: Expr) -> Self {
        ProblemSpec::new(Expr::zero(), Expr::one(), Expr::zero(), terminal, 1.0)
            .expect("heat spec is valid")
    }

    /// Whether g depends on z (cached at construction).
    pub fn g_depends_on_z(&self) -> bool {
        self.g_has_z
    }

    pub fn sigma_is_zero(&self) -> bool {
        self.sigma.is_zero()
    }

    pub fn with_g(&self, g: Expr) -> Result<Self, SpecError> {
        ProblemSpec::new(
            self.b.clone(),
            self.sigma.clone(),
            g,
            self.terminal.clone(),
            self.horizon,
        )
    }

    pub fn with_b(&self, b: Expr) -> Result<Self, SpecError> {
        ProblemSpec::new(
            b,
            self.sigma.clone(),
            self.g.clone(),
            self.terminal.clone(),
            self.horizon,
        )
    }

    pub fn with_terminal(&self, h: Expr) -> Result<Self, SpecError> {
        ProblemSpec::new(
            self.b.clone(),
            self.sigma.clone(),
            self.g.clone(),
            h,
            self.horizon,
        )
    }

    /// g(t, x, u, σu_x) in jet variables.
    pub fn g_on_jet(&self) -> Expr {
        let b = Bindings::new()
            .with_value("y", Expr::var("u"))
            .with_value("z", &self.sigma * &Expr::var("u_x"));
        self.g.substitute(&b).expect("y, z bindings are acyclic")
    }

    /// Δ = u_t + b u_x + ½σ² u_xx + g(t, x, u, σu_x).
    pub fn pde_expr(&self) -> Expr {
        let v = Expr::var;
        let half = Expr::ratio(1, 2);
        &(&(&v("u_t") + &(&self.b * &v("u_x")))
            + &(&(&half * &(&self.sigma * &self.sigma)) * &v("u_xx")))
            + &self.g_on_jet()
    }

    /// Polynomial degree of H in x, if H is a polynomial.
    pub fn terminal_degree(&self) -> Option<u32> {
        if self.terminal.has_non_polynomial_atoms() {
            return None;
        }
        Some(
            self.terminal
                .terms()
                .map(|(m, _)| m.degree_in("x").max(0) as u32)
                .max()
                .unwrap_or(0),
        )
    }

    /// Parse the line-oriented `key = value` format. Keys: b, sigma, g, H, T;
    /// b, sigma and g default to 0, 1 and 0, T defaults to 1, H is required.
    pub fn from_file_text(text: &str) -> Result<Self, SpecError> {
        let mut fields: [Option<(usize, String)>; 5] = Default::default();
        const KEYS: [&str; 5] = ["b", "sigma", "g", "H", "T"];
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(SpecError::File {
                    line: line_no,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(slot) = KEYS.iter().position(|&key| key == k) else {
                return Err(SpecError::File {
                    line: line_no,
                    message: format!("unknown key `{k}` (expected one of b, sigma, g, H, T)"),
                });
            };
            if v.is_empty() {
                return Err(SpecError::File {
                    line: line_no,
                    message: format!("empty value for `{k}`"),
                });
            }
            if fields[slot].is_some() {
                return Err(SpecError::File {
                    line: line_no,
                    message: format!("duplicate key `{k}`"),
                });
            }
            fields[slot] = Some((line_no, v.to_string()));
        }
        let parse_field = |slot: usize, default: &str| -> Result<Expr, SpecError> {
            match &fields[slot] {
                Some((line, text)) => expr::parse(text).map_err(|e| SpecError::File {
                    line: *line,
                    message: format!("{}: {e}", KEYS[slot]),
                }),
                None => Ok(expr::parse(default).unwrap()),
            }
        };
        let b = parse_field(0, "0")?;
        let sigma = parse_field(1, "1")?;
        let g = parse_field(2, "0")?;
        let Some((h_line, _)) = fields[3] else {
            return Err(SpecError::File {
                line: 0,
                message: "missing required key `H`".into(),
            });
        };
        let h = parse_field(3, "0")?;
        let horizon = match &fields[4] {
            Some((line, text)) => {
                let value = expr::parse(text)
                    .ok()
                    .and_then(|e| e.constant_value())
                    .map(|q| expr::eval_constant(&q))
                    .ok_or_else(|| SpecError::File {
                        line: *line,
                        message: format!("T must be a number, found `{text}`"),
                    })?;
                if !(value.is_finite() && value > 0.0) {
                    return Err(SpecError::File {
                        line: *line,
                        message: format!("T must be positive, found {value}"),
                    });
                }
                value
            }
            None => 1.0,
        };
        let line_of = |slot: usize| fields[slot].as_ref().map(|(l, _)| *l).unwrap_or(0);
        ProblemSpec::new(b, sigma, g, h, horizon).map_err(|e| {
            let line = match &e {
                SpecError::Variables { field, .. } => match *field {
                    "b" => line_of(0),
                    "sigma" => line_of(1),
                    "g" => line_of(2),
                    _ => h_line,
                },
                _ => 0,
            };
            SpecError::File {
                line,
                message: e.to_string(),
            }
        })
    }

    pub fn summary(&self) -> SpecSummary {
        SpecSummary {
            b: self.b.to_string(),
            sigma: self.sigma.to_string(),
            g: self.g.to_string(),
            terminal: self.terminal.to_string(),
            horizon: self.horizon,
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "b = {}, sigma = {}, g = {}, H = {}, T = {}",
            self.b, self.sigma, self.g, self.terminal, self.horizon
        )
    }
}

/// Printable form of a spec for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecSummary {
    pub b: String,
    pub sigma: String,
    pub g: String,
    #[serde(rename = "H")]
    pub terminal: String,
    #[serde(rename = "T")]
    pub horizon: f64,
}
