//! Determining systems for FBSDE and PDE symmetries.
//!
//! Two independent routes build the PDE system: direct transcription of the
//! closed-form determining equations, and the prolongation computation
//! pr²v(Δ) = 0 on Δ = 0. Their agreement is checked by tests, never assumed.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::calculus::{jet, prolong2, CalculusError, VectorField};
use crate::expr::{Bindings, Expr, ExprError};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Fbsde,
    Pde,
}

impl Side {
    /// Generator name prefix: v for FBSDE fields, w for PDE fields.
    pub fn prefix(self) -> &'static str {
        match self {
            Side::Fbsde => "v",
            Side::Pde => "w",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Fbsde => "fbsde",
            Side::Pde => "pde",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Transcription,
    Prolongation,
}

/// Which part of a vector field an unknown function stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Tau,
    Xi,
    Eta,
    /// ∂_y η, for η = slope·y + intercept.
    EtaSlope,
    /// η at y = 0.
    EtaIntercept,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unknown {
    pub name: String,
    pub args: Vec<String>,
    pub role: Role,
}

impl Unknown {
    fn new(name: &str, args: &[&str], role: Role) -> Self {
        Unknown {
            name: name.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
            role,
        }
    }

    /// `name(args…)` as an expression.
    pub fn applied(&self) -> Expr {
        Expr::opaque(&self.name, self.args.iter().map(|a| Expr::var(a)).collect())
    }

    pub fn signature(&self) -> String {
        format!("{}({})", self.name, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub label: String,
    pub expr: Expr,
    /// The terminal-condition constraint (can be dropped for experiments).
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminingSystem {
    pub side: Side,
    pub origin: Origin,
    pub unknowns: Vec<Unknown>,
    /// τ, ξ, η written in the unknowns.
    pub field: [Expr; 3],
    pub equations: Vec<Equation>,
    pub split_vars: Vec<String>,
    pub sigma: Expr,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeterminingError {
    #[error("sigma is identically zero; only the sigma != 0 system is supported")]
    SigmaZero,
    #[error(
        "the prolongation route needs an explicit generator, but g contains opaque symbol(s) {0}"
    )]
    OpaqueGenerator(String),
    #[error("non-polynomial jet dependence after substitution: {0}")]
    NonPolynomialJet(ExprError),
    #[error("prolongation left the jet variable `{0}` after substituting u_t")]
    LeftoverJet(String),
    #[error("candidate does not match the unknown signature: {0}")]
    Signature(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

fn v(name: &str) -> Expr {
    Expr::var(name)
}

fn half() -> Expr {
    Expr::ratio(1, 2)
}

fn at_terminal(eta: &Expr, h: &Expr) -> Expr {
    eta.substitute(&Bindings::new().with_value("y", h.clone()))
        .expect("y ↦ H is acyclic")
}

/// FBSDE determining system. When g does not depend on z the affine form
/// η = λ(t)y + μ(t,x) is built in.
pub fn fbsde_determining(spec: &ProblemSpec) -> DeterminingSystem {
    let tau_u = Unknown::new("tau", &["t"], Role::Tau);
    let xi_u = Unknown::new("xi", &["t", "x"], Role::Xi);
    let mut notes = Vec::new();
    let (unknowns, eta) = if spec.g_depends_on_z() {
        let eta_u = Unknown::new("eta", &["t", "x", "y"], Role::Eta);
        let eta = eta_u.applied();
        (vec![tau_u.clone(), xi_u.clone(), eta_u], eta)
    } else {
        notes.push(
            "g does not depend on z: eta = lambda(t)*y + mu(t,x) (eta_yy = 0, sigma*eta_xy = 0)"
                .into(),
        );
        let lam = Unknown::new("lambda", &["t"], Role::EtaSlope);
        let mu = Unknown::new("mu", &["t", "x"], Role::EtaIntercept);
        let eta = &(&lam.applied() * &v("y")) + &mu.applied();
        (vec![tau_u.clone(), xi_u.clone(), lam, mu], eta)
    };
    let tau = tau_u.applied();
    let xi = xi_u.applied();
    let (b, s, g) = (&spec.b, &spec.sigma, &spec.g);
    let z = v("z");
    let eta_x = eta.diff("x");
    let eta_y = eta.diff("y");
    let tau_t = tau.diff("t");

    let e1 = [
        (g * &tau).diff("t"),
        &g.diff("x") * &xi,
        &g.diff("y") * &eta,
        &g.diff("z") * &(&(s * &eta_x) + &(&(&eta_y - &(&half() * &tau_t)) * &z)),
        eta.diff("t"),
        b * &eta_x,
        -(g * &eta_y),
        &half()
            * &(&(&(&(s * s) * &eta_x.diff("x")) + &(&eta_y.diff("y") * &(&z * &z)))
                + &(&(&eta_x.diff("y") * s) * &z)),
    ]
    .into_iter()
    .sum();
    let e2 = [
        xi.diff("t"),
        &(&half() * &(s * s)) * &xi.diff_n("x", 2),
        b * &xi.diff("x"),
        -(&b.diff("x") * &xi),
        -(b * &tau).diff("t"),
    ]
    .into_iter()
    .sum();
    let e3 = [
        -(s * &xi.diff("x")),
        &s.diff("x") * &xi,
        &(&half() * s) * &tau_t,
        &s.diff("t") * &tau,
    ]
    .into_iter()
    .sum();
    let e4 = &at_terminal(&eta, &spec.terminal) - &(&spec.terminal.diff("x") * &xi);

    DeterminingSystem {
        side: Side::Fbsde,
        origin: Origin::Transcription,
        unknowns,
        field: [tau, xi, eta],
        equations: vec![
            Equation {
                label: "(i) eta".into(),
                expr: e1,
                terminal: false,
            },
            Equation {
                label: "(ii) xi".into(),
                expr: e2,
                terminal: false,
            },
            Equation {
                label: "(iii) sigma".into(),
                expr: e3,
                terminal: false,
            },
            Equation {
                label: "(iv) terminal".into(),
                expr: e4,
                terminal: true,
            },
        ],
        split_vars: vec!["y".into(), "z".into()],
        sigma: spec.sigma.clone(),
        notes,
    }
}

/// PDE determining system for σ ≠ 0 with φ = δ(t,x)y + β(t,x).
///
/// With z = σu_x the non-trivial part of pr²v(Δ) reads σ·A + z·B, where A is
/// the φ-equation and B the γ-equation. If g is independent of z, A and B
/// do not involve z and are emitted separately; otherwise they are coupled
/// through g(·, z) and the combined equation is emitted instead.
pub fn pde_determining(spec: &ProblemSpec) -> Result<DeterminingSystem, DeterminingError> {
    if spec.sigma_is_zero() {
        return Err(DeterminingError::SigmaZero);
    }
    let th = Unknown::new("theta", &["t"], Role::Tau);
    let ga = Unknown::new("gamma", &["t", "x"], Role::Xi);
    let de = Unknown::new("delta", &["t", "x"], Role::EtaSlope);
    let be = Unknown::new("beta", &["t", "x"], Role::EtaIntercept);
    let theta = th.applied();
    let gamma = ga.applied();
    let phi = &(&de.applied() * &v("y")) + &be.applied();
    let (b, s, g) = (&spec.b, &spec.sigma, &spec.g);
    let gz = g.diff("z");
    let drift = b + &(s * &gz);
    let phi_x = phi.diff("x");
    let phi_y = phi.diff("y");

    let eq_sigma: Expr = [
        &(&half() * s) * &theta.diff("t"),
        &s.diff("t") * &theta,
        -(s * &gamma.diff("x")),
        &s.diff("x") * &gamma,
    ]
    .into_iter()
    .sum();
    let a: Expr = [
        phi.diff("t"),
        &(&half() * &(s * s)) * &phi_x.diff("x"),
        &drift * &phi_x,
        (g * &theta).diff("t"),
        &g.diff("x") * &gamma,
        &g.diff("y") * &phi,
        -(g * &phi_y),
    ]
    .into_iter()
    .sum();
    let bq: Expr = [
        -gamma.diff("t"),
        -(&(&half() * &(s * s)) * &gamma.diff_n("x", 2)),
        -(&drift * &gamma.diff("x")),
        &(&b.diff("x") + &(&s.diff("x") * &gz)) * &gamma,
        &(&s.diff("t") * &gz) * &theta,
        (b * &theta).diff("t"),
        &(s * &gz) * &phi_y,
        &(s * s) * &phi_x.diff("y"),
    ]
    .into_iter()
    .sum();
    let terminal = &at_terminal(&phi, &spec.terminal) - &(&spec.terminal.diff("x") * &gamma);

    let mut equations = vec![Equation {
        label: "sigma".into(),
        expr: eq_sigma,
        terminal: false,
    }];
    let mut notes = vec!["phi = delta(t,x)*y + beta(t,x) (phi_yy = 0 when sigma != 0)".to_string()];
    if spec.g_depends_on_z() {
        notes.push("g depends on z: phi- and gamma-equations coupled as sigma*A + z*B".into());
        equations.push(Equation {
            label: "phi/gamma (sigma*A + z*B)".into(),
            expr: &(s * &a) + &(&v("z") * &bq),
            terminal: false,
        });
    } else {
        equations.push(Equation {
            label: "phi".into(),
            expr: a,
            terminal: false,
        });
        equations.push(Equation {
            label: "gamma".into(),
            expr: bq,
            terminal: false,
        });
    }
    equations.push(Equation {
        label: "terminal".into(),
        expr: terminal,
        terminal: true,
    });
    Ok(DeterminingSystem {
        side: Side::Pde,
        origin: Origin::Transcription,
        unknowns: vec![th, ga, de, be],
        field: [theta, gamma, phi],
        equations,
        split_vars: vec!["y".into(), "z".into()],
        sigma: spec.sigma.clone(),
        notes,
    })
}

/// PDE determining system from pr²v(Δ) on Δ = 0 with a general φ(t,x,y).
pub fn pde_determining_via_prolongation(
    spec: &ProblemSpec,
) -> Result<DeterminingSystem, DeterminingError> {
    if spec.sigma_is_zero() {
        return Err(DeterminingError::SigmaZero);
    }
    let opaque = spec.g.opaque_names();
    if !opaque.is_empty() {
        return Err(DeterminingError::OpaqueGenerator(
            opaque.into_iter().collect::<Vec<_>>().join(", "),
        ));
    }
    let th = Unknown::new("theta", &["t"], Role::Tau);
    let ga = Unknown::new("gamma", &["t", "x"], Role::Xi);
    let ph = Unknown::new("phi", &["t", "x", "y"], Role::Eta);
    let field = VectorField {
        tau: th.applied(),
        xi: ga.applied(),
        eta: ph.applied(),
    };
    let pr = prolong2(&field)?;
    let delta = spec.pde_expr();
    let applied = pr.apply(&delta);
    let u_t = -(&delta - &v(jet::UT));
    let on_solutions = applied.substitute(&Bindings::new().with_value(jet::UT, u_t))?;
    for leftover in [
        jet::UXT,
        jet::UTT,
        jet::UXXX,
        jet::UXXT,
        jet::UXTT,
        jet::UTTT,
    ] {
        if on_solutions.contains_var(leftover) {
            return Err(DeterminingError::LeftoverJet(leftover.into()));
        }
    }
    let parts = on_solutions
        .collect(&[jet::UX, jet::UXX], true)
        .map_err(DeterminingError::NonPolynomialJet)?;
    let mut equations: Vec<Equation> = parts
        .into_iter()
        .map(|(k, coeff)| Equation {
            label: format!("coeff u_x^{} u_xx^{}", k[0], k[1]),
            expr: coeff.rename_var(jet::U, "y"),
            terminal: false,
        })
        .collect();
    let phi = field.eta.clone();
    equations.push(Equation {
        label: "terminal".into(),
        expr: &at_terminal(&phi, &spec.terminal) - &(&spec.terminal.diff("x") * &field.xi),
        terminal: true,
    });
    Ok(DeterminingSystem {
        side: Side::Pde,
        origin: Origin::Prolongation,
        unknowns: vec![th, ga, ph],
        field: [field.tau, field.xi, field.eta],
        equations,
        split_vars: vec!["y".into()],
        sigma: spec.sigma.clone(),
        notes: vec!["pr2 v(Delta) with u_t eliminated, split in u_x and u_xx".into()],
    })
}

impl DeterminingSystem {
    pub fn without_terminal(&self) -> DeterminingSystem {
        let mut out = self.clone();
        out.equations.retain(|e| !e.terminal);
        out
    }

    /// Bindings that put concrete bodies in place of the unknown functions.
    pub fn bindings_for(&self, bodies: &[Expr]) -> Bindings {
        let mut b = Bindings::new();
        for (u, body) in self.unknowns.iter().zip(bodies) {
            let params: Vec<&str> = u.args.iter().map(String::as_str).collect();
            b.function(&u.name, &params, body.clone());
        }
        b
    }

    /// Field obtained by giving each unknown a concrete body.
    pub fn field_from_bodies(&self, bodies: &[Expr]) -> Result<VectorField, DeterminingError> {
        let b = self.bindings_for(bodies);
        let [t, x, y] = &self.field;
        Ok(VectorField {
            tau: t.substitute(&b)?,
            xi: x.substitute(&b)?,
            eta: y.substitute(&b)?,
        })
    }

    /// Structured form: one record per equation with its split coefficients.
    pub fn to_records(&self) -> Vec<EquationRecord> {
        let vars: Vec<&str> = self.split_vars.iter().map(String::as_str).collect();
        self.equations
            .iter()
            .map(|eq| {
                let terms = match eq.expr.collect(&vars, false) {
                    Ok(parts) => parts
                        .into_iter()
                        .map(|(k, c)| (monomial_key(&vars, &k), c.to_string()))
                        .collect(),
                    Err(_) => vec![("1".to_string(), eq.expr.to_string())],
                };
                EquationRecord {
                    label: eq.label.clone(),
                    terminal: eq.terminal,
                    expr: eq.expr.to_string(),
                    terms,
                }
            })
            .collect()
    }
}

fn monomial_key(vars: &[&str], k: &[u32]) -> String {
    let parts: Vec<String> = vars
        .iter()
        .zip(k)
        .filter(|(_, &e)| e > 0)
        .map(|(v, &e)| {
            if e == 1 {
                v.to_string()
            } else {
                format!("{v}^{e}")
            }
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationRecord {
    pub label: String,
    pub terminal: bool,
    pub expr: String,
    /// (monomial in the split variables, coefficient)
    pub terms: Vec<(String, String)>,
}

impl fmt::Display for DeterminingSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unknowns: Vec<String> = self.unknowns.iter().map(Unknown::signature).collect();
        writeln!(
            f,
            "{} determining system ({:?}), unknowns {}",
            self.side,
            self.origin,
            unknowns.join(", ")
        )?;
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        for eq in &self.equations {
            writeln!(f, "  {}: {} = 0", eq.label, eq.expr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub equation: String,
    /// Monomial in the split variables this coefficient belongs to.
    pub monomial: String,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateReport {
    pub symmetry: bool,
    pub residuals: Vec<Residual>,
}

/// Extract the unknown bodies a field implies for this system.
pub fn extract_bodies(
    system: &DeterminingSystem,
    field: &VectorField,
) -> Result<(Vec<Expr>, Vec<Residual>), DeterminingError> {
    field
        .check_projectable()
        .map_err(|e| DeterminingError::Signature(e.to_string()))?;
    let mut bodies = Vec::new();
    let mut extra = Vec::new();
    let affine = system.unknowns.iter().any(|u| u.role == Role::EtaSlope);
    if affine {
        let eta_yy = field.eta.diff_n("y", 2);
        if !eta_yy.is_zero() {
            extra.push(Residual {
                equation: "form".into(),
                monomial: "eta_yy".into(),
                expr: eta_yy.to_string(),
            });
        }
    }
    for u in &system.unknowns {
        let body = match u.role {
            Role::Tau => field.tau.clone(),
            Role::Xi => field.xi.clone(),
            Role::Eta => field.eta.clone(),
            Role::EtaSlope => field.eta_slope(),
            Role::EtaIntercept => field.eta_intercept(),
        };
        for var in body.free_vars() {
            if u.args.contains(&var) {
                continue;
            }
            if !["t", "x", "y"].contains(&var.as_str()) {
                return Err(DeterminingError::Signature(format!(
                    "{} depends on foreign symbol `{var}`",
                    u.signature()
                )));
            }
            let (label, expr) = match (u.role, var.as_str()) {
                (Role::EtaSlope, "x") => {
                    ("sigma*eta_xy".to_string(), &system.sigma * &body.diff("x"))
                }
                (Role::EtaSlope, "y") => continue, // reported as eta_yy above
                _ => (format!("{}_{var}", u.name), body.diff(&var)),
            };
            if !expr.is_zero() {
                extra.push(Residual {
                    equation: "form".into(),
                    monomial: label,
                    expr: expr.to_string(),
                });
            }
        }
        bodies.push(body);
    }
    Ok((bodies, extra))
}

/// Substitute a candidate field into the system and report all non-zero
/// split coefficients. The verdict is "symmetry" iff nothing is left.
pub fn check_candidate(
    system: &DeterminingSystem,
    field: &VectorField,
) -> Result<CandidateReport, DeterminingError> {
    let (bodies, mut residuals) = extract_bodies(system, field)?;
    let b = system.bindings_for(&bodies);
    let vars: Vec<&str> = system.split_vars.iter().map(String::as_str).collect();
    for eq in &system.equations {
        let r = eq.expr.substitute(&b)?;
        if r.is_zero() {
            continue;
        }
        match r.collect(&vars, false) {
            Ok(parts) => {
                for (k, c) in parts {
                    residuals.push(Residual {
                        equation: eq.label.clone(),
                        monomial: monomial_key(&vars, &k),
                        expr: c.to_string(),
                    });
                }
            }
            Err(_) => residuals.push(Residual {
                equation: eq.label.clone(),
                monomial: "1".into(),
                expr: r.to_string(),
            }),
        }
    }
    Ok(CandidateReport {
        symmetry: residuals.is_empty(),
        residuals,
    })
}

/// Residual expressions keyed by equation label, for tests and reports.
pub fn residual_map(report: &CandidateReport) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in &report.residuals {
        out.entry(r.equation.clone())
            .or_default()
            .push(format!("{}: {}", r.monomial, r.expr));
    }
    out
}
