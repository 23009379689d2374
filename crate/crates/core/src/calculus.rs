//! Projectable vector fields, second prolongation, Lie brackets, commutator
//! tables and computable Lie-algebra invariants.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::expr::{Bindings, Compiled, Expr, ExprError, Monomial, Rational, VarEnv};
use crate::linalg;
use crate::par::{self, Execution};

/// Jet coordinates up to third order. Third order is needed because φ^xx,
/// φ^xt and φ^tt apply a second total derivative to the characteristic.
pub mod jet {
    pub const U: &str = "u";
    pub const UX: &str = "u_x";
    pub const UT: &str = "u_t";
    pub const UXX: &str = "u_xx";
    pub const UXT: &str = "u_xt";
    pub const UTT: &str = "u_tt";
    pub const UXXX: &str = "u_xxx";
    pub const UXXT: &str = "u_xxt";
    pub const UXTT: &str = "u_xtt";
    pub const UTTT: &str = "u_ttt";

    pub const THIRD_ORDER: [&str; 4] = [UXXX, UXXT, UXTT, UTTT];
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalculusError {
    #[error("field is not projectable: {0}")]
    NotProjectable(String),
    #[error("total derivative of `{0}` would exceed jet order 3")]
    JetOrder(String),
    #[error("basis is linearly dependent (rank {rank} < {n})")]
    DependentBasis { rank: usize, n: usize },
    #[error("bracket table has closure failures; invariants need a closed algebra")]
    NotClosed,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    X,
    T,
}

/// `D_x` or `D_t` on an expression in (t, x, u, jet variables).
pub fn total_derivative(e: &Expr, dir: Direction) -> Result<Expr, CalculusError> {
    use jet::*;
    for v in jet::THIRD_ORDER {
        if e.contains_var(v) {
            return Err(CalculusError::JetOrder(v.to_string()));
        }
    }
    let chain: [(&str, &str); 6] = match dir {
        Direction::X => [
            (U, UX),
            (UX, UXX),
            (UT, UXT),
            (UXX, UXXX),
            (UXT, UXXT),
            (UTT, UXTT),
        ],
        Direction::T => [
            (U, UT),
            (UX, UXT),
            (UT, UTT),
            (UXX, UXXT),
            (UXT, UXTT),
            (UTT, UTTT),
        ],
    };
    let base = match dir {
        Direction::X => "x",
        Direction::T => "t",
    };
    let mut out = e.diff(base);
    for (from, to) in chain {
        let d = e.diff(from);
        if !d.is_zero() {
            out = &out + &(&Expr::var(to) * &d);
        }
    }
    Ok(out)
}

/// τ(t)∂t + ξ(t,x)∂x + η(t,x,y)∂y. On the PDE side the same components are
/// called θ, γ, φ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VectorField {
    pub tau: Expr,
    pub xi: Expr,
    pub eta: Expr,
}

impl VectorField {
    pub fn new(tau: Expr, xi: Expr, eta: Expr) -> Result<Self, CalculusError> {
        let v = VectorField { tau, xi, eta };
        v.check_projectable()?;
        Ok(v)
    }

    /// Parse three component strings.
    pub fn parse(tau: &str, xi: &str, eta: &str) -> Result<Self, CalculusError> {
        use crate::expr::parse;
        VectorField::new(parse(tau)?, parse(xi)?, parse(eta)?)
    }

    pub fn zero() -> Self {
        VectorField {
            tau: Expr::zero(),
            xi: Expr::zero(),
            eta: Expr::zero(),
        }
    }

    pub fn check_projectable(&self) -> Result<(), CalculusError> {
        for v in ["x", "y"] {
            if self.tau.contains_var(v) {
                return Err(CalculusError::NotProjectable(format!(
                    "time component depends on {v}: {}",
                    self.tau
                )));
            }
        }
        if self.xi.contains_var("y") {
            return Err(CalculusError::NotProjectable(format!(
                "space component depends on y: {}",
                self.xi
            )));
        }
        Ok(())
    }

    pub fn components(&self) -> [&Expr; 3] {
        [&self.tau, &self.xi, &self.eta]
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, k: &Rational) -> VectorField {
        VectorField {
            tau: self.tau.scale(k),
            xi: self.xi.scale(k),
            eta: self.eta.scale(k),
        }
    }

    pub fn add(&self, o: &VectorField) -> VectorField {
        VectorField {
            tau: &self.tau + &o.tau,
            xi: &self.xi + &o.xi,
            eta: &self.eta + &o.eta,
        }
    }

    pub fn combination(fields: &[VectorField], coeffs: &[Rational]) -> VectorField {
        fields
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| !c.is_zero())
            .fold(VectorField::zero(), |acc, (f, c)| acc.add(&f.scale(c)))
    }

    /// Apply the field as a derivation to a function of (t, x, y).
    pub fn apply(&self, f: &Expr) -> Expr {
        &(&(&self.tau * &f.diff("t")) + &(&self.xi * &f.diff("x"))) + &(&self.eta * &f.diff("y"))
    }

    /// Coordinates over `(component, monomial)`; two fields are equal iff
    /// their coordinate maps are.
    pub fn coordinates(&self) -> BTreeMap<(u8, Monomial), Rational> {
        let mut out = BTreeMap::new();
        for (i, c) in self.components().into_iter().enumerate() {
            for (m, q) in c.terms() {
                out.insert((i as u8, m.clone()), q.clone());
            }
        }
        out
    }

    /// Numeric evaluation of the three components at slots `[t, x, y]`.
    pub fn compile(&self, env: &VarEnv) -> Result<[Compiled; 3], ExprError> {
        let slots = ["t", "x", "y"];
        Ok([
            self.tau.compile(&slots, env)?,
            self.xi.compile(&slots, env)?,
            self.eta.compile(&slots, env)?,
        ])
    }

    /// `∂_y η`, the δ of φ = δy + β when η is affine in y.
    pub fn eta_slope(&self) -> Expr {
        self.eta
            .diff("y")
            .substitute(&Bindings::new().with_value("y", Expr::zero()))
            .expect("y ↦ 0 cannot fail")
    }

    pub fn eta_intercept(&self) -> Expr {
        self.eta
            .substitute(&Bindings::new().with_value("y", Expr::zero()))
            .expect("y ↦ 0 cannot fail")
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, d) in [(&self.tau, "∂t"), (&self.xi, "∂x"), (&self.eta, "∂y")] {
            if c.is_zero() {
                continue;
            }
            let text = match c.constant_value() {
                Some(k) if k.is_one() => d.to_string(),
                Some(k) if (-k.clone()).is_one() => format!("-{d}"),
                _ if c.num_terms() == 1 => format!("{c}*{d}"),
                _ => format!("({c})*{d}"),
            };
            if first {
                write!(f, "{text}")?;
            } else if let Some(rest) = text.strip_prefix('-') {
                write!(f, " - {rest}")?;
            } else {
                write!(f, " + {text}")?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Second prolongation of a projectable field.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongedField {
    pub base: VectorField,
    pub phi: Expr,
    pub phi_x: Expr,
    pub phi_t: Expr,
    pub phi_xx: Expr,
    pub phi_xt: Expr,
    pub phi_tt: Expr,
}

/// Characteristic-form prolongation with Q = φ − θu_t − γu_x.
pub fn prolong2(v: &VectorField) -> Result<ProlongedField, CalculusError> {
    use jet::*;
    v.check_projectable()?;
    let theta = &v.tau;
    let gamma = &v.xi;
    let phi = v.eta.rename_var("y", U);
    let var = Expr::var;
    let q = &(&phi - &(theta * &var(UT))) - &(gamma * &var(UX));
    let dx = |e: &Expr| total_derivative(e, Direction::X);
    let dt = |e: &Expr| total_derivative(e, Direction::T);
    let lift = |d: Expr, a: &str, b: &str| &(&d + &(theta * &var(a))) + &(gamma * &var(b));
    let qx = dx(&q)?;
    let qt = dt(&q)?;
    Ok(ProlongedField {
        phi_x: lift(qx.clone(), UXT, UXX),
        phi_t: lift(qt.clone(), UTT, UXT),
        phi_xx: lift(dx(&qx)?, UXXT, UXXX),
        phi_xt: lift(dx(&qt)?, UXTT, UXXT),
        phi_tt: lift(dt(&qt)?, UTTT, UXTT),
        phi,
        base: v.clone(),
    })
}

impl ProlongedField {
    /// pr²v applied to an expression Δ(t, x, u, u_x, u_t, u_xx, u_xt, u_tt).
    pub fn apply(&self, delta: &Expr) -> Expr {
        use jet::*;
        let parts = [
            (&self.base.tau, "t"),
            (&self.base.xi, "x"),
            (&self.phi, U),
            (&self.phi_x, UX),
            (&self.phi_t, UT),
            (&self.phi_xx, UXX),
            (&self.phi_xt, UXT),
            (&self.phi_tt, UTT),
        ];
        parts
            .into_iter()
            .filter_map(|(c, v)| {
                let d = delta.diff(v);
                (!d.is_zero()).then(|| c * &d)
            })
            .sum()
    }
}

/// `[v, w]^i = v(w^i) − w(v^i)` over (t, x, y).
pub fn bracket(v: &VectorField, w: &VectorField) -> VectorField {
    VectorField {
        tau: &v.apply(&w.tau) - &w.apply(&v.tau),
        xi: &v.apply(&w.xi) - &w.apply(&v.xi),
        eta: &v.apply(&w.eta) - &w.apply(&v.eta),
    }
}

/// Dense coordinate vectors of `fields` over the union of their monomials.
pub fn coordinate_matrix(fields: &[VectorField]) -> (Vec<(u8, Monomial)>, Vec<Vec<Rational>>) {
    let coords: Vec<_> = fields.iter().map(VectorField::coordinates).collect();
    let mut keys: Vec<(u8, Monomial)> = coords.iter().flat_map(|c| c.keys().cloned()).collect();
    keys.sort();
    keys.dedup();
    let vecs = coords
        .iter()
        .map(|c| {
            keys.iter()
                .map(|k| c.get(k).cloned().unwrap_or_else(Rational::zero))
                .collect()
        })
        .collect();
    (keys, vecs)
}

/// Express `target` in `basis`; `None` if it is not in the span.
pub fn express_in(basis: &[VectorField], target: &VectorField) -> Option<Vec<Rational>> {
    if target.is_zero() {
        return Some(vec![Rational::zero(); basis.len()]);
    }
    let mut all = basis.to_vec();
    all.push(target.clone());
    let (_, mut vecs) = coordinate_matrix(&all);
    let t = vecs.pop().unwrap();
    linalg::solve_columns(&vecs, &t)
}

pub fn rank_of(fields: &[VectorField]) -> usize {
    let (keys, vecs) = coordinate_matrix(fields);
    linalg::rank(&vecs, keys.len())
}

/// `[v_i, v_j] = Σ_k c[i][j][k] v_k`; `closed[i][j]` is false when the bracket
/// left the span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureConstants {
    pub names: Vec<String>,
    #[serde(serialize_with = "ser_table")]
    pub c: Vec<Vec<Vec<Rational>>>,
    pub closed: Vec<Vec<bool>>,
    /// Brackets that left the span, by (i, j) with i < j.
    #[serde(skip)]
    pub residuals: BTreeMap<(usize, usize), VectorField>,
}

fn ser_table<S: serde::Serializer>(c: &[Vec<Vec<Rational>>], s: S) -> Result<S::Ok, S::Error> {
    let strings: Vec<Vec<Vec<String>>> = c
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| v.iter().map(|q| q.to_string()).collect())
                .collect()
        })
        .collect();
    strings.serialize(s)
}

impl StructureConstants {
    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed.iter().all(|r| r.iter().all(|&b| b))
    }

    pub fn is_abelian(&self) -> bool {
        self.c
            .iter()
            .all(|r| r.iter().all(|v| v.iter().all(|q| q.is_zero())))
    }

    /// Human-readable bracket relations, zero entries omitted.
    pub fn relations(&self) -> Vec<String> {
        let n = self.dimension();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !self.closed[i][j] {
                    out.push(format!(
                        "[{}, {}] = (not in span)",
                        self.names[i], self.names[j]
                    ));
                    continue;
                }
                let terms: Vec<String> = self.c[i][j]
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| !q.is_zero())
                    .map(|(k, q)| format_term(q, &self.names[k]))
                    .collect();
                if !terms.is_empty() {
                    let mut s = terms[0].clone();
                    for t in &terms[1..] {
                        match t.strip_prefix('-') {
                            Some(r) => s += &format!(" - {r}"),
                            None => s += &format!(" + {t}"),
                        }
                    }
                    out.push(format!("[{}, {}] = {s}", self.names[i], self.names[j]));
                }
            }
        }
        out
    }
}

fn format_term(q: &Rational, name: &str) -> String {
    if q.is_one() {
        name.to_string()
    } else if (-q).is_one() {
        format!("-{name}")
    } else if q.is_negative() {
        format!("-{}*{name}", -q)
    } else {
        format!("{q}*{name}")
    }
}

pub fn commutator_table(
    basis: &[VectorField],
    names: &[String],
    exec: Execution,
) -> Result<StructureConstants, CalculusError> {
    let n = basis.len();
    assert_eq!(names.len(), n);
    let rank = rank_of(basis);
    if rank < n {
        return Err(CalculusError::DependentBasis { rank, n });
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let results = par::map_slice(exec, &pairs, |&(i, j)| {
        let b = bracket(&basis[i], &basis[j]);
        let coeffs = express_in(basis, &b);
        (b, coeffs)
    });
    let zero = || vec![Rational::zero(); n];
    let mut c = vec![vec![zero(); n]; n];
    let mut closed = vec![vec![true; n]; n];
    let mut residuals = BTreeMap::new();
    for (&(i, j), (b, coeffs)) in pairs.iter().zip(results) {
        match coeffs {
            Some(k) => {
                c[j][i] = k.iter().map(|q| -q).collect();
                c[i][j] = k;
            }
            None => {
                closed[i][j] = false;
                closed[j][i] = false;
                residuals.insert((i, j), b);
            }
        }
    }
    Ok(StructureConstants {
        names: names.to_vec(),
        c,
        closed,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlgebraInvariants {
    pub dimension: usize,
    pub abelian: bool,
    /// dim g, dim [g,g], dim [[g,g],[g,g]], … until 0 or a repeat.
    pub derived_series: Vec<usize>,
    /// dim g, dim [g,g], dim [g,[g,g]], … until 0 or a repeat.
    pub lower_central_series: Vec<usize>,
    pub center_dimension: usize,
}

fn bracket_coords(sc: &StructureConstants, a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = sc.dimension();
    let mut out = vec![Rational::zero(); n];
    for p in 0..n {
        if a[p].is_zero() {
            continue;
        }
        for q in 0..n {
            if b[q].is_zero() {
                continue;
            }
            let w = &a[p] * &b[q];
            for (k, c) in sc.c[p][q].iter().enumerate() {
                if !c.is_zero() {
                    out[k] += &w * c;
                }
            }
        }
    }
    out
}

fn span_of_brackets(
    sc: &StructureConstants,
    left: &[Vec<Rational>],
    right: &[Vec<Rational>],
) -> Vec<Vec<Rational>> {
    let prods: Vec<Vec<Rational>> = left
        .iter()
        .flat_map(|a| right.iter().map(move |b| bracket_coords(sc, a, b)))
        .collect();
    linalg::rref(&prods, sc.dimension()).rows
}

fn series(sc: &StructureConstants, derived: bool) -> Vec<usize> {
    let n = sc.dimension();
    let whole: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut dims = vec![n];
    let mut current = whole.clone();
    while *dims.last().unwrap() > 0 {
        let next = if derived {
            span_of_brackets(sc, &current, &current)
        } else {
            span_of_brackets(sc, &whole, &current)
        };
        let d = next.len();
        let repeat = d == *dims.last().unwrap();
        dims.push(d);
        if repeat {
            break;
        }
        current = next;
    }
    dims
}

pub fn algebra_invariants(sc: &StructureConstants) -> Result<AlgebraInvariants, CalculusError> {
    if !sc.is_closed() {
        return Err(CalculusError::NotClosed);
    }
    let n = sc.dimension();
    // v is central iff Σ_p v_p c[p][q][k] = 0 for all q, k
    let rows: Vec<Vec<Rational>> = (0..n)
        .flat_map(|q| (0..n).map(move |k| (q, k)))
        .map(|(q, k)| (0..n).map(|p| sc.c[p][q][k].clone()).collect())
        .collect();
    let center_dimension = n - linalg::rank(&rows, n);
    Ok(AlgebraInvariants {
        dimension: n,
        abelian: sc.is_abelian(),
        derived_series: series(sc, true),
        lower_central_series: series(sc, false),
        center_dimension,
    })
}
