//! Exact solution of determining systems under polynomial ansätze.
//!
//! Every unknown gets a polynomial with symbolic coefficients `_a{i}`; each
//! determining equation then becomes linear in those coefficients, is split
//! into monomials of everything else, and the resulting rational matrix is
//! solved exactly. Returned generators are re-verified symbolically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::calculus::{
    algebra_invariants, commutator_table, coordinate_matrix, express_in, AlgebraInvariants,
    CalculusError, StructureConstants, VectorField,
};
use crate::determining::{check_candidate, DeterminingError, DeterminingSystem, Side};
use crate::expr::{Atom, Expr, Monomial, Rational};
use crate::linalg;
use crate::par::{self, Execution};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnsatzBounds {
    pub deg_t: u32,
    pub deg_x: u32,
    /// Degree in y for unknowns that take y; 1 unless probing φ_yy = 0.
    pub deg_y: u32,
}

impl AnsatzBounds {
    pub fn new(deg_t: u32, deg_x: u32) -> Self {
        AnsatzBounds {
            deg_t,
            deg_x,
            deg_y: 1,
        }
    }

    /// deg_t = 2, deg_x = max(3, deg H + 1).
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let dh = spec.terminal_degree().unwrap_or(0);
        AnsatzBounds::new(2, 3.max(dh + 1))
    }

    pub fn raised(&self) -> Self {
        AnsatzBounds {
            deg_t: self.deg_t + 1,
            deg_x: self.deg_x + 1,
            deg_y: self.deg_y,
        }
    }
}

impl fmt::Display for AnsatzBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "deg_t = {}, deg_x = {}, deg_y = {}",
            self.deg_t, self.deg_x, self.deg_y
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("equation `{equation}` is not linear in the ansatz coefficients")]
    NonLinear { equation: String },
    #[error("equation `{equation}` has a term free of unknowns: {term}")]
    Inhomogeneous { equation: String, term: String },
    #[error("equation `{equation}` cannot be split: ansatz coefficient inside {atom}")]
    NonPolynomial { equation: String, atom: String },
    #[error("generator {name} failed re-verification: {residuals}")]
    Unsound { name: String, residuals: String },
    #[error("phi is not affine in y for {0}; the delta/beta decomposition is unavailable")]
    NotAffine(String),
    #[error(transparent)]
    Determining(#[from] DeterminingError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

const COEF: &str = "_a";

fn coef_index(name: &str) -> Option<usize> {
    name.strip_prefix(COEF)?.parse().ok()
}

/// One polynomial per unknown: its coefficient slots and their monomials.
#[derive(Debug, Clone)]
struct Ansatz {
    slots: Vec<Vec<(usize, Monomial)>>,
    ncoef: usize,
}

fn build_ansatz(system: &DeterminingSystem, bounds: AnsatzBounds) -> Ansatz {
    let mut ncoef = 0;
    let slots = system
        .unknowns
        .iter()
        .map(|u| {
            let mut monos = vec![Monomial::one()];
            for arg in &u.args {
                let deg = match arg.as_str() {
                    "t" => bounds.deg_t,
                    "x" => bounds.deg_x,
                    _ => bounds.deg_y,
                };
                monos = monos
                    .iter()
                    .flat_map(|m| {
                        (0..=deg as i64).map(move |e| {
                            Monomial::from_factors(
                                m.factors()
                                    .map(|(a, k)| (a.clone(), k))
                                    .chain([(Atom::Var(arg.as_str().into()), e)]),
                            )
                        })
                    })
                    .collect();
            }
            monos
                .into_iter()
                .map(|m| {
                    ncoef += 1;
                    (ncoef - 1, m)
                })
                .collect()
        })
        .collect();
    Ansatz { slots, ncoef }
}

impl Ansatz {
    fn symbolic_bodies(&self) -> Vec<Expr> {
        self.slots
            .iter()
            .map(|s| {
                s.iter()
                    .map(|(i, m)| {
                        &Expr::var(&format!("{COEF}{i}")) * &Expr::term(m.clone(), Rational::one())
                    })
                    .sum()
            })
            .collect()
    }

    fn bodies_for(&self, coeffs: &[Rational]) -> Vec<Expr> {
        self.slots
            .iter()
            .map(|s| {
                Expr::from_terms(
                    s.iter()
                        .filter(|(i, _)| !coeffs[*i].is_zero())
                        .map(|(i, m)| (m.clone(), coeffs[*i].clone())),
                )
            })
            .collect()
    }
}

struct Rows {
    rows: Vec<BTreeMap<usize, Rational>>,
    conservative: bool,
}

fn linear_rows(label: &str, e: &Expr) -> Result<Rows, SolveError> {
    let mut by_rest: BTreeMap<Monomial, BTreeMap<usize, Rational>> = BTreeMap::new();
    let mut conservative = false;
    for (m, c) in e.terms() {
        let mut col = None;
        let mut rest = Vec::new();
        for (atom, k) in m.factors() {
            if let Atom::Var(name) = atom {
                if let Some(i) = coef_index(name) {
                    if col.is_some() || k != 1 {
                        return Err(SolveError::NonLinear {
                            equation: label.into(),
                        });
                    }
                    col = Some(i);
                    continue;
                }
            } else {
                if Expr::atom(atom.clone())
                    .free_vars()
                    .iter()
                    .any(|v| coef_index(v).is_some())
                {
                    return Err(SolveError::NonPolynomial {
                        equation: label.into(),
                        atom: Expr::atom(atom.clone()).to_string(),
                    });
                }
                conservative = true;
            }
            rest.push((atom.clone(), k));
        }
        let Some(col) = col else {
            return Err(SolveError::Inhomogeneous {
                equation: label.into(),
                term: Expr::term(m.clone(), c.clone()).to_string(),
            });
        };
        let slot = by_rest
            .entry(Monomial::from_factors(rest))
            .or_default()
            .entry(col)
            .or_insert_with(Rational::zero);
        *slot += c;
    }
    let rows = by_rest.into_values().map(|mut r| {
        r.retain(|_, v| !v.is_zero());
        r
    });
    Ok(Rows {
        rows: rows.filter(|r| !r.is_empty()).collect(),
        conservative,
    })
}

/// Solution span before canonicalization: bodies per nullspace vector.
struct Span {
    fields: Vec<VectorField>,
    conservative: bool,
}

fn solve_span(
    system: &DeterminingSystem,
    bounds: AnsatzBounds,
    exec: Execution,
) -> Result<Span, SolveError> {
    let ansatz = build_ansatz(system, bounds);
    let bindings = system.bindings_for(&ansatz.symbolic_bodies());
    let per_eq = par::map_slice(exec, &system.equations, |eq| -> Result<Rows, SolveError> {
        let e = eq
            .expr
            .substitute(&bindings)
            .map_err(DeterminingError::from)?;
        linear_rows(&eq.label, &e)
    });
    let mut dense: BTreeSet<Vec<Rational>> = BTreeSet::new();
    let mut conservative = false;
    for r in per_eq {
        let r = r?;
        conservative |= r.conservative;
        for row in r.rows {
            let mut d = vec![Rational::zero(); ansatz.ncoef];
            for (i, v) in row {
                d[i] = v;
            }
            linalg::normalize_leading(&mut d);
            dense.insert(d);
        }
    }
    let rows: Vec<Vec<Rational>> = dense.into_iter().collect();
    let kernel = linalg::rational_nullspace(&rows, ansatz.ncoef);
    let fields = kernel
        .iter()
        .map(|k| {
            system
                .field_from_bodies(&ansatz.bodies_for(k))
                .map_err(SolveError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Span {
        fields,
        conservative,
    })
}

/// Canonical basis of span(fields): reduced echelon form over coordinates
/// ordered τ, ξ, η with monomials in descending order.
pub fn canonical_basis(fields: &[VectorField]) -> Vec<VectorField> {
    if fields.is_empty() {
        return Vec::new();
    }
    let (keys, vecs) = coordinate_matrix(fields);
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .0
            .cmp(&keys[b].0)
            .then_with(|| keys[b].1.cmp(&keys[a].1))
    });
    let permuted: Vec<Vec<Rational>> = vecs
        .iter()
        .map(|v| order.iter().map(|&j| v[j].clone()).collect())
        .collect();
    let r = linalg::rref(&permuted, keys.len());
    r.rows
        .iter()
        .map(|row| {
            let mut comps: [Vec<(Monomial, Rational)>; 3] = Default::default();
            for (pos, &j) in order.iter().enumerate() {
                if !row[pos].is_zero() {
                    let (c, m) = &keys[j];
                    comps[*c as usize].push((m.clone(), row[pos].clone()));
                }
            }
            let [t, x, y] = comps.map(Expr::from_terms);
            VectorField {
                tau: t,
                xi: x,
                eta: y,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryBasis {
    pub side: Side,
    pub bounds: AnsatzBounds,
    pub fields: Vec<VectorField>,
    pub names: Vec<String>,
    pub structure: StructureConstants,
    pub invariants: AlgebraInvariants,
    /// Non-fatal findings, e.g. dimension changes when bounds are raised.
    pub warnings: Vec<String>,
    /// Splitting treated non-polynomial atoms (H, opaque coefficients) as
    /// independent, which can only lose solutions.
    pub conservative: bool,
}

impl SymmetryBasis {
    pub fn dimension(&self) -> usize {
        self.fields.len()
    }

    /// Same metadata, new generators; recomputes the commutator table.
    pub fn with_fields(
        &self,
        fields: Vec<VectorField>,
        names: Vec<String>,
        exec: Execution,
    ) -> Result<SymmetryBasis, SolveError> {
        let structure = commutator_table(&fields, &names, exec)?;
        let invariants = algebra_invariants(&structure)?;
        Ok(SymmetryBasis {
            fields,
            names,
            structure,
            invariants,
            ..self.clone()
        })
    }

    pub fn get(&self, name: &str) -> Option<&VectorField> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.fields[i])
    }

    pub fn document(&self) -> BasisDocument {
        BasisDocument {
            side: self.side,
            bounds: self.bounds,
            dimension: self.dimension(),
            generators: self
                .names
                .iter()
                .zip(&self.fields)
                .enumerate()
                .map(|(i, (n, f))| GeneratorRecord {
                    name: n.clone(),
                    constant: format!("c{}", i + 1),
                    tau: f.tau.to_string(),
                    xi: f.xi.to_string(),
                    eta: f.eta.to_string(),
                    display: f.to_string(),
                })
                .collect(),
            relations: self.structure.relations(),
            closed: self.structure.is_closed(),
            structure: self.structure.clone(),
            invariants: self.invariants.clone(),
            warnings: self.warnings.clone(),
            conservative: self.conservative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRecord {
    pub name: String,
    /// Free constant multiplying this generator in the general solution.
    pub constant: String,
    pub tau: String,
    pub xi: String,
    pub eta: String,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisDocument {
    pub side: Side,
    pub bounds: AnsatzBounds,
    pub dimension: usize,
    pub generators: Vec<GeneratorRecord>,
    pub relations: Vec<String>,
    pub closed: bool,
    pub structure: StructureConstants,
    pub invariants: AlgebraInvariants,
    pub warnings: Vec<String>,
    pub conservative: bool,
}

impl fmt::Display for SymmetryBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} symmetry algebra, dimension {} ({})",
            self.side,
            self.dimension(),
            self.bounds
        )?;
        for (n, v) in self.names.iter().zip(&self.fields) {
            writeln!(f, "  {n} = {v}")?;
        }
        let rel = self.structure.relations();
        if rel.is_empty() {
            writeln!(f, "  all brackets vanish")?;
        }
        for r in rel {
            writeln!(f, "  {r}")?;
        }
        let inv = &self.invariants;
        writeln!(
            f,
            "  {}, dim {}, derived series {:?}, lower central series {:?}, center dim {}",
            if inv.abelian {
                "abelian"
            } else {
                "non-abelian"
            },
            inv.dimension,
            inv.derived_series,
            inv.lower_central_series,
            inv.center_dimension
        )?;
        if !self.structure.is_closed() {
            writeln!(f, "  warning: some brackets leave the span")?;
        }
        if self.conservative {
            writeln!(f, "  note: non-polynomial atoms split independently (solution set may be under-approximated)")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

fn default_names(side: Side, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{}{i}", side.prefix())).collect()
}

/// Solve the system, canonicalize, re-verify every generator and build the
/// commutator table. The span is re-solved with bounds raised by one; a
/// different dimension is reported as a warning.
pub fn solve_symmetries(
    system: &DeterminingSystem,
    bounds: AnsatzBounds,
    exec: Execution,
) -> Result<SymmetryBasis, SolveError> {
    let span = solve_span(system, bounds, exec)?;
    let fields = canonical_basis(&span.fields);
    let reports = par::map_slice(exec, &fields, |f| check_candidate(system, f));
    let names = default_names(system.side, fields.len());
    for (name, r) in names.iter().zip(reports) {
        let r = r?;
        if !r.symmetry {
            let residuals: Vec<String> = r
                .residuals
                .iter()
                .map(|x| format!("{}[{}] = {}", x.equation, x.monomial, x.expr))
                .collect();
            return Err(SolveError::Unsound {
                name: name.clone(),
                residuals: residuals.join("; "),
            });
        }
    }
    let mut warnings = Vec::new();
    let raised = bounds.raised();
    let wider = solve_span(system, raised, exec)?;
    if wider.fields.len() != fields.len() {
        warnings.push(format!(
            "dimension changes from {} to {} when bounds are raised to ({raised}); the ansatz may be too small",
            fields.len(),
            wider.fields.len()
        ));
    }
    let structure = commutator_table(&fields, &names, exec)?;
    let invariants = algebra_invariants(&structure)?;
    Ok(SymmetryBasis {
        side: system.side,
        bounds,
        fields,
        names,
        structure,
        invariants,
        warnings,
        conservative: span.conservative,
    })
}

/// Dimension of the polynomial solution space only (no verification).
pub fn solution_dimension(
    system: &DeterminingSystem,
    bounds: AnsatzBounds,
    exec: Execution,
) -> Result<usize, SolveError> {
    Ok(solve_span(system, bounds, exec)?.fields.len())
}

/// Sub-algebra of PDE generators with δ_x = 0, where φ = δ(t,x)y + β(t,x).
pub fn hat_filter(basis: &SymmetryBasis, exec: Execution) -> Result<SymmetryBasis, SolveError> {
    let mut delta_x = Vec::with_capacity(basis.fields.len());
    for (n, f) in basis.names.iter().zip(&basis.fields) {
        if !f.eta.diff_n("y", 2).is_zero() {
            return Err(SolveError::NotAffine(n.clone()));
        }
        delta_x.push(f.eta_slope().diff("x"));
    }
    if delta_x.iter().all(Expr::is_zero) {
        return Ok(basis.clone());
    }
    // coefficient vectors c with Σ c_i δ_x(w_i) = 0
    let monos: BTreeSet<&Monomial> = delta_x
        .iter()
        .flat_map(|d| d.terms().map(|(m, _)| m))
        .collect();
    let rows: Vec<Vec<Rational>> = monos
        .iter()
        .map(|m| {
            delta_x
                .iter()
                .map(|d| {
                    d.terms()
                        .find(|(k, _)| k == m)
                        .map(|(_, c)| c.clone())
                        .unwrap_or_else(Rational::zero)
                })
                .collect()
        })
        .collect();
    let kernel = linalg::rational_nullspace(&rows, basis.fields.len());
    let combos: Vec<VectorField> = kernel
        .iter()
        .map(|c| VectorField::combination(&basis.fields, c))
        .collect();
    let fields = canonical_basis(&combos);
    let names = (1..=fields.len())
        .map(|i| format!("{}hat{i}", basis.side.prefix()))
        .collect();
    basis.with_fields(fields, names, exec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    Equal,
    /// span(a) ⊊ span(b)
    StrictlyContained,
    /// span(b) ⊊ span(a)
    StrictlyContains,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub dim_a: usize,
    pub dim_b: usize,
    pub a_in_b: bool,
    pub b_in_a: bool,
    pub relation: Containment,
    /// Generators of a outside span(b), and vice versa.
    pub a_outside_b: Vec<String>,
    pub b_outside_a: Vec<String>,
}

impl fmt::Display for ContainmentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Containment::Equal => "equal",
            Containment::StrictlyContained => "strictly contained (a < b)",
            Containment::StrictlyContains => "strictly contains (a > b)",
            Containment::Incomparable => "incomparable",
        };
        write!(f, "dim {} vs dim {}: {rel}", self.dim_a, self.dim_b)?;
        if !self.a_outside_b.is_empty() {
            write!(f, "; outside second span: {}", self.a_outside_b.join(", "))?;
        }
        if !self.b_outside_a.is_empty() {
            write!(f, "; outside first span: {}", self.b_outside_a.join(", "))?;
        }
        Ok(())
    }
}

fn outside(a_names: &[String], a: &[VectorField], b: &[VectorField]) -> Vec<String> {
    a_names
        .iter()
        .zip(a)
        .filter(|(_, f)| express_in(b, f).is_none())
        .map(|(n, _)| n.clone())
        .collect()
}

pub fn compare_fields(
    a_names: &[String],
    a: &[VectorField],
    b_names: &[String],
    b: &[VectorField],
) -> ContainmentReport {
    let a_outside_b = outside(a_names, a, b);
    let b_outside_a = outside(b_names, b, a);
    let (a_in_b, b_in_a) = (a_outside_b.is_empty(), b_outside_a.is_empty());
    let relation = match (a_in_b, b_in_a) {
        (true, true) => Containment::Equal,
        (true, false) => Containment::StrictlyContained,
        (false, true) => Containment::StrictlyContains,
        (false, false) => Containment::Incomparable,
    };
    ContainmentReport {
        dim_a: a.len(),
        dim_b: b.len(),
        a_in_b,
        b_in_a,
        relation,
        a_outside_b,
        b_outside_a,
    }
}

/// Membership of each generator of one algebra in the span of the other.
pub fn compare_algebras(a: &SymmetryBasis, b: &SymmetryBasis) -> ContainmentReport {
    compare_fields(&a.names, &a.fields, &b.names, &b.fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determining::{fbsde_determining, pde_determining};
    use crate::expr::parse;

    fn heat(h: &str) -> ProblemSpec {
        ProblemSpec::heat(parse(h).unwrap())
    }

    #[test]
    fn ansatz_sizes() {
        let sys = fbsde_determining(&heat("x"));
        let a = build_ansatz(&sys, AnsatzBounds::new(2, 3));
        // tau 3, xi 12, lambda 3, mu 12
        assert_eq!(a.ncoef, 30);
    }

    #[test]
    fn heat_x_fbsde_dimension_four() {
        let spec = heat("x");
        let b = solve_symmetries(
            &fbsde_determining(&spec),
            AnsatzBounds::for_spec(&spec),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(b.dimension(), 4, "{b}");
        assert!(b.warnings.is_empty(), "{:?}", b.warnings);
        for f in [
            VectorField::parse("0", "0", "y - x").unwrap(),
            VectorField::parse("t", "1/2*x", "1/2*x").unwrap(),
            VectorField::parse("1", "0", "0").unwrap(),
            VectorField::parse("0", "1", "1").unwrap(),
        ] {
            assert!(express_in(&b.fields, &f).is_some(), "{f} not in span");
        }
    }

    #[test]
    fn hat_filter_recovers_fbsde_algebra() {
        let spec = heat("x");
        let exec = Execution::Sequential;
        let bounds = AnsatzBounds::for_spec(&spec);
        let fb = solve_symmetries(&fbsde_determining(&spec), bounds, exec).unwrap();
        let pde = solve_symmetries(&pde_determining(&spec).unwrap(), bounds, exec).unwrap();
        assert_eq!(pde.dimension(), 6);
        let rep = compare_algebras(&fb, &pde);
        assert_eq!(rep.relation, Containment::StrictlyContained);
        let hat = hat_filter(&pde, exec).unwrap();
        assert_eq!(compare_algebras(&fb, &hat).relation, Containment::Equal);
        assert!(hat.structure.is_closed());
        // idempotent on a basis that already satisfies δ_x = 0
        assert_eq!(hat_filter(&hat, exec).unwrap(), hat);
    }

    #[test]
    fn canonical_basis_is_span_invariant() {
        let a = VectorField::parse("t", "x", "y").unwrap();
        let b = VectorField::parse("1", "0", "x").unwrap();
        let one = canonical_basis(&[a.clone(), b.clone()]);
        let two = canonical_basis(&[a.add(&b), b.scale(&Rational::from_integer(3.into()))]);
        assert_eq!(one, two);
    }

    #[test]
    fn inhomogeneous_equation_rejected() {
        let mut sys = fbsde_determining(&heat("x"));
        sys.equations[0].expr = &sys.equations[0].expr + &Expr::one();
        assert!(matches!(
            solve_symmetries(&sys, AnsatzBounds::new(1, 1), Execution::Sequential),
            Err(SolveError::Inhomogeneous { .. })
        ));
    }
}
