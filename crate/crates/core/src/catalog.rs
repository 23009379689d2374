//! Published generator bases for the heat problem with H = xⁿ, and span
//! alignment of solver output onto them.
//!
//! The reference lists are data, not truth: alignment only renames when the
//! spans coincide, and reports generators that fall outside otherwise.

use serde::Serialize;

use crate::ansatz::{compare_fields, ContainmentReport, SolveError, SymmetryBasis};
use crate::calculus::VectorField;
use crate::determining::Side;
use crate::expr::{Expr, Monomial, Rational};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub side: Side,
    pub names: Vec<String>,
    pub fields: Vec<VectorField>,
}

fn vf(t: &str, x: &str, y: &str) -> VectorField {
    VectorField::parse(t, x, y).expect("catalog fields parse")
}

/// n for H = xⁿ with n ≥ 1, otherwise `None`.
pub fn monomial_power(h: &Expr) -> Option<u32> {
    let mut terms = h.terms();
    let (m, c) = terms.next()?;
    if terms.next().is_some() || *c != Rational::from_integer(1.into()) {
        return None;
    }
    let n = m.degree_in("x");
    (n >= 1 && *m == Monomial::var_power("x", n)).then_some(n as u32)
}

/// Reference basis for b = 0, σ = 1, g = 0 and H = xⁿ.
pub fn heat_reference(side: Side, h: &Expr) -> Option<Reference> {
    let n = monomial_power(h)?;
    let half_n = format!("{n}/2*y");
    let fields = match (side, n) {
        (Side::Fbsde, 1) => vec![
            vf("0", "0", "y - x"),
            vf("t", "1/2*x", "1/2*x"),
            vf("1", "0", "0"),
            vf("0", "1", "1"),
        ],
        (Side::Pde, 1) => vec![
            vf("1/2*t^2", "1/2*t*x", "(1/4*x^2 - 1/4*t)*(y - x) + 1/2*t*x"),
            vf("t", "1/2*x", "1/2*x - 1/4*(y - x)"),
            vf("1", "0", "0"),
            vf("0", "t", "x*(y - x) + t"),
            vf("0", "1", "1"),
            vf("0", "0", "y - x"),
        ],
        (_, 2) => vec![
            vf("t", "1/2*x", "y"),
            vf("1", "0", "0"),
            vf("0", "1", "2*x"),
        ],
        (Side::Fbsde, _) => vec![vf("t", "1/2*x", &half_n), vf("1", "0", "0")],
        (Side::Pde, _) => vec![
            vf("t", "1/2*x", &half_n),
            vf("1", "0", "0"),
            vf("0", "1", &format!("{n}*x^{}", n - 1)),
        ],
    };
    let names = (1..=fields.len())
        .map(|i| format!("{}{i}", side.prefix()))
        .collect();
    Some(Reference {
        side,
        names,
        fields,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Reference (a) against the computed basis (b).
    pub report: ContainmentReport,
    /// The computed algebra expressed in the reference generators, when the
    /// spans coincide.
    pub aligned: Option<SymmetryBasis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentSummary {
    pub matched: bool,
    pub report: ContainmentReport,
}

impl Alignment {
    pub fn summary(&self) -> AlignmentSummary {
        AlignmentSummary {
            matched: self.aligned.is_some(),
            report: self.report.clone(),
        }
    }
}

pub fn align(
    basis: &SymmetryBasis,
    reference: &Reference,
    exec: Execution,
) -> Result<Alignment, SolveError> {
    let report = compare_fields(
        &reference.names,
        &reference.fields,
        &basis.names,
        &basis.fields,
    );
    let aligned = if report.a_in_b && report.b_in_a && reference.fields.len() == basis.fields.len()
    {
        Some(basis.with_fields(reference.fields.clone(), reference.names.clone(), exec)?)
    } else {
        None
    };
    Ok(Alignment { report, aligned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{bracket, rank_of};
    use crate::expr::parse;

    #[test]
    fn power_recognition() {
        assert_eq!(monomial_power(&parse("x").unwrap()), Some(1));
        assert_eq!(monomial_power(&parse("x^4").unwrap()), Some(4));
        assert_eq!(monomial_power(&parse("2*x^4").unwrap()), None);
        assert_eq!(monomial_power(&parse("x + 1").unwrap()), None);
        assert_eq!(monomial_power(&parse("1").unwrap()), None);
    }

    #[test]
    fn references_are_independent() {
        for side in [Side::Fbsde, Side::Pde] {
            for n in 1..=5 {
                let r = heat_reference(side, &parse(&format!("x^{n}")).unwrap()).unwrap();
                assert_eq!(rank_of(&r.fields), r.fields.len());
            }
        }
    }

    #[test]
    fn pde_reference_table_for_linear_terminal() {
        let r = heat_reference(Side::Pde, &parse("x").unwrap()).unwrap();
        let w = &r.fields;
        let br = |i: usize, j: usize| bracket(&w[i - 1], &w[j - 1]);
        assert_eq!(br(1, 2), w[0].scale(&-Rational::from_integer(1.into())));
        assert_eq!(br(3, 4), w[4]);
        assert_eq!(br(2, 4), w[3].scale(&crate::expr::q(1, 2)));
    }
}
