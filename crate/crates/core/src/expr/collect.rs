use std::collections::BTreeMap;

use num_traits::One;

use super::{Atom, Expr, ExprError, Monomial, Result};

/// Exponent vector aligned with the variable list passed to [`Expr::collect`].
pub type Exponents = Vec<u32>;

impl Expr {
    /// Split into `Σ vars^k · coeff(k)`.
    ///
    /// Negative powers of a collect variable are always an error. With
    /// `strict`, so is any collect variable hidden inside a function argument;
    /// without it such atoms are kept in the coefficient.
    pub fn collect(&self, vars: &[&str], strict: bool) -> Result<BTreeMap<Exponents, Expr>> {
        let mut parts: BTreeMap<Exponents, Vec<(Monomial, super::Rational)>> = BTreeMap::new();
        for (m, c) in self.terms() {
            let mut key = vec![0u32; vars.len()];
            let mut rest = Monomial::one();
            for (a, e) in m.factors() {
                if let Atom::Var(v) = a {
                    if let Some(i) = vars.iter().position(|w| **w == **v) {
                        if e < 0 {
                            return Err(ExprError::NonPolynomial {
                                var: v.to_string(),
                                context: format!("negative power in `{m}`"),
                            });
                        }
                        key[i] = e as u32;
                        continue;
                    }
                } else if strict {
                    if let Some(v) = vars.iter().find(|v| a.contains_var(v)) {
                        return Err(ExprError::NonPolynomial {
                            var: v.to_string(),
                            context: format!("appears inside `{a}`"),
                        });
                    }
                }
                rest.mul_atom(a.clone(), e);
            }
            parts.entry(key).or_default().push((rest, c.clone()));
        }
        Ok(parts
            .into_iter()
            .map(|(k, ts)| (k, Expr::from_terms(ts)))
            .filter(|(_, e)| !e.is_zero())
            .collect())
    }

    /// Inverse of [`Expr::collect`].
    pub fn uncollect(parts: &BTreeMap<Exponents, Expr>, vars: &[&str]) -> Expr {
        parts
            .iter()
            .map(|(k, c)| {
                let m = Monomial::from_factors(
                    vars.iter()
                        .zip(k)
                        .map(|(v, &e)| (Atom::Var((*v).into()), e as i64)),
                );
                c * &Expr::term(m, super::Rational::one())
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn collects_quadratic_in_z() {
        let e = parse("a*z^2 + b*z + c").unwrap();
        let parts = e.collect(&["z"], true).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[&vec![2]], parse("a").unwrap());
        assert_eq!(parts[&vec![1]], parse("b").unwrap());
        assert_eq!(parts[&vec![0]], parse("c").unwrap());
    }

    #[test]
    fn collects_expanded_square() {
        let parts = parse("(x+1)^2").unwrap().collect(&["x"], true).unwrap();
        let want: BTreeMap<Exponents, Expr> = [
            (vec![2], Expr::int(1)),
            (vec![1], Expr::int(2)),
            (vec![0], Expr::int(1)),
        ]
        .into_iter()
        .collect();
        assert_eq!(parts, want);
    }

    #[test]
    fn strictness() {
        let e = parse("exp(z) + z").unwrap();
        assert!(matches!(
            e.collect(&["z"], true),
            Err(ExprError::NonPolynomial { .. })
        ));
        let loose = e.collect(&["z"], false).unwrap();
        assert_eq!(loose[&vec![0]], parse("exp(z)").unwrap());
        assert!(parse("z^(-1)").unwrap().collect(&["z"], false).is_err());
    }

    #[test]
    fn reconstruction() {
        let e = parse("x^2*y + 3*x*y^2*sin(t) - y + 7").unwrap();
        let parts = e.collect(&["x", "y"], true).unwrap();
        assert_eq!(Expr::uncollect(&parts, &["x", "y"]), e);
    }
}
