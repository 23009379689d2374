use std::fmt;

use num_traits::{One, Signed};

use super::{Atom, Expr, Monomial, Opaque};

impl fmt::Display for Opaque {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.full_name())?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(v) => write!(f, "{v}"),
            Atom::Func(func, a) => write!(f, "{}({a})", func.name()),
            Atom::Opaque(o) => write!(f, "{o}"),
            Atom::Sum(e) => write!(f, "({e})"),
            Atom::Surd(b, p) => write!(f, "({b})^({p})"),
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        for (i, (a, e)) in self.factors().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            match (a, e) {
                // a surd already prints as a power; wrap before raising again
                (Atom::Surd(..), 1) => write!(f, "{a}")?,
                (Atom::Surd(..), e) => write!(f, "({a})^({e})")?,
                (_, 1) => write!(f, "{a}")?,
                (_, e) if e < 0 => write!(f, "{a}^({e})")?,
                (_, e) => write!(f, "{a}^{e}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn prints_canonically() {
        let e = parse("2*x*t + x^2").unwrap();
        assert_eq!(e.to_string(), "2*t*x + x^2");
        assert_eq!(parse("-1/2*x^(-2)").unwrap().to_string(), "-1/2*x^(-2)");
        assert_eq!(
            parse("g(t, x)*2 - 3").unwrap().to_string(),
            "-3 + 2*g(t, x)"
        );
    }

    #[test]
    fn marked_opaque_round_trips() {
        let e = parse("g__2_4(t, x, y, z)").unwrap();
        assert_eq!(e.to_string(), "g__2_4(t, x, y, z)");
        let d = parse("g(t, x, y, z)").unwrap().diff("x");
        assert_eq!(d, parse("g__2(t, x, y, z)").unwrap());
    }
}
