use super::{q, rat, Atom, ElemFn, Expr, Monomial, Opaque, TermSink};

impl Expr {
    /// Exact partial derivative with respect to the variable `v`.
    ///
    /// Opaque symbols get the full chain rule: one derivative-marked copy per
    /// argument slot, times the derivative of that argument.
    pub fn diff(&self, v: &str) -> Expr {
        if !self.contains_var(v) {
            return Expr::zero();
        }
        let mut parts: Vec<Expr> = Vec::new();
        let mut sink = TermSink::default();
        for (m, c) in self.terms() {
            for (a, e) in m.factors() {
                let da = atom_diff(a, v);
                if da.is_zero() {
                    continue;
                }
                let mut rest = m.clone();
                rest.mul_atom(a.clone(), -1);
                let coeff = c * rat(e);
                if let Some(k) = da.as_constant() {
                    sink.push(rest, coeff * k);
                } else {
                    parts.push(&Expr::term(rest, coeff) * &da);
                }
            }
        }
        let mut out = sink.finish();
        for p in parts {
            out = &out + &p;
        }
        out
    }

    /// Repeated partial derivative, e.g. `diff_n("x", 2)`.
    pub fn diff_n(&self, v: &str, n: usize) -> Expr {
        (0..n).fold(self.clone(), |e, _| e.diff(v))
    }
}

fn atom_diff(a: &Atom, v: &str) -> Expr {
    match a {
        Atom::Var(w) => {
            if &**w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Atom::Func(f, arg) => {
            let inner = arg.diff(v);
            if inner.is_zero() {
                return inner;
            }
            let outer = match f {
                ElemFn::Exp => Expr::atom(a.clone()),
                ElemFn::Ln => arg.pow(-1).expect("ln argument is never zero"),
                ElemFn::Sin => Expr::atom(Atom::Func(ElemFn::Cos, arg.clone())),
                ElemFn::Cos => -Expr::atom(Atom::Func(ElemFn::Sin, arg.clone())),
                ElemFn::Sqrt => Expr::term(Monomial::from_factors([(a.clone(), -1)]), q(1, 2)),
            };
            &outer * &inner
        }
        Atom::Opaque(o) => {
            let mut out = Expr::zero();
            for (slot, arg) in o.args.iter().enumerate() {
                let inner = arg.diff(v);
                if inner.is_zero() {
                    continue;
                }
                let mut marks = o.marks.clone();
                marks[slot] += 1;
                let marked = Expr::atom(Atom::Opaque(Opaque {
                    name: o.name.clone(),
                    args: o.args.clone(),
                    marks,
                }));
                out = &out + &(&marked * &inner);
            }
            out
        }
        Atom::Sum(base) => base.diff(v),
        Atom::Surd(..) => Expr::zero(),
    }
}
