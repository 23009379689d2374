use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Expr, ExprError, Result};

/// Right-hand side of a substitution.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    /// Replaces a variable, or an opaque symbol regardless of its arguments.
    Value(Expr),
    /// Replaces `name(a1, …, an)` by `body[params := a]`; derivative marks on
    /// the symbol are honoured by differentiating `body` first.
    Function { params: Vec<String>, body: Expr },
}

/// Simultaneous substitution map keyed by variable or function name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, Binding>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&mut self, name: &str, e: Expr) -> &mut Self {
        self.0.insert(name.to_string(), Binding::Value(e));
        self
    }

    pub fn function(&mut self, name: &str, params: &[&str], body: Expr) -> &mut Self {
        let params = params.iter().map(|p| p.to_string()).collect();
        self.0
            .insert(name.to_string(), Binding::Function { params, body });
        self
    }

    pub fn with_value(mut self, name: &str, e: Expr) -> Self {
        self.value(name, e);
        self
    }

    pub fn with_function(mut self, name: &str, params: &[&str], body: Expr) -> Self {
        self.function(name, params, body);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Binding> {
        self.0.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Names each binding's right-hand side refers to, restricted to bound names.
    fn dependencies(&self) -> BTreeMap<&str, BTreeSet<String>> {
        self.0
            .iter()
            .map(|(k, b)| {
                let (rhs, params): (&Expr, &[String]) = match b {
                    Binding::Value(e) => (e, &[]),
                    Binding::Function { params, body } => (body, params),
                };
                let mut refs: BTreeSet<String> = rhs.free_vars();
                refs.extend(rhs.opaque_names());
                refs.retain(|r| self.0.contains_key(r) && !params.contains(r));
                (k.as_str(), refs)
            })
            .collect()
    }

    /// Error if the dependency graph between bindings has a cycle (a binding
    /// mentioning its own name counts).
    pub fn check_acyclic(&self) -> Result<()> {
        let deps = self.dependencies();
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit<'a>(
            n: &'a str,
            deps: &'a BTreeMap<&'a str, BTreeSet<String>>,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Result<()> {
            match marks.get(n) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Active) => return Err(ExprError::CyclicBinding(n.to_string())),
                None => {}
            }
            marks.insert(n, Mark::Active);
            if let Some(next) = deps.get(n) {
                for m in next {
                    let key = deps.get_key_value(m.as_str()).map(|(k, _)| *k).unwrap();
                    visit(key, deps, marks)?;
                }
            }
            marks.insert(n, Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for k in deps.keys() {
            visit(k, &deps, &mut marks)?;
        }
        Ok(())
    }
}

impl Expr {
    /// Simultaneous substitution followed by normalisation.
    pub fn substitute(&self, b: &Bindings) -> Result<Expr> {
        b.check_acyclic()?;
        self.substitute_unchecked(b)
    }

    pub(crate) fn substitute_unchecked(&self, b: &Bindings) -> Result<Expr> {
        if b.is_empty() {
            return Ok(self.clone());
        }
        let mut acc = Expr::zero();
        for (m, c) in self.terms() {
            let mut term = Expr::constant(c.clone());
            for (a, e) in m.factors() {
                let r = subst_atom(a, b)?;
                term = &term * &r.pow(e)?;
                if term.is_zero() {
                    break;
                }
            }
            acc = &acc + &term;
        }
        Ok(acc)
    }
}

fn subst_atom(a: &Atom, b: &Bindings) -> Result<Expr> {
    match a {
        Atom::Var(v) => Ok(match b.get(v) {
            Some(Binding::Value(e)) => e.clone(),
            Some(Binding::Function { params, body }) if params.is_empty() => body.clone(),
            _ => Expr::atom(a.clone()),
        }),
        Atom::Func(f, arg) => Expr::func(*f, arg.substitute_unchecked(b)?),
        Atom::Sum(base) => base.substitute_unchecked(b),
        Atom::Surd(..) => Ok(Expr::atom(a.clone())),
        Atom::Opaque(o) => {
            let args = o
                .args
                .iter()
                .map(|x| x.substitute_unchecked(b))
                .collect::<Result<Vec<_>>>()?;
            match b.get(&o.name) {
                None => Ok(Expr::opaque_marked(&o.name, args, o.marks.clone())),
                Some(Binding::Value(v)) => Ok(if o.is_marked() {
                    Expr::zero()
                } else {
                    v.clone()
                }),
                Some(Binding::Function { params, body }) => {
                    if params.is_empty() {
                        return Ok(if o.is_marked() {
                            Expr::zero()
                        } else {
                            body.clone()
                        });
                    }
                    if params.len() != args.len() {
                        return Err(ExprError::Arity {
                            name: o.name.to_string(),
                            expected: params.len(),
                            found: args.len(),
                            offset: 0,
                        });
                    }
                    let mut d = body.clone();
                    for (slot, &k) in o.marks.iter().enumerate() {
                        d = d.diff_n(&params[slot], k as usize);
                    }
                    let identity = params
                        .iter()
                        .zip(&args)
                        .all(|(p, a)| a.as_var() == Some(p.as_str()));
                    if identity {
                        return Ok(d);
                    }
                    let mut inner = Bindings::new();
                    for (p, a) in params.iter().zip(args) {
                        inner.value(p, a);
                    }
                    d.substitute_unchecked(&inner)
                }
            }
        }
    }
}
