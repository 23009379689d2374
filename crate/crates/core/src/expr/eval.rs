use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::ToPrimitive;

use super::{Atom, ElemFn, Expr, ExprError, Rational, Result};

/// Numeric definition of an opaque symbol (or one of its derivatives).
pub type NumericFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Variable values plus numeric definitions for opaque symbols. Derivative
/// marked symbols are looked up by their full name, e.g. `g__2`.
#[derive(Clone, Default)]
pub struct VarEnv {
    vars: BTreeMap<String, f64>,
    funcs: BTreeMap<String, NumericFn>,
}

impl std::fmt::Debug for VarEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VarEnv")
            .field("vars", &self.vars)
            .field("funcs", &self.funcs.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl VarEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.vars.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.get(name).copied()
    }

    pub fn define(mut self, name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.funcs.insert(name.to_string(), Arc::new(f));
        self
    }

    pub fn function(&self, name: &str) -> Option<&NumericFn> {
        self.funcs.get(name)
    }
}

pub(crate) fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn checked_powi(base: f64, e: i64) -> Result<f64> {
    if base == 0.0 && e < 0 {
        return Err(ExprError::DivisionByZero);
    }
    Ok(base.powi(e as i32))
}

impl Expr {
    /// IEEE double evaluation.
    pub fn eval(&self, env: &VarEnv) -> Result<f64> {
        let mut total = 0.0;
        for (m, c) in self.terms() {
            let mut term = to_f64(c);
            for (a, e) in m.factors() {
                let v = eval_atom(a, env)?;
                term *= checked_powi(v, e)?;
            }
            total += term;
        }
        Ok(total)
    }

    /// Compile for fast repeated evaluation with positional variables.
    /// Variables not in `slots` are taken from `env` as constants.
    pub fn compile(&self, slots: &[&str], env: &VarEnv) -> Result<Compiled> {
        Ok(Compiled {
            code: compile_sum(self, slots, env)?,
        })
    }
}

fn eval_atom(a: &Atom, env: &VarEnv) -> Result<f64> {
    match a {
        Atom::Var(v) => env
            .get(v)
            .ok_or_else(|| ExprError::UnboundVariable(v.to_string())),
        Atom::Func(f, arg) => f.apply(arg.eval(env)?),
        Atom::Sum(base) => base.eval(env),
        Atom::Surd(b, p) => Ok(to_f64(b).powf(to_f64(p))),
        Atom::Opaque(o) => {
            let name = o.full_name();
            let f = env
                .function(&name)
                .ok_or(ExprError::UnboundFunction(name))?;
            let args = o
                .args
                .iter()
                .map(|x| x.eval(env))
                .collect::<Result<Vec<_>>>()?;
            Ok(f(&args))
        }
    }
}

/// Compiled expression; evaluate with [`Compiled::eval`].
#[derive(Clone)]
pub struct Compiled {
    code: Code,
}

#[derive(Clone)]
enum Code {
    Const(f64),
    Sum(Vec<(f64, Vec<(Code, i32)>)>),
    Slot(usize),
    Func(ElemFn, Box<Code>),
    Call(NumericFn, Vec<Code>),
}

fn compile_sum(e: &Expr, slots: &[&str], env: &VarEnv) -> Result<Code> {
    if let Some(c) = e.constant_value() {
        return Ok(Code::Const(to_f64(&c)));
    }
    let mut terms = Vec::with_capacity(e.num_terms());
    for (m, c) in e.terms() {
        let mut coeff = to_f64(c);
        let mut factors = Vec::new();
        for (a, k) in m.factors() {
            match compile_atom(a, slots, env)? {
                Code::Const(v) => coeff *= checked_powi(v, k)?,
                code => factors.push((code, k as i32)),
            }
        }
        terms.push((coeff, factors));
    }
    Ok(Code::Sum(terms))
}

fn compile_atom(a: &Atom, slots: &[&str], env: &VarEnv) -> Result<Code> {
    match a {
        Atom::Var(v) => match slots.iter().position(|s| **s == **v) {
            Some(i) => Ok(Code::Slot(i)),
            None => env
                .get(v)
                .map(Code::Const)
                .ok_or_else(|| ExprError::UnboundVariable(v.to_string())),
        },
        Atom::Func(f, arg) => Ok(Code::Func(*f, Box::new(compile_sum(arg, slots, env)?))),
        Atom::Sum(base) => compile_sum(base, slots, env),
        Atom::Surd(b, p) => Ok(Code::Const(to_f64(b).powf(to_f64(p)))),
        Atom::Opaque(o) => {
            let name = o.full_name();
            let f = env
                .function(&name)
                .ok_or(ExprError::UnboundFunction(name))?
                .clone();
            let args = o
                .args
                .iter()
                .map(|x| compile_sum(x, slots, env))
                .collect::<Result<Vec<_>>>()?;
            Ok(Code::Call(f, args))
        }
    }
}

impl Code {
    fn run(&self, x: &[f64]) -> Result<f64> {
        match self {
            Code::Const(c) => Ok(*c),
            Code::Slot(i) => Ok(x[*i]),
            Code::Sum(terms) => {
                let mut total = 0.0;
                for (c, factors) in terms {
                    let mut t = *c;
                    for (code, k) in factors {
                        let v = code.run(x)?;
                        t *= match *k {
                            1 => v,
                            2 => v * v,
                            k if k < 0 && v == 0.0 => return Err(ExprError::DivisionByZero),
                            k => v.powi(k),
                        };
                    }
                    total += t;
                }
                Ok(total)
            }
            Code::Func(f, arg) => f.apply(arg.run(x)?),
            Code::Call(f, args) => {
                let vals = args.iter().map(|a| a.run(x)).collect::<Result<Vec<_>>>()?;
                Ok(f(&vals))
            }
        }
    }
}

impl Compiled {
    pub fn eval(&self, args: &[f64]) -> Result<f64> {
        self.code.run(args)
    }

    pub fn constant(c: f64) -> Self {
        Compiled {
            code: Code::Const(c),
        }
    }
}
