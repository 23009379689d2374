//! Exact symbolic expressions.
//!
//! Every [`Expr`] is kept in one canonical shape: an expanded sum of
//! monomials with exact rational coefficients. Variables, elementary
//! function applications, opaque function symbols and reciprocals of
//! irreducible sums are the *atoms* of the monomials. Two expressions are
//! equal as values whenever their normal forms are equal as data, modulo the
//! usual non-polynomial identities (`sin^2 + cos^2`) which are not recognised.

mod collect;
mod diff;
mod eval;
mod parse;
mod print;
mod subst;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use collect::Exponents;
pub use eval::{Compiled, NumericFn, VarEnv};
pub use parse::{parse, parse_with, BinOp, Node, ParseOptions};
pub use subst::{Binding, Bindings};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("`{name}` expects {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unsupported power: {0}")]
    UnsupportedPower(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cyclic binding through `{0}`")]
    CyclicBinding(String),
    #[error("expression is not polynomial in `{var}`: {context}")]
    NonPolynomial { var: String, context: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("no numeric definition for function `{0}`")]
    UnboundFunction(String),
}

pub type Result<T, E = ExprError> = std::result::Result<T, E>;

/// Elementary functions known to the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElemFn {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl ElemFn {
    pub const ALL: [ElemFn; 5] = [
        ElemFn::Exp,
        ElemFn::Ln,
        ElemFn::Sin,
        ElemFn::Cos,
        ElemFn::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ElemFn::Exp => "exp",
            ElemFn::Ln => "ln",
            ElemFn::Sin => "sin",
            ElemFn::Cos => "cos",
            ElemFn::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ElemFn::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, v: f64) -> Result<f64> {
        match self {
            ElemFn::Exp => Ok(v.exp()),
            ElemFn::Ln if v <= 0.0 => Err(ExprError::Domain(format!("ln({v})"))),
            ElemFn::Ln => Ok(v.ln()),
            ElemFn::Sin => Ok(v.sin()),
            ElemFn::Cos => Ok(v.cos()),
            ElemFn::Sqrt if v < 0.0 => Err(ExprError::Domain(format!("sqrt({v})"))),
            ElemFn::Sqrt => Ok(v.sqrt()),
        }
    }
}

/// Application of an uninterpreted function, possibly differentiated.
///
/// `marks[i]` counts how often argument slot `i` was differentiated; the
/// order of differentiation is forgotten, which makes mixed partials commute
/// structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Opaque {
    pub name: Arc<str>,
    pub args: Vec<Expr>,
    pub marks: Vec<u32>,
}

impl Opaque {
    pub fn is_marked(&self) -> bool {
        self.marks.iter().any(|&m| m > 0)
    }

    /// Name including the derivative suffix, e.g. `g__2_4` for g differentiated
    /// in slots 2 and 4 (1-based). This is the key used for numeric lookup.
    pub fn full_name(&self) -> String {
        if !self.is_marked() {
            return self.name.to_string();
        }
        let mut s = format!("{}_", self.name);
        for (slot, &m) in self.marks.iter().enumerate() {
            for _ in 0..m {
                s.push('_');
                s.push_str(&(slot + 1).to_string());
            }
        }
        // "g__2_4": the first separator is a double underscore.
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(Arc<str>),
    Func(ElemFn, Expr),
    Opaque(Opaque),
    /// A primitive multi-term sum; only ever carried with negative exponent.
    Sum(Expr),
    /// `base^exp` for positive rational base and exponent in (0,1).
    Surd(Rational, Rational),
}

impl Atom {
    fn contains_var(&self, v: &str) -> bool {
        match self {
            Atom::Var(w) => &**w == v,
            Atom::Func(_, a) | Atom::Sum(a) => a.contains_var(v),
            Atom::Opaque(o) => o.args.iter().any(|a| a.contains_var(v)),
            Atom::Surd(..) => false,
        }
    }
}

/// Product of atoms with non-zero integer exponents.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(BTreeMap<Atom, i64>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = (&Atom, i64)> {
        self.0.iter().map(|(a, &e)| (a, e))
    }

    pub fn exponent(&self, a: &Atom) -> i64 {
        self.0.get(a).copied().unwrap_or(0)
    }

    pub fn var_power(name: &str, e: i64) -> Self {
        let mut m = BTreeMap::new();
        if e != 0 {
            m.insert(Atom::Var(name.into()), e);
        }
        Monomial(m)
    }

    pub fn from_factors(factors: impl IntoIterator<Item = (Atom, i64)>) -> Self {
        let mut m = Monomial::one();
        for (a, e) in factors {
            m.mul_atom(a, e);
        }
        m
    }

    fn mul_atom(&mut self, a: Atom, e: i64) {
        if e == 0 {
            return;
        }
        let slot = self.0.entry(a).or_insert(0);
        *slot += e;
        if *slot == 0 {
            self.0.retain(|_, e| *e != 0);
        }
    }

    pub fn degree_in(&self, v: &str) -> i64 {
        self.0
            .iter()
            .filter(|(a, _)| matches!(a, Atom::Var(w) if &**w == v))
            .map(|(_, &e)| e)
            .sum()
    }

    /// Total degree over plain variables.
    pub fn var_degree(&self) -> i64 {
        self.0
            .iter()
            .filter(|(a, _)| matches!(a, Atom::Var(_)))
            .map(|(_, &e)| e)
            .sum()
    }

    pub fn contains_var(&self, v: &str) -> bool {
        self.0.keys().any(|a| a.contains_var(v))
    }
}

/// Canonical expanded expression. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<BTreeMap<Monomial, Rational>>);

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn rat_pow(base: &Rational, n: i64) -> Rational {
    if n >= 0 {
        num_traits::pow::pow(base.clone(), n as usize)
    } else {
        num_traits::pow::pow(base.recip(), n.unsigned_abs() as usize)
    }
}

/// Accumulates terms, dropping zero coefficients.
#[derive(Default)]
struct TermSink(BTreeMap<Monomial, Rational>);

impl TermSink {
    fn push(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.0.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn push_expr(&mut self, e: &Expr, scale: &Rational) {
        for (m, c) in e.0.iter() {
            self.push(m.clone(), c * scale);
        }
    }

    fn finish(self) -> Expr {
        Expr(Arc::new(self.0))
    }
}

/// Folds every surd in `m` into canonical form, moving integer powers of the
/// base into the coefficient.
fn fold_surds(m: &mut Monomial, c: &mut Rational) {
    if !m.0.keys().any(|a| matches!(a, Atom::Surd(..))) {
        return;
    }
    let mut by_base: BTreeMap<Rational, Rational> = BTreeMap::new();
    m.0.retain(|a, e| match a {
        Atom::Surd(b, p) => {
            *by_base.entry(b.clone()).or_insert_with(Rational::zero) += p * rat(*e);
            false
        }
        _ => true,
    });
    for (base, total) in by_base {
        let whole = total.floor();
        let frac = &total - &whole;
        *c *= rat_pow(
            &base,
            whole.to_integer().to_i64().expect("surd exponent overflow"),
        );
        if !frac.is_zero() {
            m.0.insert(Atom::Surd(base, frac), 1);
        }
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let (small, large) = if a.0.len() <= b.0.len() {
        (a, b)
    } else {
        (b, a)
    };
    let mut out = large.clone();
    for (atom, &e) in small.0.iter() {
        out.mul_atom(atom.clone(), e);
    }
    out
}

/// Exact `base^exp` for rational `exp`, as an expression (possibly a surd).
fn rational_power(base: &Rational, exp: &Rational) -> Result<Expr> {
    if exp.is_integer() {
        let n = exp
            .to_integer()
            .to_i64()
            .ok_or_else(|| ExprError::UnsupportedPower("exponent too large".into()))?;
        if base.is_zero() && n < 0 {
            return Err(ExprError::DivisionByZero);
        }
        return Ok(Expr::constant(rat_pow(base, n)));
    }
    if base.is_zero() {
        return if exp.is_positive() {
            Ok(Expr::zero())
        } else {
            Err(ExprError::DivisionByZero)
        };
    }
    if base.is_negative() {
        return Err(ExprError::Domain(format!("({base})^({exp}) is not real")));
    }
    let q = exp
        .denom()
        .to_u32()
        .ok_or_else(|| ExprError::UnsupportedPower(format!("{exp}")))?;
    let p = exp
        .numer()
        .to_i64()
        .ok_or_else(|| ExprError::UnsupportedPower(format!("{exp}")))?;
    let exact_root = |n: &BigInt| {
        let r = n.nth_root(q);
        (num_traits::pow::pow(r.clone(), q as usize) == *n).then_some(r)
    };
    if let (Some(rn), Some(rd)) = (exact_root(base.numer()), exact_root(base.denom())) {
        return Ok(Expr::constant(rat_pow(&Rational::new(rn, rd), p)));
    }
    let mut m = Monomial::one();
    m.0.insert(Atom::Surd(base.clone(), exp.clone()), 1);
    let mut c = Rational::one();
    fold_surds(&mut m, &mut c);
    Ok(Expr::term(m, c))
}

impl Expr {
    pub fn zero() -> Self {
        Expr(Arc::new(BTreeMap::new()))
    }

    pub fn one() -> Self {
        Expr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Expr::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(rat(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Expr::constant(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(name: &str) -> Self {
        Expr::atom(Atom::Var(name.into()))
    }

    pub fn atom(a: Atom) -> Self {
        let mut m = Monomial::one();
        m.0.insert(a, 1);
        Expr::term(m, Rational::one())
    }

    /// A single term. Positive powers of `Sum` atoms are expanded.
    pub fn term(m: Monomial, c: Rational) -> Self {
        if c.is_zero() {
            return Expr::zero();
        }
        if m.0.iter().any(|(a, &e)| matches!(a, Atom::Sum(_)) && e > 0) {
            let mut rest = Monomial::one();
            let mut acc = Expr::constant(c);
            for (a, e) in m.0 {
                match a {
                    Atom::Sum(base) if e > 0 => acc = &acc * &base.pow_nonneg(e as u64),
                    other => rest.mul_atom(other, e),
                }
            }
            return &acc * &Expr::term(rest, Rational::one());
        }
        let mut map = BTreeMap::new();
        map.insert(m, c);
        Expr(Arc::new(map))
    }

    /// Uninterpreted function application `name(args…)`.
    pub fn opaque(name: &str, args: Vec<Expr>) -> Self {
        let marks = vec![0; args.len()];
        Expr::atom(Atom::Opaque(Opaque {
            name: name.into(),
            args,
            marks,
        }))
    }

    /// Derivative-marked opaque symbol; `marks[i]` = order in slot `i`.
    pub fn opaque_marked(name: &str, args: Vec<Expr>, marks: Vec<u32>) -> Self {
        assert_eq!(args.len(), marks.len(), "one mark per argument slot");
        Expr::atom(Atom::Opaque(Opaque {
            name: name.into(),
            args,
            marks,
        }))
    }

    /// Elementary function with exact evaluation of trivial constant cases.
    pub fn func(f: ElemFn, arg: Expr) -> Result<Self> {
        if let Some(c) = arg.as_constant() {
            match f {
                ElemFn::Exp | ElemFn::Cos if c.is_zero() => return Ok(Expr::one()),
                ElemFn::Sin if c.is_zero() => return Ok(Expr::zero()),
                ElemFn::Ln if c.is_one() => return Ok(Expr::zero()),
                ElemFn::Ln if !c.is_positive() => {
                    return Err(ExprError::Domain(format!("ln({c})")))
                }
                ElemFn::Sqrt => return rational_power(c, &Rational::new(1.into(), 2.into())),
                _ => {}
            }
        }
        Ok(Expr::atom(Atom::Func(f, arg)))
    }

    pub fn exp(arg: Expr) -> Self {
        Expr::func(ElemFn::Exp, arg).expect("exp is total")
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_constant(&self) -> Option<&Rational> {
        if self.0.is_empty() {
            return None;
        }
        match self.0.iter().next() {
            Some((m, c)) if self.0.len() == 1 && m.is_one() => Some(c),
            _ => None,
        }
    }

    /// Constant value, with zero included.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.is_zero() {
            Some(Rational::zero())
        } else {
            self.as_constant().cloned()
        }
    }

    /// The bare atom if this expression is exactly one atom to the first power.
    pub fn as_atom(&self) -> Option<&Atom> {
        if self.0.len() != 1 {
            return None;
        }
        let (m, c) = self.0.iter().next()?;
        if !c.is_one() || m.0.len() != 1 {
            return None;
        }
        let (a, &e) = m.0.iter().next()?;
        (e == 1).then_some(a)
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.as_atom() {
            Some(Atom::Var(v)) => Some(v),
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.0.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.0.len()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut acc = Expr::zero();
        for (m, c) in terms {
            acc = &acc + &Expr::term(m, c);
        }
        acc
    }

    pub fn contains_var(&self, v: &str) -> bool {
        self.0.keys().any(|m| m.contains_var(v))
    }

    /// Free variables, including those inside function arguments.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Var(v) = a {
                out.insert(v.to_string());
            }
        });
        out
    }

    /// Names of opaque symbols (without derivative suffix).
    pub fn opaque_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Opaque(o) = a {
                out.insert(o.name.to_string());
            }
        });
        out
    }

    /// True if some atom other than a plain variable appears (functions,
    /// opaque symbols, reciprocals, surds).
    pub fn has_non_polynomial_atoms(&self) -> bool {
        self.0.keys().any(|m| {
            m.0.iter()
                .any(|(a, &e)| !matches!(a, Atom::Var(_)) || e < 0)
        })
    }

    fn visit_atoms(&self, f: &mut dyn FnMut(&Atom)) {
        for m in self.0.keys() {
            for a in m.0.keys() {
                f(a);
                match a {
                    Atom::Func(_, e) | Atom::Sum(e) => e.visit_atoms(f),
                    Atom::Opaque(o) => o.args.iter().for_each(|e| e.visit_atoms(f)),
                    Atom::Var(_) | Atom::Surd(..) => {}
                }
            }
        }
    }

    pub fn scale(&self, k: &Rational) -> Expr {
        if k.is_zero() {
            return Expr::zero();
        }
        let mut sink = TermSink::default();
        sink.push_expr(self, k);
        sink.finish()
    }

    fn add_ref(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (big, small) = if self.0.len() >= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut sink = TermSink((*big.0).clone());
        for (m, c) in small.0.iter() {
            sink.push(m.clone(), c.clone());
        }
        sink.finish()
    }

    fn mul_ref(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        let mut sink = TermSink::default();
        for (ma, ca) in self.0.iter() {
            for (mb, cb) in other.0.iter() {
                let mut m = mul_monomials(ma, mb);
                let mut c = ca * cb;
                fold_surds(&mut m, &mut c);
                sink.push(m, c);
            }
        }
        sink.finish()
    }

    fn pow_nonneg(&self, mut n: u64) -> Expr {
        let mut base = self.clone();
        let mut acc = Expr::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Integer power. Negative powers of multi-term sums become `Sum` atoms
    /// after the monomial content and leading coefficient are split off.
    pub fn pow(&self, n: i64) -> Result<Expr> {
        if n >= 0 {
            return Ok(self.pow_nonneg(n as u64));
        }
        if self.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let k = n.unsigned_abs() as i64;
        if self.0.len() == 1 {
            let (m, c) = self.0.iter().next().unwrap();
            let inv = Monomial(m.0.iter().map(|(a, &e)| (a.clone(), -e * k)).collect());
            let mut c = rat_pow(c, -k);
            let mut inv = inv;
            fold_surds(&mut inv, &mut c);
            return Ok(Expr::term(inv, c));
        }
        // content: minimum exponent of every atom over all terms
        let mut content: BTreeMap<Atom, i64> = BTreeMap::new();
        let mut first = true;
        for m in self.0.keys() {
            if first {
                content = m.0.clone();
                first = false;
            } else {
                content.retain(|a, e| match m.0.get(a) {
                    Some(&f) => {
                        *e = (*e).min(f);
                        true
                    }
                    None => {
                        *e = (*e).min(0);
                        true
                    }
                });
            }
        }
        content.retain(|a, e| *e != 0 && !matches!(a, Atom::Surd(..)));
        let content = Monomial(content);
        let inv_content = Monomial(content.0.iter().map(|(a, &e)| (a.clone(), -e)).collect());
        let primitive = self * &Expr::term(inv_content, Rational::one());
        let lead = primitive.0.values().next().unwrap().clone();
        let normalized = primitive.scale(&lead.recip());
        let mut m = Monomial(
            content
                .0
                .iter()
                .map(|(a, &e)| (a.clone(), -e * k))
                .collect(),
        );
        if normalized.0.len() == 1 {
            // content removal can collapse e.g. surd-only sums; recurse on the single term
            return Ok(&normalized.pow(n)? * &Expr::term(m, rat_pow(&lead, -k)));
        }
        m.mul_atom(Atom::Sum(normalized), -k);
        Ok(Expr::term(m, rat_pow(&lead, -k)))
    }

    /// Rational power: integer exponents on anything; `k/2` on symbolic
    /// bases via `sqrt`; arbitrary rational exponents on numeric bases.
    pub fn pow_rational(&self, q: &Rational) -> Result<Expr> {
        if q.is_integer() {
            let n = q
                .to_integer()
                .to_i64()
                .ok_or_else(|| ExprError::UnsupportedPower(format!("{q}")))?;
            return self.pow(n);
        }
        if let Some(c) = self.constant_value() {
            return rational_power(&c, q);
        }
        if *q.denom() == BigInt::from(2) {
            let n = q
                .numer()
                .to_i64()
                .ok_or_else(|| ExprError::UnsupportedPower(format!("{q}")))?;
            return Expr::func(ElemFn::Sqrt, self.clone())?.pow(n);
        }
        Err(ExprError::UnsupportedPower(format!(
            "({self})^({q}) needs a numeric base"
        )))
    }

    pub fn checked_div(&self, other: &Expr) -> Result<Expr> {
        Ok(self * &other.pow(-1)?)
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> Rational {
        self.0
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Replace every plain variable named `from` by a variable named `to`.
    pub fn rename_var(&self, from: &str, to: &str) -> Expr {
        let mut b = Bindings::new();
        b.value(from, Expr::var(to));
        self.substitute_unchecked(&b).expect("renaming cannot fail")
    }
}

macro_rules! bin_op {
    ($tr:ident, $m:ident, $body:expr) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                std::ops::$tr::$m(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                std::ops::$tr::$m(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                std::ops::$tr::$m(self, &rhs)
            }
        }
    };
}

bin_op!(Add, add, |a, b| a.add_ref(b));
bin_op!(Sub, sub, |a, b| a.add_ref(&b.scale(&rat(-1))));
bin_op!(Mul, mul, |a, b| a.mul_ref(b));

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(&rat(-1))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        let mut sink = TermSink::default();
        let one = Rational::one();
        for e in iter {
            sink.push_expr(&e, &one);
        }
        sink.finish()
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(q: Rational) -> Self {
        Expr::constant(q)
    }
}

/// Nearest double to an exact rational.
pub fn eval_constant(q: &Rational) -> f64 {
    eval::to_f64(q)
}

/// Shorthand for `Rational::new(n, d)`.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}
