//! Operator-precedence parser producing a raw [`Node`] tree, and the
//! normalisation of that tree into an [`Expr`].

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{Atom, ElemFn, Expr, ExprError, Rational, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Un-normalised syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(Rational),
    Ident(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(String, Vec<Node>),
}

impl Node {
    pub fn bin(op: BinOp, a: Node, b: Node) -> Node {
        Node::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn normalize(&self) -> Result<Expr> {
        match self {
            Node::Num(q) => Ok(Expr::constant(q.clone())),
            Node::Ident(v) => Ok(Expr::var(v)),
            Node::Neg(a) => Ok(-a.normalize()?),
            Node::Bin(op, a, b) => {
                let a = a.normalize()?;
                let b = b.normalize()?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => a.checked_div(&b),
                    BinOp::Pow => match b.constant_value() {
                        Some(q) => a.pow_rational(&q),
                        None => Err(ExprError::UnsupportedPower(format!(
                            "symbolic exponent `{b}`"
                        ))),
                    },
                }
            }
            Node::Call(name, args) => {
                let args = args
                    .iter()
                    .map(Node::normalize)
                    .collect::<Result<Vec<_>>>()?;
                if let Some(f) = ElemFn::from_name(name) {
                    let [arg]: [Expr; 1] =
                        args.try_into().map_err(|a: Vec<Expr>| ExprError::Arity {
                            name: name.clone(),
                            expected: 1,
                            found: a.len(),
                            offset: 0,
                        })?;
                    return Expr::func(f, arg);
                }
                let (base, marks) = split_marks(name, args.len());
                match marks {
                    Some(m) => Ok(Expr::opaque_marked(base, args, m)),
                    None => Ok(Expr::opaque(name, args)),
                }
            }
        }
    }
}

/// `g__2_4` with arity 4 → ("g", [0,1,0,1]). Returns no marks when the name
/// has no valid derivative suffix.
fn split_marks(name: &str, arity: usize) -> (&str, Option<Vec<u32>>) {
    let Some(pos) = name.find("__") else {
        return (name, None);
    };
    let (base, suffix) = (&name[..pos], &name[pos + 2..]);
    if base.is_empty() || suffix.is_empty() {
        return (name, None);
    }
    let mut marks = vec![0u32; arity];
    for part in suffix.split('_') {
        match part.parse::<usize>() {
            Ok(slot) if slot >= 1 && slot <= arity => marks[slot - 1] += 1,
            _ => return (name, None),
        }
    }
    (base, Some(marks))
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(q) if q.is_negative() => write!(f, "({q})"),
            Node::Num(q) => write!(f, "{q}"),
            Node::Ident(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Expr {
    /// Rebuild a syntax tree whose normalisation is `self`.
    pub fn to_node(&self) -> Node {
        let mut out: Option<Node> = None;
        for (m, c) in self.terms() {
            let mut factors: Vec<Node> = Vec::new();
            if !c.is_one() || m.is_one() {
                factors.push(Node::Num(c.clone()));
            }
            for (a, e) in m.factors() {
                let base = atom_node(a);
                factors.push(if e == 1 {
                    base
                } else {
                    Node::bin(
                        BinOp::Pow,
                        base,
                        Node::Num(Rational::from_integer(e.into())),
                    )
                });
            }
            let term = factors
                .into_iter()
                .reduce(|a, b| Node::bin(BinOp::Mul, a, b))
                .unwrap();
            out = Some(match out {
                None => term,
                Some(acc) => Node::bin(BinOp::Add, acc, term),
            });
        }
        out.unwrap_or_else(|| Node::Num(Rational::zero()))
    }
}

fn atom_node(a: &Atom) -> Node {
    match a {
        Atom::Var(v) => Node::Ident(v.to_string()),
        Atom::Func(f, e) => Node::Call(f.name().into(), vec![e.to_node()]),
        Atom::Opaque(o) => Node::Call(o.full_name(), o.args.iter().map(Expr::to_node).collect()),
        Atom::Sum(e) => e.to_node(),
        Atom::Surd(b, p) => Node::bin(BinOp::Pow, Node::Num(b.clone()), Node::Num(p.clone())),
    }
}

/// Parser configuration.
///
/// In permissive mode (the default) any unknown function name becomes an
/// opaque symbol, with its arity fixed by first use. In strict mode only the
/// elementary functions and the declared opaque symbols are accepted.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub strict: bool,
    pub opaque: BTreeMap<String, usize>,
}

impl ParseOptions {
    pub fn strict() -> Self {
        ParseOptions {
            strict: true,
            opaque: BTreeMap::new(),
        }
    }

    pub fn declare(mut self, name: &str, arity: usize) -> Self {
        self.opaque.insert(name.to_string(), arity);
        self
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    parse_with(text, &ParseOptions::default())
}

pub fn parse_with(text: &str, opts: &ParseOptions) -> Result<Expr> {
    Node::parse(text, opts)?.normalize().map_err(|e| match e {
        // attach a location to arity errors raised during normalisation
        ExprError::Arity {
            name,
            expected,
            found,
            ..
        } => {
            let offset = text.find(&format!("{name}(")).unwrap_or(0);
            ExprError::Arity {
                name,
                expected,
                found,
                offset,
            }
        }
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()))
        {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_part = &text[start..i];
            let mut value = if int_part.is_empty() {
                Rational::zero()
            } else {
                Rational::from_integer(int_part.parse::<BigInt>().unwrap())
            };
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let fs = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let frac = &text[fs..i];
                if !frac.is_empty() {
                    let num: BigInt = frac.parse().unwrap();
                    let den = num_traits::pow::pow(BigInt::from(10), frac.len());
                    value += Rational::new(num, den);
                }
            }
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(ExprError::Syntax {
                    offset: i,
                    message: "identifier cannot start with a digit".into(),
                });
            }
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    opts: &'a ParseOptions,
    seen_arity: BTreeMap<String, usize>,
}

impl Node {
    pub fn parse(text: &str, opts: &ParseOptions) -> Result<Node> {
        let mut p = Parser {
            toks: lex(text)?,
            pos: 0,
            opts,
            seen_arity: BTreeMap::new(),
        };
        let node = p.expr()?;
        match p.peek() {
            (Tok::End, _) => Ok(node),
            (t, off) => Err(ExprError::Syntax {
                offset: *off,
                message: format!("unexpected {}", describe(t)),
            }),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(q) => format!("number `{q}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("operator `{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let (t, off) = self.bump();
        if t == want {
            Ok(())
        } else {
            Err(ExprError::Syntax {
                offset: off,
                message: format!("expected {}, found {}", describe(&want), describe(&t)),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek().0 {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peek().0 == Tok::Op('^') {
            self.bump();
            // right-associative, and the exponent may carry a unary sign
            let exp = self.unary()?;
            return Ok(Node::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(q) => Ok(Node::Num(q)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().0 != Tok::LParen {
                    return Ok(Node::Ident(name));
                }
                self.bump();
                let mut args = Vec::new();
                if self.peek().0 != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if self.peek().0 == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                self.check_call(&name, args.len(), off)?;
                Ok(Node::Call(name, args))
            }
            t => Err(ExprError::Syntax {
                offset: off,
                message: format!("expected an operand, found {}", describe(&t)),
            }),
        }
    }

    fn check_call(&mut self, name: &str, found: usize, offset: usize) -> Result<()> {
        if ElemFn::from_name(name).is_some() {
            return if found == 1 {
                Ok(())
            } else {
                Err(ExprError::Arity {
                    name: name.into(),
                    expected: 1,
                    found,
                    offset,
                })
            };
        }
        let (base, marks) = split_marks(name, found);
        let key = if marks.is_some() { base } else { name };
        if let Some(&expected) = self.opts.opaque.get(key) {
            return if expected == found {
                Ok(())
            } else {
                Err(ExprError::Arity {
                    name: key.into(),
                    expected,
                    found,
                    offset,
                })
            };
        }
        if self.opts.strict {
            return Err(ExprError::UnknownFunction {
                name: name.into(),
                offset,
            });
        }
        match self.seen_arity.get(key) {
            Some(&expected) if expected != found => Err(ExprError::Arity {
                name: key.into(),
                expected,
                found,
                offset,
            }),
            _ => {
                self.seen_arity.insert(key.to_string(), found);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{q, Atom};

    #[test]
    fn grammar_examples() {
        let e = parse("x^2 + 2*x*t").unwrap();
        assert_eq!(e.num_terms(), 2);
        assert!(e.terms().all(|(m, _)| m.factors().count() >= 1));

        let g = parse("g(t,x,y,sigma(t,x)*u_x)").unwrap();
        match g.as_atom() {
            Some(Atom::Opaque(o)) => {
                assert_eq!(&*o.name, "g");
                assert_eq!(o.args.len(), 4);
                assert_eq!(o.args[3], parse("u_x*sigma(t,x)").unwrap());
            }
            other => panic!("expected opaque atom, got {other:?}"),
        }

        let d = parse("1/2*sigma(t,x)^2").unwrap();
        assert_eq!(d.num_terms(), 1);
        let (m, c) = d.terms().next().unwrap();
        assert_eq!(*c, q(1, 2));
        let (a, e) = m.factors().next().unwrap();
        assert!(matches!(a, Atom::Opaque(o) if &*o.name == "sigma"));
        assert_eq!(e, 2);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("2^3^2").unwrap(), Expr::int(512));
        assert_eq!(parse("-2^2").unwrap(), Expr::int(-4));
        assert_eq!(parse("x^-1").unwrap(), parse("1/x").unwrap());
        assert_eq!(parse("1 - 2 - 3").unwrap(), Expr::int(-4));
        assert_eq!(parse("8/4/2").unwrap(), Expr::int(1));
        assert_eq!(parse("0.25").unwrap(), Expr::ratio(1, 4));
        assert_eq!(parse(" 3 /  6 ").unwrap(), Expr::ratio(1, 2));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            parse("x + * y"),
            Err(ExprError::Syntax {
                offset: 4,
                message: "expected an operand, found operator `*`".into()
            })
        );
        assert!(matches!(
            parse("(x + 1"),
            Err(ExprError::Syntax { offset: 6, .. })
        ));
        assert!(matches!(
            parse("x $ y"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse("x y"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn strict_mode_rejects_unknown_and_bad_arity() {
        let opts = ParseOptions::strict().declare("g", 4);
        assert!(parse_with("g(t,x,y,z) + exp(x)", &opts).is_ok());
        assert_eq!(
            parse_with("1 + h(x)", &opts),
            Err(ExprError::UnknownFunction {
                name: "h".into(),
                offset: 4
            })
        );
        assert_eq!(
            parse_with("g(t,x)", &opts),
            Err(ExprError::Arity {
                name: "g".into(),
                expected: 4,
                found: 2,
                offset: 0
            })
        );
        assert!(matches!(
            parse("exp(x, y)"),
            Err(ExprError::Arity {
                expected: 1,
                found: 2,
                ..
            })
        ));
        assert!(matches!(
            parse("f(x) + f(x, y)"),
            Err(ExprError::Arity {
                expected: 1,
                found: 2,
                offset: 7,
                ..
            })
        ));
    }

    #[test]
    fn round_trip_print_parse() {
        for s in [
            "x^2 + 2*x*t",
            "exp(2*y)*sin(x)^(-1) - 3/7",
            "(x + 1)^(-2)*g(t, x)",
            "sqrt(x)*2^(1/2)",
            "g__1_2(t, x + y) - ln(x^2 + 1)",
        ] {
            let e = parse(s).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s}");
            assert_eq!(e.to_node().normalize().unwrap(), e);
        }
    }

    #[test]
    fn symbolic_exponent_is_rejected() {
        assert!(matches!(parse("x^y"), Err(ExprError::UnsupportedPower(_))));
        assert!(matches!(
            parse("x^(1/3)"),
            Err(ExprError::UnsupportedPower(_))
        ));
        assert_eq!(parse("x^(3/2)").unwrap(), parse("sqrt(x)^3").unwrap());
    }
}
