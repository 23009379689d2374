//! Randomized property suites shared by `tests/properties.rs` and the
//! acceptance harness. Each suite runs with a fixed RNG seed so failures
//! reproduce.

#![allow(dead_code)]

use fbsym::calculus::{bracket, VectorField};
use fbsym::expr::{parse, BinOp, Expr, Node, Rational};
use fbsym::linalg;
use fbsym::reductions::{build_rho, invert_rho};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const SUITES: [&str; 5] = [
    "normalization idempotence",
    "bracket antisymmetry/jacobi",
    "collect-reconstruction",
    "nullspace exactness",
    "rho round-trip",
];

fn rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

fn leaf(vars: &'static [&'static str]) -> impl Strategy<Value = Node> {
    prop_oneof![
        prop::sample::select(vars).prop_map(|v| Node::Ident(v.to_string())),
        rational().prop_map(Node::Num),
    ]
}

/// Trees over t, x, y, z with +, −, ×, small powers, division by non-zero
/// constants, and exp/sin of subtrees.
pub fn node() -> impl Strategy<Value = Node> {
    leaf(&["t", "x", "y", "z"]).prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::bin(BinOp::Add, a, b)),
            2 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::bin(BinOp::Sub, a, b)),
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::bin(BinOp::Mul, a, b)),
            1 => inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
            1 => (inner.clone(), 0i64..=3).prop_map(|(a, k)| Node::bin(BinOp::Pow, a, Node::Num(Rational::from_integer(k.into())))),
            1 => (inner.clone(), rational().prop_filter("non-zero", |q| *q != Rational::from_integer(0.into())))
                .prop_map(|(a, q)| Node::bin(BinOp::Div, a, Node::Num(q))),
            1 => (prop::sample::select(&["exp", "sin"][..]), inner).prop_map(|(f, a)| Node::Call(f.to_string(), vec![a])),
        ]
    })
}

/// Polynomial trees over the given variables.
pub fn poly(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    leaf(vars)
        .prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::bin(BinOp::Add, a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Node::bin(BinOp::Mul, a, b)),
            ]
        })
        .prop_map(|n| n.normalize().expect("polynomial trees normalize"))
}

/// Projectable fields τ(t)∂t + ξ(t,x)∂x + η(t,x,y)∂y.
pub fn field() -> impl Strategy<Value = VectorField> {
    (poly(&["t"]), poly(&["t", "x"]), poly(&["t", "x", "y"]))
        .prop_map(|(a, b, c)| VectorField::new(a, b, c).expect("projectable by construction"))
}

fn check_normalization(n: &Node) -> Result<(), TestCaseError> {
    let e = n
        .normalize()
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let again = e
        .to_node()
        .normalize()
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&again, &e, "normalize(normalize(n)) != normalize(n)");
    let reparsed = parse(&e.to_string())
        .map_err(|err| TestCaseError::fail(format!("`{e}` does not re-parse: {err}")))?;
    prop_assert_eq!(&reparsed, &e, "printed form does not round-trip");
    Ok(())
}

fn check_brackets(u: &VectorField, v: &VectorField, w: &VectorField) -> Result<(), TestCaseError> {
    prop_assert!(
        bracket(u, v).add(&bracket(v, u)).is_zero(),
        "[u,v] + [v,u] != 0"
    );
    prop_assert!(bracket(u, u).is_zero());
    let jacobi = bracket(u, &bracket(v, w))
        .add(&bracket(v, &bracket(w, u)))
        .add(&bracket(w, &bracket(u, v)));
    prop_assert!(jacobi.is_zero(), "Jacobi identity fails: {}", jacobi);
    Ok(())
}

fn check_collect(n: &Node) -> Result<(), TestCaseError> {
    let e = n
        .normalize()
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    for vars in [&["x"][..], &["y", "z"][..], &["t", "x", "y", "z"][..]] {
        let parts = e
            .collect(vars, false)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(Expr::uncollect(&parts, vars), e.clone());
        if let Ok(strict) = e.collect(vars, true) {
            for c in strict.values() {
                prop_assert!(
                    vars.iter().all(|v| !c.contains_var(v)),
                    "strict coefficient {} still holds a collect variable",
                    c
                );
            }
        }
    }
    Ok(())
}

fn matrix() -> impl Strategy<Value = (Vec<Vec<Rational>>, usize)> {
    (1usize..=6, 1usize..=7).prop_flat_map(|(r, c)| {
        let entry = prop_oneof![3 => Just(Rational::from_integer(0.into())), 4 => rational()];
        (
            prop::collection::vec(prop::collection::vec(entry, c), r),
            Just(c),
        )
    })
}

fn check_nullspace(m: &[Vec<Rational>], ncols: usize) -> Result<(), TestCaseError> {
    let kernel = linalg::rational_nullspace(m, ncols);
    for v in &kernel {
        prop_assert!(linalg::is_zero_vec(&linalg::mat_vec(m, v)), "M v != 0");
    }
    prop_assert_eq!(linalg::rank(m, ncols) + kernel.len(), ncols, "rank-nullity");
    prop_assert_eq!(
        linalg::rank(&kernel, ncols),
        kernel.len(),
        "kernel vectors dependent"
    );
    Ok(())
}

fn check_rho(a: i32, b: i32, p: f64) -> Result<(), TestCaseError> {
    let r = parse(&format!("{a}/8 + ({b}/8)*y")).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let map =
        build_rho(&r, (-1.5, 1.5), 64, 0.0).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let v = map
        .eval(p)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let back = invert_rho(&map, v).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(
        (back - p).abs() <= 1e-10 * (1.0 + v.abs()),
        "rho^-1(rho({})) = {}",
        p,
        back
    );
    let forward = map
        .eval(back)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!((forward - v).abs() <= 1e-10 * (1.0 + v.abs()));
    Ok(())
}

/// Run one suite for `cases` cases. Returns the failure message on error.
pub fn run_suite(name: &str, cases: u32) -> Result<(), String> {
    let seed: [u8; 32] = *b"fbsym-property-suites-fixed-seed";
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &seed),
    );
    match name {
        "normalization idempotence" => runner
            .run(&node(), |n| check_normalization(&n))
            .map_err(|e| e.to_string()),
        "bracket antisymmetry/jacobi" => runner
            .run(&(field(), field(), field()), |(u, v, w)| {
                check_brackets(&u, &v, &w)
            })
            .map_err(|e| e.to_string()),
        "collect-reconstruction" => runner
            .run(&node(), |n| check_collect(&n))
            .map_err(|e| e.to_string()),
        "nullspace exactness" => runner
            .run(&matrix(), |(m, c)| check_nullspace(&m, c))
            .map_err(|e| e.to_string()),
        "rho round-trip" => runner
            .run(&(-8i32..=8, -4i32..=4, -1.5f64..=1.5), |(a, b, p)| {
                check_rho(a, b, p)
            })
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown suite `{other}`")),
    }
}
