//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Tolerances are pinned below. The process exits 0 after printing the
//! summary so the rest of the workspace tests still run; set
//! `FBSYM_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

mod common;

use std::time::{Duration, Instant};

use fbsym::ansatz::{
    compare_algebras, hat_filter, solve_symmetries, AnsatzBounds, Containment, SymmetryBasis,
};
use fbsym::calculus::VectorField;
use fbsym::catalog::{align, heat_reference};
use fbsym::determining::{
    check_candidate, fbsde_determining, pde_determining, pde_determining_via_prolongation, Side,
};
use fbsym::expr::{parse, q, Rational};
use fbsym::numerics::{
    pde_residual, pushforward_and_residual, residual_floor, simulate_fbsde_residual,
    solve_pde_backward, time_change_check, CompiledProblem, FbsdeConfig, FlowSpec, GridSpec,
    TimeChangeConfig,
};
use fbsym::par::Execution;
use fbsym::problem::ProblemSpec;
use fbsym::reductions::{build_rho, decompose_linear_z, girsanov_reduce};

const EXEC: Execution = Execution::Parallel;

// pinned tolerances
const RHO_REL_TOL: f64 = 1e-8;
const RHO_ORDER_RATIO: f64 = 3.5;
const PUSHFORWARD_FACTOR: f64 = 10.0;
const PLANTED_FACTOR: f64 = 100.0;
const FLOW_EPS: f64 = 0.05;
const FLOW_STEPS: usize = 8;
const MC_SE: f64 = 4.0;
const TERMINAL_TOL: f64 = 1e-8;
const PROPERTY_CASES: u32 = 500;
const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Result<Outcome, String>;

fn heat(h: &str) -> ProblemSpec {
    ProblemSpec::heat(parse(h).unwrap())
}

fn solve(spec: &ProblemSpec, side: Side) -> Result<SymmetryBasis, String> {
    let sys = match side {
        Side::Fbsde => fbsde_determining(spec),
        Side::Pde => pde_determining(spec).map_err(|e| e.to_string())?,
    };
    solve_symmetries(&sys, AnsatzBounds::for_spec(spec), EXEC).map_err(|e| e.to_string())
}

/// Basis expressed in the published generators, or an explanation.
fn aligned(
    spec: &ProblemSpec,
    side: Side,
) -> Result<(SymmetryBasis, Option<SymmetryBasis>, String), String> {
    let basis = solve(spec, side)?;
    let reference = heat_reference(side, &spec.terminal).ok_or("no reference basis")?;
    let al = align(&basis, &reference, EXEC).map_err(|e| e.to_string())?;
    let report = al.report.to_string();
    Ok((basis, al.aligned, report))
}

/// Expected [e_i, e_j] as (i, j, [(k, coefficient)]), 1-based, i < j; all
/// other pairs must vanish.
fn table_matches(
    b: &SymmetryBasis,
    expected: &[(usize, usize, &[(usize, Rational)])],
) -> (bool, Vec<String>) {
    let n = b.dimension();
    let mut bad = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut want = vec![Rational::from_integer(0.into()); n];
            if let Some((_, _, e)) = expected.iter().find(|(a, c, _)| *a == i + 1 && *c == j + 1) {
                for (k, v) in e.iter() {
                    want[k - 1] = v.clone();
                }
            }
            if !b.structure.closed[i][j] || b.structure.c[i][j] != want {
                let got: Vec<String> = b.structure.c[i][j].iter().map(|v| v.to_string()).collect();
                bad.push(format!(
                    "[{},{}] = ({})",
                    b.names[i],
                    b.names[j],
                    got.join(", ")
                ));
            }
        }
    }
    (bad.is_empty(), bad)
}

fn c1_fbsde_linear() -> Result<Outcome, String> {
    let (basis, al, report) = aligned(&heat("x"), Side::Fbsde)?;
    let Some(al) = al else {
        return Ok(outcome(
            false,
            format!("span differs from reference: {report}"),
        ));
    };
    let abelian = al.invariants.abelian;
    let dim_ok = basis.dimension() == 4;
    let relations = al.structure.relations();
    Ok(outcome(
        dim_ok && abelian,
        format!(
            "dim {} (span equal to reference: yes); abelian: {abelian}; nonzero brackets in reference names: {}",
            basis.dimension(),
            if relations.is_empty() { "none".into() } else { relations.join(", ") }
        ),
    ))
}

fn c2_pde_linear_table() -> Result<Outcome, String> {
    let (basis, al, report) = aligned(&heat("x"), Side::Pde)?;
    let Some(al) = al else {
        return Ok(outcome(
            false,
            format!("span differs from reference: {report}"),
        ));
    };
    let one = || q(1, 1);
    let m1 = || q(-1, 1);
    let half = || q(1, 2);
    let mhalf = || q(-1, 2);
    let expected: Vec<(usize, usize, Vec<(usize, Rational)>)> = vec![
        (1, 2, vec![(1, m1())]),
        (1, 3, vec![(2, m1())]),
        (1, 5, vec![(4, mhalf())]),
        (2, 3, vec![(3, m1())]),
        (2, 4, vec![(4, half())]),
        (2, 5, vec![(5, mhalf())]),
        (3, 4, vec![(5, one())]),
        (4, 5, vec![(6, m1())]),
    ];
    let borrowed: Vec<(usize, usize, &[(usize, Rational)])> = expected
        .iter()
        .map(|(i, j, v)| (*i, *j, v.as_slice()))
        .collect();
    let (ok, bad) = table_matches(&al, &borrowed);
    Ok(outcome(
        basis.dimension() == 6 && ok,
        format!(
            "dim {}; 15 brackets checked; mismatches: {}",
            basis.dimension(),
            if bad.is_empty() {
                "none".into()
            } else {
                bad.join(", ")
            }
        ),
    ))
}

fn c3_containment() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for h in ["x", "x^2", "x^3", "x^4"] {
        let spec = heat(h);
        let f = solve(&spec, Side::Fbsde)?;
        let p = solve(&spec, Side::Pde)?;
        let contained = compare_algebras(&f, &p);
        let hat = hat_filter(&p, EXEC).map_err(|e| e.to_string())?;
        let hat_vs_f = compare_algebras(&hat, &f);
        let ok = contained.a_in_b && hat_vs_f.relation == Containment::Equal;
        pass &= ok;
        parts.push(format!(
            "H={h}: FBSDE {} / PDE {} / hat {} {}",
            f.dimension(),
            p.dimension(),
            hat.dimension(),
            if ok { "ok" } else { "BAD" }
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c4_quadratic() -> Result<Outcome, String> {
    let spec = heat("x^2");
    let f = solve(&spec, Side::Fbsde)?;
    let p = solve(&spec, Side::Pde)?;
    let eq = compare_algebras(&f, &p).relation == Containment::Equal;
    let (_, al, report) = aligned(&spec, Side::Fbsde)?;
    let Some(al) = al else {
        return Ok(outcome(
            false,
            format!("span differs from reference: {report}"),
        ));
    };
    let expected: Vec<(usize, usize, Vec<(usize, Rational)>)> =
        vec![(1, 2, vec![(2, q(-1, 1))]), (1, 3, vec![(3, q(-1, 2))])];
    let borrowed: Vec<(usize, usize, &[(usize, Rational)])> = expected
        .iter()
        .map(|(i, j, v)| (*i, *j, v.as_slice()))
        .collect();
    let (ok, bad) = table_matches(&al, &borrowed);
    Ok(outcome(
        f.dimension() == 3 && p.dimension() == 3 && eq && ok,
        format!(
            "dims {} / {}; equal: {eq}; table mismatches: {}",
            f.dimension(),
            p.dimension(),
            if bad.is_empty() {
                "none".into()
            } else {
                bad.join(", ")
            }
        ),
    ))
}

fn c5_higher_powers() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 3..=5 {
        let spec = heat(&format!("x^{n}"));
        let p = solve(&spec, Side::Pde)?;
        let (f, al, _) = aligned(&spec, Side::Fbsde)?;
        let table_ok = al.as_ref().is_some_and(|al| {
            let want = vec![(1usize, 2usize, vec![(2usize, q(-1, 1))])];
            let b: Vec<(usize, usize, &[(usize, Rational)])> = want
                .iter()
                .map(|(i, j, v)| (*i, *j, v.as_slice()))
                .collect();
            table_matches(al, &b).0
        });
        // the published third PDE generator, checked directly
        let w3 =
            VectorField::parse("0", "1", &format!("{n}*x^{}", n - 1)).map_err(|e| e.to_string())?;
        let sys = pde_determining(&spec).map_err(|e| e.to_string())?;
        let rep = check_candidate(&sys, &w3).map_err(|e| e.to_string())?;
        let ok = p.dimension() == 3 && f.dimension() == 2 && table_ok;
        pass &= ok;
        parts.push(format!(
            "n={n}: PDE dim {}, FBSDE dim {}, FBSDE table {}, published d/dx + {n}x^{}d/dy leaves {} residual(s)",
            p.dimension(),
            f.dimension(),
            if table_ok { "ok" } else { "BAD" },
            n - 1,
            rep.residuals.len()
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c6_oracle() -> Result<Outcome, String> {
    let corpus = [
        ("heat H=x", heat("x")),
        ("heat H=x^2", heat("x^2")),
        ("heat H=x^3", heat("x^3")),
        (
            "b=1 H=x^2",
            ProblemSpec::parse("1", "1", "0", "x^2", 1.0).unwrap(),
        ),
        (
            "sigma=2 H=x^2",
            ProblemSpec::parse("0", "2", "0", "x^2", 1.0).unwrap(),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec) in corpus {
        let bounds = AnsatzBounds::for_spec(&spec);
        let a = solve_symmetries(
            &pde_determining(&spec).map_err(|e| e.to_string())?,
            bounds,
            EXEC,
        )
        .map_err(|e| e.to_string())?;
        // the prolongation route does not assume φ affine in y
        let oracle_bounds = AnsatzBounds { deg_y: 2, ..bounds };
        let b = solve_symmetries(
            &pde_determining_via_prolongation(&spec).map_err(|e| e.to_string())?,
            oracle_bounds,
            EXEC,
        )
        .map_err(|e| e.to_string())?;
        let rel = compare_algebras(&a, &b).relation;
        let ok = rel == Containment::Equal;
        pass &= ok;
        parts.push(format!(
            "{name}: {} vs {} {}",
            a.dimension(),
            b.dimension(),
            if ok { "equal" } else { "DIFFER" }
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn c7_girsanov() -> Result<Outcome, String> {
    let spec =
        ProblemSpec::parse("0", "1", "q(t,x,y) + 2*z", "H(x)", 1.0).map_err(|e| e.to_string())?;
    let d = decompose_linear_z(&spec.g).map_err(|e| e.to_string())?;
    let red = girsanov_reduce(&spec, &d).map_err(|e| e.to_string())?;
    let same = red.spec.pde_expr() == spec.pde_expr();
    let z_free = !red.spec.g_depends_on_z();
    Ok(outcome(
        same && z_free,
        format!(
            "reduced b = {}, g = {}; PDE forms identical: {same}",
            red.spec.b, red.spec.g
        ),
    ))
}

fn c8_rho() -> Result<Outcome, String> {
    let r = parse("1/2").unwrap();
    let map = build_rho(&r, (-2.0, 2.0), 256, 0.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 0..=4000 {
        let p = -2.0 + 4.0 * k as f64 / 4000.0;
        let exact = p.exp_m1();
        if exact == 0.0 {
            continue;
        }
        let v = map.eval(p).map_err(|e| e.to_string())?;
        worst = worst.max(((v - exact) / exact).abs());
    }
    let coarse = build_rho(&r, (-2.0, 2.0), 128, 0.0)
        .map_err(|e| e.to_string())?
        .ode_residual();
    let fine = map.ode_residual();
    let ratio = coarse.max / fine.max;
    Ok(outcome(
        worst <= RHO_REL_TOL && ratio >= RHO_ORDER_RATIO,
        format!("max rel error {worst:.2e} (tol {RHO_REL_TOL:.0e}); ODE residual {:.3e} -> {:.3e}, ratio {ratio:.3} (min {RHO_ORDER_RATIO})", coarse.max, fine.max),
    ))
}

fn c9_pushforward() -> Result<Outcome, String> {
    let spec = heat("x");
    let (_, al, report) = aligned(&spec, Side::Pde)?;
    let Some(al) = al else {
        return Ok(outcome(
            false,
            format!("span differs from reference: {report}"),
        ));
    };
    let c = CompiledProblem::new(&spec).map_err(|e| e.to_string())?;
    let u = solve_pde_backward(&c, GridSpec::new(200, 400, (-6.0, 6.0)).unwrap())
        .map_err(|e| e.to_string())?;
    let measured = pde_residual(&u, &c).map_err(|e| e.to_string())?;
    let floor = residual_floor(&u, &c).map_err(|e| e.to_string())?;
    let baseline = measured.max(floor);
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (name, field) in al.names.iter().zip(&al.fields) {
        let fs = FlowSpec::new(field.clone(), FLOW_EPS, FLOW_STEPS).map_err(|e| e.to_string())?;
        let rep =
            pushforward_and_residual(&u, &fs, &c, EXEC).map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(rep.residual);
        pass &= rep.residual <= PUSHFORWARD_FACTOR * baseline;
    }
    // w4 without its "+ t" term
    let planted = VectorField::parse("0", "t", "x*(y - x)").unwrap();
    let fs = FlowSpec::new(planted, FLOW_EPS, FLOW_STEPS).map_err(|e| e.to_string())?;
    let rep = pushforward_and_residual(&u, &fs, &c, EXEC).map_err(|e| e.to_string())?;
    let detected = rep.residual > PLANTED_FACTOR * baseline;
    Ok(outcome(
        pass && detected,
        format!(
            "baseline {baseline:.2e} (measured {measured:.2e}, floor {floor:.2e}); worst generator residual {worst:.2e} (limit {:.2e}); planted non-symmetry {:.2e} (must exceed {:.2e})",
            PUSHFORWARD_FACTOR * baseline,
            rep.residual,
            PLANTED_FACTOR * baseline
        ),
    ))
}

fn c10_feynman_kac() -> Result<Outcome, String> {
    let spec = heat("x^2");
    let c = CompiledProblem::new(&spec).map_err(|e| e.to_string())?;
    let u = solve_pde_backward(&c, GridSpec::default()).map_err(|e| e.to_string())?;
    let cfg = FbsdeConfig {
        paths: 10_000,
        steps: 200,
        seed: SEED,
        x0: 0.0,
    };
    let st = simulate_fbsde_residual(&u, &c, cfg, EXEC).map_err(|e| e.to_string())?;
    let ok = st.max_z <= MC_SE && st.terminal_mismatch_max <= TERMINAL_TOL;
    Ok(outcome(
        ok,
        format!(
            "{}/{} steps within {MC_SE} SE (max |z| {:.2}); terminal mismatch max {:.2e} (tol {TERMINAL_TOL:.0e}); exits {}",
            st.steps_within_4se,
            st.mean_defect.len(),
            st.max_z,
            st.terminal_mismatch_max,
            st.exits
        ),
    ))
}

fn c11_time_change() -> Result<Outcome, String> {
    let cfg = TimeChangeConfig::new(parse("t").unwrap(), 0.2, 10_000, SEED);
    let st = time_change_check(&cfg, EXEC).map_err(|e| e.to_string())?;
    let zmax = st.probes.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    let within = st.probes.iter().filter(|p| p.z.abs() <= MC_SE).count();
    Ok(outcome(
        within == st.probes.len() && st.probes.len() == 10,
        format!(
            "{within}/{} probes within {MC_SE} SE of 1.2 (max |z| {zmax:.2})",
            st.probes.len()
        ),
    ))
}

fn c12_properties() -> Result<Outcome, String> {
    let mut failures = Vec::new();
    for s in common::SUITES {
        if let Err(e) = common::run_suite(s, PROPERTY_CASES) {
            failures.push(format!("{s}: {e}"));
        }
    }
    Ok(outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} suites x {PROPERTY_CASES} cases, no failures",
                common::SUITES.len()
            )
        } else {
            failures.join("; ")
        },
    ))
}

fn main() {
    let criteria: [(u32, &str, Option<Duration>, Check); 12] = [
        (
            1,
            "heat H=x FBSDE basis, abelian dim 4",
            Some(Duration::from_secs(5)),
            c1_fbsde_linear,
        ),
        (
            2,
            "heat H=x PDE basis and commutator table",
            Some(Duration::from_secs(10)),
            c2_pde_linear_table,
        ),
        (
            3,
            "FBSDE algebra = hat-filtered PDE algebra",
            None,
            c3_containment,
        ),
        (4, "H=x^2 equal 3-dim algebras", None, c4_quadratic),
        (
            5,
            "H=x^n, n=3..5: PDE dim 3, FBSDE dim 2",
            None,
            c5_higher_powers,
        ),
        (6, "prolongation oracle agrees on corpus", None, c6_oracle),
        (7, "Girsanov reduction preserves the PDE", None, c7_girsanov),
        (8, "quadratic rho map accuracy and order", None, c8_rho),
        (
            9,
            "numerical pushforward of generators",
            Some(Duration::from_secs(60)),
            c9_pushforward,
        ),
        (
            10,
            "Feynman-Kac BSDE defect",
            Some(Duration::from_secs(30)),
            c10_feynman_kac,
        ),
        (
            11,
            "Brownian time-change variance ratio",
            None,
            c11_time_change,
        ),
        (12, "property suites", None, c12_properties),
    ];
    let mut passed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check);
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match result {
            Ok(Ok(o)) => (o.pass, o.detail),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if let Some(limit) = limit {
            if elapsed > limit {
                pass = false;
                detail = format!("{detail}; runtime over {limit:?}");
            }
        }
        passed += pass as usize;
        println!(
            "{} criterion {id:>2}: {name} [{:.2}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {passed}/12 passed");
    if passed < 12 && std::env::var("FBSYM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
