use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fbsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbsym"))
        .current_dir(root())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is one JSON document")
}

#[test]
fn derive_prints_four_fbsde_equations_and_terminal_constraint() {
    let o = fbsym(&["derive", "--side", "fbsde", "problems/heat_x.prob"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for label in ["(i) eta", "(ii) xi", "(iii) sigma", "(iv) terminal"] {
        assert!(text.contains(label), "missing {label}:\n{text}");
    }
}

#[test]
fn solve_both_reports_equal_three_dimensional_algebras() {
    let o = fbsym(&[
        "solve",
        "--side",
        "both",
        "--format",
        "json",
        "problems/heat_x2.prob",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc = json(&o);
    assert_eq!(doc["result"]["containment"]["relation"], "equal");
    for a in doc["result"]["algebras"].as_array().unwrap() {
        assert_eq!(a["algebra"]["dimension"], 3);
    }
    let o = fbsym(&["solve", "--side", "both", "problems/heat_x2.prob"]);
    assert!(stdout(&o).contains("dim 3 vs dim 3: equal"));
}

#[test]
fn structured_output_matches_golden_documents() {
    let cases = [
        (
            &[
                "solve",
                "--sequential",
                "--side",
                "both",
                "--format",
                "json",
                "problems/heat_x2.prob",
            ][..],
            "solve_heat_x2.json",
        ),
        (
            &[
                "derive",
                "--sequential",
                "--side",
                "fbsde",
                "--format",
                "json",
                "problems/heat_x.prob",
            ][..],
            "derive_fbsde_heat_x.json",
        ),
    ];
    for (args, golden) in cases {
        let o = fbsym(args);
        let want =
            std::fs::read_to_string(root().join("crates/cli/tests/golden").join(golden)).unwrap();
        assert_eq!(stdout(&o), want, "{golden}");
    }
}

#[test]
fn verify_flow_translation_passes() {
    let o = fbsym(&[
        "verify-flow",
        "--field",
        "w5",
        "--eps",
        "0.05",
        "--format",
        "json",
        "problems/heat_x.prob",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let doc = json(&o);
    assert_eq!(doc["result"]["pass"], true);
    assert!(
        doc["result"]["report"]["residual"].as_f64().unwrap()
            <= doc["result"]["limit"].as_f64().unwrap()
    );
}

#[test]
fn verify_flow_rejects_a_non_symmetry() {
    let o = fbsym(&[
        "verify-flow",
        "--field",
        "0;t;x*(y - x)",
        "problems/heat_x.prob",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("verification failed"));
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let args = [
        "verify-fbsde",
        "--seed",
        "5",
        "--paths",
        "500",
        "--grid",
        "100x200",
        "--format",
        "json",
        "problems/heat_x2.prob",
    ];
    let a = fbsym(&args);
    let b = fbsym(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    // scheduling does not change results
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let c = fbsym(&seq);
    assert_eq!(json(&a)["result"], json(&c)["result"]);
    let d = fbsym(&[
        "time-change-check",
        "--seed",
        "9",
        "--paths",
        "400",
        "--format",
        "json",
    ]);
    let e = fbsym(&[
        "time-change-check",
        "--seed",
        "9",
        "--paths",
        "400",
        "--format",
        "json",
    ]);
    assert_eq!(d.stdout, e.stdout);
}

#[test]
fn reports_embed_the_resolved_config() {
    let o = fbsym(&[
        "verify-fbsde",
        "--seed",
        "5",
        "--paths",
        "300",
        "--grid",
        "50x120",
        "--format",
        "json",
        "problems/heat_x.prob",
    ]);
    let cfg = &json(&o)["config"];
    assert_eq!(cfg["seed"], 5);
    assert_eq!(cfg["paths"], 300);
    assert_eq!(cfg["grid"]["steps"], 50);
    assert_eq!(cfg["dt"], 0.005);
}

#[test]
fn exit_codes() {
    assert_eq!(fbsym(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        fbsym(&["verify-fbsde", "problems/heat_x.prob"])
            .status
            .code(),
        Some(2),
        "seed is required"
    );
    assert_eq!(
        fbsym(&[
            "verify-fbsde",
            "--seed",
            "1",
            "--dt",
            "0.3",
            "problems/heat_x.prob"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        fbsym(&[
            "derive",
            "--side",
            "fbsde",
            "--prolongation",
            "problems/heat_x.prob"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        fbsym(&["solve", "problems/missing.prob"]).status.code(),
        Some(1)
    );
    assert_eq!(
        fbsym(&["reduce", "--kind", "girsanov", "problems/quadratic.prob"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn malformed_problem_file_reports_the_line() {
    let dir = std::env::temp_dir().join(format!("fbsym-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.prob");
    std::fs::write(&p, "# comment\nH = x\nsigma = (1 +\n").unwrap();
    let o = fbsym(&["solve", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn out_directory_receives_both_formats() {
    let dir = std::env::temp_dir().join(format!("fbsym-out-{}", std::process::id()));
    let o = fbsym(&[
        "verify-pde",
        "--grid",
        "20x60",
        "--format",
        "both",
        "--out",
        dir.to_str().unwrap(),
        "problems/heat_x2.prob",
    ]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["verify-pde.txt", "verify-pde.json", "grid.tsv", "grid.bin"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let g =
        fbsym::numerics::export::read_binary(std::fs::File::open(dir.join("grid.bin")).unwrap())
            .unwrap();
    assert_eq!((g.times.len(), g.xs.len()), (21, 61));
}

#[test]
fn reductions_from_the_command_line() {
    let o = fbsym(&[
        "reduce",
        "--kind",
        "girsanov",
        "--format",
        "json",
        "problems/girsanov.prob",
    ]);
    let doc = json(&o);
    assert_eq!(doc["result"]["reduced"]["b"], "2");
    assert_eq!(doc["result"]["pde_form_unchanged"], true);
    let o = fbsym(&[
        "reduce",
        "--kind",
        "quadratic",
        "--domain",
        "-2:2",
        "--format",
        "json",
        "problems/quadratic.prob",
    ]);
    let doc = json(&o);
    assert_eq!(doc["result"]["reduced_generator_zero"], true);
    let hi = doc["result"]["rho_range"][1].as_f64().unwrap();
    assert!((hi - 2f64.exp_m1()).abs() < 1e-8 * hi);
}
