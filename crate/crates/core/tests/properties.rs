mod common;

const CASES: u32 = 500;

fn suite(name: &str) {
    if let Err(e) = common::run_suite(name, CASES) {
        panic!("{name}: {e}");
    }
}

#[test]
fn normalization_is_idempotent() {
    suite("normalization idempotence");
}

#[test]
fn brackets_are_antisymmetric_and_satisfy_jacobi() {
    suite("bracket antisymmetry/jacobi");
}

#[test]
fn collect_reconstructs_the_expression() {
    suite("collect-reconstruction");
}

#[test]
fn nullspace_vectors_are_exact() {
    suite("nullspace exactness");
}

#[test]
fn rho_round_trips() {
    suite("rho round-trip");
}
