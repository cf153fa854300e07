//! Acceptance gate: one test per criterion of the verification matrix.
//! Each prints its pass/fail line (visible with `--nocapture`); the same
//! runners back the CLI `report` subcommand.

use harnack_lab::report::run_criterion;

fn run(id: usize) {
    let result = run_criterion(id);
    println!("{}", result.line());
    assert!(result.pass, "{}", result.line());
}

#[test]
fn criterion_01_scale_checks() {
    run(1);
}

#[test]
fn criterion_02_capacity_sandwich_and_scaling() {
    run(2);
}

#[test]
fn criterion_03_brownian_hitting_oracle() {
    run(3);
}

#[test]
fn criterion_04_capacity_hitting_lower_bound() {
    run(4);
}

#[test]
fn criterion_05_radii_summability() {
    run(5);
}

#[test]
fn criterion_06_constant_pipeline() {
    run(6);
}

#[test]
fn criterion_07_jump_comparison() {
    run(7);
}

#[test]
fn criterion_08_scale_invariant_harnack_ratios() {
    run(8);
}

#[test]
fn criterion_09_diffusion_two_sided_bound() {
    run(9);
}

#[test]
fn criterion_10_iterated_exit_consistency() {
    run(10);
}

#[test]
fn criterion_11_harmonicity_residuals() {
    run(11);
}
