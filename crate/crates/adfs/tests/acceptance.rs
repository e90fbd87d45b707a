//! Acceptance gate: one test per criterion, each printing its pass/fail line
//! (visible with `--nocapture`). Tolerances are frozen inside the checks.

use adfs::verify;

fn gate(check: adfs::verify::Check) {
    println!("{}", check.line());
    assert!(check.passed, "{}", check.line());
}

#[test]
fn criterion_1_dense_sparse_equivalence() {
    gate(verify::criterion_dense_sparse_equivalence());
}

#[test]
fn criterion_2_single_machine_reduction() {
    gate(verify::criterion_single_machine_reduction());
}

#[test]
fn criterion_3_linear_rate() {
    gate(verify::criterion_linear_rate());
}

#[test]
fn criterion_4_conjugate_prox_identity() {
    gate(verify::criterion_conjugate_prox_identity());
}

#[test]
fn criterion_5_resistance_and_gap_bounds() {
    gate(verify::criterion_resistance_and_gap_bounds());
}

#[test]
fn criterion_6_timing_ground_truth() {
    gate(verify::criterion_timing_ground_truth());
}

#[test]
fn criterion_7_throughput_envelope() {
    gate(verify::criterion_throughput_envelope());
}

#[test]
fn criterion_8_sublinear_bound() {
    gate(verify::criterion_sublinear_bound());
}

#[test]
fn criterion_9_nonsmooth_trend() {
    gate(verify::criterion_nonsmooth_trend());
}

#[test]
fn criterion_10_comm_probability_optimality() {
    gate(verify::criterion_comm_probability_optimality());
}
