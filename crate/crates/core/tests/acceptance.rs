//! The registered verification suites, run end to end — one test per
//! suite, one printed pass/fail line per check. `cargo test --test
//! acceptance -- --nocapture` shows the observed numbers.

use idvsel::harness::suites::{run_suite, DEFAULT_SUITE_SEED};

fn run(id: &str) {
    let report = run_suite(id, DEFAULT_SUITE_SEED).expect("suite must run to completion");
    for line in &report.checks {
        println!(
            "[{}] {}: {} — {}",
            if line.passed { "PASS" } else { "FAIL" },
            id,
            line.label,
            line.detail
        );
    }
    assert!(
        report.passed(),
        "suite `{id}` failed: {:?}",
        report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .collect::<Vec<_>>()
    );
}

#[test]
fn hardness_gap() {
    run("hardness");
}

#[test]
fn product_hardness() {
    run("product-hardness");
}

#[test]
fn threshold_trap_counterexample() {
    run("threshold-trap");
}

#[test]
fn stopping_time_distribution() {
    run("stopping-pmf");
}

#[test]
fn approximation_bounds() {
    run("bounds");
}

#[test]
fn classic_ratio_recovery() {
    run("classic-ratios");
}

#[test]
fn incentive_compatibility() {
    run("epic");
}

#[test]
fn subset_sampling_bound() {
    run("sampling-bound");
}

#[test]
fn oracle_equivalence() {
    run("oracle-agreement");
}
