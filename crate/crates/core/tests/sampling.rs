//! Chi-square soundness of every stochastic device and the large-sharpness
//! limits of the smoothed devices.

mod common;

/// Independent instances per device variant.
const INSTANCES: u64 = 4;

#[test]
fn stochastic_devices_match_their_oracles() {
    let mut failures = Vec::new();
    for (name, case) in common::chi_square_suite() {
        for i in 0..INSTANCES {
            match case(0xC41 + i) {
                Ok(p) if p > common::P_MIN => {}
                Ok(p) => failures.push(format!("{name}#{i}: p = {p:e}")),
                Err(e) => failures.push(format!("{name}#{i}: {e}")),
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn chi_square_rejects_a_wrong_oracle() {
    // the harness must be able to fail: test a fair coin against 0.6/0.4
    let observed = [5000u64, 5000];
    assert!(common::chi_square_p(&observed, &[0.6, 0.4]) < common::P_MIN);
    assert!(common::chi_square_p(&observed, &[0.5, 0.5]) > 0.99);
}

#[test]
fn smoothed_overlap_limit() {
    common::limit_overlap(0x11).unwrap();
}

#[test]
fn smoothed_basis_select_limit() {
    common::limit_basis_select(0x12).unwrap();
}

#[test]
fn smoothed_certifier_limit() {
    common::limit_certifier(0x13).unwrap();
}
