//! Verdicts are unchanged by the symmetries of the polydisc that preserve
//! the problem, and library contacts are genuine boundary maxima.

mod common;

#[test]
fn verdicts_survive_polydisc_symmetries() {
    let n = common::symmetry_sweep(4, 2024).unwrap();
    assert!(n > 100, "{n}");
}

#[test]
fn library_contacts_are_critical_maxima() {
    let n = common::contact_sweep().unwrap();
    assert!(n >= 13, "{n}");
}
