mod common;

use common::*;
use kwick::green_kernels::Grid;
use kwick::verify::*;
use kwick::Statistics;

fn opts() -> VerifyOptions {
    VerifyOptions { samples: 15, ..Default::default() }
}

fn assert_pass(rep: &Report) {
    for c in &rep.checks {
        assert!(c.pass, "{}: {:e} > {:e}", c.identity, c.max_error, c.tol);
    }
}

#[test]
fn wick_suite() {
    for spec in [oscillator(), real_field(2, 1), channel(Statistics::Bose, false, 2, 2), channel(Statistics::Fermi, false, 2, 3), channel(Statistics::Fermi, true, 2, 4)] {
        assert_pass(&suite_wick(&spec, &opts()).unwrap());
    }
}

#[test]
fn kernel_suite() {
    for spec in [oscillator(), real_field(2, 1), channel(Statistics::Bose, false, 2, 2), channel(Statistics::Fermi, true, 2, 4)] {
        let grid = Grid::default_for(&spec);
        assert_pass(&suite_kernels(&spec, grid, &opts()).unwrap());
    }
}

#[test]
fn causal_suite() {
    for spec in [oscillator(), channel(Statistics::Bose, true, 1, 2), channel(Statistics::Fermi, false, 1, 3)] {
        assert_pass(&suite_causal(&spec, &opts()).unwrap());
    }
}

#[test]
fn grassmann_suite() {
    assert_pass(&suite_grassmann(&opts()).unwrap());
}

#[test]
fn projector_suite() {
    assert_pass(&suite_projector().unwrap());
}
