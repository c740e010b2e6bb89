mod common;

use common::*;
use kwick::causal_transform::*;
use kwick::fock_oracle::Oracle;
use kwick::green_kernels::ClosedForm;
use kwick::wick_engine::*;
use kwick::Statistics;

#[test]
fn wick_matches_oracle_bose_channel() {
    let spec = channel(Statistics::Bose, false, 2, 1);
    let oracle = Oracle::new(&spec, 4096).unwrap();
    let mut r = rng(10);
    for _ in 0..20 {
        let len = 2 * (1 + rand::Rng::gen_range(&mut r, 0..3));
        let p = random_product(&spec, len, &mut r);
        let w = vacuum_value(&wick_expand(&p, &spec).unwrap());
        let o = oracle.tc_vev(&p).unwrap();
        assert!((w - o).norm() < 1e-9, "{:?}: {} vs {}", p, w, o);
    }
}

#[test]
fn wick_matches_oracle_fermi_channel() {
    for nonrel in [false, true] {
        let spec = channel(Statistics::Fermi, nonrel, 2, 2);
        let oracle = Oracle::new(&spec, 4096).unwrap();
        let mut r = rng(11);
        for _ in 0..40 {
            let len = 2 * (1 + rand::Rng::gen_range(&mut r, 0..3));
            let p = random_product(&spec, len, &mut r);
            let w = vacuum_value(&wick_expand(&p, &spec).unwrap());
            let o = oracle.tc_vev(&p).unwrap();
            assert!((w - o).norm() < 1e-12, "{:?}: {} vs {}", p, w, o);
        }
    }
}

#[test]
fn wick_matches_oracle_real_field() {
    let spec = real_field(2, 3);
    let oracle = Oracle::new(&spec, 4096).unwrap();
    let mut r = rng(12);
    for _ in 0..20 {
        let p = random_product(&spec, 4, &mut r);
        let w = vacuum_value(&wick_expand(&p, &spec).unwrap());
        let o = oracle.tc_vev(&p).unwrap();
        assert!((w - o).norm() < 1e-9, "{:?}: {} vs {}", p, w, o);
    }
}

fn route_check(spec: &kwick::ChannelSpec, seed: u64, tol: f64) {
    let grid = small_grid(spec, 64);
    let backend = KernelBackend::for_spec(spec, grid).unwrap();
    let mut r = rng(seed);
    for _ in 0..10 {
        let f = random_poly(spec, &grid, 4, 4, 3, &mut r);
        let hori = normal_form_polynomial(&f, &backend).unwrap();
        let causal = causal_normal_form(&f, &backend, 4).unwrap();
        let d = hori.max_diff(&causal, spec.statistics);
        assert!(d < tol, "{:?}\nhori {:?}\ncausal {:?}\n diff {}", f, hori, causal, d);
    }
}

#[test]
fn route_equivalence_all_regimes() {
    route_check(&oscillator(), 1, 1e-9);
    route_check(&real_field(2, 5), 2, 1e-9);
    route_check(&channel(Statistics::Bose, true, 2, 6), 3, 1e-12);
    route_check(&channel(Statistics::Fermi, true, 2, 7), 4, 1e-12);
    route_check(&channel(Statistics::Bose, false, 2, 8), 5, 1e-9);
    route_check(&channel(Statistics::Fermi, false, 2, 9), 6, 1e-9);
}

fn bilinear_check(spec: &kwick::ChannelSpec, seed: u64, tol: f64) {
    let grid = small_grid(spec, 128);
    let backend = KernelBackend::for_spec(spec, grid).unwrap();
    let mut r = rng(seed);
    let gens = [1, 2, 3, 4];
    let nx = spec.nx();
    let sig = |r: &mut rand_chacha::ChaCha8Rng| (0..nx).map(|_| random_gsignal(spec.statistics, grid.n, 12, &gens, r)).collect::<Vec<_>>();
    let tilde = spec.field == kwick::FieldType::Channel;
    let c = CausalPair {
        dt: grid.dt,
        probe: sig(&mut r),
        ext: sig(&mut r),
        tprobe: if tilde { sig(&mut r) } else { vec![] },
        text: if tilde { sig(&mut r) } else { vec![] },
    };
    let rep = verify_bilinear_identity(spec, &backend, &c, tol).unwrap();
    assert!(rep.pass(), "{:?}", rep);
}

#[test]
fn bilinear_identity_all_regimes() {
    bilinear_check(&oscillator(), 1, 1e-9);
    bilinear_check(&real_field(2, 5), 2, 1e-9);
    bilinear_check(&channel(Statistics::Bose, true, 2, 6), 3, 1e-12);
    bilinear_check(&channel(Statistics::Fermi, true, 2, 7), 4, 1e-12);
    bilinear_check(&channel(Statistics::Bose, false, 2, 8), 5, 1e-9);
    bilinear_check(&channel(Statistics::Fermi, false, 2, 9), 6, 1e-9);
}

#[test]
fn transport_all_regimes() {
    for spec in [oscillator(), real_field(2, 5), channel(Statistics::Bose, true, 1, 6), channel(Statistics::Bose, false, 2, 8)] {
        let rep = derivative_transport_check(&spec, 32, 1e-9).unwrap();
        assert!(rep.pass(), "{:?}", rep);
    }
}

#[test]
fn phi_vac_bose_moments() {
    for spec in [oscillator(), channel(Statistics::Bose, false, 1, 3), channel(Statistics::Bose, true, 2, 4)] {
        let grid = small_grid(&spec, 64);
        let oracle = Oracle::new(&spec, 4096).unwrap();
        let mut r = rng(7);
        let pts: Vec<_> = random_product(&spec, 3, &mut r)
            .into_iter()
            .enumerate()
            .map(|(k, mut p)| {
                p.t = grid.time(grid.n / 2 + 3 * k);
                p
            })
            .collect();
        let s = point_sources(&spec, &grid, &pts).unwrap();
        let phi = phi_vac_taylor(&spec, &ClosedForm::new(&spec), &s, pts.len(), 4).unwrap();
        for e in kwick::poly::multi_indices(pts.len(), 4) {
            let o = oracle.moment_vev(&pts, &e, 4).unwrap();
            assert!((phi.coeff(&e) - o).norm() < 1e-9, "{:?} {:?}: {} vs {}", pts, e, phi.coeff(&e), o);
        }
    }
}

#[test]
fn phi_vac_fermi_grassmann() {
    for nonrel in [false, true] {
        let spec = channel(Statistics::Fermi, nonrel, 1, 3);
        let grid = small_grid(&spec, 64);
        let oracle = Oracle::new(&spec, 4096).unwrap();
        let mut r = rng(8);
        let pts: Vec<_> = random_product(&spec, 4, &mut r)
            .into_iter()
            .enumerate()
            .map(|(k, mut p)| {
                p.t = grid.time(grid.n / 2 + 3 * k);
                p
            })
            .collect();
        let s = point_sources(&spec, &grid, &pts).unwrap();
        let raw = z_form_eval(&spec, &ClosedForm::new(&spec), &s).unwrap();
        let subs: Vec<kwick::grassmann::GrassmannPoly> = (0..pts.len()).map(|k| kwick::grassmann::GrassmannPoly::generator(k as u32 + 1)).collect();
        let phi = raw_substitute(&raw, &subs).exp();
        let o = oracle.moment_vev_grassmann(&pts, &subs).unwrap();
        assert!(phi.max_diff(&o) < 1e-12, "{:?}\n{:?}\n{:?}", pts, phi, o);
    }
}
