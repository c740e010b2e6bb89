//! Verification reports and the suites behind `kwick verify`.

use crate::causal_transform::{
    causal_normal_form, derivative_transport_check, from_causal_fields, from_causal_sources, raw_to_cpoly, raw_to_grassmann,
    to_causal_fields, to_causal_sources, verify_bilinear_identity, z_form_points, CausalPair, FunctionalPolynomial, GSignal, KernelBackend,
    Regime, Slot, Var,
};
use crate::channel::{Branch, ChannelSpec, FieldKind, FieldOp, FieldType, Statistics};
use crate::fock_oracle::Oracle;
use crate::grassmann::{gp_linear_subst, gp_uniqueness_probe, restricted_probe, GrassmannPoly, Parity, ProbeResult};
use crate::green_kernels::{delta_closed, delta_part, grid_inner, theta, verify_response_identities, ClosedForm, Grid, KernelKind, KernelSource, Projector, Sign};
use crate::poly::multi_indices;
use crate::wick_engine::{contraction_value, normal_form_polynomial, vacuum_value, wick_expand};
use crate::{Result, C64, I};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub identity: String,
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(identity: impl Into<String>, max_error: f64, tol: f64) -> Self {
        Check { identity: identity.into(), max_error, tol, pass: max_error.is_finite() && max_error <= tol }
    }

    /// A yes/no check; the error is 0 or 1.
    pub fn flag(identity: impl Into<String>, ok: bool) -> Self {
        Check::new(identity, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(suite: &str) -> Self {
        Report { suite: suite.to_string(), checks: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_error).fold(0.0, f64::max)
    }

    pub fn extend(&mut self, other: Report) {
        let prefix = other.suite.clone();
        for mut c in other.checks {
            c.identity = format!("{}: {}", prefix, c.identity);
            self.checks.push(c);
        }
        self.notes.extend(other.notes);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tol: f64,
    pub seed: u64,
    /// Random cases per randomized check.
    pub samples: usize,
    pub degree_cap: usize,
    pub points_cap: usize,
    pub order_cap: usize,
    pub dim_cap: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: 1e-6,
            seed: 7,
            samples: 50,
            degree_cap: 4,
            points_cap: 4,
            order_cap: 4,
            dim_cap: crate::fock_oracle::DEFAULT_DIM_CAP,
        }
    }
}

/// Random inputs shared by the suites and the test harness.
pub mod gen {
    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        rand::SeedableRng::seed_from_u64(seed)
    }

    pub fn rand_c(r: &mut ChaCha8Rng) -> C64 {
        C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
    }

    pub fn branch(r: &mut ChaCha8Rng) -> Branch {
        if r.gen_bool(0.5) {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    pub fn kinds(spec: &ChannelSpec) -> Vec<FieldKind> {
        match spec.field {
            FieldType::Real => vec![FieldKind::Q],
            FieldType::Channel => vec![FieldKind::Psi, FieldKind::TPsi],
        }
    }

    /// Random product of field operators at distinct times `k / 10`.
    pub fn random_product(spec: &ChannelSpec, len: usize, r: &mut ChaCha8Rng) -> Vec<FieldOp> {
        let ks = kinds(spec);
        let mut times: Vec<i32> = Vec::new();
        (0..len)
            .map(|_| {
                let t = loop {
                    let t = r.gen_range(-30..30);
                    if !times.contains(&t) {
                        break t;
                    }
                };
                times.push(t);
                FieldOp::new(ks[r.gen_range(0..ks.len())], r.gen_range(0..spec.nx()), t as f64 * 0.1, branch(r))
            })
            .collect()
    }

    /// Grid of `n` points with `max w dt = pi/4`.
    pub fn small_grid(spec: &ChannelSpec, n: usize) -> Grid {
        let dt = PI / 4.0 / spec.max_omega();
        Grid { t0: -(n as f64) * dt / 2.0, dt, n, epsilon: 4.0 / (n as f64 * dt) }
    }

    /// Random branch-field polynomial of degree `<= deg` on at most
    /// `points` grid sample points.
    pub fn random_poly(spec: &ChannelSpec, grid: &Grid, deg: usize, points: usize, terms: usize, r: &mut ChaCha8Rng) -> FunctionalPolynomial {
        let ks = kinds(spec);
        let pts: Vec<(usize, f64)> = (0..points.max(1))
            .map(|_| (r.gen_range(0..spec.nx()), grid.time(r.gen_range(grid.n / 4..3 * grid.n / 4))))
            .collect();
        let mut f = FunctionalPolynomial::new();
        for _ in 0..terms {
            let d = r.gen_range(0..=deg);
            let slots = (0..d)
                .map(|_| {
                    let (x, t) = pts[r.gen_range(0..pts.len())];
                    Slot::new(Var::Field(ks[r.gen_range(0..ks.len())], branch(r)), x, t)
                })
                .collect();
            f.push(slots, rand_c(r));
        }
        f
    }

    /// Random signal with content only in bins `1..=band` and their mirrors.
    pub fn band_limited(n: usize, band: usize, r: &mut ChaCha8Rng) -> Vec<C64> {
        let mut amp = vec![C64::default(); n];
        for k in 1..=band.min(n / 2 - 1) {
            amp[k] = rand_c(r);
            amp[n - k] = rand_c(r);
        }
        (0..n)
            .map(|j| amp.iter().enumerate().map(|(k, a)| a * C64::from_polar(1.0, 2.0 * PI * ((j * k) % n) as f64 / n as f64)).sum::<C64>() / n as f64)
            .collect()
    }

    /// Band-limited signal, linear in the generators `gens` for fermions.
    pub fn random_gsignal(stats: Statistics, n: usize, band: usize, gens: &[u32], r: &mut ChaCha8Rng) -> GSignal {
        if stats.is_fermi() {
            let mut s = GSignal::zero(n);
            for &g in gens {
                s = s.add(&GSignal::symbol(g, band_limited(n, band, r))).expect("same grid");
            }
            s
        } else {
            GSignal::scalar(band_limited(n, band, r))
        }
    }

    /// Random causal quadruple for `spec` on `n` points.
    pub fn random_causal(spec: &ChannelSpec, n: usize, dt: f64, gens: &[u32], r: &mut ChaCha8Rng) -> CausalPair {
        let nx = spec.nx();
        let band = n / 8;
        let sig = |r: &mut ChaCha8Rng| (0..nx).map(|_| random_gsignal(spec.statistics, n, band, gens, r)).collect::<Vec<_>>();
        let tilde = spec.field == FieldType::Channel;
        CausalPair {
            dt,
            probe: sig(r),
            ext: sig(r),
            tprobe: if tilde { sig(r) } else { Vec::new() },
            text: if tilde { sig(r) } else { Vec::new() },
        }
    }

    /// Random Grassmann polynomial over generators `1..=k`.
    pub fn random_grassmann(k: u32, terms: usize, max_len: usize, r: &mut ChaCha8Rng) -> GrassmannPoly {
        let mut p = GrassmannPoly::zero();
        for _ in 0..terms {
            let len = r.gen_range(0..=max_len.min(k as usize));
            let seq: Vec<u32> = (0..len).map(|_| r.gen_range(1..=k)).collect();
            p = p.add(&GrassmannPoly::monomial(&seq, rand_c(r)));
        }
        p
    }

    /// Random element of one parity.
    pub fn random_homogeneous(k: u32, odd: bool, r: &mut ChaCha8Rng) -> GrassmannPoly {
        let mut p = GrassmannPoly::zero();
        for _ in 0..6 {
            let mut len = r.gen_range(0..=4.min(k as usize));
            if (len % 2 == 1) != odd {
                len = if len == 0 { 1 } else { len - 1 };
            }
            let mut seq: Vec<u32> = Vec::new();
            while seq.len() < len {
                let g = r.gen_range(1..=k);
                if !seq.contains(&g) {
                    seq.push(g);
                }
            }
            p = p.add(&GrassmannPoly::monomial(&seq, rand_c(r)));
        }
        p
    }
}

use gen::*;

fn fact(n: usize) -> usize {
    (1..=n).product()
}

fn double_fact(n: isize) -> usize {
    if n <= 0 {
        1
    } else {
        (n as usize) * double_fact(n - 2)
    }
}

fn binom(n: usize, k: usize) -> usize {
    fact(n) / (fact(k) * fact(n - k))
}

/// `(complete matchings, total terms)` expected and found for `2n`-op
/// real-field products and `n`-pair channel products.
pub fn counting_table(spec: &ChannelSpec, max_n: usize) -> Result<Vec<(usize, usize, usize, usize, usize)>> {
    let mut rows = Vec::new();
    for n in 1..=max_n {
        let ops: Vec<FieldOp> = match spec.field {
            FieldType::Real => (0..2 * n).map(|k| FieldOp::new(FieldKind::Q, 0, k as f64, Branch::Plus)).collect(),
            FieldType::Channel => (0..2 * n)
                .map(|k| FieldOp::new(if k % 2 == 0 { FieldKind::Psi } else { FieldKind::TPsi }, 0, k as f64, Branch::Plus))
                .collect(),
        };
        let e = wick_expand(&ops, spec)?;
        let complete = e.terms.iter().filter(|t| t.residual.is_empty()).count();
        let (want_complete, want_total) = match spec.field {
            FieldType::Real => (double_fact(2 * n as isize - 1), (0..=n).map(|m| binom(2 * n, 2 * m) * double_fact(2 * m as isize - 1)).sum()),
            FieldType::Channel => (fact(n), (0..=n).map(|m| binom(n, m) * binom(n, m) * fact(m)).sum()),
        };
        rows.push((n, complete, want_complete, e.terms.len(), want_total));
    }
    Ok(rows)
}

/// Swaps ops `k`, `k+1` and checks every term changes sign.
pub fn sign_law_error(spec: &ChannelSpec, p: &[FieldOp], k: usize) -> Result<f64> {
    let mut q = p.to_vec();
    q.swap(k, k + 1);
    let sw = |i: usize| if i == k { k + 1 } else if i == k + 1 { k } else { i };
    let ep = wick_expand(p, spec)?;
    let eq = wick_expand(&q, spec)?;
    let key = |pairs: Vec<(usize, usize)>| {
        let mut v: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        v.sort();
        v
    };
    let mut map: BTreeMap<Vec<(usize, usize)>, C64> = BTreeMap::new();
    for t in &ep.terms {
        map.insert(key(t.contractions.iter().map(|c| (c.i, c.j)).collect()), t.coeff);
    }
    if map.len() != eq.terms.len() {
        return Ok(f64::INFINITY);
    }
    let mut err: f64 = 0.0;
    for t in &eq.terms {
        let k = key(t.contractions.iter().map(|c| (sw(c.i), sw(c.j))).collect());
        let Some(c) = map.get(&k) else { return Ok(f64::INFINITY) };
        err = err.max((t.coeff + c).norm());
    }
    Ok(err)
}

pub fn suite_wick(spec: &ChannelSpec, opts: &VerifyOptions) -> Result<Report> {
    spec.validate()?;
    let mut rep = Report::new("wick");
    let oracle = Oracle::new(spec, opts.dim_cap)?;
    let fermi = spec.statistics.is_fermi();
    let tol = if fermi { 1e-12 } else { 1e-9 };
    let mut r = rng(opts.seed);

    let mut err: f64 = 0.0;
    for _ in 0..opts.samples {
        let len = r.gen_range(0..=6);
        let p = random_product(spec, len, &mut r);
        let w = vacuum_value(&wick_expand(&p, spec)?);
        let o = oracle.tc_vev(&p)?;
        err = err.max((w - o).norm());
    }
    rep.push(Check::new("vacuum value = oracle <T_C ...>", err, tol));

    let mut err: f64 = 0.0;
    let ks = kinds(spec);
    for _ in 0..opts.samples.min(20) {
        for &ka in &ks {
            for &kb in &ks {
                for ba in [Branch::Plus, Branch::Minus] {
                    for bb in [Branch::Plus, Branch::Minus] {
                        let a = FieldOp::new(ka, r.gen_range(0..spec.nx()), r.gen_range(-3.0..3.0), ba);
                        let b = FieldOp::new(kb, r.gen_range(0..spec.nx()), r.gen_range(-3.0..3.0), bb);
                        let v = contraction_value(&a, &b, spec)?;
                        err = err.max((v - oracle.tc_vev(&[a, b])?).norm());
                    }
                }
            }
        }
    }
    rep.push(Check::new("contraction = oracle pair value, all placements", err, 1e-10));

    let rows = counting_table(spec, 4)?;
    let ok = rows.iter().all(|&(_, c, wc, t, wt)| c == wc && t == wt);
    rep.push(Check::flag("matching counts", ok));
    for (n, c, _, t, _) in rows {
        rep.note(format!("n = {}: {} complete, {} total", n, c, t));
    }

    if fermi {
        let mut err: f64 = 0.0;
        for _ in 0..opts.samples {
            let len = r.gen_range(2..=6);
            let p = random_product(spec, len, &mut r);
            let k = r.gen_range(0..len - 1);
            err = err.max(sign_law_error(spec, &p, k)?);
        }
        rep.push(Check::new("adjacent swap negates every term", err, 1e-12));
    }
    Ok(rep)
}

/// Kernels against oracle pair expectations at random arguments.
pub fn kernel_oracle_error(spec: &ChannelSpec, samples: usize, seed: u64, cap: usize) -> Result<f64> {
    let mut small = spec.clone();
    small.truncation = small.truncation.clamp(1, 2);
    let oracle = Oracle::new(&small, cap)?;
    let cf = ClosedForm::new(spec);
    let hb = spec.hbar;
    let eps = spec.eps();
    let mut r = rng(seed);
    let mut err: f64 = 0.0;
    for _ in 0..samples {
        let (x, xp) = (r.gen_range(0..spec.nx()), r.gen_range(0..spec.nx()));
        let tp = r.gen_range(-3.0..3.0);
        let tau = loop {
            let t: f64 = r.gen_range(-4.0..4.0);
            if t.abs() > 1e-3 {
                break t;
            }
        };
        let t = tp + tau;
        let th = theta(tau, 0.5);
        let op = |k, x, t, b| FieldOp::new(k, x, t, b);
        let (p, m) = (Branch::Plus, Branch::Minus);
        let mut pairs: Vec<(KernelKind, C64)> = Vec::new();
        match spec.field {
            FieldType::Real => {
                let q = FieldKind::Q;
                let plain = oracle.plain_vev(&[op(q, x, t, p), op(q, xp, tp, p)])?;
                let rev = oracle.plain_vev(&[op(q, xp, tp, p), op(q, x, t, p)])?;
                pairs.push((KernelKind::GPlus, I * plain / hb));
                pairs.push((KernelKind::GF, I * oracle.tc_vev(&[op(q, x, t, p), op(q, xp, tp, p)])? / hb));
                pairs.push((KernelKind::GFStar, -I * oracle.tc_vev(&[op(q, x, t, m), op(q, xp, tp, m)])? / hb));
                pairs.push((KernelKind::GR, I * th * (plain - rev) / hb));
            }
            FieldType::Channel => {
                let (ps, tps) = (FieldKind::Psi, FieldKind::TPsi);
                let plain = oracle.plain_vev(&[op(ps, x, t, p), op(tps, xp, tp, p)])?;
                let rev = oracle.plain_vev(&[op(tps, xp, tp, p), op(ps, x, t, p)])?;
                let comm = I * (plain - eps * rev) / hb;
                pairs.push((KernelKind::DeltaPlus, I * plain / hb));
                pairs.push((KernelKind::DeltaMinus, -I * eps * rev / hb));
                pairs.push((KernelKind::Delta, comm));
                pairs.push((KernelKind::DeltaF, I * oracle.tc_vev(&[op(ps, x, t, p), op(tps, xp, tp, p)])? / hb));
                pairs.push((KernelKind::DeltaTildeF, -I * oracle.tc_vev(&[op(ps, x, t, m), op(tps, xp, tp, m)])? / hb));
                pairs.push((KernelKind::DeltaR, th * comm));
                pairs.push((KernelKind::DeltaTildeR, -(1.0 - th) * comm));
            }
        }
        let kappa = r.gen_range(0..spec.modes.len());
        let bb = oracle.plain_vev(&[op(FieldKind::B, kappa, t, p), op(FieldKind::Bdag, kappa, tp, p)])?;
        pairs.push((KernelKind::ModeGPlus, I * bb));
        pairs.push((KernelKind::ModeGF, I * th * bb));
        for (kind, want) in pairs {
            let (a, b) = match kind {
                KernelKind::ModeGF | KernelKind::ModeGPlus => (kappa, kappa),
                _ => (x, xp),
            };
            err = err.max((cf.eval(kind, a, b, tau) - want).norm());
        }
    }
    Ok(err)
}

pub fn suite_projector() -> Result<Report> {
    let mut rep = Report::new("projector");
    let n = 256;
    let p = Projector::new(n)?;
    let mut r = rng(3);
    let x: Vec<C64> = (0..n).map(|_| rand_c(&mut r)).collect();
    let max = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);

    let (xp, xm) = (p.part(&x, Sign::Plus), p.part(&x, Sign::Minus));
    let sum: Vec<C64> = xp.iter().zip(&xm).map(|(a, b)| a + b).collect();
    let (sx, ss) = (p.spectrum(&x), p.spectrum(&sum));
    rep.push(Check::new("P+ + P- = 1 (bins)", max(&sx, &ss) / n as f64, 1e-14));

    let b = band_limited(n, 40, &mut r);
    let bp = p.part(&b, Sign::Plus);
    let mut err = max(&p.part(&bp, Sign::Plus), &bp);
    err = err.max(p.part(&bp, Sign::Minus).iter().map(|z| z.norm()).fold(0.0, f64::max));
    let bm = p.part(&b, Sign::Minus);
    err = err.max(max(&p.part(&bm, Sign::Minus), &bm));
    err = err.max(p.part(&bm, Sign::Plus).iter().map(|z| z.norm()).fold(0.0, f64::max));
    rep.push(Check::new("P+P+ = P+, P+P- = 0 off the shared bins", err, 1e-13));

    // the zero and Nyquist bins are split half and half
    let dc: Vec<C64> = (0..n).map(|j| C64::new(1.0 + if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
    let pm = p.part(&p.part(&dc, Sign::Minus), Sign::Plus);
    let quarter: Vec<C64> = dc.iter().map(|z| z * 0.25).collect();
    rep.push(Check::new("shared bins: P+P- = 1/4", max(&pm, &quarter), 1e-14));

    let dt = 0.1;
    let w = |k: i64| 2.0 * PI * k as f64 / (n as f64 * dt);
    let ex = |k: i64| -> Vec<C64> { (0..n).map(|j| (-I * w(k) * j as f64 * dt).exp()).collect() };
    let mut err: f64 = 0.0;
    for (ka, kb) in [(3, 5), (7, -7), (-2, 9), (11, 11)] {
        let (f, g) = (ex(ka), ex(kb));
        let lhs = grid_inner(&p.part(&f, Sign::Plus), &g, dt);
        let rhs = grid_inner(&f, &p.part(&g, Sign::Minus), dt);
        err = err.max((lhs - rhs).norm());
        let lhs = grid_inner(&p.part(&f, Sign::Minus), &g, dt);
        let rhs = grid_inner(&f, &p.part(&g, Sign::Plus), dt);
        err = err.max((lhs - rhs).norm());
    }
    let (f, g) = (ex(4), ex(9));
    err = err.max(grid_inner(&p.part(&f, Sign::Plus), &p.part(&g, Sign::Plus), dt).norm());
    rep.push(Check::new("transfer: sum f^(+-) g = sum f g^(-+)", err, 1e-12));

    let (n, dt, eps) = (16384, 0.05, 0.25);
    let mut err: f64 = 0.0;
    for sign in [Sign::Plus, Sign::Minus] {
        let d = delta_part(n, dt, eps, sign)?;
        for (j, v) in d.iter().enumerate() {
            let t = (j as f64 - (n / 2) as f64) * dt;
            if t.abs() <= 10.0 {
                err = err.max((v - delta_closed(t, eps, sign)).norm());
            }
        }
    }
    rep.push(Check::new("delta^(+-) on a damped grid", err, 1e-4));
    Ok(rep)
}

pub fn suite_kernels(spec: &ChannelSpec, grid: Grid, opts: &VerifyOptions) -> Result<Report> {
    let mut rep = Report::new("kernels");
    let ids = verify_response_identities(spec, grid, opts.tol, 1e-12)?;
    rep.checks.extend(ids.checks);
    rep.notes.extend(ids.notes);
    let err = kernel_oracle_error(spec, 10, opts.seed, opts.dim_cap)?;
    rep.push(Check::new("kernels = oracle pair values", err, 1e-9));
    rep.extend(suite_projector()?);
    Ok(rep)
}

/// Vacuum functional against oracle moments. Bosons: Taylor coefficients
/// up to `order`; fermions: one generator per point.
pub fn phi_vac_error(spec: &ChannelSpec, points: &[FieldOp], order: usize, cap: usize) -> Result<f64> {
    let oracle = Oracle::new(spec, cap)?;
    let raw = z_form_points(spec, &ClosedForm::new(spec), points)?;
    if spec.statistics.is_fermi() {
        let gens: Vec<GrassmannPoly> = (1..=points.len() as u32).map(GrassmannPoly::generator).collect();
        let phi = raw_to_grassmann(&raw).exp();
        return Ok(phi.max_diff(&oracle.moment_vev_grassmann(points, &gens)?));
    }
    let phi = raw_to_cpoly(&raw, points.len(), order).exp();
    let mut err: f64 = 0.0;
    for e in multi_indices(points.len(), order) {
        err = err.max((phi.coeff(&e) - oracle.moment_vev(points, &e, order)?).norm());
    }
    Ok(err)
}

pub fn suite_causal(spec: &ChannelSpec, opts: &VerifyOptions) -> Result<Report> {
    spec.validate()?;
    let regime = Regime::of(spec);
    let mut rep = Report::new("causal");
    rep.note(format!("regime {}", regime.name()));
    let exact = regime == Regime::Nonrel;
    let mut r = rng(opts.seed);
    let gens: Vec<u32> = if spec.statistics.is_fermi() { vec![1, 2, 3] } else { Vec::new() };
    let hb = spec.hbar;

    let g128 = small_grid(spec, 128);
    let backend = KernelBackend::for_spec(spec, g128)?;
    let (mut rt_s, mut rt_f, mut bil) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let c = random_causal(spec, g128.n, g128.dt, &gens, &mut r);
        let b = from_causal_sources(regime, hb, &c)?;
        let back = to_causal_sources(regime, hb, &b)?;
        rt_s = rt_s.max(from_causal_sources(regime, hb, &back)?.max_diff(&b));
        let f = from_causal_fields(regime, hb, &c)?;
        rt_f = rt_f.max(from_causal_fields(regime, hb, &to_causal_fields(regime, hb, &f)?)?.max_diff(&f));
        bil = bil.max(verify_bilinear_identity(spec, &backend, &c, f64::INFINITY)?.max_error());
    }
    let rt_tol = if exact { 1e-12 } else { 1e-10 };
    rep.push(Check::new("source round trip", rt_s, rt_tol));
    rep.push(Check::new("field round trip", rt_f, rt_tol));
    rep.push(Check::new("branch form = causal form", bil, if exact { 1e-12 } else { opts.tol }));

    let g64 = small_grid(spec, 64);
    let backend = KernelBackend::for_spec(spec, g64)?;
    let mut err: f64 = 0.0;
    for _ in 0..opts.samples {
        let f = random_poly(spec, &g64, opts.degree_cap, opts.points_cap, 3, &mut r);
        let hori = normal_form_polynomial(&f, &backend)?;
        let causal = causal_normal_form(&f, &backend, opts.degree_cap)?;
        err = err.max(hori.max_diff(&causal, spec.statistics));
    }
    rep.push(Check::new("causal route = Hori route", err, if exact { 1e-12 } else { 1e-9 }));

    rep.extend(derivative_transport_check(spec, 32, opts.tol)?);

    let npts = if spec.statistics.is_fermi() { 4 } else { 3 };
    let mut err: f64 = 0.0;
    for _ in 0..5 {
        let pts = random_product(spec, npts, &mut r);
        err = err.max(phi_vac_error(spec, &pts, opts.order_cap, opts.dim_cap)?);
    }
    let tol = if spec.statistics.is_fermi() { 1e-12 } else { 1e-9 };
    rep.push(Check::new("vacuum functional = oracle moments", err, tol));
    Ok(rep)
}

pub fn suite_grassmann(opts: &VerifyOptions) -> Result<Report> {
    let mut rep = Report::new("grassmann");
    let mut r = rng(opts.seed);
    let k = 12u32;
    let (mut anti, mut gen_sq, mut nil, mut prod, mut chain) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..opts.samples {
        let (i, j) = (r.gen_range(1..=k), r.gen_range(1..=k));
        let (gi, gj) = (GrassmannPoly::generator(i), GrassmannPoly::generator(j));
        anti = anti.max(gi.mul(&gj).add(&gj.mul(&gi)).max_norm());
        gen_sq = gen_sq.max(gi.mul(&gi).max_norm());
        let odd = random_homogeneous(k, true, &mut r);
        nil = nil.max(odd.mul(&odd).max_norm());

        let a_odd = r.gen_bool(0.5);
        let a = random_homogeneous(k, a_odd, &mut r);
        let b = random_grassmann(k, 6, 4, &mut r);
        let d = r.gen_range(1..=k);
        let s = if a.parity()? == Parity::Odd { -1.0 } else { 1.0 };
        let lhs = a.mul(&b).left_deriv(d);
        let rhs = a.left_deriv(d).mul(&b).add(&a.mul(&b.left_deriv(d)).scale(C64::new(s, 0.0)));
        prod = prod.max(lhs.max_diff(&rhs));

        let n = 6usize;
        let f = random_grassmann(n as u32, 8, 4, &mut r);
        let kern: Vec<Vec<C64>> = (0..n).map(|_| (0..n).map(|_| rand_c(&mut r)).collect()).collect();
        let fk = gp_linear_subst(&f, &kern)?;
        for m in 1..=n as u32 {
            let lhs = fk.left_deriv(m);
            let mut rhs = GrassmannPoly::zero();
            for (i, row) in kern.iter().enumerate() {
                rhs = rhs.add(&gp_linear_subst(&f.left_deriv(i as u32 + 1), &kern)?.scale(row[m as usize - 1]));
            }
            chain = chain.max(lhs.max_diff(&rhs));
        }
    }
    rep.push(Check::new("anticommutativity", anti, 0.0));
    rep.push(Check::new("generators square to zero", gen_sq, 0.0));
    // odd elements cancel pairwise, up to summation roundoff
    rep.push(Check::new("odd elements square to zero", nil, 1e-12));
    rep.push(Check::new("graded product rule", prod, 1e-12));
    rep.push(Check::new("chain rule under linear substitution", chain, 1e-12));

    let (mut sound, mut complete, mut blind) = (true, true, false);
    for _ in 0..opts.samples {
        let kk = r.gen_range(1..=k);
        let nonzero = r.gen_bool(0.5);
        let fam: Vec<(usize, GrassmannPoly)> = (0..3)
            .map(|l| (l, if nonzero && l == 2 { random_grassmann(kk, 4, 4, &mut r).add(&GrassmannPoly::generator(kk)) } else { GrassmannPoly::zero() }))
            .collect();
        match gp_uniqueness_probe(&fam) {
            ProbeResult::AllZero => complete &= !nonzero || fam[2].1.is_zero(),
            ProbeResult::Witness(l) => sound &= !fam[l].1.is_zero(),
        }
        let top: Vec<u32> = (1..=kk).collect();
        let fam = vec![(0usize, GrassmannPoly::monomial(&top, C64::new(1.0, 0.0)))];
        blind |= restricted_probe(&fam) == ProbeResult::AllZero;
        complete &= gp_uniqueness_probe(&fam) == ProbeResult::Witness(0);
    }
    rep.push(Check::flag("probe soundness", sound));
    rep.push(Check::flag("probe completeness", complete));
    rep.note(format!("variations without a fresh generator miss the top monomial: {}", blind));
    Ok(rep)
}

/// Every suite that applies to `spec`.
pub fn suite_all(spec: &ChannelSpec, grid: Grid, opts: &VerifyOptions) -> Result<Report> {
    let mut rep = Report::new("all");
    rep.extend(suite_kernels(spec, grid, opts)?);
    rep.extend(suite_wick(spec, opts)?);
    rep.extend(suite_causal(spec, opts)?);
    rep.extend(suite_grassmann(opts)?);
    Ok(rep)
}
