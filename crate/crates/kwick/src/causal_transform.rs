//! Causal variables: response substitutions for sources and fields, the
//! reordering exponent in branch and causal form, the vacuum test-case
//! functional, and the causal normal form.
//!
//! Sign conventions:
//!
//! | regime  | sources                                   | fields                              |
//! |---------|-------------------------------------------|-------------------------------------|
//! | osc     | `eta = eta+ - eta-`, `j = hb(eta+^+ + eta-^-)` | `zeta = (q+ - q-)/hb`, `q_e = q+^+ + q-^-` |
//! | semirel | `eta = eta- - eta+`, `s = hb(eta+^+ + eta-^-)`, `teta = teta+ - teta-`, `ts = hb(teta+^+ + teta-^-)` | `zeta = (psi- - psi+)/hb`, `psi_e = psi+^+ + psi-^-`, `tzeta = (tpsi+ - tpsi-)/hb`, `tpsi_e = tpsi+^+ + tpsi-^-` |
//! | nonrel  | `eta = eta- - eta+`, `s = hb eta+`, `teta = teta+ - teta-`, `ts = hb teta-` | `zeta = (psi- - psi+)/hb`, `psi_e = psi+`, `tzeta = (tpsi+ - tpsi-)/hb`, `tpsi_e = tpsi-` |

use crate::channel::{Branch, ChannelSpec, FieldKind, FieldType, Statistics};
use crate::green_kernels::{ClosedForm, Grid, GridKernels, KernelKind, KernelSource, LagOffset, Projector, Sign};
use crate::grassmann::GrassmannPoly;
use crate::poly::CPoly;
use crate::verify::{Check, Report};
use crate::{Error, Result, C64, I};
use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

/// Default degree cap of the causal route.
pub const DEFAULT_CAUSAL_CAP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Real fields, including the single oscillator.
    Osc,
    Semirel,
    Nonrel,
}

impl Regime {
    pub fn of(spec: &ChannelSpec) -> Regime {
        match (spec.field, spec.nonrel) {
            (FieldType::Real, _) => Regime::Osc,
            (FieldType::Channel, false) => Regime::Semirel,
            (FieldType::Channel, true) => Regime::Nonrel,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Osc => "osc",
            Regime::Semirel => "semirel",
            Regime::Nonrel => "nonrel",
        }
    }
}

// ---------------------------------------------------------------------------
// Functional polynomials

/// Variable families a polynomial can be written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Branch field `q+-`, `psi+-`, `tpsi+-`.
    Field(FieldKind, Branch),
    /// Single field after branch identification.
    Phys(FieldKind),
    /// `q_e`, `psi_e`, `tpsi_e`.
    Ext(FieldKind),
    /// `zeta` (for `Q` and `Psi`) or `tzeta` (for `TPsi`).
    Probe(FieldKind),
}

impl Var {
    pub fn kind(self) -> FieldKind {
        match self {
            Var::Field(k, _) | Var::Phys(k) | Var::Ext(k) | Var::Probe(k) => k,
        }
    }

    fn key(self) -> (u8, u8, u8) {
        let kind = match self.kind() {
            FieldKind::TPsi => 0,
            FieldKind::Psi => 1,
            _ => 2,
        };
        let (fam, br) = match self {
            Var::Field(_, b) => (0, b as u8),
            Var::Phys(_) => (1, 0),
            Var::Ext(_) => (2, 0),
            Var::Probe(_) => (3, 0),
        };
        (kind, fam, br)
    }
}

/// A variable at one sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub var: Var,
    pub x: usize,
    pub t: f64,
}

impl Slot {
    pub fn new(var: Var, x: usize, t: f64) -> Self {
        Slot { var, x, t }
    }

    pub fn is_odd(&self, stats: Statistics) -> bool {
        stats.is_fermi() && self.var.kind() != FieldKind::Q
    }
}

impl Eq for Slot {}

impl Ord for Slot {
    fn cmp(&self, o: &Self) -> Ordering {
        let (ka, fa, ba) = self.var.key();
        let (kb, fb, bb) = o.var.key();
        ka.cmp(&kb).then(fa.cmp(&fb)).then(self.x.cmp(&o.x)).then(self.t.total_cmp(&o.t)).then(ba.cmp(&bb))
    }
}

impl PartialOrd for Slot {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Polynomial in field samples. Monomials keep their written order until
/// [`FunctionalPolynomial::canonical`] is called.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FunctionalPolynomial {
    pub terms: Vec<(Vec<Slot>, C64)>,
}

impl FunctionalPolynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        FunctionalPolynomial { terms: vec![(Vec::new(), c)] }
    }

    pub fn push(&mut self, slots: Vec<Slot>, c: C64) {
        self.terms.push((slots, c));
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(m, _)| m.len()).max().unwrap_or(0)
    }

    /// Sorted monomials with merged coefficients. Fermionic reorderings
    /// carry their sign; repeated odd slots vanish.
    pub fn canonical(&self, stats: Statistics) -> Self {
        let mut map: BTreeMap<Vec<Slot>, C64> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (perm, s) = crate::wick_engine::canonical_sort(m, |a, b| a.cmp(b), |a| a.is_odd(stats), stats.eps());
            let sorted: Vec<Slot> = perm.iter().map(|&p| m[p]).collect();
            if stats.is_fermi() && sorted.windows(2).any(|w| w[0] == w[1] && w[0].is_odd(stats)) {
                continue;
            }
            *map.entry(sorted).or_default() += c * s;
        }
        FunctionalPolynomial { terms: map.into_iter().filter(|(_, c)| *c != C64::default()).collect() }
    }

    /// Largest coefficient difference after canonicalization.
    pub fn max_diff(&self, other: &Self, stats: Statistics) -> f64 {
        let mut d = self.clone();
        for (m, c) in &other.terms {
            d.push(m.clone(), -c);
        }
        d.canonical(stats).terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    pub fn coeff(&self, slots: &[Slot], stats: Statistics) -> C64 {
        let probe = FunctionalPolynomial { terms: vec![(slots.to_vec(), C64::new(1.0, 0.0))] }.canonical(stats);
        let Some((key, s)) = probe.terms.first() else { return C64::default() };
        let me = self.canonical(stats);
        me.terms.iter().find(|(m, _)| m == key).map(|(_, c)| c / s).unwrap_or_default()
    }
}

// ---------------------------------------------------------------------------
// Grassmann-valued signals

/// Ordered symbol sequence mapped to a coefficient. Bosonic symbols
/// commute, fermionic ones anticommute; the order is resolved on
/// conversion.
pub type RawForm = BTreeMap<Vec<u32>, C64>;

/// Signal whose samples are linear combinations of symbol monomials.
/// A plain complex signal has the single component `[]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GSignal {
    pub n: usize,
    pub comps: BTreeMap<Vec<u32>, Vec<C64>>,
}

impl GSignal {
    pub fn zero(n: usize) -> Self {
        GSignal { n, comps: BTreeMap::new() }
    }

    pub fn scalar(values: Vec<C64>) -> Self {
        let n = values.len();
        GSignal { n, comps: BTreeMap::from([(Vec::new(), values)]) }
    }

    /// `symbol * values`.
    pub fn symbol(k: u32, values: Vec<C64>) -> Self {
        let n = values.len();
        GSignal { n, comps: BTreeMap::from([(vec![k], values)]) }
    }

    /// A point source `symbol / dt` at sample `j`.
    pub fn point(n: usize, j: usize, k: u32, dt: f64) -> Self {
        let mut v = vec![C64::default(); n];
        v[j] = C64::new(1.0 / dt, 0.0);
        Self::symbol(k, v)
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.n != o.n {
            return Err(Error::GridMismatch(format!("{} vs {} samples", self.n, o.n)));
        }
        Ok(())
    }

    pub fn lincomb(&self, a: C64, o: &Self, b: C64) -> Result<Self> {
        self.check(o)?;
        let mut out = GSignal::zero(self.n);
        for (k, v) in &self.comps {
            out.comps.insert(k.clone(), v.iter().map(|z| z * a).collect());
        }
        for (k, v) in &o.comps {
            let e = out.comps.entry(k.clone()).or_insert_with(|| vec![C64::default(); o.n]);
            for (p, q) in e.iter_mut().zip(v) {
                *p += q * b;
            }
        }
        Ok(out)
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.lincomb(C64::new(1.0, 0.0), o, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.lincomb(C64::new(1.0, 0.0), o, C64::new(-1.0, 0.0))
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        for v in out.comps.values_mut() {
            for z in v.iter_mut() {
                *z *= a;
            }
        }
        out
    }

    pub fn project(&self, p: &Projector, sign: Sign) -> Result<Self> {
        if p.len() != self.n {
            return Err(Error::GridMismatch(format!("projector on {} points, signal on {}", p.len(), self.n)));
        }
        let mut out = GSignal::zero(self.n);
        for (k, v) in &self.comps {
            out.comps.insert(k.clone(), p.part(v, sign));
        }
        Ok(out)
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        match self.sub(o) {
            Ok(d) => d.comps.values().flatten().map(|z| z.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }
}

pub fn raw_add(a: &mut RawForm, b: &RawForm, s: C64) {
    for (k, v) in b {
        *a.entry(k.clone()).or_default() += v * s;
    }
}

/// Resolves symbol order with anticommuting symbols.
pub fn raw_to_grassmann(r: &RawForm) -> GrassmannPoly {
    r.iter().fold(GrassmannPoly::zero(), |acc, (k, v)| acc.add(&GrassmannPoly::monomial(k, *v)))
}

/// Resolves symbol order with commuting symbols `1..=nvars`.
pub fn raw_to_cpoly(r: &RawForm, nvars: usize, max_degree: usize) -> CPoly {
    let mut p = CPoly::zero(nvars, max_degree);
    for (k, v) in r {
        let mut e = vec![0; nvars];
        for &s in k {
            e[s as usize - 1] += 1;
        }
        p.add_term(e, *v);
    }
    p
}

/// Largest coefficient gap between two forms under the given statistics.
pub fn raw_diff(a: &RawForm, b: &RawForm, stats: Statistics) -> f64 {
    let mut d = a.clone();
    raw_add(&mut d, b, C64::new(-1.0, 0.0));
    if stats.is_fermi() {
        raw_to_grassmann(&d).max_norm()
    } else {
        let mut m: RawForm = BTreeMap::new();
        for (k, v) in d {
            let mut k = k;
            k.sort();
            *m.entry(k).or_default() += v;
        }
        m.values().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Branch and causal quadruples

/// Branch variables on one grid, one signal per x-label. Real fields leave
/// the tilde components empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPair {
    pub dt: f64,
    pub plus: Vec<GSignal>,
    pub minus: Vec<GSignal>,
    pub tplus: Vec<GSignal>,
    pub tminus: Vec<GSignal>,
}

/// Causal variables: `probe` is `eta` (sources) or `zeta` (fields); `ext`
/// is `j_e`/`sigma_e` or `q_e`/`psi_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalPair {
    pub dt: f64,
    pub probe: Vec<GSignal>,
    pub ext: Vec<GSignal>,
    pub tprobe: Vec<GSignal>,
    pub text: Vec<GSignal>,
}

pub type BranchSources = BranchPair;
pub type CausalSources = CausalPair;
pub type BranchFields = BranchPair;
pub type CausalFields = CausalPair;

impl BranchPair {
    pub fn n(&self) -> usize {
        self.plus.first().map(|s| s.n).unwrap_or(0)
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        let all = |a: &Self| [a.plus.clone(), a.minus.clone(), a.tplus.clone(), a.tminus.clone()].concat();
        let (x, y) = (all(self), all(o));
        if x.len() != y.len() {
            return f64::INFINITY;
        }
        x.iter().zip(&y).map(|(p, q)| p.max_diff(q)).fold(0.0, f64::max)
    }
}

fn grid_of(n: usize) -> Result<Projector> {
    Projector::new(n)
}

fn zip_map(a: &[GSignal], b: &[GSignal], f: impl Fn(&GSignal, &GSignal) -> Result<GSignal>) -> Result<Vec<GSignal>> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch("label counts differ".into()));
    }
    a.iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

/// `hb (a^(+) + b^(-))`
fn ext_part(p: &Projector, a: &GSignal, b: &GSignal, hb: f64) -> Result<GSignal> {
    Ok(a.project(p, Sign::Plus)?.add(&b.project(p, Sign::Minus)?)?.scale(hb))
}

/// `s / hb + k x^(sign)`
fn back(p: &Projector, s: &GSignal, x: &GSignal, hb: f64, k: f64, sign: Sign) -> Result<GSignal> {
    s.scale(1.0 / hb).add(&x.project(p, sign)?.scale(k))
}

fn check_shape(regime: Regime, b: &BranchPair) -> Result<()> {
    let n = b.n();
    let tilde = regime != Regime::Osc;
    if b.minus.len() != b.plus.len() || (tilde && (b.tplus.len() != b.plus.len() || b.tminus.len() != b.plus.len())) {
        return Err(Error::Shape("branch components cover different labels".into()));
    }
    for s in b.plus.iter().chain(&b.minus).chain(&b.tplus).chain(&b.tminus) {
        if s.n != n {
            return Err(Error::GridMismatch(format!("{} vs {} samples", s.n, n)));
        }
    }
    Ok(())
}

/// Branch sources to causal sources.
pub fn to_causal_sources(regime: Regime, hbar: f64, s: &BranchSources) -> Result<CausalSources> {
    check_shape(regime, s)?;
    let p = grid_of(s.n())?;
    let hb = hbar;
    Ok(match regime {
        Regime::Osc => CausalPair {
            dt: s.dt,
            probe: zip_map(&s.plus, &s.minus, |a, b| a.sub(b))?,
            ext: zip_map(&s.plus, &s.minus, |a, b| ext_part(&p, a, b, hb))?,
            tprobe: Vec::new(),
            text: Vec::new(),
        },
        Regime::Semirel => CausalPair {
            dt: s.dt,
            probe: zip_map(&s.minus, &s.plus, |a, b| a.sub(b))?,
            ext: zip_map(&s.plus, &s.minus, |a, b| ext_part(&p, a, b, hb))?,
            tprobe: zip_map(&s.tplus, &s.tminus, |a, b| a.sub(b))?,
            text: zip_map(&s.tplus, &s.tminus, |a, b| ext_part(&p, a, b, hb))?,
        },
        Regime::Nonrel => CausalPair {
            dt: s.dt,
            probe: zip_map(&s.minus, &s.plus, |a, b| a.sub(b))?,
            ext: s.plus.iter().map(|a| a.scale(hb)).collect(),
            tprobe: zip_map(&s.tplus, &s.tminus, |a, b| a.sub(b))?,
            text: s.tminus.iter().map(|a| a.scale(hb)).collect(),
        },
    })
}

/// Inverse of [`to_causal_sources`].
pub fn from_causal_sources(regime: Regime, hbar: f64, c: &CausalSources) -> Result<BranchSources> {
    let n = c.probe.first().map(|s| s.n).unwrap_or(0);
    let p = grid_of(n)?;
    let hb = hbar;
    Ok(match regime {
        Regime::Osc => BranchPair {
            dt: c.dt,
            plus: zip_map(&c.ext, &c.probe, |j, e| back(&p, j, e, hb, 1.0, Sign::Minus))?,
            minus: zip_map(&c.ext, &c.probe, |j, e| back(&p, j, e, hb, -1.0, Sign::Plus))?,
            tplus: Vec::new(),
            tminus: Vec::new(),
        },
        Regime::Semirel => BranchPair {
            dt: c.dt,
            plus: zip_map(&c.ext, &c.probe, |j, e| back(&p, j, e, hb, -1.0, Sign::Minus))?,
            minus: zip_map(&c.ext, &c.probe, |j, e| back(&p, j, e, hb, 1.0, Sign::Plus))?,
            tplus: zip_map(&c.text, &c.tprobe, |j, e| back(&p, j, e, hb, 1.0, Sign::Minus))?,
            tminus: zip_map(&c.text, &c.tprobe, |j, e| back(&p, j, e, hb, -1.0, Sign::Plus))?,
        },
        Regime::Nonrel => {
            let plus: Vec<GSignal> = c.ext.iter().map(|s| s.scale(1.0 / hb)).collect();
            let tminus: Vec<GSignal> = c.text.iter().map(|s| s.scale(1.0 / hb)).collect();
            BranchPair {
                dt: c.dt,
                minus: zip_map(&c.probe, &plus, |e, a| e.add(a))?,
                tplus: zip_map(&c.tprobe, &tminus, |e, a| e.add(a))?,
                plus,
                tminus,
            }
        }
    })
}

/// Branch fields to causal fields.
pub fn to_causal_fields(regime: Regime, hbar: f64, f: &BranchFields) -> Result<CausalFields> {
    check_shape(regime, f)?;
    let p = grid_of(f.n())?;
    let k = 1.0 / hbar;
    let diff = |a: &GSignal, b: &GSignal| Ok(a.sub(b)?.scale(k));
    Ok(match regime {
        Regime::Osc => CausalPair {
            dt: f.dt,
            probe: zip_map(&f.plus, &f.minus, diff)?,
            ext: zip_map(&f.plus, &f.minus, |a, b| ext_part(&p, a, b, 1.0))?,
            tprobe: Vec::new(),
            text: Vec::new(),
        },
        Regime::Semirel => CausalPair {
            dt: f.dt,
            probe: zip_map(&f.minus, &f.plus, diff)?,
            ext: zip_map(&f.plus, &f.minus, |a, b| ext_part(&p, a, b, 1.0))?,
            tprobe: zip_map(&f.tplus, &f.tminus, diff)?,
            text: zip_map(&f.tplus, &f.tminus, |a, b| ext_part(&p, a, b, 1.0))?,
        },
        Regime::Nonrel => CausalPair {
            dt: f.dt,
            probe: zip_map(&f.minus, &f.plus, diff)?,
            ext: f.plus.clone(),
            tprobe: zip_map(&f.tplus, &f.tminus, diff)?,
            text: f.tminus.clone(),
        },
    })
}

/// Inverse of [`to_causal_fields`].
pub fn from_causal_fields(regime: Regime, hbar: f64, c: &CausalFields) -> Result<BranchFields> {
    let n = c.probe.first().map(|s| s.n).unwrap_or(0);
    let p = grid_of(n)?;
    // e + k hb z^(sign), written through `back` with unit hbar on e
    let part = |e: &GSignal, z: &GSignal, k: f64, sign: Sign| back(&p, e, &z.scale(hbar), 1.0, k, sign);
    Ok(match regime {
        Regime::Osc => BranchPair {
            dt: c.dt,
            plus: zip_map(&c.ext, &c.probe, |e, z| part(e, z, 1.0, Sign::Minus))?,
            minus: zip_map(&c.ext, &c.probe, |e, z| part(e, z, -1.0, Sign::Plus))?,
            tplus: Vec::new(),
            tminus: Vec::new(),
        },
        Regime::Semirel => BranchPair {
            dt: c.dt,
            plus: zip_map(&c.ext, &c.probe, |e, z| part(e, z, -1.0, Sign::Minus))?,
            minus: zip_map(&c.ext, &c.probe, |e, z| part(e, z, 1.0, Sign::Plus))?,
            tplus: zip_map(&c.text, &c.tprobe, |e, z| part(e, z, 1.0, Sign::Minus))?,
            tminus: zip_map(&c.text, &c.tprobe, |e, z| part(e, z, -1.0, Sign::Plus))?,
        },
        Regime::Nonrel => BranchPair {
            dt: c.dt,
            plus: c.ext.clone(),
            minus: zip_map(&c.ext, &c.probe, |e, z| e.add(&z.scale(hbar)))?,
            tplus: zip_map(&c.text, &c.tprobe, |e, z| e.add(&z.scale(hbar)))?,
            tminus: c.text.clone(),
        },
    })
}

// ---------------------------------------------------------------------------
// Reordering exponent

/// Lag samples `K(k dt)` for `k = -(n-1) ..= n-1`.
fn lag_table(src: &dyn KernelSource, kind: KernelKind, x: usize, xp: usize, n: usize, dt: f64) -> Vec<C64> {
    (0..2 * n - 1).map(|k| src.eval(kind, x, xp, (k as f64 - (n - 1) as f64) * dt)).collect()
}

/// `sum_ij f_i K(t_i - t_j) g_j dt^2`, keeping the symbol order `f` then `g`.
fn quad(f: &GSignal, lags: &[C64], g: &GSignal, dt: f64) -> RawForm {
    let n = f.n;
    let mut out = RawForm::new();
    let mut kg = vec![C64::default(); n];
    for (kb, gv) in &g.comps {
        if gv.iter().all(|z| *z == C64::default()) {
            continue;
        }
        for (i, slot) in kg.iter_mut().enumerate() {
            *slot = (0..n).map(|j| lags[i + n - 1 - j] * gv[j]).sum();
        }
        for (ka, fv) in &f.comps {
            let s: C64 = fv.iter().zip(&kg).map(|(a, b)| a * b).sum::<C64>() * dt * dt;
            if s != C64::default() {
                let key = [ka.clone(), kb.clone()].concat();
                *out.entry(key).or_default() += s;
            }
        }
    }
    out
}

/// Accumulates `coef * sum_x,x' f_x K(x,x') g_x'`.
fn quad_all(acc: &mut RawForm, coef: C64, f: &[GSignal], src: &dyn KernelSource, kind: KernelKind, g: &[GSignal], dt: f64) {
    for (x, fx) in f.iter().enumerate() {
        for (xp, gx) in g.iter().enumerate() {
            if fx.comps.is_empty() || gx.comps.is_empty() {
                continue;
            }
            let lags = lag_table(src, kind, x, xp, fx.n, dt);
            raw_add(acc, &quad(fx, &lags, gx, dt), coef);
        }
    }
}

/// Source family of a branch exponent term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Plus,
    Minus,
    TPlus,
    TMinus,
}

fn role_of(s: &BranchSources, r: Role) -> &[GSignal] {
    match r {
        Role::Plus => &s.plus,
        Role::Minus => &s.minus,
        Role::TPlus => &s.tplus,
        Role::TMinus => &s.tminus,
    }
}

/// Terms `coef * f K g` of the branch exponent.
fn branch_terms(spec: &ChannelSpec) -> Vec<(C64, Role, KernelKind, Role)> {
    let hb = spec.hbar;
    match spec.field {
        FieldType::Real => {
            let c = -I * hb / 2.0;
            vec![
                (-c, Role::Plus, KernelKind::GF, Role::Plus),
                (c, Role::Minus, KernelKind::GFStar, Role::Minus),
                (2.0 * c, Role::Minus, KernelKind::GPlus, Role::Plus),
            ]
        }
        FieldType::Channel => {
            let c = I * hb;
            vec![
                (c, Role::TPlus, KernelKind::DeltaF, Role::Plus),
                (-c, Role::TMinus, KernelKind::DeltaTildeF, Role::Minus),
                (-c, Role::TMinus, KernelKind::DeltaPlus, Role::Plus),
                (c, Role::TPlus, KernelKind::DeltaMinus, Role::Minus),
            ]
        }
    }
}

/// Source family coupled to a field operator: `tpsi` and `Q` couple to
/// `eta`, `psi` to `teta`.
fn point_role(p: &crate::FieldOp) -> Result<Role> {
    Ok(match (p.kind, p.branch) {
        (FieldKind::Q | FieldKind::TPsi, Branch::Plus) => Role::Plus,
        (FieldKind::Q | FieldKind::TPsi, Branch::Minus) => Role::Minus,
        (FieldKind::Psi, Branch::Plus) => Role::TPlus,
        (FieldKind::Psi, Branch::Minus) => Role::TMinus,
        _ => return Err(Error::Statistics(format!("{} takes no source", p.kind.name()))),
    })
}

/// Exponent `E` of the vacuum functional `exp(E)` in branch sources:
/// `Z_C(i eta+, -i eta-)` for real fields and
/// `eps Z_C(i teta+, i eta+, -i teta-, -i eta-)` for channels.
pub fn z_form_eval(spec: &ChannelSpec, src: &dyn KernelSource, s: &BranchSources) -> Result<RawForm> {
    let regime = Regime::of(spec);
    check_shape(regime, s)?;
    if s.plus.len() != spec.nx() {
        return Err(Error::Shape(format!("sources cover {} labels, spec has {}", s.plus.len(), spec.nx())));
    }
    let mut e = RawForm::new();
    for (coef, f, kind, g) in branch_terms(spec) {
        quad_all(&mut e, coef, role_of(s, f), src, kind, role_of(s, g), s.dt);
    }
    Ok(e)
}

/// The exponent for unit point sources: symbol `k + 1` couples to
/// `points[k]`. Times need not lie on a grid.
pub fn z_form_points(spec: &ChannelSpec, src: &dyn KernelSource, points: &[crate::FieldOp]) -> Result<RawForm> {
    let roles: Vec<Role> = points
        .iter()
        .map(|p| {
            spec.check_kind(p.kind)?;
            if p.x >= spec.nx() {
                return Err(Error::UnknownLabel(format!("label index {}", p.x)));
            }
            point_role(p)
        })
        .collect::<Result<_>>()?;
    let mut e = RawForm::new();
    for (coef, f, kind, g) in branch_terms(spec) {
        for (a, pa) in points.iter().enumerate() {
            if roles[a] != f {
                continue;
            }
            for (b, pb) in points.iter().enumerate() {
                if roles[b] != g {
                    continue;
                }
                let v = coef * src.eval(kind, pa.x, pb.x, pa.t - pb.t);
                *e.entry(vec![a as u32 + 1, b as u32 + 1]).or_default() += v;
            }
        }
    }
    Ok(e)
}

/// The same exponent in causal sources: `i eta G_R j_e` for real fields
/// and `i (teta Delta_R s_e - ts_e tDelta_R eta)` for channels.
pub fn causal_form_eval(spec: &ChannelSpec, src: &dyn KernelSource, c: &CausalSources) -> Result<RawForm> {
    let dt = c.dt;
    let mut e = RawForm::new();
    match spec.field {
        FieldType::Real => quad_all(&mut e, I, &c.probe, src, KernelKind::GR, &c.ext, dt),
        FieldType::Channel => {
            quad_all(&mut e, I, &c.tprobe, src, KernelKind::DeltaR, &c.ext, dt);
            quad_all(&mut e, -I, &c.text, src, KernelKind::DeltaTildeR, &c.probe, dt);
        }
    }
    Ok(e)
}

/// Compares the branch exponent against the causal one for sources given
/// in causal variables.
pub fn verify_bilinear_identity(spec: &ChannelSpec, src: &dyn KernelSource, c: &CausalSources, tol: f64) -> Result<Report> {
    let regime = Regime::of(spec);
    let b = from_causal_sources(regime, spec.hbar, c)?;
    let lhs = z_form_eval(spec, src, &b)?;
    let rhs = causal_form_eval(spec, src, c)?;
    let mut r = Report::new("bilinear");
    r.push(Check::new(format!("{}: branch form = causal form", regime.name()), raw_diff(&lhs, &rhs, spec.statistics), tol));
    Ok(r)
}

/// Linear forms `eta+ q+ - eta- q-` and `j_e zeta + eta q_e` (real field).
pub fn linear_forms(s: &BranchSources, f: &BranchFields, cs: &CausalSources, cf: &CausalFields) -> (RawForm, RawForm) {
    let dot = |a: &[GSignal], b: &[GSignal], acc: &mut RawForm, sign: f64| {
        for (x, y) in a.iter().zip(b) {
            for (ka, va) in &x.comps {
                for (kb, vb) in &y.comps {
                    let v: C64 = va.iter().zip(vb).map(|(p, q)| p * q).sum::<C64>() * s.dt * sign;
                    *acc.entry([ka.clone(), kb.clone()].concat()).or_default() += v;
                }
            }
        }
    };
    let mut l = RawForm::new();
    dot(&s.plus, &f.plus, &mut l, 1.0);
    dot(&s.minus, &f.minus, &mut l, -1.0);
    let mut r = RawForm::new();
    dot(&cs.ext, &cf.probe, &mut r, 1.0);
    dot(&cs.probe, &cf.ext, &mut r, 1.0);
    (l, r)
}

// ---------------------------------------------------------------------------
// Vacuum test-case functional

/// `exp(E)` of the branch exponent; the exponential truncates by
/// nilpotency for anticommuting symbols.
pub fn phi_vac_closed_form(spec: &ChannelSpec, src: &dyn KernelSource, s: &BranchSources) -> Result<GrassmannPoly> {
    Ok(raw_to_grassmann(&z_form_eval(spec, src, s)?).exp())
}

/// `exp(E)` of the causal exponent.
pub fn phi_vac_causal(spec: &ChannelSpec, src: &dyn KernelSource, c: &CausalSources) -> Result<GrassmannPoly> {
    Ok(raw_to_grassmann(&causal_form_eval(spec, src, c)?).exp())
}

/// Bosonic Taylor polynomial of `exp(E)` in commuting symbols `1..=nvars`.
pub fn phi_vac_taylor(spec: &ChannelSpec, src: &dyn KernelSource, s: &BranchSources, nvars: usize, order: usize) -> Result<CPoly> {
    if spec.statistics.is_fermi() {
        return Err(Error::Statistics("commuting Taylor expansion needs bosons".into()));
    }
    Ok(raw_to_cpoly(&z_form_eval(spec, src, s)?, nvars, order).exp())
}

/// Point sources on a grid: source `k + 1` sits at `points[k]`. The
/// source variable is the one coupled to the point's field.
pub fn point_sources(spec: &ChannelSpec, grid: &Grid, points: &[crate::FieldOp]) -> Result<BranchSources> {
    let n = grid.n;
    let nx = spec.nx();
    let tilde = spec.field == FieldType::Channel;
    let blank = || vec![GSignal::zero(n); nx];
    let mut s = BranchPair {
        dt: grid.dt,
        plus: blank(),
        minus: blank(),
        tplus: if tilde { blank() } else { Vec::new() },
        tminus: if tilde { blank() } else { Vec::new() },
    };
    for (k, p) in points.iter().enumerate() {
        spec.check_kind(p.kind)?;
        let j = grid.index_of(p.t).ok_or_else(|| Error::GridMismatch(format!("time {} is off the grid", p.t)))?;
        let src = GSignal::point(n, j, k as u32 + 1, grid.dt);
        let target = match point_role(p)? {
            Role::Plus => &mut s.plus,
            Role::Minus => &mut s.minus,
            Role::TPlus => &mut s.tplus,
            Role::TMinus => &mut s.tminus,
        };
        target[p.x] = target[p.x].add(&src)?;
    }
    Ok(s)
}

/// Substitutes the symbols of `r` by Grassmann elements `subs[k - 1]`,
/// in the written order.
pub fn raw_substitute(r: &RawForm, subs: &[GrassmannPoly]) -> GrassmannPoly {
    let mut out = GrassmannPoly::zero();
    for (k, c) in r {
        let mut g = GrassmannPoly::scalar(*c);
        for &s in k {
            g = g.mul(&subs[s as usize - 1]);
        }
        out = out.add(&g);
    }
    out
}

// ---------------------------------------------------------------------------
// Causal normal form

/// Kernel provider for both routes.
#[derive(Debug, Clone)]
pub enum KernelBackend {
    Closed(ClosedForm),
    Grid(GridKernels),
}

impl KernelBackend {
    /// Grid kernels at integer lags for osc and semirel specs, exact
    /// kernels for nonrel channels.
    pub fn for_spec(spec: &ChannelSpec, grid: Grid) -> Result<Self> {
        Ok(match Regime::of(spec) {
            Regime::Nonrel => KernelBackend::Closed(ClosedForm::new(spec)),
            _ => KernelBackend::Grid(GridKernels::new(spec, grid, LagOffset::Integer)?),
        })
    }
}

impl KernelSource for KernelBackend {
    fn spec(&self) -> &ChannelSpec {
        match self {
            KernelBackend::Closed(c) => &c.spec,
            KernelBackend::Grid(g) => &g.spec,
        }
    }

    fn eval(&self, kind: KernelKind, x: usize, xp: usize, tau: f64) -> C64 {
        match self {
            KernelBackend::Closed(c) => c.eval(kind, x, xp, tau),
            KernelBackend::Grid(g) => g.eval(kind, x, xp, tau),
        }
    }
}

/// Frequency parts of retarded kernels, computed on demand.
struct Retarded<'a> {
    backend: &'a KernelBackend,
    cache: RefCell<HashMap<(KernelKind, bool, usize, usize), Vec<C64>>>,
}

impl<'a> Retarded<'a> {
    fn value(&self, kind: KernelKind, sign: Option<Sign>, x: usize, xp: usize, tau: f64) -> Result<C64> {
        match (sign, self.backend) {
            (None, b) => Ok(b.eval(kind, x, xp, tau)),
            (Some(_), KernelBackend::Closed(_)) => Err(Error::GridMismatch("projected kernels need a grid backend".into())),
            (Some(s), KernelBackend::Grid(g)) => {
                let key = (kind, s == Sign::Plus, x, xp);
                let j = g.lag_index(tau);
                if let Some(v) = self.cache.borrow().get(&key) {
                    return Ok(v[j]);
                }
                let v = g.projected(kind, s, x, xp);
                let out = v[j];
                self.cache.borrow_mut().insert(key, v);
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Part {
    slot: Slot,
    coeff: f64,
    /// Projector carried by a probe part.
    tag: Option<Sign>,
}

fn parts(regime: Regime, hb: f64, s: &Slot) -> Result<[Part; 2]> {
    let Var::Field(kind, br) = s.var else {
        return Err(Error::Shape("expected branch fields".into()));
    };
    use Branch::{Minus, Plus};
    use FieldKind::{Psi, TPsi, Q};
    // (sign of hb zeta, projector tag)
    let (k, tag) = match (regime, kind, br) {
        (Regime::Osc, Q, Plus) => (1.0, Some(Sign::Minus)),
        (Regime::Osc, Q, Minus) => (-1.0, Some(Sign::Plus)),
        (Regime::Semirel, Psi, Plus) => (-1.0, Some(Sign::Minus)),
        (Regime::Semirel, Psi, Minus) => (1.0, Some(Sign::Plus)),
        (Regime::Semirel, TPsi, Plus) => (1.0, Some(Sign::Minus)),
        (Regime::Semirel, TPsi, Minus) => (-1.0, Some(Sign::Plus)),
        (Regime::Nonrel, Psi, Plus) => (0.0, None),
        (Regime::Nonrel, Psi, Minus) => (1.0, None),
        (Regime::Nonrel, TPsi, Plus) => (1.0, None),
        (Regime::Nonrel, TPsi, Minus) => (0.0, None),
        _ => return Err(Error::Statistics(format!("{} does not belong to the {} regime", kind.name(), regime.name()))),
    };
    Ok([
        Part { slot: Slot::new(Var::Ext(kind), s.x, s.t), coeff: 1.0, tag: None },
        Part { slot: Slot::new(Var::Probe(kind), s.x, s.t), coeff: k * hb, tag },
    ])
}

/// Applies the exponential of the retarded derivative form to `f` (branch
/// fields), sets the probes to zero and reads the external fields as the
/// physical field values.
pub fn causal_normal_form(f: &FunctionalPolynomial, backend: &KernelBackend, cap: usize) -> Result<FunctionalPolynomial> {
    let spec = backend.spec().clone();
    let regime = Regime::of(&spec);
    let stats = spec.statistics;
    let eps = spec.eps();
    let ret = Retarded { backend, cache: RefCell::new(HashMap::new()) };
    let mut out = FunctionalPolynomial::new();
    for (mono, c) in &f.terms {
        if mono.len() > cap {
            return Err(Error::Cap("degree", cap));
        }
        let options: Vec<[Part; 2]> = mono.iter().map(|s| parts(regime, spec.hbar, s)).collect::<Result<_>>()?;
        let m = mono.len();
        for choice in 0u32..(1 << m) {
            let chosen: Vec<Part> = (0..m).map(|k| options[k][((choice >> k) & 1) as usize]).collect();
            if chosen.iter().any(|p| p.coeff == 0.0) {
                continue;
            }
            let base: f64 = chosen.iter().map(|p| p.coeff).product();
            let probes: Vec<usize> = (0..m).filter(|&k| matches!(chosen[k].slot.var, Var::Probe(_))).collect();
            let mut used = vec![false; m];
            let mut pairs: Vec<(usize, usize, C64)> = Vec::new();
            match_probes(&chosen, &probes, 0, &mut used, &mut pairs, &ret, eps, &mut |pairs| {
                let mut alive = vec![true; m];
                let mut sign = 1.0;
                let mut w = C64::new(base, 0.0) * c;
                for &(xk, yk, v) in pairs {
                    for pos in [yk, xk] {
                        let before = (0..pos).filter(|&q| alive[q] && chosen[q].slot.is_odd(stats)).count();
                        if before % 2 == 1 {
                            sign *= eps;
                        }
                        alive[pos] = false;
                    }
                    w *= v;
                }
                let rest: Vec<Slot> = (0..m)
                    .filter(|&q| alive[q])
                    .map(|q| Slot::new(Var::Phys(chosen[q].slot.var.kind()), chosen[q].slot.x, chosen[q].slot.t))
                    .collect();
                out.push(rest, w * sign);
                Ok(())
            })?;
        }
    }
    Ok(out.canonical(stats))
}

/// Pairs every probe with a distinct external part. Each entry is
/// `(X position, Y position, weight)` for the derivative pair `d_X d_Y`.
#[allow(clippy::too_many_arguments)]
fn match_probes(
    chosen: &[Part],
    probes: &[usize],
    k: usize,
    used: &mut Vec<bool>,
    pairs: &mut Vec<(usize, usize, C64)>,
    ret: &Retarded,
    eps: f64,
    emit: &mut dyn FnMut(&[(usize, usize, C64)]) -> Result<()>,
) -> Result<()> {
    if k == probes.len() {
        return emit(pairs);
    }
    let a = probes[k];
    let pa = chosen[a];
    let Var::Probe(pk) = pa.slot.var else { unreachable!() };
    let want = match pk {
        FieldKind::Q => FieldKind::Q,
        FieldKind::TPsi => FieldKind::Psi,
        _ => FieldKind::TPsi,
    };
    for b in 0..chosen.len() {
        if used[b] || chosen[b].slot.var != Var::Ext(want) {
            continue;
        }
        let sb = chosen[b].slot;
        let sa = pa.slot;
        let bar = pa.tag.map(Sign::flip);
        let (x, y, v) = match pk {
            FieldKind::Q => (b, a, -I * ret.value(KernelKind::GR, bar, sb.x, sa.x, sb.t - sa.t)?),
            FieldKind::TPsi => (b, a, -I * eps * ret.value(KernelKind::DeltaR, bar, sb.x, sa.x, sb.t - sa.t)?),
            _ => (a, b, I * eps * ret.value(KernelKind::DeltaTildeR, pa.tag, sa.x, sb.x, sa.t - sb.t)?),
        };
        used[b] = true;
        pairs.push((x, y, v));
        match_probes(chosen, probes, k + 1, used, pairs, ret, eps, emit)?;
        pairs.pop();
        used[b] = false;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Derivative transport on explicit matrices

type Mat = Vec<Vec<C64>>;

fn mat_zero(r: usize, c: usize) -> Mat {
    vec![vec![C64::default(); c]; r]
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    let mut out = mat_zero(r, c);
    for i in 0..r {
        for l in 0..k {
            let x = a[i][l];
            if x == C64::default() {
                continue;
            }
            for j in 0..c {
                out[i][j] += x * b[l][j];
            }
        }
    }
    out
}

fn mat_t(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn mat_err(a: &Mat, b: &Mat) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Flattens one block family `(x, j)` into vector positions.
fn flatten(groups: &[&Vec<GSignal>]) -> Vec<C64> {
    groups.iter().flat_map(|g| g.iter().flat_map(|s| s.comps.get(&Vec::new()).cloned().unwrap_or_else(|| vec![C64::default(); s.n]))).collect()
}

fn unit_pair(blocks: usize, nx: usize, n: usize, pos: usize) -> Vec<Vec<GSignal>> {
    let mut out = vec![vec![GSignal::scalar(vec![C64::default(); n]); nx]; blocks];
    let (b, rest) = (pos / (nx * n), pos % (nx * n));
    let (x, j) = (rest / n, rest % n);
    out[b][x].comps.get_mut(&Vec::new()).unwrap()[j] = C64::new(1.0, 0.0);
    out
}

/// Matrix of a linear map given by its action on unit vectors.
fn linear_matrix(dim: usize, apply: impl Fn(usize) -> Result<Vec<C64>>) -> Result<Mat> {
    let cols: Vec<Vec<C64>> = (0..dim).map(apply).collect::<Result<_>>()?;
    Ok((0..dim).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Block matrix `coef dt^2 K(x, x', t_i - t_j)`.
fn kernel_block(src: &dyn KernelSource, kind: KernelKind, nx: usize, n: usize, dt: f64, coef: C64) -> Mat {
    let mut m = mat_zero(nx * n, nx * n);
    for x in 0..nx {
        for xp in 0..nx {
            let lags = lag_table(src, kind, x, xp, n, dt);
            for i in 0..n {
                for j in 0..n {
                    m[x * n + i][xp * n + j] = coef * dt * dt * lags[i + n - 1 - j];
                }
            }
        }
    }
    m
}

fn place(m: &mut Mat, block: &Mat, r0: usize, c0: usize) {
    for (i, row) in block.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[r0 + i][c0 + j] += v;
        }
    }
}

/// Builds the source substitution as explicit matrices on a small grid and
/// checks that the branch bilinear form transports to the causal one.
/// Osc and semirel forms are compared on the band without the zero and
/// Nyquist bins.
pub fn derivative_transport_check(spec: &ChannelSpec, n: usize, tol: f64) -> Result<Report> {
    spec.validate()?;
    let regime = Regime::of(spec);
    let mut grid = Grid::default_for(spec);
    grid.n = n;
    grid.t0 = -(n as f64) * grid.dt / 2.0;
    let backend = KernelBackend::for_spec(spec, grid)?;
    let (nx, dt, hb) = (spec.nx(), grid.dt, spec.hbar);
    let blk = nx * n;
    let mut report = Report::new("transport");

    let to_pair = |v: Vec<Vec<GSignal>>, causal: bool| -> (BranchPair, CausalPair) {
        let mut v = v.into_iter();
        let mut nxt = || v.next().unwrap_or_default();
        let (a, b, c, d) = (nxt(), nxt(), nxt(), nxt());
        if causal {
            (BranchPair { dt, plus: vec![], minus: vec![], tplus: vec![], tminus: vec![] }, CausalPair { dt, probe: a, ext: b, tprobe: c, text: d })
        } else {
            (BranchPair { dt, plus: a, minus: b, tplus: c, tminus: d }, CausalPair { dt, probe: vec![], ext: vec![], tprobe: vec![], text: vec![] })
        }
    };

    // identity minus the zero and Nyquist bins
    let band_block: Mat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let alt = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    C64::new((i == j) as u8 as f64 - (1.0 + alt) / n as f64, 0.0)
                })
                .collect()
        })
        .collect();
    let band = |blocks: usize| -> Mat {
        let mut m = mat_zero(blocks * blk, blocks * blk);
        if regime == Regime::Nonrel {
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = C64::new(1.0, 0.0);
            }
            return m;
        }
        for b in 0..blocks * nx {
            place(&mut m, &band_block, b * n, b * n);
        }
        m
    };

    match spec.field {
        FieldType::Real => {
            let dim = 2 * blk;
            let s = linear_matrix(dim, |k| {
                let (_, c) = to_pair(unit_pair(2, nx, n, k), true);
                let b = from_causal_sources(regime, hb, &c)?;
                Ok(flatten(&[&b.plus, &b.minus]))
            })?;
            let sinv = linear_matrix(dim, |k| {
                let (b, _) = to_pair(unit_pair(2, nx, n, k), false);
                let c = to_causal_sources(regime, hb, &b)?;
                Ok(flatten(&[&c.probe, &c.ext]))
            })?;
            let id: Mat = (0..dim).map(|i| (0..dim).map(|j| C64::new((i == j) as u8 as f64, 0.0)).collect()).collect();
            report.push(Check::new("S S^-1 = 1", mat_err(&mat_mul(&s, &sinv), &id), 1e-10));

            // E = v^T Z v with v = (eta+, eta-)
            let c = -I * hb / 2.0;
            let mut z = mat_zero(dim, dim);
            place(&mut z, &kernel_block(&backend, KernelKind::GF, nx, n, dt, -c), 0, 0);
            place(&mut z, &kernel_block(&backend, KernelKind::GFStar, nx, n, dt, c), blk, blk);
            let gp = kernel_block(&backend, KernelKind::GPlus, nx, n, dt, c);
            place(&mut z, &gp, blk, 0);
            place(&mut z, &mat_t(&gp), 0, blk);
            // E = c^T R c with c = (eta, j_e)
            let mut r = mat_zero(dim, dim);
            let gr = kernel_block(&backend, KernelKind::GR, nx, n, dt, I / 2.0);
            place(&mut r, &gr, 0, blk);
            place(&mut r, &mat_t(&gr), blk, 0);
            let bm = band(2);
            let lhs = mat_mul(&mat_t(&bm), &mat_mul(&mat_mul(&mat_t(&s), &mat_mul(&z, &s)), &bm));
            let rhs = mat_mul(&mat_t(&bm), &mat_mul(&r, &bm));
            report.push(Check::new("S^T Z S = R", mat_err(&lhs, &rhs), tol));
            // no eta-eta or j-j couplings in causal form
            let diag: f64 = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).filter(|&(i, j)| (i < blk) == (j < blk)).map(|(i, j)| lhs[i][j].norm()).fold(0.0, f64::max);
            report.push(Check::new("causal form is mixed only", diag, tol));

            // linear forms: S^T J T = K
            let t = linear_matrix(dim, |k| {
                let (_, c) = to_pair(unit_pair(2, nx, n, k), true);
                let b = from_causal_fields(regime, hb, &c)?;
                Ok(flatten(&[&b.plus, &b.minus]))
            })?;
            let mut j = mat_zero(dim, dim);
            let mut kk = mat_zero(dim, dim);
            for i in 0..blk {
                j[i][i] = C64::new(1.0, 0.0);
                j[blk + i][blk + i] = C64::new(-1.0, 0.0);
                kk[i][blk + i] = C64::new(1.0, 0.0);
                kk[blk + i][i] = C64::new(1.0, 0.0);
            }
            let lin = mat_mul(&mat_t(&s), &mat_mul(&j, &t));
            report.push(Check::new("linear form transport", mat_err(&lin, &kk), 1e-10));
        }
        FieldType::Channel => {
            let dim = 2 * blk;
            // untilded: (eta+, eta-) <- (eta, s_e); tilded: (teta+, teta-) <- (teta, ts_e)
            let col = |k: usize, tilde: bool| -> Result<Vec<C64>> {
                let mut v = unit_pair(2, nx, n, k);
                let zero = vec![GSignal::scalar(vec![C64::default(); n]); nx];
                let c = if tilde {
                    CausalPair { dt, probe: zero.clone(), ext: zero, tprobe: v.remove(0), text: v.remove(0) }
                } else {
                    CausalPair { dt, probe: v.remove(0), ext: v.remove(0), tprobe: zero.clone(), text: zero }
                };
                let b = from_causal_sources(regime, hb, &c)?;
                Ok(if tilde { flatten(&[&b.tplus, &b.tminus]) } else { flatten(&[&b.plus, &b.minus]) })
            };
            let s = linear_matrix(dim, |k| col(k, false))?;
            let st = linear_matrix(dim, |k| col(k, true))?;
            let sinv = linear_matrix(dim, |k| {
                let mut v = unit_pair(2, nx, n, k);
                let zero = vec![GSignal::scalar(vec![C64::default(); n]); nx];
                let b = BranchPair { dt, plus: v.remove(0), minus: v.remove(0), tplus: zero.clone(), tminus: zero };
                let c = to_causal_sources(regime, hb, &b)?;
                Ok(flatten(&[&c.probe, &c.ext]))
            })?;
            let id: Mat = (0..dim).map(|i| (0..dim).map(|j| C64::new((i == j) as u8 as f64, 0.0)).collect()).collect();
            report.push(Check::new("S S^-1 = 1", mat_err(&mat_mul(&s, &sinv), &id), 1e-10));

            let c = I * hb;
            let mut z = mat_zero(dim, dim);
            place(&mut z, &kernel_block(&backend, KernelKind::DeltaF, nx, n, dt, c), 0, 0);
            place(&mut z, &kernel_block(&backend, KernelKind::DeltaMinus, nx, n, dt, c), 0, blk);
            place(&mut z, &kernel_block(&backend, KernelKind::DeltaPlus, nx, n, dt, -c), blk, 0);
            place(&mut z, &kernel_block(&backend, KernelKind::DeltaTildeF, nx, n, dt, -c), blk, blk);
            let mut r = mat_zero(dim, dim);
            place(&mut r, &kernel_block(&backend, KernelKind::DeltaR, nx, n, dt, I), 0, blk);
            place(&mut r, &kernel_block(&backend, KernelKind::DeltaTildeR, nx, n, dt, -I), blk, 0);
            let bm = band(2);
            let lhs = mat_mul(&mat_t(&bm), &mat_mul(&mat_mul(&mat_t(&st), &mat_mul(&z, &s)), &bm));
            let rhs = mat_mul(&mat_t(&bm), &mat_mul(&r, &bm));
            let tol = if regime == Regime::Nonrel { 1e-12 } else { tol };
            report.push(Check::new("S~^T Z S = R", mat_err(&lhs, &rhs), tol));
        }
    }
    Ok(report)
}

/// Derivative with respect to a projected variable: the gradient is
/// carried through the transposed projector, `(P^s)^T = P^(-s)`.
pub fn projected_derivative(p: &Projector, grad: &[C64], sign: Sign) -> Vec<C64> {
    p.part(grad, sign.flip())
}
