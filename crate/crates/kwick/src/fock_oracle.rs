//! Brute-force operator oracle on truncated Fock spaces.
//!
//! Each bosonic ladder keeps occupations `0..=truncation`; each fermionic
//! ladder is a qubit with a Jordan-Wigner parity string. Operators are
//! stored column-sparse (a ladder operator has one entry per column) but
//! can be densified.

use crate::channel::{Branch, ChannelSpec, FieldKind, FieldOp, FieldType, Statistics};
use crate::grassmann::GrassmannPoly;
use crate::{Error, Result, C64, I};
use std::cmp::Ordering;

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DEFAULT_ORDER_CAP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    B,
    C,
}

#[derive(Debug, Clone)]
pub struct Space {
    pub ladders: Vec<(usize, Ladder)>,
    pub local_dim: usize,
    pub dim: usize,
    pub fermi: bool,
    pub truncation: usize,
}

impl Space {
    fn stride(&self, l: usize) -> usize {
        self.local_dim.pow(l as u32)
    }

    fn occ(&self, state: usize, l: usize) -> usize {
        (state / self.stride(l)) % self.local_dim
    }

    fn ladder_index(&self, mode: usize, which: Ladder) -> Option<usize> {
        self.ladders.iter().position(|&(m, w)| m == mode && w == which)
    }

    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![C64::default(); self.dim];
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// Basis states whose bosonic occupations are all below the cap.
    pub fn is_safe(&self, state: usize) -> bool {
        self.fermi || (0..self.ladders.len()).all(|l| self.occ(state, l) < self.truncation)
    }
}

/// Sets up the ladders: one `b` per mode and, unless nonrel, one `c`.
pub fn build_space(spec: &ChannelSpec, truncation: usize, cap: usize) -> Result<Space> {
    let mut ladders = Vec::new();
    for m in 0..spec.modes.len() {
        ladders.push((m, Ladder::B));
        if spec.field == FieldType::Channel && !spec.nonrel {
            ladders.push((m, Ladder::C));
        }
    }
    let fermi = spec.statistics.is_fermi();
    let local_dim = if fermi { 2 } else { truncation + 1 };
    let mut dim: usize = 1;
    for _ in &ladders {
        dim = dim.checked_mul(local_dim).filter(|&d| d <= cap).ok_or(Error::DimensionCap {
            dim: local_dim.saturating_pow(ladders.len() as u32),
            cap,
        })?;
    }
    Ok(Space { ladders, local_dim, dim, fermi, truncation: if fermi { 1 } else { truncation } })
}

/// Column-sparse complex square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub dim: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

impl OperatorMatrix {
    pub fn zero(dim: usize) -> Self {
        OperatorMatrix { dim, cols: vec![Vec::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for j in 0..dim {
            m.cols[j].push((j, C64::new(1.0, 0.0)));
        }
        m
    }

    fn push(&mut self, row: usize, col: usize, v: C64) {
        if v == C64::default() {
            return;
        }
        match self.cols[col].iter_mut().find(|(r, _)| *r == row) {
            Some(e) => e.1 += v,
            None => self.cols[col].push((row, v)),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.cols[col].iter().filter(|(r, _)| *r == row).map(|e| e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut d = vec![vec![C64::default(); self.dim]; self.dim];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                d[i][j] += v;
            }
        }
        d
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.dim];
        for (j, col) in self.cols.iter().enumerate() {
            if x[j] == C64::default() {
                continue;
            }
            for &(i, v) in col {
                y[i] += v * x[j];
            }
        }
        y
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (j, col) in other.cols.iter().enumerate() {
            let mut x = vec![C64::default(); self.dim];
            for &(i, v) in col {
                x[i] += v;
            }
            let y = self.apply(&x);
            for (i, v) in y.into_iter().enumerate() {
                out.push(i, j, v);
            }
        }
        out
    }

    pub fn add_scaled(&self, other: &Self, c: C64) -> Self {
        let mut out = self.clone();
        for (j, col) in other.cols.iter().enumerate() {
            for &(i, v) in col {
                out.push(i, j, v * c);
            }
        }
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::zero(self.dim).add_scaled(self, c)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                out.push(j, i, v.conj());
            }
        }
        out
    }

    /// `A B - s B A` with `s = +1` for a commutator, `-1` for an anticommutator.
    pub fn graded_commutator(&self, other: &Self, s: f64) -> Self {
        self.mul(other).add_scaled(&other.mul(self), C64::new(-s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.cols.iter().flatten().map(|e| e.1.norm()).fold(0.0, f64::max)
    }

    /// Vacuum expectation `<0|A|0>`.
    pub fn vev(&self) -> C64 {
        self.get(0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderOp {
    Annihilate,
    Create,
}

fn ladder_matrix(space: &Space, l: usize, op: LadderOp) -> OperatorMatrix {
    let mut m = OperatorMatrix::zero(space.dim);
    let stride = space.stride(l);
    for s in 0..space.dim {
        let n = space.occ(s, l);
        let (target, amp) = match op {
            LadderOp::Annihilate if n > 0 => (s - stride, (n as f64).sqrt()),
            LadderOp::Create if n < space.local_dim - 1 => (s + stride, ((n + 1) as f64).sqrt()),
            _ => continue,
        };
        let sign = if space.fermi {
            let below: usize = (0..l).map(|k| space.occ(s, k)).sum();
            if below % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            1.0
        };
        m.push(target, s, C64::new(amp * sign, 0.0));
    }
    m
}

/// `b`, `b^dag`, `c`, `c^dag` for mode `kappa`.
pub fn mode_operator(space: &Space, which: FieldKind, kappa: usize) -> Result<OperatorMatrix> {
    let (ladder, op) = match which {
        FieldKind::B => (Ladder::B, LadderOp::Annihilate),
        FieldKind::Bdag => (Ladder::B, LadderOp::Create),
        FieldKind::C => (Ladder::C, LadderOp::Annihilate),
        FieldKind::Cdag => (Ladder::C, LadderOp::Create),
        k => return Err(Error::Statistics(format!("{} is not a ladder operator", k.name()))),
    };
    let l = space
        .ladder_index(kappa, ladder)
        .ok_or_else(|| Error::UnknownLabel(format!("mode {} ladder {:?}", kappa, ladder)))?;
    Ok(ladder_matrix(space, l, op))
}

/// Field operator at `(x, t)` assembled from its mode sum. Ladder kinds
/// return the free Heisenberg ladder operator of mode `x` at time `t`.
pub fn field_operator(space: &Space, spec: &ChannelSpec, kind: FieldKind, x: usize, t: f64) -> Result<OperatorMatrix> {
    spec.check_kind(kind)?;
    let mut out = OperatorMatrix::zero(space.dim);
    if kind.is_ladder() {
        let mode = spec.modes.get(x).ok_or_else(|| Error::UnknownLabel(format!("mode {}", x)))?;
        let phase = match kind {
            FieldKind::B | FieldKind::C => (-I * mode.omega * t).exp(),
            _ => (I * mode.omega * t).exp(),
        };
        return Ok(mode_operator(space, kind, x)?.scale(phase));
    }
    if x >= spec.nx() {
        return Err(Error::UnknownLabel(format!("x-label #{}", x)));
    }
    for (k, mode) in spec.modes.iter().enumerate() {
        let amp = (spec.hbar / (2.0 * mode.omega)).sqrt();
        let neg = (-I * mode.omega * t).exp();
        let pos = (I * mode.omega * t).exp();
        let parts: [(FieldKind, C64); 2] = match kind {
            FieldKind::Q | FieldKind::Psi => {
                let anti = if kind == FieldKind::Q { mode.ut[x] } else { mode.vt[x] };
                let create = if kind == FieldKind::Q { FieldKind::Bdag } else { FieldKind::Cdag };
                [(FieldKind::B, mode.u[x] * neg), (create, anti * pos)]
            }
            FieldKind::TPsi => [(FieldKind::C, mode.v[x] * neg), (FieldKind::Bdag, mode.ut[x] * pos)],
            _ => unreachable!(),
        };
        for (which, c) in parts {
            if c == C64::default() {
                continue;
            }
            let op = mode_operator(space, which, k)?;
            out = out.add_scaled(&op, c * amp);
        }
    }
    Ok(out)
}

/// Contour ordering of a written product. Returns the operator indices
/// from left to right after ordering and the sign of the fermionic
/// reshuffle. Bosonic ties keep their written order.
pub fn tc_sort(ops: &[FieldOp], stats: Statistics) -> Result<(Vec<usize>, f64)> {
    let mut perm: Vec<usize> = (0..ops.len()).collect();
    // later on the contour goes further left; stable sort keeps ties
    perm.sort_by(|&a, &b| ops[b].contour_time().contour_cmp(&ops[a].contour_time()));
    for w in perm.windows(2) {
        let (a, b) = (&ops[w[0]], &ops[w[1]]);
        if a.is_fermionic(stats) && b.is_fermionic(stats) && a.contour_time().contour_cmp(&b.contour_time()) == Ordering::Equal {
            return Err(Error::TieAtEqualTime(w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    let ferm: Vec<usize> = perm.iter().copied().filter(|&i| ops[i].is_fermionic(stats)).collect();
    let mut inversions = 0;
    for i in 0..ferm.len() {
        for j in i + 1..ferm.len() {
            if ferm[i] > ferm[j] {
                inversions += 1;
            }
        }
    }
    Ok((perm, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

fn creation_insertions(spec: &ChannelSpec, ops: &[FieldOp]) -> usize {
    ops.iter()
        .filter(|op| match op.kind {
            FieldKind::Q | FieldKind::TPsi | FieldKind::Bdag | FieldKind::Cdag => true,
            FieldKind::Psi => !spec.nonrel,
            FieldKind::B | FieldKind::C => false,
        })
        .count()
}

/// Oracle evaluation environment: the space plus a cache-free builder.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub spec: ChannelSpec,
    pub space: Space,
}

impl Oracle {
    pub fn new(spec: &ChannelSpec, cap: usize) -> Result<Self> {
        spec.validate()?;
        let space = build_space(spec, spec.truncation, cap)?;
        Ok(Oracle { spec: spec.clone(), space })
    }

    pub fn field(&self, op: &FieldOp) -> Result<OperatorMatrix> {
        field_operator(&self.space, &self.spec, op.kind, op.x, op.t)
    }

    /// `<0| O_1 O_2 ... O_n |0>` for a product already in the wanted order.
    pub fn plain_vev(&self, ops: &[FieldOp]) -> Result<C64> {
        let mut v = self.space.vacuum();
        for op in ops.iter().rev() {
            v = self.field(op)?.apply(&v);
        }
        Ok(v[0])
    }

    /// `<0| T_C O_1 ... O_n |0>` including the ordering sign.
    pub fn tc_vev(&self, ops: &[FieldOp]) -> Result<C64> {
        if !self.space.fermi {
            let needed = creation_insertions(&self.spec, ops).min(ops.len() / 2);
            if self.space.truncation < needed {
                return Err(Error::Truncation { trunc: self.space.truncation, needed });
            }
        }
        let (perm, sign) = tc_sort(ops, self.spec.statistics)?;
        let sorted: Vec<FieldOp> = perm.iter().map(|&i| ops[i]).collect();
        Ok(self.plain_vev(&sorted)? * sign)
    }

    /// Source phase of one coupling in the test-case exponent: `+i` on the
    /// plus branch, `-i` on the minus branch, and an extra statistics sign
    /// for `tpsi` whose source stands to its right.
    pub fn source_phase(&self, op: &FieldOp) -> C64 {
        let b = if op.branch == Branch::Plus { I } else { -I };
        if op.kind == FieldKind::TPsi {
            b * self.spec.eps()
        } else {
            b
        }
    }

    /// Taylor coefficient of the vacuum test-case functional at the
    /// multi-index `order` over commuting source amplitudes.
    pub fn moment_vev(&self, points: &[FieldOp], order: &[usize], cap: usize) -> Result<C64> {
        if order.len() != points.len() {
            return Err(Error::Shape("one order per source point".into()));
        }
        let total: usize = order.iter().sum();
        if total > cap {
            return Err(Error::Cap("moment order", cap));
        }
        if self.spec.statistics.is_fermi() {
            return Err(Error::Statistics("fermionic moments need Grassmann sources".into()));
        }
        let mut ops = Vec::with_capacity(total);
        let mut pref = C64::new(1.0, 0.0);
        for (p, &n) in points.iter().zip(order) {
            for k in 0..n {
                ops.push(*p);
                pref *= self.source_phase(p) / (k + 1) as f64;
            }
        }
        if ops.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        Ok(pref * self.tc_vev(&ops)?)
    }

    /// The full test-case functional with Grassmann-valued sources, one
    /// per point. The exponential terminates by nilpotency.
    pub fn moment_vev_grassmann(&self, points: &[FieldOp], sources: &[GrassmannPoly]) -> Result<GrassmannPoly> {
        if sources.len() != points.len() {
            return Err(Error::Shape("one source per point".into()));
        }
        let fermi = self.spec.statistics.is_fermi();
        let max_gen = sources.iter().map(|s| s.max_generator()).max().unwrap_or(0) as usize;
        let mut total = GrassmannPoly::one();
        let mut seq: Vec<usize> = Vec::new();
        let mut fact = 1.0;
        for n in 1..=max_gen {
            fact *= n as f64;
            let mut acc = GrassmannPoly::zero();
            seq.clear();
            seq.resize(n, 0);
            'outer: loop {
                let mut g = GrassmannPoly::one();
                let mut c = C64::new(1.0, 0.0);
                for &i in &seq {
                    g = g.mul(&sources[i]);
                    c *= self.source_phase(&points[i]);
                    if g.is_zero() {
                        break;
                    }
                }
                if !g.is_zero() {
                    let ops: Vec<FieldOp> = seq.iter().map(|&i| points[i]).collect();
                    // sources pulled left across the preceding operators
                    let s = if fermi && (n * (n - 1) / 2) % 2 == 1 { -1.0 } else { 1.0 };
                    let v = self.tc_vev(&ops)?;
                    if v != C64::default() {
                        acc = acc.add(&g.scale(c * v * s));
                    }
                }
                let mut k = n;
                loop {
                    if k == 0 {
                        break 'outer;
                    }
                    k -= 1;
                    seq[k] += 1;
                    if seq[k] < points.len() {
                        break;
                    }
                    seq[k] = 0;
                }
            }
            total = total.add(&acc.scale(C64::new(1.0 / fact, 0.0)));
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Mode;

    fn fermi_channel(nonrel: bool) -> ChannelSpec {
        let one = C64::new(1.0, 0.0);
        let zero = C64::default();
        ChannelSpec {
            field: FieldType::Channel,
            statistics: Statistics::Fermi,
            nonrel,
            hbar: 1.0,
            truncation: 1,
            x_labels: vec!["x1".into()],
            modes: vec![Mode {
                label: "k1".into(),
                omega: 1.0,
                u: vec![one],
                v: vec![if nonrel { zero } else { one }],
                ut: vec![one],
                vt: vec![if nonrel { zero } else { one }],
            }],
        }
    }

    #[test]
    fn dimensions() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 3);
        assert_eq!(build_space(&osc, 3, DEFAULT_DIM_CAP).unwrap().dim, 4);
        assert_eq!(build_space(&fermi_channel(false), 1, DEFAULT_DIM_CAP).unwrap().dim, 4);
        let mut big = fermi_channel(false);
        big.modes = (0..10).map(|_| big.modes[0].clone()).collect();
        assert!(matches!(build_space(&big, 1, DEFAULT_DIM_CAP), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn ladder_algebra() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 5);
        let sp = build_space(&osc, 5, DEFAULT_DIM_CAP).unwrap();
        let a = mode_operator(&sp, FieldKind::B, 0).unwrap();
        let ad = mode_operator(&sp, FieldKind::Bdag, 0).unwrap();
        assert!((a.mul(&ad).vev() - 1.0).norm() < 1e-15);
        let comm = a.graded_commutator(&ad, 1.0);
        for s in 0..sp.dim {
            if sp.is_safe(s) {
                assert!((comm.get(s, s) - 1.0).norm() < 1e-12);
            }
        }
        let f = fermi_channel(false);
        let sp = build_space(&f, 1, DEFAULT_DIM_CAP).unwrap();
        let b = mode_operator(&sp, FieldKind::B, 0).unwrap();
        assert_eq!(b.mul(&b).max_abs(), 0.0);
        let c = mode_operator(&sp, FieldKind::C, 0).unwrap();
        let cd = mode_operator(&sp, FieldKind::Cdag, 0).unwrap();
        assert_eq!(b.graded_commutator(&cd, -1.0).max_abs(), 0.0);
        assert!((c.graded_commutator(&cd, -1.0).add_scaled(&OperatorMatrix::identity(4), -C64::new(1.0, 0.0))).max_abs() < 1e-15);
    }

    #[test]
    fn oscillator_field() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 4);
        let o = Oracle::new(&osc, DEFAULT_DIM_CAP).unwrap();
        let q = o.field(&FieldOp::new(FieldKind::Q, 0, 0.0, Branch::Plus)).unwrap();
        let a = mode_operator(&o.space, FieldKind::B, 0).unwrap();
        let expect = a.add_scaled(&a.adjoint(), C64::new(1.0, 0.0)).scale(C64::new(0.5f64.sqrt(), 0.0));
        assert!(q.add_scaled(&expect, C64::new(-1.0, 0.0)).max_abs() < 1e-15);
        assert!((q.mul(&q).vev() - 0.5).norm() < 1e-15);
    }

    #[test]
    fn fermionic_psi_squares_to_zero() {
        let f = fermi_channel(true);
        let o = Oracle::new(&f, DEFAULT_DIM_CAP).unwrap();
        let psi = o.field(&FieldOp::new(FieldKind::Psi, 0, 0.7, Branch::Plus)).unwrap();
        assert_eq!(psi.mul(&psi).max_abs(), 0.0);
    }

    #[test]
    fn sort_examples() {
        let q = |t, b| FieldOp::new(FieldKind::Q, 0, t, b);
        let (p, s) = tc_sort(&[q(1.0, Branch::Plus), q(3.0, Branch::Plus)], Statistics::Bose).unwrap();
        assert_eq!((p, s), (vec![1, 0], 1.0));
        let (p, s) = tc_sort(&[q(1.0, Branch::Minus), q(5.0, Branch::Plus)], Statistics::Bose).unwrap();
        assert_eq!((p, s), (vec![0, 1], 1.0));
        let ops = [
            FieldOp::new(FieldKind::TPsi, 0, 1.0, Branch::Plus),
            FieldOp::new(FieldKind::Psi, 0, 2.0, Branch::Plus),
        ];
        assert_eq!(tc_sort(&ops, Statistics::Fermi).unwrap(), (vec![1, 0], -1.0));
        let tie = [
            FieldOp::new(FieldKind::TPsi, 0, 1.0, Branch::Plus),
            FieldOp::new(FieldKind::Psi, 0, 1.0, Branch::Plus),
        ];
        assert_eq!(tc_sort(&tie, Statistics::Fermi), Err(Error::TieAtEqualTime(0, 1)));
    }

    #[test]
    fn oscillator_vevs() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 8);
        let o = Oracle::new(&osc, DEFAULT_DIM_CAP).unwrap();
        let (t, tp) = (0.4, 1.9);
        let v = o
            .tc_vev(&[FieldOp::new(FieldKind::Q, 0, t, Branch::Minus), FieldOp::new(FieldKind::Q, 0, tp, Branch::Plus)])
            .unwrap();
        assert!((v - 0.5 * (-I * (t - tp)).exp()).norm() < 1e-14);
        assert_eq!(o.tc_vev(&[FieldOp::new(FieldKind::Q, 0, t, Branch::Plus)]).unwrap(), C64::default());
        let pts = [FieldOp::new(FieldKind::Q, 0, tp, Branch::Plus), FieldOp::new(FieldKind::Q, 0, t, Branch::Minus)];
        assert_eq!(o.moment_vev(&pts, &[0, 0], 4).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(o.moment_vev(&pts, &[1, 0], 4).unwrap(), C64::default());
        let m = o.moment_vev(&pts, &[1, 1], 4).unwrap();
        assert!((m - I * (-I) * v).norm() < 1e-14);
    }
}
