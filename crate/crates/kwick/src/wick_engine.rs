//! Symbolic Wick expansion of contour-ordered products.
//!
//! Matchings are enumerated by recursion on the leftmost unresolved
//! operator, so term order is deterministic.

use crate::causal_transform::{FunctionalPolynomial, Slot, Var};
use crate::channel::{Branch, ChannelSpec, FieldKind, FieldOp, FieldType, Statistics};
use crate::green_kernels::{ClosedForm, KernelKind, KernelSource};
use crate::{Error, Result, C64, I};
use std::cmp::Ordering;

/// Default cap on the degree of polynomials fed to the expansion.
pub const DEFAULT_DEGREE_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    pub i: usize,
    pub j: usize,
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WickTerm {
    pub coeff: C64,
    pub contractions: Vec<Contraction>,
    /// Uncontracted operators in canonical order.
    pub residual: Vec<FieldOp>,
    /// Input indices of `residual`, in the same order.
    pub residual_index: Vec<usize>,
    /// Set when a step function was evaluated at equal times.
    pub equal_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WickExpansion {
    pub product: Vec<FieldOp>,
    pub terms: Vec<WickTerm>,
}

fn kind_rank(k: FieldKind) -> u8 {
    match k {
        FieldKind::TPsi => 0,
        FieldKind::Psi => 1,
        FieldKind::Q => 2,
        FieldKind::Bdag => 3,
        FieldKind::B => 4,
        FieldKind::Cdag => 5,
        FieldKind::C => 6,
    }
}

/// Order used for residuals: `tpsi` before `psi`, then label, time, branch.
pub fn canonical_cmp(a: &FieldOp, b: &FieldOp) -> Ordering {
    kind_rank(a.kind)
        .cmp(&kind_rank(b.kind))
        .then(a.x.cmp(&b.x))
        .then(a.t.total_cmp(&b.t))
        .then(a.branch.cmp(&b.branch))
}

/// Stable canonical sort of `items`; returns the permutation and the
/// sign `eps^(fermionic inversions)`.
pub fn canonical_sort<T>(items: &[T], cmp: impl Fn(&T, &T) -> Ordering, odd: impl Fn(&T) -> bool, eps: f64) -> (Vec<usize>, f64) {
    let mut perm: Vec<usize> = (0..items.len()).collect();
    perm.sort_by(|&a, &b| cmp(&items[a], &items[b]));
    let mut inv = 0usize;
    for p in 0..perm.len() {
        for q in p + 1..perm.len() {
            if perm[p] > perm[q] && odd(&items[perm[p]]) && odd(&items[perm[q]]) {
                inv += 1;
            }
        }
    }
    (perm, if inv % 2 == 1 { eps } else { 1.0 })
}

fn compatible(a: FieldKind, b: FieldKind) -> bool {
    matches!(
        (a, b),
        (FieldKind::Q, FieldKind::Q) | (FieldKind::Psi, FieldKind::TPsi) | (FieldKind::TPsi, FieldKind::Psi)
    )
}

fn check_op(spec: &ChannelSpec, op: &FieldOp) -> Result<()> {
    spec.check_kind(op.kind)?;
    if op.kind.is_ladder() {
        return Err(Error::Statistics(format!("{} is not a field operator", op.kind.name())));
    }
    if op.x >= spec.nx() {
        return Err(Error::UnknownLabel(format!("label index {}", op.x)));
    }
    Ok(())
}

/// `<0|T_C A B|0>` with `A` written before `B`, read from `src`.
pub fn contraction_with(src: &dyn KernelSource, a: &FieldOp, b: &FieldOp) -> Result<C64> {
    let spec = src.spec();
    check_op(spec, a)?;
    check_op(spec, b)?;
    let hb = spec.hbar;
    let tau = a.t - b.t;
    use Branch::{Minus, Plus};
    match (a.kind, b.kind) {
        (FieldKind::Q, FieldKind::Q) => Ok(match (a.branch, b.branch) {
            (Plus, Plus) => -I * hb * src.eval(KernelKind::GF, a.x, b.x, tau),
            (Minus, Minus) => I * hb * src.eval(KernelKind::GFStar, a.x, b.x, tau),
            (Minus, Plus) => -I * hb * src.eval(KernelKind::GPlus, a.x, b.x, tau),
            (Plus, Minus) => -I * hb * src.eval(KernelKind::GPlus, b.x, a.x, -tau),
        }),
        (FieldKind::Psi, FieldKind::TPsi) => Ok(match (a.branch, b.branch) {
            (Plus, Plus) => -I * hb * src.eval(KernelKind::DeltaF, a.x, b.x, tau),
            (Minus, Minus) => I * hb * src.eval(KernelKind::DeltaTildeF, a.x, b.x, tau),
            (Minus, Plus) => -I * hb * src.eval(KernelKind::DeltaPlus, a.x, b.x, tau),
            (Plus, Minus) => I * hb * src.eval(KernelKind::DeltaMinus, a.x, b.x, tau),
        }),
        (FieldKind::TPsi, FieldKind::Psi) => Ok(spec.eps() * contraction_with(src, b, a)?),
        _ => Ok(C64::default()),
    }
}

/// Closed-form contraction `<0|T_C A B|0>`.
pub fn contraction_value(a: &FieldOp, b: &FieldOp, spec: &ChannelSpec) -> Result<C64> {
    contraction_with(&ClosedForm::new(spec), a, b)
}

/// Sign of bringing every contracted pair together, leftmost pair first.
pub fn matching_sign(product: &[FieldOp], matching: &[(usize, usize)], stats: Statistics) -> Result<f64> {
    let n = product.len();
    let mut used = vec![false; n];
    for &(i, j) in matching {
        if i >= j || j >= n || used[i] || used[j] {
            return Err(Error::Overlap);
        }
        used[i] = true;
        used[j] = true;
    }
    if !stats.is_fermi() {
        return Ok(1.0);
    }
    let mut pairs = matching.to_vec();
    pairs.sort();
    let mut removed = vec![false; n];
    let mut sign = 1.0;
    for (i, j) in pairs {
        let between = (i + 1..j).filter(|&k| !removed[k] && product[k].is_fermionic(stats)).count();
        if between % 2 == 1 {
            sign = -sign;
        }
        removed[i] = true;
        removed[j] = true;
    }
    Ok(sign)
}

/// One term per partial matching of compatible operators.
pub fn wick_expand_with(product: &[FieldOp], src: &dyn KernelSource) -> Result<WickExpansion> {
    let spec = src.spec();
    for op in product {
        check_op(spec, op)?;
    }
    let mut terms = Vec::new();
    let mut pairs = Vec::new();
    let mut state = vec![0u8; product.len()]; // 0 open, 1 contracted, 2 residual
    enumerate(product, 0, &mut state, &mut pairs, &mut |pairs, state| {
        let sign = matching_sign(product, pairs, spec.statistics)?;
        let mut contractions = Vec::with_capacity(pairs.len());
        let mut coeff = C64::new(sign, 0.0);
        let mut equal_time = false;
        for &(i, j) in pairs.iter() {
            let (a, b) = (&product[i], &product[j]);
            let value = contraction_with(src, a, b)?;
            coeff *= value;
            equal_time |= a.t == b.t && a.branch == b.branch;
            contractions.push(Contraction { i, j, value });
        }
        let rest: Vec<usize> = (0..product.len()).filter(|&k| state[k] == 2).collect();
        let ops: Vec<FieldOp> = rest.iter().map(|&k| product[k]).collect();
        let (perm, s) = canonical_sort(&ops, canonical_cmp, |o| o.is_fermionic(spec.statistics), spec.eps());
        coeff *= s;
        let residual: Vec<FieldOp> = perm.iter().map(|&p| ops[p]).collect();
        if spec.statistics.is_fermi() && residual.windows(2).any(|w| canonical_cmp(&w[0], &w[1]) == Ordering::Equal) {
            coeff = C64::default();
        }
        terms.push(WickTerm {
            coeff,
            contractions,
            residual_index: perm.iter().map(|&p| rest[p]).collect(),
            residual,
            equal_time,
        });
        Ok(())
    })?;
    Ok(WickExpansion { product: product.to_vec(), terms })
}

fn enumerate(
    product: &[FieldOp],
    start: usize,
    state: &mut Vec<u8>,
    pairs: &mut Vec<(usize, usize)>,
    emit: &mut dyn FnMut(&[(usize, usize)], &[u8]) -> Result<()>,
) -> Result<()> {
    let Some(i) = (start..product.len()).find(|&k| state[k] == 0) else {
        return emit(pairs, state);
    };
    state[i] = 2;
    enumerate(product, i + 1, state, pairs, emit)?;
    state[i] = 1;
    for j in i + 1..product.len() {
        if state[j] == 0 && compatible(product[i].kind, product[j].kind) {
            state[j] = 1;
            pairs.push((i, j));
            enumerate(product, i + 1, state, pairs, emit)?;
            pairs.pop();
            state[j] = 0;
        }
    }
    state[i] = 0;
    Ok(())
}

/// Wick expansion with closed-form kernels.
pub fn wick_expand(product: &[FieldOp], spec: &ChannelSpec) -> Result<WickExpansion> {
    wick_expand_with(product, &ClosedForm::new(spec))
}

/// Sum over fully contracted terms.
pub fn vacuum_value(e: &WickExpansion) -> C64 {
    e.terms.iter().filter(|t| t.residual.is_empty()).map(|t| t.coeff).sum()
}

/// Applies the reordering exponential to each monomial of `f` (branch
/// fields) and identifies the branches of the uncontracted fields.
pub fn normal_form_polynomial(f: &FunctionalPolynomial, src: &dyn KernelSource) -> Result<FunctionalPolynomial> {
    normal_form_polynomial_capped(f, src, DEFAULT_DEGREE_CAP)
}

pub fn normal_form_polynomial_capped(f: &FunctionalPolynomial, src: &dyn KernelSource, cap: usize) -> Result<FunctionalPolynomial> {
    let spec = src.spec();
    let mut out = FunctionalPolynomial::new();
    for (mono, c) in &f.terms {
        if mono.len() > cap {
            return Err(Error::Cap("degree", cap));
        }
        let mut ops = Vec::with_capacity(mono.len());
        for s in mono {
            match s.var {
                Var::Field(kind, branch) => ops.push(FieldOp::new(kind, s.x, s.t, branch)),
                _ => return Err(Error::Shape("expected branch fields".into())),
            }
        }
        let e = wick_expand_with(&ops, src)?;
        for term in e.terms {
            let slots = term.residual.iter().map(|o| Slot::new(Var::Phys(o.kind), o.x, o.t)).collect();
            out.push(slots, term.coeff * c);
        }
    }
    Ok(out.canonical(spec.statistics))
}

/// Field type required by `kind`.
pub fn field_of(kind: FieldKind) -> FieldType {
    if kind == FieldKind::Q {
        FieldType::Real
    } else {
        FieldType::Channel
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Mode;

    fn q(b: Branch, t: f64) -> FieldOp {
        FieldOp::new(FieldKind::Q, 0, t, b)
    }

    fn fermi_channel() -> ChannelSpec {
        ChannelSpec {
            field: FieldType::Channel,
            statistics: Statistics::Fermi,
            nonrel: false,
            hbar: 1.0,
            truncation: 1,
            x_labels: vec!["x1".into()],
            modes: vec![Mode { v: vec![C64::new(0.5, 0.0)], vt: vec![C64::new(0.5, 0.0)], ..Mode::particle("k", 1.0, vec![C64::new(1.0, 0.0)]) }],
        }
    }

    #[test]
    fn oscillator_pair() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 8);
        let v = contraction_value(&q(Branch::Minus, 2.0), &q(Branch::Plus, 2.0), &osc).unwrap();
        assert!((v - 0.5).norm() < 1e-15);
    }

    #[test]
    fn psi_psi_is_zero() {
        let ch = fermi_channel();
        let a = FieldOp::new(FieldKind::Psi, 0, 1.0, Branch::Plus);
        assert_eq!(contraction_value(&a, &a, &ch).unwrap(), C64::default());
    }

    #[test]
    fn crossing_sign() {
        let ch = fermi_channel();
        let p: Vec<FieldOp> = (0..4).map(|k| FieldOp::new(FieldKind::Psi, 0, k as f64, Branch::Plus)).collect();
        assert_eq!(matching_sign(&p, &[(0, 2), (1, 3)], ch.statistics).unwrap(), -1.0);
        assert_eq!(matching_sign(&p, &[(0, 1), (2, 3)], ch.statistics).unwrap(), 1.0);
        assert!(matching_sign(&p, &[(0, 1), (1, 3)], ch.statistics).is_err());
    }

    #[test]
    fn counts() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 8);
        let two = wick_expand(&[q(Branch::Plus, 0.0), q(Branch::Plus, 1.0)], &osc).unwrap();
        assert_eq!(two.terms.len(), 2);
        let four: Vec<FieldOp> = (0..4).map(|k| q(Branch::Plus, k as f64)).collect();
        assert_eq!(wick_expand(&four, &osc).unwrap().terms.len(), 10);
        let ch = fermi_channel();
        let p = [FieldKind::Psi, FieldKind::TPsi, FieldKind::Psi, FieldKind::TPsi];
        let ops: Vec<FieldOp> = p.iter().enumerate().map(|(k, &kd)| FieldOp::new(kd, 0, k as f64, Branch::Plus)).collect();
        let e = wick_expand(&ops, &ch).unwrap();
        assert_eq!(e.terms.iter().filter(|t| t.residual.is_empty()).count(), 2);
        assert_eq!(vacuum_value(&wick_expand(&[], &ch).unwrap()), C64::new(1.0, 0.0));
    }
}
