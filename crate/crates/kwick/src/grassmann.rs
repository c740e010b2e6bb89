//! Finite Grassmann algebra with complex coefficients.
//!
//! Monomials are strictly increasing tuples of generator indices (from 1).
//! Derivatives act from the left.

use crate::{Error, Result, C64};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU32, Ordering};

pub type Monomial = Vec<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Default)]
pub struct GrassmannPoly {
    terms: BTreeMap<Monomial, C64>,
    max_generator: u32,
}

/// Merge two sorted index tuples. Returns `None` on a repeated index and
/// otherwise the merged tuple with the sign of the reordering.
fn merge(a: &[u32], b: &[u32]) -> Option<(Monomial, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut swaps = 0usize;
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the rest of a
            swaps += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, if swaps % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Sort an arbitrary index sequence into canonical order. `None` if an
/// index repeats (the product vanishes).
pub fn canonical(seq: &[u32]) -> Option<(Monomial, f64)> {
    let mut v = seq.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

impl GrassmannPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: C64) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn one() -> Self {
        Self::scalar(C64::new(1.0, 0.0))
    }

    /// The generator `gamma_k`.
    pub fn generator(k: u32) -> Self {
        assert!(k >= 1, "generators are numbered from 1");
        let mut p = Self::zero();
        p.add_term(vec![k], C64::new(1.0, 0.0));
        p
    }

    /// Monomial from an arbitrary index sequence, reordered with sign.
    pub fn monomial(seq: &[u32], c: C64) -> Self {
        let mut p = Self::zero();
        p.max_generator = seq.iter().copied().max().unwrap_or(0);
        if let Some((m, s)) = canonical(seq) {
            p.add_term(m, c * s);
        }
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, C64)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in it {
            p.max_generator = p.max_generator.max(m.iter().copied().max().unwrap_or(0));
            if let Some((m, s)) = canonical(&m) {
                p.add_term(m, c * s);
            }
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: C64) {
        if let Some(&k) = m.last() {
            self.max_generator = self.max_generator.max(k);
        }
        if c == C64::new(0.0, 0.0) {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if *v == C64::new(0.0, 0.0) {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest generator index referenced so far (the algebra size K).
    pub fn max_generator(&self) -> u32 {
        self.max_generator
    }

    pub fn coeff(&self, m: &[u32]) -> C64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    /// Constant (body) part.
    pub fn body(&self) -> C64 {
        self.coeff(&[])
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut p = Self::zero();
        p.max_generator = self.max_generator;
        for (m, v) in &self.terms {
            p.add_term(m.clone(), v * c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        p.max_generator = self.max_generator.max(other.max_generator);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, s)) = merge(ma, mb) {
                    p.add_term(m, ca * cb * s);
                }
            }
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        p.max_generator = self.max_generator.max(other.max_generator);
        for (m, c) in &other.terms {
            p.add_term(m.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Left derivative by `gamma_k`: the generator is moved to the front
    /// (one sign per generator it passes) and removed.
    pub fn left_deriv(&self, k: u32) -> Self {
        let mut p = Self::zero();
        p.max_generator = self.max_generator;
        for (m, c) in &self.terms {
            if let Some(q) = m.iter().position(|&g| g == k) {
                let mut rest = m.clone();
                rest.remove(q);
                let s = if q % 2 == 0 { 1.0 } else { -1.0 };
                p.add_term(rest, c * s);
            }
        }
        p
    }

    /// Parity of a homogeneous element. Constants (and zero) are even.
    pub fn parity(&self) -> Result<Parity> {
        let mut seen: Option<Parity> = None;
        for m in self.terms.keys() {
            let par = if m.len() % 2 == 0 { Parity::Even } else { Parity::Odd };
            match seen {
                None => seen = Some(par),
                Some(s) if s != par => return Err(Error::MixedParity),
                _ => {}
            }
        }
        Ok(seen.unwrap_or(Parity::Even))
    }

    /// `exp(p)` for an element without body, by the (finite) power series.
    /// A body `b` contributes the factor `exp(b)`.
    pub fn exp(&self) -> Self {
        let body = self.body();
        let soul = self.sub(&Self::scalar(body));
        let mut sum = Self::one();
        let mut term = Self::one();
        let mut k = 1.0;
        loop {
            term = term.mul(&soul).scale(C64::new(1.0 / k, 0.0));
            if term.is_zero() {
                break;
            }
            sum = sum.add(&term);
            k += 1.0;
        }
        sum.scale(body.exp())
    }

    /// Largest coefficient difference against `other`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.sub(other).terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude.
    pub fn max_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Equality of coefficients; the generator bound is bookkeeping only.
impl PartialEq for GrassmannPoly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl fmt::Debug for GrassmannPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)", c.re, c.im)?;
            for g in m {
                write!(f, "g{}", g)?;
            }
        }
        Ok(())
    }
}

impl Add for &GrassmannPoly {
    type Output = GrassmannPoly;
    fn add(self, rhs: Self) -> GrassmannPoly {
        GrassmannPoly::add(self, rhs)
    }
}

impl Sub for &GrassmannPoly {
    type Output = GrassmannPoly;
    fn sub(self, rhs: Self) -> GrassmannPoly {
        GrassmannPoly::sub(self, rhs)
    }
}

impl Mul for &GrassmannPoly {
    type Output = GrassmannPoly;
    fn mul(self, rhs: Self) -> GrassmannPoly {
        GrassmannPoly::mul(self, rhs)
    }
}

impl Neg for &GrassmannPoly {
    type Output = GrassmannPoly;
    fn neg(self) -> GrassmannPoly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

pub fn gp_mul(a: &GrassmannPoly, b: &GrassmannPoly) -> GrassmannPoly {
    a.mul(b)
}

pub fn gp_left_deriv(p: &GrassmannPoly, k: u32) -> GrassmannPoly {
    p.left_deriv(k)
}

pub fn gp_parity(p: &GrassmannPoly) -> Result<Parity> {
    p.parity()
}

/// Hands out fresh generator indices. Safe to share between threads.
#[derive(Debug)]
pub struct GeneratorAlloc {
    next: AtomicU32,
}

impl GeneratorAlloc {
    pub fn new() -> Self {
        Self::starting_after(0)
    }

    pub fn starting_after(k: u32) -> Self {
        GeneratorAlloc { next: AtomicU32::new(k + 1) }
    }

    pub fn fresh(&self) -> u32 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }
}

impl Default for GeneratorAlloc {
    fn default() -> Self {
        Self::new()
    }
}

/// Polynomial in Grassmann field samples `phi(1..=n)` is a Grassmann
/// polynomial whose generators are the sample slots. Substitutes
/// `phi(i) = sum_j kernel[i][j] psi(j)`.
pub fn gp_linear_subst(poly: &GrassmannPoly, kernel: &[Vec<C64>]) -> Result<GrassmannPoly> {
    let n = kernel.len();
    if kernel.iter().any(|row| row.len() != n) {
        return Err(Error::Shape("kernel must be square".into()));
    }
    if poly.max_generator() as usize > n {
        return Err(Error::Shape(format!(
            "polynomial uses slot {} but the kernel has {} slots",
            poly.max_generator(),
            n
        )));
    }
    let images: Vec<GrassmannPoly> = kernel
        .iter()
        .map(|row| {
            let mut p = GrassmannPoly::zero();
            p.max_generator = n as u32;
            for (j, c) in row.iter().enumerate() {
                p.add_term(vec![j as u32 + 1], *c);
            }
            p
        })
        .collect();
    let mut out = GrassmannPoly::zero();
    out.max_generator = n as u32;
    for (m, c) in poly.terms() {
        let mut acc = GrassmannPoly::scalar(*c);
        for &g in m {
            acc = acc.mul(&images[g as usize - 1]);
        }
        out = out.add(&acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeResult<L> {
    AllZero,
    Witness(L),
}

/// Pairs each coefficient function with a variation built on a fresh
/// generator `K+1`, where `K` is the largest generator in the family.
/// Returns the first label whose pairing does not vanish.
pub fn gp_uniqueness_probe<L: Clone>(family: &[(L, GrassmannPoly)]) -> ProbeResult<L> {
    let k = family.iter().map(|(_, g)| g.max_generator()).max().unwrap_or(0);
    let fresh = GrassmannPoly::generator(k + 1);
    for (label, g) in family {
        if !g.mul(&fresh).is_zero() {
            return ProbeResult::Witness(label.clone());
        }
    }
    ProbeResult::AllZero
}

/// The same pairing restricted to variations built from generators
/// `1..=K` only. Blind to the top monomial.
pub fn restricted_probe<L: Clone>(family: &[(L, GrassmannPoly)]) -> ProbeResult<L> {
    let k = family.iter().map(|(_, g)| g.max_generator()).max().unwrap_or(0);
    for (label, g) in family {
        for j in 1..=k {
            if !g.mul(&GrassmannPoly::generator(j)).is_zero() {
                return ProbeResult::Witness(label.clone());
            }
        }
        if k == 0 && !g.is_zero() {
            return ProbeResult::Witness(label.clone());
        }
    }
    ProbeResult::AllZero
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn anticommute_and_nilpotent() {
        let g1 = GrassmannPoly::generator(1);
        let g2 = GrassmannPoly::generator(2);
        assert_eq!(g2.mul(&g1), GrassmannPoly::monomial(&[1, 2], c(-1.0)));
        assert!(g1.mul(&g1).is_zero());
    }

    #[test]
    fn distributive() {
        let a = GrassmannPoly::scalar(c(2.0)).add(&GrassmannPoly::generator(1));
        let b = GrassmannPoly::scalar(c(3.0)).add(&GrassmannPoly::generator(2));
        let p = a.mul(&b);
        assert_eq!(p.coeff(&[]), c(6.0));
        assert_eq!(p.coeff(&[1]), c(3.0));
        assert_eq!(p.coeff(&[2]), c(2.0));
        assert_eq!(p.coeff(&[1, 2]), c(1.0));
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn derivatives() {
        let m = GrassmannPoly::monomial(&[1, 2], c(1.0));
        assert_eq!(m.left_deriv(1), GrassmannPoly::generator(2));
        assert_eq!(m.left_deriv(2), GrassmannPoly::generator(1).scale(c(-1.0)));
        assert!(GrassmannPoly::scalar(c(5.0)).left_deriv(3).is_zero());
    }

    #[test]
    fn parity() {
        assert_eq!(GrassmannPoly::monomial(&[1, 2], c(1.0)).parity(), Ok(Parity::Even));
        assert_eq!(GrassmannPoly::generator(1).parity(), Ok(Parity::Odd));
        let mixed = GrassmannPoly::one().add(&GrassmannPoly::generator(1));
        assert_eq!(mixed.parity(), Err(Error::MixedParity));
    }

    #[test]
    fn swap_kernel() {
        let p = GrassmannPoly::monomial(&[1, 2], c(1.0));
        let k = vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]];
        let q = gp_linear_subst(&p, &k).unwrap();
        assert_eq!(q, GrassmannPoly::monomial(&[1, 2], c(-1.0)));
        let bad = vec![vec![c(1.0)]];
        assert!(gp_linear_subst(&p, &bad).is_err());
    }

    #[test]
    fn probe_examples() {
        let zero: Vec<(usize, GrassmannPoly)> = vec![(0, GrassmannPoly::zero()), (1, GrassmannPoly::zero())];
        assert_eq!(gp_uniqueness_probe(&zero), ProbeResult::AllZero);
        let top = GrassmannPoly::monomial(&[1, 2, 3], c(1.0));
        let fam = vec![(0usize, GrassmannPoly::zero()), (1, top)];
        assert_eq!(gp_uniqueness_probe(&fam), ProbeResult::Witness(1));
        assert_eq!(restricted_probe(&fam), ProbeResult::AllZero);
        let fam = vec![(7usize, GrassmannPoly::scalar(c(0.5)))];
        assert_eq!(gp_uniqueness_probe(&fam), ProbeResult::Witness(7));
    }

    #[test]
    fn exp_of_even_pair() {
        let a = GrassmannPoly::monomial(&[1, 2], c(1.0));
        let b = GrassmannPoly::monomial(&[3, 4], c(1.0));
        let e = a.add(&b).exp();
        assert_eq!(e.coeff(&[1, 2, 3, 4]), c(1.0));
        assert_eq!(e.coeff(&[]), c(1.0));
    }

    #[test]
    fn allocator_is_fresh() {
        let a = GeneratorAlloc::starting_after(4);
        assert_eq!(a.fresh(), 5);
        assert_eq!(a.fresh(), 6);
    }
}
