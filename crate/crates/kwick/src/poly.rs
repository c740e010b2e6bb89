//! Truncated polynomials in commuting complex variables.

use crate::C64;
use std::collections::BTreeMap;

/// Exponent vectors mapped to coefficients; terms above `max_degree` are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    pub nvars: usize,
    pub max_degree: usize,
    pub terms: BTreeMap<Vec<usize>, C64>,
}

impl CPoly {
    pub fn zero(nvars: usize, max_degree: usize) -> Self {
        CPoly { nvars, max_degree, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, max_degree: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars, max_degree);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, max_degree: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars, max_degree);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    pub fn add_term(&mut self, e: Vec<usize>, c: C64) {
        if e.iter().sum::<usize>() > self.max_degree || c == C64::default() {
            return;
        }
        *self.terms.entry(e).or_default() += c;
    }

    pub fn coeff(&self, e: &[usize]) -> C64 {
        self.terms.get(e).copied().unwrap_or_default()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut p = Self::zero(self.nvars, self.max_degree);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut p = Self::zero(self.nvars, self.max_degree);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e: Vec<usize> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    /// `exp(p)` truncated at `max_degree`; `p` must have no constant term.
    pub fn exp(&self) -> Self {
        let mut sum = Self::constant(self.nvars, self.max_degree, C64::new(1.0, 0.0));
        let mut term = sum.clone();
        for k in 1..=self.max_degree {
            term = term.mul(self).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        sum
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.add(&o.scale(C64::new(-1.0, 0.0))).terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// All exponent vectors over `nvars` variables with total degree `<= max`.
pub fn multi_indices(nvars: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; nvars];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max, &mut cur, &mut out);
    out
}
