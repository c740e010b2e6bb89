//! Field content shared by the oracle, the Wick engine and the kernels.

use crate::{Error, Result, C64};
use serde::Serialize;
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl Statistics {
    /// The sign factor: +1 for bosons, -1 for fermions.
    pub fn eps(self) -> f64 {
        match self {
            Statistics::Bose => 1.0,
            Statistics::Fermi => -1.0,
        }
    }

    pub fn is_fermi(self) -> bool {
        self == Statistics::Fermi
    }
}

/// A hermitian real field `Q` or a channel pair `psi`/`tpsi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Real,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign_char(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FieldKind {
    Q,
    Psi,
    TPsi,
    B,
    Bdag,
    C,
    Cdag,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Q => "Q",
            FieldKind::Psi => "psi",
            FieldKind::TPsi => "tpsi",
            FieldKind::B => "b",
            FieldKind::Bdag => "bdag",
            FieldKind::C => "c",
            FieldKind::Cdag => "cdag",
        }
    }

    pub fn is_ladder(self) -> bool {
        matches!(self, FieldKind::B | FieldKind::Bdag | FieldKind::C | FieldKind::Cdag)
    }
}

/// A point on the closed-time contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourTime {
    pub t: f64,
    pub branch: Branch,
}

impl ContourTime {
    /// Position along the contour: the plus branch runs forward, the minus
    /// branch runs back, and every minus point comes after every plus point.
    pub fn contour_cmp(&self, other: &ContourTime) -> Ordering {
        match (self.branch, other.branch) {
            (Branch::Plus, Branch::Minus) => Ordering::Less,
            (Branch::Minus, Branch::Plus) => Ordering::Greater,
            (Branch::Plus, Branch::Plus) => self.t.total_cmp(&other.t),
            (Branch::Minus, Branch::Minus) => other.t.total_cmp(&self.t),
        }
    }
}

/// One operator occurrence. `x` indexes the x-labels for fields and the
/// modes for ladder operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldOp {
    pub kind: FieldKind,
    pub x: usize,
    pub t: f64,
    pub branch: Branch,
}

impl FieldOp {
    pub fn new(kind: FieldKind, x: usize, t: f64, branch: Branch) -> Self {
        FieldOp { kind, x, t, branch }
    }

    pub fn contour_time(&self) -> ContourTime {
        ContourTime { t: self.t, branch: self.branch }
    }

    pub fn is_fermionic(&self, stats: Statistics) -> bool {
        stats.is_fermi() && self.kind != FieldKind::Q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub label: String,
    pub omega: f64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub ut: Vec<C64>,
    pub vt: Vec<C64>,
}

impl Mode {
    /// Mode with the same particle profile `u` on every label and `ut = conj(u)`.
    pub fn particle(label: &str, omega: f64, u: Vec<C64>) -> Self {
        let n = u.len();
        Mode {
            label: label.to_string(),
            omega,
            ut: u.iter().map(|z| z.conj()).collect(),
            u,
            v: vec![C64::new(0.0, 0.0); n],
            vt: vec![C64::new(0.0, 0.0); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub field: FieldType,
    pub statistics: Statistics,
    pub nonrel: bool,
    pub hbar: f64,
    pub truncation: usize,
    pub x_labels: Vec<String>,
    pub modes: Vec<Mode>,
}

impl ChannelSpec {
    /// Single oscillator `Q = sqrt(hbar/2w)(a e^{-iwt} + a^dag e^{iwt})`.
    pub fn oscillator(omega: f64, hbar: f64, truncation: usize) -> Self {
        ChannelSpec {
            field: FieldType::Real,
            statistics: Statistics::Bose,
            nonrel: true,
            hbar,
            truncation,
            x_labels: vec!["x1".into()],
            modes: vec![Mode::particle("k1", omega, vec![C64::new(1.0, 0.0)])],
        }
    }

    pub fn eps(&self) -> f64 {
        self.statistics.eps()
    }

    pub fn nx(&self) -> usize {
        self.x_labels.len()
    }

    pub fn x_index(&self, label: &str) -> Result<usize> {
        self.x_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn max_omega(&self) -> f64 {
        self.modes.iter().map(|m| m.omega).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let inv = |m: String| Err(Error::Invariant(m));
        if !(self.hbar > 0.0) {
            return inv(format!("hbar must be positive, got {}", self.hbar));
        }
        if self.x_labels.is_empty() {
            return inv("no x-labels".into());
        }
        if self.modes.is_empty() {
            return inv("no modes".into());
        }
        let nx = self.nx();
        for m in &self.modes {
            if !(m.omega > 0.0) || !m.omega.is_finite() {
                return inv(format!("mode {}: omega must be positive, got {}", m.label, m.omega));
            }
            if [&m.u, &m.v, &m.ut, &m.vt].iter().any(|t| t.len() != nx) {
                return inv(format!("mode {}: tables must cover all {} x-labels", m.label, nx));
            }
            let has_anti = m.v.iter().chain(&m.vt).any(|z| z.norm() != 0.0);
            if self.nonrel && has_anti {
                return inv(format!("mode {}: nonrel requires v = vt = 0", m.label));
            }
            if self.field == FieldType::Real {
                if has_anti {
                    return inv(format!("mode {}: real field takes no antiparticle tables", m.label));
                }
                if m.u.iter().zip(&m.ut).any(|(u, ut)| (u.conj() - ut).norm() > 1e-12) {
                    return inv(format!("mode {}: real field requires ut = conj(u)", m.label));
                }
            }
        }
        if self.field == FieldType::Real && self.statistics == Statistics::Fermi {
            return inv("a real field is bosonic".into());
        }
        Ok(())
    }

    /// Whether `kind` belongs to this field type.
    pub fn check_kind(&self, kind: FieldKind) -> Result<()> {
        let ok = match (self.field, kind) {
            (FieldType::Real, FieldKind::Q) => true,
            (FieldType::Real, FieldKind::B | FieldKind::Bdag) => true,
            (FieldType::Channel, FieldKind::Q) => false,
            (FieldType::Channel, _) => true,
            (FieldType::Real, _) => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Statistics(format!("{} is not defined for a {:?} spec", kind.name(), self.field)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_order() {
        let p = |t| ContourTime { t, branch: Branch::Plus };
        let m = |t| ContourTime { t, branch: Branch::Minus };
        assert_eq!(p(1.0).contour_cmp(&p(3.0)), Ordering::Less);
        assert_eq!(m(1.0).contour_cmp(&m(3.0)), Ordering::Greater);
        assert_eq!(p(9.0).contour_cmp(&m(-9.0)), Ordering::Less);
    }

    #[test]
    fn oscillator_is_valid() {
        ChannelSpec::oscillator(1.0, 1.0, 4).validate().unwrap();
        let mut s = ChannelSpec::oscillator(1.0, 1.0, 4);
        s.modes[0].omega = -1.0;
        assert!(matches!(s.validate(), Err(Error::Invariant(_))));
    }
}
