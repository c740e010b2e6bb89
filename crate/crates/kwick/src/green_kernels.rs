//! Green-function kernels from mode data, frequency parts on sampled
//! grids, and the response-transformation identities.
//!
//! Frequency-positive means `e^{-i w t}` with `w > 0`. On a DFT grid the
//! zero and Nyquist bins are shared half and half between the two parts.

use crate::channel::{ChannelSpec, FieldType};
use crate::verify::{Check, Report};
use crate::{Error, Result, C64, I};
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum KernelKind {
    /// `Delta^(+)`
    DeltaPlus,
    /// `Delta^(-)`
    DeltaMinus,
    DeltaF,
    DeltaTildeF,
    DeltaR,
    /// Defined with transposed arguments: `-theta(-tau) Delta(x, x', tau)`.
    DeltaTildeR,
    /// Commutator kernel `Delta^(+) + Delta^(-)`.
    Delta,
    GF,
    /// `conj(G_F)`, the anti-time-ordered kernel of a real field.
    GFStar,
    GPlus,
    GR,
    /// Single-mode `g_F`; `x` is the mode index.
    ModeGF,
    /// Single-mode `g^(+)`; `x` is the mode index.
    ModeGPlus,
}

impl KernelKind {
    pub const ALL: [KernelKind; 13] = [
        KernelKind::DeltaPlus,
        KernelKind::DeltaMinus,
        KernelKind::DeltaF,
        KernelKind::DeltaTildeF,
        KernelKind::DeltaR,
        KernelKind::DeltaTildeR,
        KernelKind::Delta,
        KernelKind::GF,
        KernelKind::GFStar,
        KernelKind::GPlus,
        KernelKind::GR,
        KernelKind::ModeGF,
        KernelKind::ModeGPlus,
    ];

    pub fn has_theta(self) -> bool {
        !matches!(self, KernelKind::DeltaPlus | KernelKind::DeltaMinus | KernelKind::Delta | KernelKind::GPlus | KernelKind::ModeGPlus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Step function with a configurable value at zero (default 1/2).
pub fn theta(tau: f64, at_zero: f64) -> f64 {
    if tau > 0.0 {
        1.0
    } else if tau < 0.0 {
        0.0
    } else {
        at_zero
    }
}

/// Anything that can hand out kernel values at `(x, x', tau)`.
pub trait KernelSource {
    fn spec(&self) -> &ChannelSpec;
    fn eval(&self, kind: KernelKind, x: usize, xp: usize, tau: f64) -> C64;
}

/// Exact mode-sum kernels.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    pub spec: ChannelSpec,
    pub theta0: f64,
}

impl ClosedForm {
    pub fn new(spec: &ChannelSpec) -> Self {
        ClosedForm { spec: spec.clone(), theta0: 0.5 }
    }

    fn check(&self, kind: KernelKind, x: usize, xp: usize) -> Result<()> {
        let n = match kind {
            KernelKind::ModeGF | KernelKind::ModeGPlus => self.spec.modes.len(),
            _ => self.spec.nx(),
        };
        if x >= n || xp >= n {
            return Err(Error::UnknownLabel(format!("label index ({}, {}) out of range", x, xp)));
        }
        Ok(())
    }

    /// Kernel value plus a flag that is set when a step function was
    /// evaluated exactly at zero.
    pub fn kernel_eval(&self, kind: KernelKind, x: usize, xp: usize, tau: f64) -> Result<(C64, bool)> {
        self.check(kind, x, xp)?;
        Ok((self.eval(kind, x, xp, tau), tau == 0.0 && kind.has_theta()))
    }

    /// `Delta^(+)(x, x', tau) = i sum u(x) ut(x') e^{-i w tau} / 2w`.
    pub fn delta_plus(&self, x: usize, xp: usize, tau: f64) -> C64 {
        self.spec
            .modes
            .iter()
            .map(|m| I * m.u[x] * m.ut[xp] * (-I * m.omega * tau).exp() / (2.0 * m.omega))
            .sum()
    }

    /// `Delta^(-)(x, x', tau) = -i eps sum v(x') vt(x) e^{i w tau} / 2w`.
    pub fn delta_minus(&self, x: usize, xp: usize, tau: f64) -> C64 {
        let eps = self.spec.eps();
        self.spec
            .modes
            .iter()
            .map(|m| -I * eps * m.v[xp] * m.vt[x] * (I * m.omega * tau).exp() / (2.0 * m.omega))
            .sum()
    }
}

/// Commutator kernel `Delta = Delta^(+) + Delta^(-)`.
pub fn commutator_delta(spec: &ChannelSpec, x: usize, xp: usize, tau: f64) -> Result<C64> {
    let cf = ClosedForm::new(spec);
    cf.check(KernelKind::Delta, x, xp)?;
    Ok(cf.eval(KernelKind::Delta, x, xp, tau))
}

impl KernelSource for ClosedForm {
    fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    fn eval(&self, kind: KernelKind, x: usize, xp: usize, tau: f64) -> C64 {
        let th = theta(tau, self.theta0);
        let thm = theta(-tau, self.theta0);
        let dp = || self.delta_plus(x, xp, tau);
        let dm = || self.delta_minus(x, xp, tau);
        // G^(+)(x', x, -tau)
        let gr = || self.delta_plus(xp, x, -tau);
        match kind {
            KernelKind::DeltaPlus | KernelKind::GPlus => dp(),
            KernelKind::DeltaMinus => dm(),
            KernelKind::Delta => dp() + dm(),
            KernelKind::DeltaF => th * dp() - thm * dm(),
            KernelKind::DeltaTildeF => th * dm() - thm * dp(),
            KernelKind::DeltaR => th * (dp() + dm()),
            KernelKind::DeltaTildeR => -thm * (dp() + dm()),
            KernelKind::GF => th * dp() + thm * gr(),
            KernelKind::GFStar => -(th * gr() + thm * dp()),
            KernelKind::GR => th * (dp() - gr()),
            KernelKind::ModeGPlus => I * (-I * self.spec.modes[x].omega * tau).exp(),
            KernelKind::ModeGF => I * th * (-I * self.spec.modes[x].omega * tau).exp(),
        }
    }
}

/// DFT-based frequency projector on `n` points.
#[derive(Clone)]
pub struct Projector {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Projector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Projector({})", self.n)
    }
}

impl Projector {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::GridMismatch(format!("grid size {} is not a power of two", n)));
        }
        let mut planner = FftPlanner::new();
        Ok(Projector { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Mask weight of DFT bin `k`. Bins above `n/2` carry `e^{-i w t}`
    /// with `w > 0`. `strict` drops the shared zero and Nyquist bins.
    pub fn weight(&self, k: usize, sign: Sign, strict: bool) -> f64 {
        let half = self.n / 2;
        if k == 0 || k == half {
            return if strict { 0.0 } else { 0.5 };
        }
        let positive = k > half;
        match (sign, positive) {
            (Sign::Plus, true) | (Sign::Minus, false) => 1.0,
            _ => 0.0,
        }
    }

    fn masked(&self, x: &[C64], f: impl Fn(usize) -> f64) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "signal length does not match projector");
        let mut buf = x.to_vec();
        self.fwd.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= f(k) / self.n as f64;
        }
        self.inv.process(&mut buf);
        buf
    }

    /// `x^(+)` or `x^(-)`.
    pub fn part(&self, x: &[C64], sign: Sign) -> Vec<C64> {
        self.masked(x, |k| self.weight(k, sign, false))
    }

    /// Projection that also removes the zero and Nyquist bins.
    pub fn strict_part(&self, x: &[C64], sign: Sign) -> Vec<C64> {
        self.masked(x, |k| self.weight(k, sign, true))
    }

    /// Projection with an extra spectral damping `e^{-eps |w|}` (grid spacing `dt`).
    pub fn damped_part(&self, x: &[C64], sign: Sign, dt: f64, eps: f64) -> Vec<C64> {
        let n = self.n as f64;
        self.masked(x, |k| {
            let kk = if k > self.n / 2 { k as f64 - n } else { k as f64 };
            let w = 2.0 * PI * kk.abs() / (n * dt);
            self.weight(k, sign, false) * (-eps * w).exp()
        })
    }

    /// Spectrum of `x` in physical-frequency order is not needed; this
    /// returns the raw DFT for bin-level checks.
    pub fn spectrum(&self, x: &[C64]) -> Vec<C64> {
        let mut buf = x.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    /// Dense matrix of the projector: `(P x)_a = sum_b P[a][b] x_b`.
    pub fn matrix(&self, sign: Sign) -> Vec<Vec<C64>> {
        let mut cols = Vec::with_capacity(self.n);
        for b in 0..self.n {
            let mut e = vec![C64::default(); self.n];
            e[b] = C64::new(1.0, 0.0);
            cols.push(self.part(&e, sign));
        }
        (0..self.n).map(|a| (0..self.n).map(|b| cols[b][a]).collect()).collect()
    }
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<C64>,
    pub eps: f64,
}

impl SampledSignal {
    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> C64) -> Self {
        SampledSignal { t0, dt, values: (0..n).map(|j| f(t0 + j as f64 * dt)).collect(), eps: 0.0 }
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    /// Applies the damping `e^{-eps |t|}` and clears it.
    pub fn damped(&self) -> Self {
        let mut s = self.clone();
        for (j, v) in s.values.iter_mut().enumerate() {
            *v *= (-self.eps * (self.t0 + j as f64 * self.dt).abs()).exp();
        }
        s.eps = 0.0;
        s
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::GridMismatch("dt must be positive".into()));
        }
        Ok(())
    }
}

/// `s^(+)` or `s^(-)` by DFT masking.
pub fn freq_part(s: &SampledSignal, sign: Sign) -> Result<SampledSignal> {
    s.check()?;
    let p = Projector::new(s.values.len())?;
    Ok(SampledSignal { values: p.part(&s.values, sign), ..s.clone() })
}

/// `sum_j f_j g_j dt`.
pub fn grid_inner(f: &[C64], g: &[C64], dt: f64) -> C64 {
    f.iter().zip(g).map(|(a, b)| a * b).sum::<C64>() * dt
}

/// Frequency part of the grid delta at `t = 0` with spectral damping
/// `e^{-eps |w|}`, sampled at `t_j = (j - n/2) dt`.
pub fn delta_part(n: usize, dt: f64, eps: f64, sign: Sign) -> Result<Vec<C64>> {
    let p = Projector::new(n)?;
    let mut d = vec![C64::default(); n];
    d[n / 2] = C64::new(1.0 / dt, 0.0);
    Ok(p.damped_part(&d, sign, dt, eps))
}

/// `delta^(+-)(t) = +-1 / (2 pi i (t -+ i eps))`.
pub fn delta_closed(t: f64, eps: f64, sign: Sign) -> C64 {
    match sign {
        Sign::Plus => 1.0 / (2.0 * PI * I * (t - I * eps)),
        Sign::Minus => -1.0 / (2.0 * PI * I * (t + I * eps)),
    }
}

/// Uniform time grid used for verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
    pub epsilon: f64,
}

impl Grid {
    /// `n = 1024`, `dt = (pi/4) / max w`, `eps = 4 / (n dt)`.
    pub fn default_for(spec: &ChannelSpec) -> Self {
        let n = 1024;
        let dt = PI / 4.0 / spec.max_omega();
        Grid { t0: -(n as f64) * dt / 2.0, dt, n, epsilon: 4.0 / (n as f64 * dt) }
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn check_nyquist(&self, spec: &ChannelSpec) -> Result<()> {
        for m in &spec.modes {
            let ratio = m.omega * self.dt;
            if ratio > PI / 4.0 + 1e-12 {
                return Err(Error::Nyquist { omega: m.omega, ratio });
            }
        }
        if !self.n.is_power_of_two() || self.n < 2 {
            return Err(Error::GridMismatch(format!("grid size {} is not a power of two", self.n)));
        }
        Ok(())
    }

    /// Grid index of time `t`, if it is on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let r = (t - self.t0) / self.dt;
        let j = r.round();
        if (r - j).abs() < 1e-6 && j >= 0.0 && (j as usize) < self.n {
            Some(j as usize)
        } else {
            None
        }
    }
}

/// Where the lag samples sit: on integer multiples of `dt` (containing
/// `tau = 0`) or shifted by half a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagOffset {
    Integer,
    Half,
}

/// Periodic lag-grid kernels built from regularized mode exponentials.
///
/// `Delta^(+)` samples are damped by `e^{-eps |tau|}` and then projected
/// onto strictly positive bins, so they stay exactly frequency-positive on
/// the grid. Step functions are periodic with period `n dt`.
#[derive(Debug, Clone)]
pub struct GridKernels {
    pub spec: ChannelSpec,
    pub grid: Grid,
    pub offset: LagOffset,
    pub theta0: f64,
    proj: Projector,
    dp: Vec<Vec<Vec<C64>>>,
    dm: Vec<Vec<Vec<C64>>>,
}

impl GridKernels {
    pub fn new(spec: &ChannelSpec, grid: Grid, offset: LagOffset) -> Result<Self> {
        grid.check_nyquist(spec)?;
        let proj = Projector::new(grid.n)?;
        let cf = ClosedForm::new(spec);
        let nx = spec.nx();
        let mut dp = vec![vec![Vec::new(); nx]; nx];
        let mut dm = vec![vec![Vec::new(); nx]; nx];
        let mut gk = GridKernels { spec: spec.clone(), grid, offset, theta0: 0.5, proj, dp: Vec::new(), dm: Vec::new() };
        for x in 0..nx {
            for xp in 0..nx {
                let w = |tau: f64| (-grid.epsilon * tau.abs()).exp();
                let sp: Vec<C64> = (0..grid.n).map(|j| gk.lag(j)).map(|t| cf.delta_plus(x, xp, t) * w(t)).collect();
                let sm: Vec<C64> = (0..grid.n).map(|j| gk.lag(j)).map(|t| cf.delta_minus(x, xp, t) * w(t)).collect();
                dp[x][xp] = gk.proj.strict_part(&sp, Sign::Plus);
                dm[x][xp] = gk.proj.strict_part(&sm, Sign::Minus);
            }
        }
        gk.dp = dp;
        gk.dm = dm;
        Ok(gk)
    }

    fn off(&self) -> f64 {
        match self.offset {
            LagOffset::Integer => 0.0,
            LagOffset::Half => 0.5,
        }
    }

    /// Lag value of sample `j`.
    pub fn lag(&self, j: usize) -> f64 {
        (j as f64 - (self.grid.n / 2) as f64 + self.off()) * self.grid.dt
    }

    /// Sample index of lag `tau`, wrapped periodically.
    pub fn lag_index(&self, tau: f64) -> usize {
        let n = self.grid.n as i64;
        let j = (tau / self.grid.dt - self.off()).round() as i64 + n / 2;
        j.rem_euclid(n) as usize
    }

    /// Index of `-tau`.
    pub fn reflect(&self, j: usize) -> usize {
        let n = self.grid.n;
        match self.offset {
            LagOffset::Integer => (n - j) % n,
            LagOffset::Half => n - 1 - j,
        }
    }

    fn theta_at(&self, j: usize) -> f64 {
        let n = self.grid.n;
        match self.offset {
            LagOffset::Integer if j == n / 2 => self.theta0,
            LagOffset::Integer if j == 0 => 0.5,
            _ => {
                if self.lag(j) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn value(&self, kind: KernelKind, x: usize, xp: usize, j: usize) -> C64 {
        let th = self.theta_at(j);
        let thm = self.theta_at(self.reflect(j));
        let dp = self.dp[x][xp][j];
        let dm = self.dm[x][xp][j];
        let gr = || self.dp[xp][x][self.reflect(j)];
        match kind {
            KernelKind::DeltaPlus | KernelKind::GPlus => dp,
            KernelKind::DeltaMinus => dm,
            KernelKind::Delta => dp + dm,
            KernelKind::DeltaF => th * dp - thm * dm,
            KernelKind::DeltaTildeF => th * dm - thm * dp,
            KernelKind::DeltaR => th * (dp + dm),
            KernelKind::DeltaTildeR => -thm * (dp + dm),
            KernelKind::GF => th * dp + thm * gr(),
            KernelKind::GFStar => -(th * gr() + thm * dp),
            KernelKind::GR => th * (dp - gr()),
            KernelKind::ModeGF | KernelKind::ModeGPlus => {
                ClosedForm::new(&self.spec).eval(kind, x, xp, self.lag(j))
            }
        }
    }

    /// All lag samples of one kernel.
    pub fn samples(&self, kind: KernelKind, x: usize, xp: usize) -> Vec<C64> {
        (0..self.grid.n).map(|j| self.value(kind, x, xp, j)).collect()
    }

    /// Frequency part of a kernel as a function of the lag.
    pub fn projected(&self, kind: KernelKind, sign: Sign, x: usize, xp: usize) -> Vec<C64> {
        self.proj.part(&self.samples(kind, x, xp), sign)
    }

    pub fn projector(&self) -> &Projector {
        &self.proj
    }

    /// Largest deviation of the grid kernel from the exact mode sum.
    pub fn regularization_error(&self, kind: KernelKind) -> f64 {
        let cf = ClosedForm::new(&self.spec);
        let mut err: f64 = 0.0;
        for x in 0..self.spec.nx() {
            for xp in 0..self.spec.nx() {
                for j in 0..self.grid.n {
                    let tau = self.lag(j);
                    err = err.max((self.value(kind, x, xp, j) - cf.eval(kind, x, xp, tau)).norm());
                }
            }
        }
        err
    }
}

impl KernelSource for GridKernels {
    fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    fn eval(&self, kind: KernelKind, x: usize, xp: usize, tau: f64) -> C64 {
        self.value(kind, x, xp, self.lag_index(tau))
    }
}

fn max_err(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Evaluates both sides of each response identity and reports the largest
/// deviation. Nonrel identities are checked on the exact kernels.
pub fn verify_response_identities(spec: &ChannelSpec, grid: Grid, tol: f64, exact_tol: f64) -> Result<Report> {
    spec.validate()?;
    grid.check_nyquist(spec)?;
    let mut report = Report::new("kernels");
    let nx = spec.nx();
    let cf = ClosedForm::new(spec);
    let gk = GridKernels::new(spec, grid, LagOffset::Half)?;
    let lags: Vec<f64> = (0..grid.n).map(|j| gk.lag(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..nx).flat_map(|x| (0..nx).map(move |xp| (x, xp))).collect();

    if spec.nonrel {
        let mut e = [0.0f64; 4];
        for &(x, xp) in &pairs {
            for &t in &lags {
                let k = |kind| cf.eval(kind, x, xp, t);
                e[0] = e[0].max((k(KernelKind::DeltaF) - k(KernelKind::DeltaR)).norm());
                e[1] = e[1].max((k(KernelKind::DeltaTildeF) - k(KernelKind::DeltaTildeR)).norm());
                e[2] = e[2].max((k(KernelKind::DeltaPlus) - k(KernelKind::DeltaR) + k(KernelKind::DeltaTildeR)).norm());
                e[3] = e[3].max(k(KernelKind::DeltaMinus).norm());
            }
        }
        report.push(Check::new("nonrel: Delta_F = Delta_R", e[0], exact_tol));
        report.push(Check::new("nonrel: tDelta_F = tDelta_R", e[1], exact_tol));
        report.push(Check::new("nonrel: Delta+ = Delta_R - tDelta_R", e[2], exact_tol));
        report.push(Check::new("nonrel: Delta- = 0", e[3], exact_tol));
    }

    match spec.field {
        FieldType::Real => {
            let mut e = [0.0f64; 3];
            for &(x, xp) in &pairs {
                let grp = gk.projected(KernelKind::GR, Sign::Plus, x, xp);
                let grp_t = gk.projected(KernelKind::GR, Sign::Plus, xp, x);
                let grm = gk.projected(KernelKind::GR, Sign::Minus, x, xp);
                let grm_t = gk.projected(KernelKind::GR, Sign::Minus, xp, x);
                let gf = gk.samples(KernelKind::GF, x, xp);
                let gfs = gk.samples(KernelKind::GFStar, x, xp);
                let gp = gk.samples(KernelKind::GPlus, x, xp);
                let n = grid.n;
                let refl = |v: &Vec<C64>, j: usize| v[gk.reflect(j)];
                let rhs_f: Vec<C64> = (0..n).map(|j| grp[j] + refl(&grp_t, j)).collect();
                let rhs_fs: Vec<C64> = (0..n).map(|j| grm[j] + refl(&grm_t, j)).collect();
                let rhs_p: Vec<C64> = (0..n).map(|j| grp[j] - refl(&grm_t, j)).collect();
                e[0] = e[0].max(max_err(&gf, &rhs_f));
                e[1] = e[1].max(max_err(&gfs, &rhs_fs));
                e[2] = e[2].max(max_err(&gp, &rhs_p));
            }
            report.push(Check::new("real: G_F(x,x',t) = G_R+(x,x',t) + G_R+(x',x,-t)", e[0], tol));
            report.push(Check::new("real: G_F*(x,x',t) = G_R-(x,x',t) + G_R-(x',x,-t)", e[1], tol));
            report.push(Check::new("real: G+(x,x',t) = G_R+(x,x',t) - G_R-(x',x,-t)", e[2], tol));
            report.note(format!("G_F grid regularization deviation {:.3e}", gk.regularization_error(KernelKind::GF)));
        }
        FieldType::Channel if !spec.nonrel => {
            let mut e = [0.0f64; 4];
            for &(x, xp) in &pairs {
                let p = |k, s| gk.projected(k, s, x, xp);
                let (rp, rm) = (p(KernelKind::DeltaR, Sign::Plus), p(KernelKind::DeltaR, Sign::Minus));
                let (tp, tm) = (p(KernelKind::DeltaTildeR, Sign::Plus), p(KernelKind::DeltaTildeR, Sign::Minus));
                let n = grid.n;
                let sub = |a: &Vec<C64>, b: &Vec<C64>| (0..n).map(|j| a[j] - b[j]).collect::<Vec<_>>();
                let add = |a: &Vec<C64>, b: &Vec<C64>| (0..n).map(|j| a[j] + b[j]).collect::<Vec<_>>();
                e[0] = e[0].max(max_err(&gk.samples(KernelKind::DeltaPlus, x, xp), &sub(&rp, &tp)));
                e[1] = e[1].max(max_err(&gk.samples(KernelKind::DeltaMinus, x, xp), &sub(&rm, &tm)));
                e[2] = e[2].max(max_err(&gk.samples(KernelKind::DeltaF, x, xp), &add(&rp, &tm)));
                e[3] = e[3].max(max_err(&gk.samples(KernelKind::DeltaTildeF, x, xp), &add(&rm, &tp)));
            }
            report.push(Check::new("channel: Delta+ = Delta_R+ - tDelta_R+", e[0], tol));
            report.push(Check::new("channel: Delta- = Delta_R- - tDelta_R-", e[1], tol));
            report.push(Check::new("channel: Delta_F = Delta_R+ + tDelta_R-", e[2], tol));
            report.push(Check::new("channel: tDelta_F = Delta_R- + tDelta_R+", e[3], tol));
            report.note(format!("Delta_F grid regularization deviation {:.3e}", gk.regularization_error(KernelKind::DeltaF)));
        }
        FieldType::Channel => {}
    }
    report.note("tDelta_R(x,x',t) = -theta(-t) Delta(x,x',t); commutator form uses tDelta_R(x',x,t'-t)".to_string());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Mode, Statistics};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closed_form_examples() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 4);
        let cf = ClosedForm::new(&osc);
        assert!((cf.eval(KernelKind::GR, 0, 0, PI / 2.0) - 1.0).norm() < 1e-15);
        assert!((cf.eval(KernelKind::ModeGPlus, 0, 0, 0.0) - I).norm() < 1e-15);
        let mut ch = osc.clone();
        ch.field = FieldType::Channel;
        ch.modes = vec![Mode::particle("k", 2.0, vec![c(1.0, 0.0)])];
        let cf = ClosedForm::new(&ch);
        assert!((cf.eval(KernelKind::DeltaPlus, 0, 0, 0.0) - I / 4.0).norm() < 1e-15);
        assert_eq!(cf.kernel_eval(KernelKind::DeltaF, 0, 0, 0.0).unwrap().1, true);
        assert!(cf.kernel_eval(KernelKind::DeltaF, 0, 3, 0.0).is_err());
    }

    #[test]
    fn projector_examples() {
        let n = 64;
        let dt = 0.25;
        let w0 = 2.0 * PI * 5.0 / (n as f64 * dt);
        let e = SampledSignal::from_fn(-8.0, dt, n, |t| (-I * w0 * t).exp());
        let p = freq_part(&e, Sign::Plus).unwrap();
        assert!(max_err(&p.values, &e.values) < 1e-13);
        let cs = SampledSignal::from_fn(-8.0, dt, n, |t| c((w0 * t).cos(), 0.0));
        let p = freq_part(&cs, Sign::Plus).unwrap();
        let half: Vec<C64> = e.values.iter().map(|v| v * 0.5).collect();
        assert!(max_err(&p.values, &half) < 1e-13);
        let g = SampledSignal::from_fn(-8.0, dt, n, |t| (-I * 2.0 * w0 * t).exp());
        let gp = freq_part(&g, Sign::Plus).unwrap();
        assert!(grid_inner(&p.values, &gp.values, dt).norm() < 1e-12);
    }

    #[test]
    fn nyquist_is_checked() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 4);
        let mut g = Grid::default_for(&osc);
        assert!(g.check_nyquist(&osc).is_ok());
        g.dt = 1.0;
        assert!(matches!(g.check_nyquist(&osc), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn oscillator_identities_on_default_grid() {
        let osc = ChannelSpec::oscillator(1.0, 1.0, 4);
        let r = verify_response_identities(&osc, Grid::default_for(&osc), 1e-6, 1e-12).unwrap();
        assert!(r.pass(), "{:?}", r);
    }

    #[test]
    fn nonrel_identities_exact() {
        let ch = ChannelSpec {
            field: FieldType::Channel,
            statistics: Statistics::Fermi,
            nonrel: true,
            hbar: 1.0,
            truncation: 1,
            x_labels: vec!["a".into(), "b".into()],
            modes: vec![
                Mode::particle("k1", 1.0, vec![c(1.0, 0.2), c(0.3, -0.5)]),
                Mode::particle("k2", 0.7, vec![c(-0.4, 0.1), c(0.9, 0.0)]),
            ],
        };
        let r = verify_response_identities(&ch, Grid::default_for(&ch), 1e-6, 1e-12).unwrap();
        assert!(r.pass(), "{:?}", r);
    }
}
