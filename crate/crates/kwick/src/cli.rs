//! Command-line front end: spec files, the operator-product DSL and JSON reports.
//!
//! Spec file:
//!
//! ```text
//! [channel]
//! field = real            # real | channel
//! statistics = bose       # bose | fermi
//! hbar = 1
//! truncation = 8
//!
//! [xlabels]
//! x1
//!
//! [modes]
//! # label omega, then u v ut vt as (re im) pairs for every x-label
//! k1 1.0   1 0  0 0  1 0  0 0
//! ```
//!
//! `[grid]` (t0, dt, n, epsilon) and `[verify]` (tol, seed, samples,
//! degree_cap, points_cap, order_cap, dim_cap) are optional.

use crate::causal_transform::{raw_to_cpoly, raw_to_grassmann, z_form_points};
use crate::channel::{Branch, ChannelSpec, FieldKind, FieldOp, FieldType, Mode, Statistics};
use crate::fock_oracle::Oracle;
use crate::grassmann::GrassmannPoly;
use crate::green_kernels::{ClosedForm, Grid, GridKernels, KernelKind, LagOffset};
use crate::poly::multi_indices;
use crate::verify::{suite_all, suite_causal, suite_grassmann, suite_kernels, suite_wick, Report, VerifyOptions};
use crate::wick_engine::{vacuum_value, wick_expand, WickExpansion};
use crate::{Error, Result, C64};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

/// The bundled single-oscillator spec (hbar = omega = 1).
pub const OSCILLATOR_SPEC: &str = include_str!("../specs/oscillator.kw");

#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub spec: ChannelSpec,
    /// `None` when the file has no `[grid]` section.
    pub grid: Option<Grid>,
    pub options: VerifyOptions,
}

impl SpecFile {
    pub fn grid(&self) -> Grid {
        self.grid.unwrap_or_else(|| Grid::default_for(&self.spec))
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, msg: msg.into() }
}

fn is_label(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_') && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(syntax(line, format!("{}: expected a finite number, got '{}'", key, v))),
    }
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| syntax(line, format!("{}: expected a non-negative integer, got '{}'", key, v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Channel,
    XLabels,
    Modes,
    Grid,
    Verify,
}

/// Parses a spec file. Errors carry the line of the first problem.
pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let mut section: Option<Section> = None;
    let mut seen_sections = BTreeSet::new();
    let mut seen_keys: BTreeSet<(Section, String)> = BTreeSet::new();

    let mut field = FieldType::Channel;
    let mut statistics = Statistics::Bose;
    let mut nonrel: Option<(usize, bool)> = None;
    let mut hbar = 1.0;
    let mut truncation = 6;
    let mut labels: Vec<String> = Vec::new();
    let mut modes: Vec<(usize, Mode)> = Vec::new();
    let (mut t0, mut dt, mut n, mut epsilon) = (None, None, None, None);
    let mut options = VerifyOptions::default();

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| syntax(ln, "unterminated section header"))?.trim();
            let s = match name {
                "channel" => Section::Channel,
                "xlabels" => Section::XLabels,
                "modes" => Section::Modes,
                "grid" => Section::Grid,
                "verify" => Section::Verify,
                _ => return Err(syntax(ln, format!("unknown section [{}]", name))),
            };
            if !seen_sections.insert(s) {
                return Err(syntax(ln, format!("duplicate section [{}]", name)));
            }
            section = Some(s);
            continue;
        }
        let Some(sec) = section else {
            return Err(syntax(ln, "content before the first section"));
        };
        match sec {
            Section::XLabels => {
                if !is_label(line) {
                    return Err(syntax(ln, format!("bad x-label '{}'", line)));
                }
                if labels.iter().any(|l| l == line) {
                    return Err(syntax(ln, format!("duplicate x-label '{}'", line)));
                }
                labels.push(line.to_string());
            }
            Section::Modes => {
                if labels.is_empty() {
                    return Err(syntax(ln, "[modes] needs the x-labels first"));
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                let want = 2 + 8 * labels.len();
                if toks.len() != want {
                    return Err(syntax(ln, format!("mode row needs {} fields (label, omega, 8 per x-label), got {}", want, toks.len())));
                }
                if !is_label(toks[0]) {
                    return Err(syntax(ln, format!("bad mode label '{}'", toks[0])));
                }
                if modes.iter().any(|(_, m)| m.label == toks[0]) {
                    return Err(syntax(ln, format!("duplicate mode '{}'", toks[0])));
                }
                let omega = parse_f64(ln, "omega", toks[1])?;
                if omega <= 0.0 {
                    return Err(Error::Invariant(format!("line {}: mode {}: omega must be positive, got {}", ln, toks[0], omega)));
                }
                let nums = toks[2..].iter().map(|t| parse_f64(ln, toks[0], t)).collect::<Result<Vec<f64>>>()?;
                let table = |slot: usize| -> Vec<C64> {
                    (0..labels.len()).map(|x| C64::new(nums[8 * x + 2 * slot], nums[8 * x + 2 * slot + 1])).collect()
                };
                modes.push((ln, Mode { label: toks[0].to_string(), omega, u: table(0), v: table(1), ut: table(2), vt: table(3) }));
            }
            _ => {
                let (key, val) = line.split_once('=').ok_or_else(|| syntax(ln, "expected 'key = value'"))?;
                let (key, val) = (key.trim(), val.trim());
                if !seen_keys.insert((sec, key.to_string())) {
                    return Err(syntax(ln, format!("duplicate key '{}'", key)));
                }
                match (sec, key) {
                    (Section::Channel, "field") => {
                        field = match val {
                            "real" => FieldType::Real,
                            "channel" => FieldType::Channel,
                            _ => return Err(syntax(ln, format!("field: expected real or channel, got '{}'", val))),
                        }
                    }
                    (Section::Channel, "statistics") => {
                        statistics = match val {
                            "bose" => Statistics::Bose,
                            "fermi" => Statistics::Fermi,
                            _ => return Err(syntax(ln, format!("statistics: expected bose or fermi, got '{}'", val))),
                        }
                    }
                    (Section::Channel, "nonrel") => {
                        let b = match val {
                            "true" => true,
                            "false" => false,
                            _ => return Err(syntax(ln, format!("nonrel: expected true or false, got '{}'", val))),
                        };
                        nonrel = Some((ln, b));
                    }
                    (Section::Channel, "hbar") => hbar = parse_f64(ln, key, val)?,
                    (Section::Channel, "truncation") => truncation = parse_usize(ln, key, val)?,
                    (Section::Grid, "t0") => t0 = Some(parse_f64(ln, key, val)?),
                    (Section::Grid, "dt") => dt = Some((ln, parse_f64(ln, key, val)?)),
                    (Section::Grid, "n") => n = Some((ln, parse_usize(ln, key, val)?)),
                    (Section::Grid, "epsilon") => epsilon = Some((ln, parse_f64(ln, key, val)?)),
                    (Section::Verify, "tol") => options.tol = parse_f64(ln, key, val)?,
                    (Section::Verify, "seed") => options.seed = val.parse().map_err(|_| syntax(ln, format!("seed: bad integer '{}'", val)))?,
                    (Section::Verify, "samples") => options.samples = parse_usize(ln, key, val)?,
                    (Section::Verify, "degree_cap") => options.degree_cap = parse_usize(ln, key, val)?,
                    (Section::Verify, "points_cap") => options.points_cap = parse_usize(ln, key, val)?,
                    (Section::Verify, "order_cap") => options.order_cap = parse_usize(ln, key, val)?,
                    (Section::Verify, "dim_cap") => options.dim_cap = parse_usize(ln, key, val)?,
                    _ => return Err(syntax(ln, format!("unknown key '{}' in this section", key))),
                }
            }
        }
    }

    if field == FieldType::Real {
        if let Some((ln, false)) = nonrel {
            return Err(Error::Invariant(format!("line {}: a real field has no antiparticle sector; drop nonrel", ln)));
        }
    }
    let mut spec = ChannelSpec {
        field,
        statistics,
        nonrel: field == FieldType::Real || nonrel.is_some_and(|(_, b)| b),
        hbar,
        truncation,
        x_labels: labels,
        modes: Vec::new(),
    };
    // per-row checks first so the diagnostic can point at the row
    for (ln, m) in &modes {
        spec.modes = vec![m.clone()];
        if let Err(Error::Invariant(msg)) = spec.validate() {
            return Err(Error::Invariant(format!("line {}: {}", ln, msg)));
        }
    }
    spec.modes = modes.into_iter().map(|(_, m)| m).collect();
    spec.validate()?;

    let grid = if t0.is_some() || dt.is_some() || n.is_some() || epsilon.is_some() {
        let d = Grid::default_for(&spec);
        let (nl, n) = n.unwrap_or((0, d.n));
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Invariant(format!("line {}: grid n must be a power of two >= 4, got {}", nl, n)));
        }
        let (dl, dt) = dt.unwrap_or((0, d.dt));
        if dt <= 0.0 {
            return Err(Error::Invariant(format!("line {}: grid dt must be positive", dl)));
        }
        let (el, epsilon) = epsilon.unwrap_or((0, 4.0 / (n as f64 * dt)));
        if epsilon <= 0.0 {
            return Err(Error::Invariant(format!("line {}: grid epsilon must be positive", el)));
        }
        let g = Grid { t0: t0.unwrap_or(-(n as f64) * dt / 2.0), dt, n, epsilon };
        g.check_nyquist(&spec)?;
        Some(g)
    } else {
        None
    };
    Ok(SpecFile { spec, grid, options })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprOp {
    pub kind: FieldKind,
    pub branch: Branch,
    pub x: String,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub vev: bool,
    pub ops: Vec<ExprOp>,
}

impl fmt::Display for ExprOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}({},{})", self.kind.name(), self.branch.sign_char(), self.x, self.t)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = self.ops.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" ");
        if self.vev {
            write!(f, "vev[{}]", body)
        } else {
            f.write_str(&body)
        }
    }
}

impl Expr {
    /// Resolves x-labels against `spec`.
    pub fn bind(&self, spec: &ChannelSpec) -> Result<Vec<FieldOp>> {
        self.ops
            .iter()
            .map(|o| {
                spec.check_kind(o.kind)?;
                Ok(FieldOp::new(o.kind, spec.x_index(&o.x)?, o.t, o.branch))
            })
            .collect()
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Lexer<'_> {
    fn line(&self) -> usize {
        1 + self.src[..self.pos].iter().filter(|&&b| b == b'\n').count()
    }

    fn err(&self, msg: impl fmt::Display) -> Error {
        let col = self.pos - self.src[..self.pos].iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
        syntax(self.line(), format!("column {}: {}", col, msg))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && matches!(self.src[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E') {
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match s.parse::<f64>() {
            Ok(t) if t.is_finite() => Ok(t),
            _ => {
                self.pos = start;
                Err(self.err(format!("expected a decimal time, got '{}'", s)))
            }
        }
    }

    fn op(&mut self) -> Result<ExprOp> {
        self.skip_ws();
        let at = self.pos;
        let kind = match self.word() {
            "Q" => FieldKind::Q,
            "psi" => FieldKind::Psi,
            "tpsi" => FieldKind::TPsi,
            w => {
                let w = w.to_string();
                self.pos = at;
                return Err(self.err(format!("unknown operator '{}'", w)));
            }
        };
        let branch = match self.peek() {
            Some(b'+') => Branch::Plus,
            Some(b'-') => Branch::Minus,
            _ => return Err(self.err("missing branch tag '+' or '-'")),
        };
        self.pos += 1;
        self.eat(b'(')?;
        self.skip_ws();
        let x = self.word().to_string();
        if !is_label(&x) {
            return Err(self.err("expected an x-label"));
        }
        self.eat(b',')?;
        let t = self.number()?;
        self.eat(b')')?;
        Ok(ExprOp { kind, branch, x, t })
    }
}

/// Parses `vev[ op op ... ]` or a bare product.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut lx = Lexer { src: text.as_bytes(), pos: 0 };
    lx.skip_ws();
    let vev = text[lx.pos..].starts_with("vev");
    if vev {
        lx.pos += 3;
        lx.eat(b'[')?;
    }
    let mut ops = Vec::new();
    loop {
        lx.skip_ws();
        match lx.peek() {
            None if vev => return Err(lx.err("missing ']'")),
            None => break,
            Some(b']') if vev => {
                lx.pos += 1;
                lx.skip_ws();
                if lx.peek().is_some() {
                    return Err(lx.err("trailing input after ']'"));
                }
                break;
            }
            _ => ops.push(lx.op()?),
        }
    }
    if ops.is_empty() {
        return Err(syntax(1, "empty product"));
    }
    Ok(Expr { vev, ops })
}

fn cjson(z: C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn op_string(op: &FieldOp, spec: &ChannelSpec) -> String {
    let x = spec.x_labels.get(op.x).cloned().unwrap_or_else(|| op.x.to_string());
    ExprOp { kind: op.kind, branch: op.branch, x, t: op.t }.to_string()
}

pub fn expansion_json(e: &WickExpansion, spec: &ChannelSpec) -> Value {
    let terms: Vec<Value> = e
        .terms
        .iter()
        .map(|t| {
            json!({
                "coeff": cjson(t.coeff),
                "contractions": t.contractions.iter().map(|c| json!({ "i": c.i, "j": c.j, "value": cjson(c.value) })).collect::<Vec<_>>(),
                "residual": t.residual.iter().map(|o| op_string(o, spec)).collect::<Vec<_>>(),
                "residual_index": t.residual_index,
                "equal_time": t.equal_time,
            })
        })
        .collect();
    json!({ "terms": terms, "vacuum_value": cjson(vacuum_value(e)) })
}

pub fn report_json(r: &Report) -> Value {
    json!({
        "suite": r.suite,
        "checks": r.checks.iter().map(|c| json!({ "identity": c.identity, "max_error": c.max_error, "tol": c.tol, "pass": c.pass })).collect::<Vec<_>>(),
        "notes": r.notes,
        "max_error": r.max_error(),
        "pass": r.pass(),
    })
}

#[derive(Parser, Debug)]
#[command(name = "kwick", version, about = "Hori-Wick expansions on the closed-time contour")]
struct Cli {
    /// Spec file; the bundled oscillator when omitted.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Expression file, or the expression itself.
    #[arg(long, global = true)]
    expr: Option<String>,
    /// Pass/fail tolerance; overrides the spec's [verify] table
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// RNG seed for sampled checks
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write the report here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wick expansion of a product.
    Expand,
    /// Contour-ordered vacuum value, cross-checked against the oracle.
    Expect,
    /// Vacuum functional with one source per operator in the expression.
    Phivac {
        #[arg(long)]
        order: Option<usize>,
    },
    /// Run a verification suite against the oracles
    Verify {
        #[arg(value_enum)]
        suite: SuiteName,
        /// Dump the sampled Feynman kernel as CSV (tau,re,im).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SuiteName {
    Kernels,
    Causal,
    Wick,
    Grassmann,
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Expand => "expand",
            Command::Expect => "expect",
            Command::Phivac { .. } => "phivac",
            Command::Verify { .. } => "verify",
        }
    }
}

struct Ctx {
    file: SpecFile,
    spec_name: String,
    hash: String,
    opts: VerifyOptions,
}

fn input_error(msg: String) -> Error {
    Error::Syntax { line: 0, msg }
}

fn load(cli: &Cli) -> Result<Ctx> {
    let (text, spec_name) = match &cli.spec {
        Some(p) => (std::fs::read_to_string(p).map_err(|e| input_error(format!("{}: {}", p.display(), e)))?, p.display().to_string()),
        None => (OSCILLATOR_SPEC.to_string(), "bundled:oscillator".to_string()),
    };
    let file = parse_spec(&text)?;
    let mut opts = file.options;
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    if let Some(s) = cli.seed {
        opts.seed = s;
    }
    if let Ok(v) = std::env::var("KW_DIM_CAP") {
        opts.dim_cap = v.trim().parse().map_err(|_| input_error(format!("KW_DIM_CAP: bad integer '{}'", v)))?;
    }
    let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{:02x}", b)).collect();
    Ok(Ctx { file, spec_name, hash, opts })
}

fn load_expr(cli: &Cli) -> Result<Expr> {
    let e = cli.expr.as_deref().ok_or_else(|| input_error("--expr is required for this command".into()))?;
    let path = std::path::Path::new(e);
    let text = if path.is_file() { std::fs::read_to_string(path).map_err(|err| input_error(format!("{}: {}", e, err)))? } else { e.to_string() };
    parse_expr(&text)
}

fn oracle_or_note(spec: &ChannelSpec, cap: usize) -> Result<Option<Oracle>> {
    match Oracle::new(spec, cap) {
        Ok(o) => Ok(Some(o)),
        Err(Error::DimensionCap { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn run(cli: &Cli) -> Result<(Value, bool)> {
    let ctx = load(cli)?;
    let spec = &ctx.file.spec;
    let mut out = serde_json::Map::new();
    out.insert("spec-hash".into(), json!(ctx.hash));
    let mut inputs = serde_json::Map::new();
    inputs.insert("spec".into(), json!(ctx.spec_name));
    inputs.insert("tol".into(), json!(ctx.opts.tol));
    inputs.insert("seed".into(), json!(ctx.opts.seed));
    let pass = match &cli.command {
        Command::Expand => {
            let expr = load_expr(cli)?;
            inputs.insert("expr".into(), json!(expr.to_string()));
            let e = wick_expand(&expr.bind(spec)?, spec)?;
            if let Value::Object(m) = expansion_json(&e, spec) {
                out.extend(m);
            }
            true
        }
        Command::Expect => {
            let expr = load_expr(cli)?;
            inputs.insert("expr".into(), json!(expr.to_string()));
            let ops = expr.bind(spec)?;
            let value = vacuum_value(&wick_expand(&ops, spec)?);
            out.insert("value".into(), cjson(value));
            match oracle_or_note(spec, ctx.opts.dim_cap)? {
                Some(o) => {
                    let ov = o.tc_vev(&ops)?;
                    let err = (value - ov).norm();
                    out.insert("oracle".into(), cjson(ov));
                    out.insert("max_error".into(), json!(err));
                    err <= ctx.opts.tol
                }
                None => {
                    out.insert("oracle".into(), Value::Null);
                    true
                }
            }
        }
        Command::Phivac { order } => {
            let expr = load_expr(cli)?;
            inputs.insert("expr".into(), json!(expr.to_string()));
            let order = order.unwrap_or(ctx.opts.order_cap);
            inputs.insert("order".into(), json!(order));
            let pts = expr.bind(spec)?;
            let raw = z_form_points(spec, &ClosedForm::new(spec), &pts)?;
            let oracle = oracle_or_note(spec, ctx.opts.dim_cap)?;
            let mut coeffs = Vec::new();
            let mut err: f64 = 0.0;
            if spec.statistics.is_fermi() {
                let phi = raw_to_grassmann(&raw).exp();
                let gens: Vec<GrassmannPoly> = (1..=pts.len() as u32).map(GrassmannPoly::generator).collect();
                let o = oracle.as_ref().map(|o| o.moment_vev_grassmann(&pts, &gens)).transpose()?;
                let mut mons: BTreeSet<Vec<u32>> = phi.terms().map(|(m, _)| m.clone()).collect();
                if let Some(o) = &o {
                    mons.extend(o.terms().map(|(m, _)| m.clone()));
                }
                for m in mons {
                    let v = phi.coeff(&m);
                    let mut entry = json!({ "monomial": m, "value": cjson(v) });
                    if let Some(o) = &o {
                        entry["oracle"] = cjson(o.coeff(&m));
                        err = err.max((v - o.coeff(&m)).norm());
                    }
                    coeffs.push(entry);
                }
            } else {
                let phi = raw_to_cpoly(&raw, pts.len(), order).exp();
                for e in multi_indices(pts.len(), order) {
                    let v = phi.coeff(&e);
                    let mut entry = json!({ "index": e, "value": cjson(v) });
                    if let Some(o) = &oracle {
                        let ov = o.moment_vev(&pts, &e, order)?;
                        entry["oracle"] = cjson(ov);
                        err = err.max((v - ov).norm());
                    }
                    coeffs.push(entry);
                }
            }
            out.insert("coefficients".into(), json!(coeffs));
            out.insert("oracle_checked".into(), json!(oracle.is_some()));
            out.insert("max_error".into(), json!(err));
            err <= ctx.opts.tol
        }
        Command::Verify { suite, csv } => {
            let grid = ctx.file.grid();
            let o = &ctx.opts;
            let rep = match suite {
                SuiteName::Kernels => suite_kernels(spec, grid, o)?,
                SuiteName::Causal => suite_causal(spec, o)?,
                SuiteName::Wick => suite_wick(spec, o)?,
                SuiteName::Grassmann => suite_grassmann(o)?,
                SuiteName::All => suite_all(spec, grid, o)?,
            };
            if let Some(path) = csv {
                write_kernel_csv(spec, grid, path)?;
            }
            let pass = rep.pass();
            if let Value::Object(m) = report_json(&rep) {
                out.extend(m);
            }
            pass
        }
    };
    out.insert("command".into(), json!(cli.command.name()));
    out.insert("inputs".into(), Value::Object(inputs));
    out.insert("pass".into(), json!(pass));
    Ok((Value::Object(out), pass))
}

fn write_kernel_csv(spec: &ChannelSpec, grid: Grid, path: &std::path::Path) -> Result<()> {
    let kind = match spec.field {
        FieldType::Real => KernelKind::GF,
        FieldType::Channel => KernelKind::DeltaF,
    };
    let gk = GridKernels::new(spec, grid, LagOffset::Integer)?;
    let mut s = String::from("tau,re,im\n");
    for (j, z) in gk.samples(kind, 0, 0).iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", gk.lag(j), z.re, z.im));
    }
    std::fs::write(path, s).map_err(|e| input_error(format!("{}: {}", path.display(), e)))
}

fn error_json(command: &str, e: &Error) -> Value {
    let (kind, line) = match e {
        Error::Syntax { line, .. } => ("syntax", (*line > 0).then_some(*line)),
        Error::Invariant(_) => ("invariant", None),
        Error::UnknownLabel(_) => ("unknown_label", None),
        Error::DimensionCap { .. } => ("dimension_cap", None),
        Error::TieAtEqualTime(..) => ("equal_time_tie", None),
        Error::Nyquist { .. } => ("nyquist", None),
        Error::Statistics(_) => ("statistics", None),
        _ => ("error", None),
    };
    json!({ "command": command, "error": { "kind": kind, "line": line, "message": e.to_string() }, "pass": false })
}

/// Runs one command line (including the program name). Returns the exit
/// code: 0 pass, 1 verification failure, 2 input error.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout(), "{}", e);
                return 0;
            }
            let v = json!({ "command": Value::Null, "error": { "kind": "usage", "line": Value::Null, "message": e.to_string() }, "pass": false });
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            return 2;
        }
    };
    let (value, code) = match run(&cli) {
        Ok((v, pass)) => (v, if pass { 0 } else { 1 }),
        Err(e) => (error_json(cli.command.name(), &e), 2),
    };
    let text = serde_json::to_string_pretty(&value).unwrap_or_default();
    let _ = writeln!(std::io::stdout(), "{}", text);
    if let Some(p) = &cli.json {
        if let Err(e) = std::fs::write(p, format!("{}\n", text)) {
            eprintln!("kwick: cannot write {}: {}", p.display(), e);
            return 2;
        }
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_spec_parses() {
        let f = parse_spec(OSCILLATOR_SPEC).unwrap();
        assert_eq!(f.spec, ChannelSpec::oscillator(1.0, 1.0, 8));
        assert!(f.grid.is_none());
    }

    #[test]
    fn expr_examples() {
        let e = parse_expr("vev[ Q-(x1,2.0) Q+(x1,1.0) ]").unwrap();
        assert!(e.vev);
        assert_eq!(e.ops.len(), 2);
        assert_eq!(e.to_string(), "vev[Q-(x1,2) Q+(x1,1)]");
        let e = parse_expr("psi+(x1,1.0) tpsi-(x2,0.5)").unwrap();
        assert_eq!(e.ops[1], ExprOp { kind: FieldKind::TPsi, branch: Branch::Minus, x: "x2".into(), t: 0.5 });
        assert!(matches!(parse_expr("Q(x1,1.0)"), Err(Error::Syntax { .. })));
        assert!(parse_expr("vev[Q+(x1,1)").is_err());
        assert!(parse_expr("Q+(x1,inf)").is_err());
        assert!(parse_expr("").is_err());
    }

    #[test]
    fn spec_errors_have_lines() {
        let bad = OSCILLATOR_SPEC.replace("k1 1.0", "k1 -1.0");
        match parse_spec(&bad) {
            Err(Error::Invariant(m)) => assert!(m.starts_with("line ")),
            other => panic!("{:?}", other),
        }
        match parse_spec("[channel]\ncolour = red\n") {
            Err(Error::Syntax { line: 2, .. }) => {}
            other => panic!("{:?}", other),
        }
    }
}
