//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Numeric values accept
//! simple expressions such as `pi/2`, `3*pi/4`, `sqrt(0.21)` or `-inf`.
//! Amplitudes are written `a1 = re` or `a1 = re, im`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sodw::analysis::{EngineChoice, ScanParameter};
use sodw::oracle::IntegratorConfig;
use sodw::{default_horizon, AmplitudeVector, Complex, Epoch, ModulationProtocol, Observable};

const COMMON_KEYS: &[&str] = &[
    "name", "protocol", "beta", "V", "Omega", "epsilon", "upsilon", "chi", "gamma", "a1", "a2",
    "a3", "a4", "epoch", "horizon", "samples", "rel_tol", "abs_tol", "max_step", "engine",
];
const SCAN_KEYS: &[&str] = &["param", "from", "to", "points", "grid", "observables"];

/// Tolerance on the norm of parsed initial amplitudes before renormalizing.
const INPUT_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.set(line).with_context(|| format!("line {}: {raw:?}", n + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Sets one `key=value` pair, replacing any earlier value.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key = value"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("empty key");
        }
        self.entries.insert(k.to_string(), v.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| parse_number(v).with_context(|| format!("key {key}")))
            .transpose()
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| anyhow!("missing required key {key}"))
    }

    fn reject_unknown(&self, allowed: &[&[&str]]) -> Result<()> {
        for k in self.entries.keys() {
            if !allowed.iter().any(|set| set.contains(&k.as_str())) {
                bail!("unknown config key {k:?}");
            }
        }
        Ok(())
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Evaluates a numeric literal or a small arithmetic expression over
/// numbers, `pi`, `inf` and `sqrt(..)`.
pub fn parse_number(text: &str) -> Result<f64> {
    let mut p = ExprParser {
        s: text.as_bytes(),
        pos: 0,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        bail!("unexpected input in {text:?} at offset {}", p.pos);
    }
    Ok(v)
}

struct ExprParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, word: &str) -> bool {
        self.skip_ws();
        let w = word.as_bytes();
        if self.s[self.pos..].len() >= w.len() && self.s[self.pos..self.pos + w.len()].eq_ignore_ascii_case(w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<f64> {
        let mut v = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    v += self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> Result<f64> {
        let mut v = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    v *= self.factor()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    v /= self.factor()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn factor(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(")") {
                    bail!("missing ')'");
                }
                Ok(v)
            }
            _ if self.eat("pi") => Ok(std::f64::consts::PI),
            _ if self.eat("inf") => Ok(f64::INFINITY),
            _ if self.eat("sqrt(") => {
                let v = self.expr()?;
                if !self.eat(")") {
                    bail!("missing ')' after sqrt");
                }
                Ok(v.sqrt())
            }
            _ => self.literal(),
        }
    }

    fn literal(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            let exp_sign = (c == b'-' || c == b'+')
                && self.pos > start
                && matches!(self.s[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let tok = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        tok.parse::<f64>()
            .map_err(|_| anyhow!("expected a number, found {:?}", String::from_utf8_lossy(&self.s[start..])))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineMode {
    Auto,
    Exact,
    Oracle,
    Both,
}

impl std::str::FromStr for EngineMode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Self::Auto),
            "exact" => Ok(Self::Exact),
            "oracle" => Ok(Self::Oracle),
            "both" => Ok(Self::Both),
            other => bail!("unknown engine {other:?}; expected auto, exact, oracle or both"),
        }
    }
}

impl fmt::Display for EngineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Exact => "exact",
            Self::Oracle => "oracle",
            Self::Both => "both",
        })
    }
}

/// Settings shared by `evolve` and `scan`.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub name: String,
    pub protocol: ModulationProtocol<f64>,
    pub gamma: f64,
    pub initial: AmplitudeVector<f64>,
    pub epoch: Epoch<f64>,
    pub horizon: f64,
    pub samples: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub engine: EngineMode,
}

impl RunSettings {
    pub fn integrator(&self, t_start: f64, t_end: f64) -> IntegratorConfig<f64> {
        let mut cfg = IntegratorConfig::new(t_start, t_end).with_tolerances(self.rel_tol, self.abs_tol);
        cfg.max_step = self.max_step;
        cfg
    }

    pub fn start_time(&self) -> f64 {
        self.epoch.time(self.horizon)
    }

    /// `key = value` lines that reproduce these settings.
    pub fn describe(&self) -> Vec<(String, String)> {
        use crate::format::g17;
        let mut out = vec![("name".to_string(), self.name.clone())];
        match &self.protocol {
            ModulationProtocol::SyncSech2 { beta, v, omega } => {
                out.push(("protocol".into(), "sync".into()));
                out.push(("beta".into(), g17(*beta)));
                out.push(("V".into(), g17(*v)));
                out.push(("Omega".into(), g17(*omega)));
            }
            ModulationProtocol::AsyncTanhSech { epsilon, upsilon, chi } => {
                out.push(("protocol".into(), "async".into()));
                out.push(("epsilon".into(), g17(*epsilon)));
                out.push(("upsilon".into(), g17(*upsilon)));
                out.push(("chi".into(), g17(*chi)));
            }
            ModulationProtocol::Custom(c) => out.push(("protocol".into(), c.name.clone())),
        }
        out.push(("gamma".into(), g17(self.gamma)));
        for (k, a) in self.initial.0.iter().enumerate() {
            out.push((format!("a{}", k + 1), format!("{}, {}", g17(a.re), g17(a.im))));
        }
        out.push((
            "epoch".into(),
            match self.epoch {
                Epoch::At(t) => g17(t),
                Epoch::MinusInfinity => "-inf".into(),
            },
        ));
        out.push(("horizon".into(), g17(self.horizon)));
        out.push(("samples".into(), self.samples.to_string()));
        out.push(("rel_tol".into(), g17(self.rel_tol)));
        out.push(("abs_tol".into(), g17(self.abs_tol)));
        out.push(("max_step".into(), g17(self.max_step)));
        out.push(("engine".into(), self.engine.to_string()));
        out
    }
}

fn amplitude(text: &str) -> Result<Complex<f64>> {
    let mut parts = text.split(',');
    let re = parse_number(parts.next().unwrap_or(""))?;
    let im = parts.next().map(parse_number).transpose()?.unwrap_or(0.0);
    if parts.next().is_some() {
        bail!("amplitude takes at most two components (re, im)");
    }
    Ok(Complex::new(re, im))
}

fn initial_state(cfg: &Config) -> Result<AmplitudeVector<f64>> {
    let keys = ["a1", "a2", "a3", "a4"];
    if keys.iter().all(|k| cfg.get(k).is_none()) {
        return Ok(AmplitudeVector::basis(3));
    }
    let mut a = [Complex::new(0.0, 0.0); 4];
    for (slot, k) in a.iter_mut().zip(keys) {
        if let Some(v) = cfg.get(k) {
            *slot = amplitude(v).with_context(|| format!("key {k}"))?;
        }
    }
    let state = AmplitudeVector(a);
    let n2 = state.norm2();
    if !n2.is_finite() || (n2 - 1.0).abs() > INPUT_NORM_TOL {
        bail!("initial amplitudes have norm^2 {n2}, which is not 1 within {INPUT_NORM_TOL:e}");
    }
    Ok(state.normalized()?)
}

pub fn run_settings(cfg: &Config, default_name: &str) -> Result<RunSettings> {
    let protocol = match cfg.get("protocol") {
        Some("sync") => ModulationProtocol::sync_sech2(
            cfg.number_or("beta", 0.0)?,
            cfg.required("V")?,
            cfg.number_or("Omega", 1.0)?,
        )?,
        Some("async") => ModulationProtocol::async_tanh_sech(
            cfg.number_or("epsilon", 0.0)?,
            cfg.required("upsilon")?,
            cfg.number_or("chi", 1.0)?,
        )?,
        Some(other) => bail!("unknown protocol {other:?}; expected sync or async"),
        None => bail!("missing required key protocol (sync or async)"),
    };
    let epoch = match cfg.number("epoch")? {
        None => Epoch::MinusInfinity,
        Some(t) if t == f64::NEG_INFINITY => Epoch::MinusInfinity,
        Some(t) if t.is_finite() => Epoch::At(t),
        Some(t) => bail!("epoch must be finite or -inf, got {t}"),
    };
    let horizon = cfg.number("horizon")?.unwrap_or_else(|| default_horizon(&protocol));
    if !(horizon.is_finite() && horizon > 0.0) {
        bail!("horizon must be positive and finite");
    }
    if let Epoch::At(t0) = epoch {
        if t0 >= horizon {
            bail!("epoch {t0} must lie before the horizon {horizon}");
        }
    }
    let samples = match cfg.get("samples") {
        Some(s) => s.parse::<usize>().with_context(|| format!("samples = {s:?}"))?,
        None => 2001,
    };
    if samples < 2 {
        bail!("samples must be at least 2");
    }
    let engine = cfg.get("engine").map(str::parse).transpose()?.unwrap_or(EngineMode::Auto);
    let defaults = IntegratorConfig::<f64>::new(0.0, 1.0);
    Ok(RunSettings {
        name: cfg.get("name").unwrap_or(default_name).to_string(),
        protocol,
        gamma: cfg.number_or("gamma", 0.0)?,
        initial: initial_state(cfg)?,
        epoch,
        horizon,
        samples,
        rel_tol: cfg.number_or("rel_tol", defaults.rel_tol)?,
        abs_tol: cfg.number_or("abs_tol", defaults.abs_tol)?,
        max_step: cfg.number_or("max_step", defaults.max_step)?,
        engine,
    })
}

pub fn evolve_settings(cfg: &Config) -> Result<RunSettings> {
    cfg.reject_unknown(&[COMMON_KEYS])?;
    run_settings(cfg, "evolve")
}

#[derive(Clone, Debug)]
pub struct ScanSettings {
    pub run: RunSettings,
    pub parameter: ScanParameter,
    pub grid: Vec<f64>,
    pub observables: Vec<(Observable, Observable)>,
    pub choice: EngineChoice,
}

fn observable_pair(tok: &str) -> Result<(Observable, Observable)> {
    let t = tok.trim();
    let mut chars = t.chars();
    match (chars.next(), chars.next(), chars.next()) {
        (Some(s), Some(q), None) => Ok((s.to_string().parse()?, q.to_string().parse()?)),
        _ => bail!("observable {t:?} must be two symbols from 1-4, L, R (e.g. 31 or LR)"),
    }
}

pub fn scan_settings(cfg: &Config) -> Result<ScanSettings> {
    cfg.reject_unknown(&[COMMON_KEYS, SCAN_KEYS])?;
    let run = run_settings(cfg, "scan")?;
    let parameter: ScanParameter = cfg
        .get("param")
        .ok_or_else(|| anyhow!("missing required key param"))?
        .parse()?;
    let grid = match cfg.get("grid") {
        Some(list) => list
            .split(',')
            .map(parse_number)
            .collect::<Result<Vec<_>>>()
            .context("key grid")?,
        None => {
            let lo = cfg.required("from")?;
            let hi = cfg.required("to")?;
            let n = match cfg.get("points") {
                Some(p) => p.parse::<usize>().with_context(|| format!("points = {p:?}"))?,
                None => 101,
            };
            if n < 2 {
                bail!("points must be at least 2");
            }
            sodw::uniform_grid(lo, hi, n)
        }
    };
    let observables = match cfg.get("observables") {
        Some(list) => list.split(',').map(observable_pair).collect::<Result<Vec<_>>>()?,
        None => vec![
            (Observable::Level(3), Observable::Level(1)),
            (Observable::Level(3), Observable::Level(2)),
        ],
    };
    let choice = match run.engine {
        EngineMode::Auto => EngineChoice::Auto,
        EngineMode::Oracle => EngineChoice::Oracle,
        other => bail!("scan engine must be auto or oracle, got {other}"),
    };
    Ok(ScanSettings {
        run,
        parameter,
        grid,
        observables,
        choice,
    })
}
