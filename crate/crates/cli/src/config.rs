//! Flat `key = value` configuration files.

use std::path::Path;

use almost_fatou::almost_complex::ComplexMatrixField;
use almost_fatou::geometry::DefiningDomain;
use almost_fatou::lab::TestFunction;
use almost_fatou::linalg::{CMat, CVec};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.into(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Halfspace,
    Ball(f64),
    /// Terms `c · Π x_r^{e_r}` over the real coordinates.
    Polynomial(Vec<(f64, Vec<u32>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructureSpec {
    Zero,
    /// Row-major `n × n` entries.
    Const(Vec<Complex64>),
    /// `A_0` followed by the `n` slope blocks `B_k` of `A(z) = A_0 + Σ z_k B_k`.
    Linear(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// `exp(z_n) + z̄_1 (-ρ)^β`.
    PerturbedExp(f64),
    /// `sin(log(-ρ))`.
    Oscillator,
    /// `exp(z_n)`.
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub dim: usize,
    pub rho: DomainSpec,
    pub a: StructureSpec,
    pub function: Option<FunctionSpec>,
    pub resolution: Option<usize>,
    pub radius: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub p: f64,
    pub tol: Option<f64>,
    pub seed: u64,
    pub samples: Option<usize>,
    pub point: Option<Vec<Complex64>>,
    pub direction: Option<Vec<Complex64>>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            dim: 2,
            rho: DomainSpec::Halfspace,
            a: StructureSpec::Zero,
            function: None,
            resolution: None,
            radius: None,
            alpha: None,
            eps: None,
            p: 4.0,
            tol: None,
            seed: 0,
            samples: None,
            point: None,
            direction: None,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
            cfg.apply_text(&text)?;
        }
        for (i, o) in overrides.iter().enumerate() {
            let (k, v) = o.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "dim" | "n" => self.dim = parse_num(key, value)?,
            "rho" => self.rho = parse_domain(value)?,
            "A" => self.a = parse_structure(value)?,
            "F" => self.function = Some(parse_function(value)?),
            "N" => self.resolution = Some(parse_num(key, value)?),
            "radius" => self.radius = Some(parse_num(key, value)?),
            "alpha" => self.alpha = Some(parse_list(key, value)?),
            "eps" => self.eps = Some(parse_list(key, value)?),
            "p" => self.p = parse_num(key, value)?,
            "tol" => self.tol = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num(key, value)?,
            "samples" => self.samples = Some(parse_num(key, value)?),
            "point" => self.point = Some(parse_complex_list(key, value)?),
            "direction" => self.direction = Some(parse_complex_list(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn structure(&self) -> Result<ComplexMatrixField, ConfigError> {
        let n = self.dim;
        let block = |e: &[Complex64]| CMat::from_row_slice(n, n, e);
        match &self.a {
            StructureSpec::Zero => Ok(ComplexMatrixField::zero(n)),
            StructureSpec::Const(e) if e.len() == n * n => Ok(ComplexMatrixField::constant(block(e))),
            StructureSpec::Const(e) => Err(bad("A", format!("const needs {} entries, got {}", n * n, e.len()))),
            StructureSpec::Linear(e) if e.len() == (n + 1) * n * n => {
                let blocks: Vec<CMat> = e.chunks(n * n).map(block).collect();
                ComplexMatrixField::linear(blocks[0].clone(), blocks[1..].to_vec()).map_err(|err| bad("A", err.to_string()))
            }
            StructureSpec::Linear(e) => Err(bad("A", format!("linear needs {} entries, got {}", (n + 1) * n * n, e.len()))),
        }
    }

    pub fn domain(&self) -> Result<DefiningDomain, ConfigError> {
        let d = match &self.rho {
            DomainSpec::Halfspace => DefiningDomain::halfspace(self.dim),
            DomainSpec::Ball(r) => DefiningDomain::ball(CVec::zeros(self.dim), *r),
            DomainSpec::Polynomial(t) => DefiningDomain::polynomial(self.dim, t.clone()).map_err(|e| bad("rho", e.to_string()))?,
        };
        d.with_structure(self.structure()?).map_err(|e| bad("A", e.to_string()))
    }

    pub fn test_function(&self, d: &DefiningDomain, default: FunctionSpec) -> TestFunction {
        match self.function.clone().unwrap_or(default) {
            FunctionSpec::PerturbedExp(beta) => TestFunction::perturbed_exp(d, beta),
            FunctionSpec::Oscillator => TestFunction::log_oscillator(d),
            FunctionSpec::Exp => TestFunction::exp_last(self.dim),
        }
    }

    pub fn point_or(&self, default: CVec) -> Result<CVec, ConfigError> {
        self.vector("point", &self.point, default)
    }

    pub fn direction_or(&self, default: CVec) -> Result<CVec, ConfigError> {
        self.vector("direction", &self.direction, default)
    }

    fn vector(&self, key: &str, v: &Option<Vec<Complex64>>, default: CVec) -> Result<CVec, ConfigError> {
        match v {
            None => Ok(default),
            Some(e) if e.len() == self.dim => Ok(CVec::from_column_slice(e)),
            Some(e) => Err(bad(key, format!("expected {} coordinates, got {}", self.dim, e.len()))),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_complex_list(key: &str, value: &str) -> Result<Vec<Complex64>, ConfigError> {
    value.split(',').map(|s| parse_complex(s.trim()).ok_or_else(|| bad(key, format!("cannot parse `{s}` as a complex number")))).collect()
}

/// `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (body[..k].parse().ok()?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse().ok()?,
    };
    Some(Complex64::new(re, im))
}

fn parse_domain(value: &str) -> Result<DomainSpec, ConfigError> {
    let (kind, rest) = value.split_once(':').map_or((value, ""), |(k, r)| (k.trim(), r.trim()));
    match kind {
        "halfspace" => Ok(DomainSpec::Halfspace),
        "ball" if rest.is_empty() => Ok(DomainSpec::Ball(1.0)),
        "ball" => Ok(DomainSpec::Ball(parse_num("rho", rest)?)),
        "custom-poly" => {
            let terms = rest
                .split(';')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    let (c, e) = t.split_once('*').ok_or_else(|| bad("rho", format!("term `{t}` is not `coefficient*exponents`")))?;
                    let exps = e.split(',').map(|k| parse_num("rho", k.trim())).collect::<Result<Vec<u32>, _>>()?;
                    Ok((parse_num("rho", c.trim())?, exps))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            Ok(DomainSpec::Polynomial(terms))
        }
        _ => Err(bad("rho", format!("expected halfspace, ball[:r] or custom-poly:..., got `{value}`"))),
    }
}

fn parse_structure(value: &str) -> Result<StructureSpec, ConfigError> {
    let (kind, rest) = value.split_once(':').map_or((value, ""), |(k, r)| (k.trim(), r.trim()));
    match kind {
        "zero" => Ok(StructureSpec::Zero),
        "const" => Ok(StructureSpec::Const(parse_complex_list("A", rest)?)),
        "linear" => Ok(StructureSpec::Linear(parse_complex_list("A", rest)?)),
        _ => Err(bad("A", format!("expected zero, const:... or linear:..., got `{value}`"))),
    }
}

fn parse_function(value: &str) -> Result<FunctionSpec, ConfigError> {
    let (kind, rest) = value.split_once(':').map_or((value, ""), |(k, r)| (k.trim(), r.trim()));
    match kind {
        "perturbed-exp" => Ok(FunctionSpec::PerturbedExp(if rest.is_empty() { 0.1 } else { parse_num("F", rest)? })),
        "oscillator" => Ok(FunctionSpec::Oscillator),
        "exp" => Ok(FunctionSpec::Exp),
        _ => Err(bad("F", format!("expected perturbed-exp[:beta], oscillator or exp, got `{value}`"))),
    }
}
