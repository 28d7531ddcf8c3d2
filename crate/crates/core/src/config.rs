//! Run configuration: `key = value` files with `#` comments, overridable
//! key by key from the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::bubbles::{BubbleContext, CutoffProfile};
use crate::green::build_green;
use crate::lattice::make_grid;

/// Configuration problem with an optional 1-based line number.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Acceptance windows. Every key is settable as `tol.<name>`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub green: f64,
    pub expansion: f64,
    pub norm_variation: f64,
    pub bounded_slope: f64,
    pub spectral_floor: f64,
    pub spectral_change: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub probe_fraction: f64,
    pub exclusions: f64,
    pub wente_identity: f64,
    pub wente_near: f64,
    pub flow_decay: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            green: 1e-6,
            expansion: 0.10,
            norm_variation: 0.20,
            bounded_slope: 0.10,
            spectral_floor: 0.05,
            spectral_change: 0.25,
            slope_lo: 0.9,
            slope_hi: 1.1,
            probe_fraction: 0.99,
            exclusions: 0.05,
            wente_identity: 1e-8,
            wente_near: 0.05,
            flow_decay: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RunConfig {
    pub basis: [[f64; 2]; 2],
    pub n: usize,
    /// Grid per entry of `lambdas` (spectrum sweeps); empty means `n` throughout.
    pub grids: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub r: f64,
    pub seed: u64,
    pub center: [f64; 2],
    /// Total perturbed bubbles in a probe ensemble.
    pub probes: usize,
    pub eps: Vec<f64>,
    /// Random Wente pairs and their grid.
    pub pairs: usize,
    pub pair_n: usize,
    pub lambda0: f64,
    pub steps: usize,
    pub eig_k: usize,
    pub eig_tol: f64,
    pub eig_basis: usize,
    /// Rates file preset for `exponents`.
    pub preset: String,
    pub toy_dim: usize,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub tol: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            basis: [[1.0, 0.0], [0.0, 1.0]],
            n: 1024,
            grids: Vec::new(),
            lambdas: vec![16.0, 24.0, 32.0, 48.0, 64.0],
            r: 0.05,
            seed: 7,
            center: [0.5, 0.5],
            probes: 207,
            eps: vec![1e-3, 3e-3, 1e-2],
            pairs: 50,
            pair_n: 128,
            lambda0: 16.0,
            steps: 60,
            eig_k: 4,
            eig_tol: 1e-4,
            eig_basis: 64,
            preset: "h-energy-l2".into(),
            toy_dim: 12,
            csv: None,
            json: None,
            tol: Tolerances::default(),
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, ConfigError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::new(format!("expected a number, got `{v}`")))
}

fn parse_usize(v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| ConfigError::new(format!("expected a nonnegative integer, got `{v}`")))
}

fn parse_list<T>(
    v: &str,
    item: impl Fn(&str) -> Result<T, ConfigError>,
) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}

fn parse_pair(v: &str) -> Result<[f64; 2], ConfigError> {
    let xs = parse_list(v, parse_f64)?;
    match xs.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(ConfigError::new(format!("expected two numbers, got `{v}`"))),
    }
}

impl RunConfig {
    /// Defaults of one harness command.
    pub fn for_command(name: &str) -> RunConfig {
        let mut cfg = RunConfig::default();
        match name {
            "greencheck" => {
                cfg.n = 256;
                cfg.lambdas.clear();
            }
            "exponents" | "calculus" => cfg.lambdas.clear(),
            "probe" => {
                cfg.n = 768;
                cfg.lambdas = vec![24.0, 32.0, 48.0];
            }
            "spectrum" => {
                cfg.lambdas = vec![32.0, 64.0];
                cfg.grids = vec![512, 1024];
            }
            "wente" => cfg.lambdas = vec![64.0],
            "flow" => {
                cfg.n = 512;
                cfg.lambdas.clear();
            }
            _ => {}
        }
        cfg
    }

    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "basis" => {
                let xs = parse_list(value, parse_f64)?;
                if xs.len() != 4 {
                    return Err(ConfigError::new(
                        "basis needs four numbers b11, b12, b21, b22",
                    ));
                }
                self.basis = [[xs[0], xs[1]], [xs[2], xs[3]]];
            }
            "n" | "N" => self.n = parse_usize(value)?,
            "grids" => self.grids = parse_list(value, parse_usize)?,
            "lambda" | "lambdas" => self.lambdas = parse_list(value, parse_f64)?,
            "r" => self.r = parse_f64(value)?,
            "seed" => {
                self.seed = value.parse().map_err(|_| {
                    ConfigError::new(format!("expected an unsigned seed, got `{value}`"))
                })?
            }
            "center" | "a" => self.center = parse_pair(value)?,
            "probes" => self.probes = parse_usize(value)?,
            "eps" => self.eps = parse_list(value, parse_f64)?,
            "pairs" => self.pairs = parse_usize(value)?,
            "pair_n" => self.pair_n = parse_usize(value)?,
            "lambda0" => self.lambda0 = parse_f64(value)?,
            "steps" => self.steps = parse_usize(value)?,
            "eig_k" => self.eig_k = parse_usize(value)?,
            "eig_tol" => self.eig_tol = parse_f64(value)?,
            "eig_basis" => self.eig_basis = parse_usize(value)?,
            "preset" => self.preset = value.to_string(),
            "toy_dim" => self.toy_dim = parse_usize(value)?,
            "csv" => self.csv = (!value.is_empty()).then(|| PathBuf::from(value)),
            "json" => self.json = (!value.is_empty()).then(|| PathBuf::from(value)),
            k if k.starts_with("tol.") => {
                let x = parse_f64(value)?;
                let t = &mut self.tol;
                let slot = match &k[4..] {
                    "green" => &mut t.green,
                    "expansion" => &mut t.expansion,
                    "norm_variation" => &mut t.norm_variation,
                    "bounded_slope" => &mut t.bounded_slope,
                    "spectral_floor" => &mut t.spectral_floor,
                    "spectral_change" => &mut t.spectral_change,
                    "slope_lo" => &mut t.slope_lo,
                    "slope_hi" => &mut t.slope_hi,
                    "probe_fraction" => &mut t.probe_fraction,
                    "exclusions" => &mut t.exclusions,
                    "wente_identity" => &mut t.wente_identity,
                    "wente_near" => &mut t.wente_near,
                    "flow_decay" => &mut t.flow_decay,
                    other => return Err(ConfigError::new(format!("unknown tolerance `{other}`"))),
                };
                *slot = x;
            }
            other => return Err(ConfigError::new(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError {
                line: Some(i + 1),
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v).map_err(|e| ConfigError {
                line: Some(i + 1),
                message: e.message,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Grid used for the `i`-th scale.
    pub fn grid_for(&self, i: usize) -> usize {
        self.grids.get(i).copied().unwrap_or(self.n)
    }

    /// Checks the guards of the numerical modules for every scale.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = self.basis;
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        if (det.abs() - 1.0).abs() > 1e-12 {
            return Err(ConfigError::new(format!(
                "basis has |det| = {}, expected 1",
                det.abs()
            )));
        }
        if !self.grids.is_empty() && self.grids.len() != self.lambdas.len() {
            return Err(ConfigError::new("grids must have one entry per lambda"));
        }
        for n in std::iter::once(self.n).chain(self.grids.iter().copied()) {
            if n % 2 != 0 || !(16..=4096).contains(&n) {
                return Err(ConfigError::new(format!(
                    "grid resolution {n} must be even and within 16..=4096"
                )));
            }
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            let n = self.grid_for(i);
            if !(l > 0.0) || l > n as f64 / 16.0 {
                return Err(ConfigError::new(format!(
                    "lambda = {l} violates the resolution guard lambda <= N/16 at N = {n}"
                )));
            }
        }
        if !(self.lambda0 > 0.0) || self.lambda0 > self.n as f64 / 16.0 {
            return Err(ConfigError::new(format!(
                "lambda0 = {} violates the resolution guard lambda <= N/16 at N = {}",
                self.lambda0, self.n
            )));
        }
        if !(self.r > 0.0) {
            return Err(ConfigError::new("r must be positive"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(ConfigError::new("eps values must be positive"));
        }
        if !(3..=16).contains(&self.eig_k) {
            return Err(ConfigError::new("eig_k must lie in 3..=16"));
        }
        if !(2..=50).contains(&self.toy_dim) {
            return Err(ConfigError::new("toy_dim must lie in 2..=50"));
        }
        Ok(())
    }

    /// Bubble context on this configuration's lattice at resolution `n`.
    pub fn context(&self, n: usize) -> crate::Result<BubbleContext> {
        let torus = make_grid(self.basis, n)?;
        let cutoff = CutoffProfile::new(&torus, self.r)?;
        Ok(BubbleContext::new(build_green(&torus), cutoff))
    }

    /// Flat `key -> value` echo for reports.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let list = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let b = self.basis;
        let mut m = BTreeMap::new();
        m.insert(
            "basis".into(),
            format!("{}, {}, {}, {}", b[0][0], b[0][1], b[1][0], b[1][1]),
        );
        m.insert("n".into(), self.n.to_string());
        m.insert(
            "grids".into(),
            self.grids
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        );
        m.insert("lambdas".into(), list(&self.lambdas));
        m.insert("r".into(), self.r.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("center".into(), list(&self.center));
        m.insert("probes".into(), self.probes.to_string());
        m.insert("eps".into(), list(&self.eps));
        m.insert("pairs".into(), self.pairs.to_string());
        m.insert("pair_n".into(), self.pair_n.to_string());
        m.insert("lambda0".into(), self.lambda0.to_string());
        m.insert("steps".into(), self.steps.to_string());
        m.insert("eig_k".into(), self.eig_k.to_string());
        m.insert("eig_tol".into(), self.eig_tol.to_string());
        m.insert("eig_basis".into(), self.eig_basis.to_string());
        m.insert("preset".into(), self.preset.clone());
        m.insert("toy_dim".into(), self.toy_dim.to_string());
        let t = &self.tol;
        for (k, v) in [
            ("green", t.green),
            ("expansion", t.expansion),
            ("norm_variation", t.norm_variation),
            ("bounded_slope", t.bounded_slope),
            ("spectral_floor", t.spectral_floor),
            ("spectral_change", t.spectral_change),
            ("slope_lo", t.slope_lo),
            ("slope_hi", t.slope_hi),
            ("probe_fraction", t.probe_fraction),
            ("exclusions", t.exclusions),
            ("wente_identity", t.wente_identity),
            ("wente_near", t.wente_near),
            ("flow_decay", t.flow_decay),
        ] {
            m.insert(format!("tol.{k}"), v.to_string());
        }
        m
    }
}
