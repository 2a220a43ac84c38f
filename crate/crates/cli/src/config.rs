//! Run configuration: a TOML document validated into [`RunConfig`].
//!
//! ```toml
//! command = "solve"            # basis-dump | interp-study | solve | sweep | mesh-info
//! coefficient = "constant 16"  # constant c | affine c0 c1 .. cd | exp-affine c0 c1 .. cd
//! degree = 15                  # N, or a list for sweeps
//! level = 0                    # refinement level, or a list
//! output = "k.csv"
//!
//! [domain]
//! preset = "square"            # or boxes = [[x0, x1, y0, y1], ...]
//!
//! [eig]
//! k_guess = 1.9
//! ```
//!
//! Unknown keys are errors. [`RunConfig::parse`] fills every default, so
//! `parse(emit(c)) == c`.

use std::fmt;

use hmsem::assembly::Coefficient;
use hmsem::eigsolver::Method;
use hmsem::mesh::BoxDomain;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn key_error(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BasisDump,
    InterpStudy,
    Solve,
    Sweep,
    MeshInfo,
}

/// A single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// `square`, `unit-square`, `cube`, `l-shape-2d`, `l-shape-3d` or `l-prism`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Each box as `[lo_1, hi_1, .., lo_d, hi_d]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_guess: Option<f64>,
    /// Real shift overriding `(0.8 k_guess)²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<usize>,
    #[serde(default = "default_threshold")]
    pub dense_threshold: usize,
}

fn default_count() -> usize {
    8
}
fn default_method() -> String {
    "auto".into()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_restarts() -> usize {
    300
}
fn default_threshold() -> usize {
    3000
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig {
            count: default_count(),
            k_guess: None,
            shift: None,
            method: default_method(),
            tol: default_tol(),
            max_restarts: default_restarts(),
            subspace: None,
            dense_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpConfig {
    /// `sin`, `exp`, or `kink <center> <power>`.
    #[serde(default = "default_function")]
    pub function: String,
}

fn default_function() -> String {
    "sin".into()
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { function: default_function() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpConfig {
    /// Index of an eigenpair whose `u` is sampled (solve only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenfunction: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenfunction_path: Option<String>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Directory for Matrix Market copies of the pencil blocks (solve only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<String>,
}

fn default_grid() -> usize {
    17
}

impl Default for DumpConfig {
    fn default() -> Self {
        DumpConfig { eigenfunction: None, eigenfunction_path: None, grid: default_grid(), matrices: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<String>,
    #[serde(default = "default_m")]
    pub m: usize,
    pub degree: OneOrMany,
    #[serde(default = "default_level")]
    pub level: OneOrMany,
    /// Gauss points per direction; the coefficient's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<usize>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub eig: EigConfig,
    #[serde(default)]
    pub interp: InterpConfig,
    #[serde(default)]
    pub dump: DumpConfig,
}

fn default_m() -> usize {
    2
}
fn default_level() -> OneOrMany {
    OneOrMany::One(0)
}

pub fn preset(name: &str) -> Option<BoxDomain> {
    Some(match name {
        "square" => BoxDomain::cube(2, -0.5, 0.5),
        "unit-square" => BoxDomain::cube(2, 0.0, 1.0),
        "cube" => BoxDomain::cube(3, 0.0, 1.0),
        "l-shape-2d" => BoxDomain::l_shape_2d(),
        "l-shape-3d" => BoxDomain::l_shape_3d(),
        "l-prism" => BoxDomain::l_prism(),
        _ => return None,
    })
}

impl RunConfig {
    /// Parses and validates; every optional key comes back filled or
    /// normalized.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| ConfigError(format!("parse error: {e}")))?;
        c.normalize()?;
        Ok(c)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    fn normalize(&mut self) -> Result<(), ConfigError> {
        if !(1..=3).contains(&self.m) {
            return Err(key_error("m", format!("must be 1, 2 or 3, got {}", self.m)));
        }
        let degrees = self.degree.values();
        if degrees.is_empty() {
            return Err(key_error("degree", "empty list"));
        }
        if let Some(&n) = degrees.iter().find(|&&n| n + 1 < 2 * self.m) {
            return Err(key_error("degree", format!("N = {n} is below 2m - 1 = {}", 2 * self.m - 1)));
        }
        if self.level.values().is_empty() {
            return Err(key_error("level", "empty list"));
        }
        if let Some(q) = self.quadrature {
            if q == 0 {
                return Err(key_error("quadrature", "must be positive"));
            }
        }
        match (&self.domain.preset, &self.domain.boxes) {
            (Some(p), None) => {
                if preset(p).is_none() {
                    return Err(key_error("domain.preset", format!("unknown preset {p:?}")));
                }
            }
            (None, Some(_)) => {
                self.domain_boxes()?;
            }
            _ => return Err(key_error("domain", "give exactly one of preset or boxes")),
        }
        if let Some(c) = &self.coefficient {
            let parsed = Coefficient::parse(c).map_err(|e| key_error("coefficient", e))?;
            self.coefficient = Some(parsed.to_string());
        }
        let needs_pencil = matches!(self.command, Command::Solve | Command::Sweep);
        if needs_pencil {
            if self.m != 2 {
                return Err(key_error("m", "solve and sweep need m = 2"));
            }
            if self.coefficient.is_none() {
                return Err(key_error("coefficient", "required for solve and sweep"));
            }
            if self.eig.k_guess.is_none() && self.eig.shift.is_none() {
                return Err(key_error("eig.k_guess", "required for solve and sweep (or give eig.shift)"));
            }
        }
        if self.command == Command::Solve && (degrees.len() != 1 || self.level.values().len() != 1) {
            return Err(key_error("degree", "solve takes a single degree and level; use sweep for lists"));
        }
        if let Some(k) = self.eig.k_guess {
            if !(k.is_finite() && k > 0.0) {
                return Err(key_error("eig.k_guess", "must be positive"));
            }
        }
        Method::parse(&self.eig.method).map_err(|e| key_error("eig.method", e))?;
        if self.eig.count == 0 {
            return Err(key_error("eig.count", "must be at least 1"));
        }
        if self.eig.tol.is_nan() || self.eig.tol <= 0.0 {
            return Err(key_error("eig.tol", "must be positive"));
        }
        if self.dump.grid < 2 {
            return Err(key_error("dump.grid", "needs at least 2 points"));
        }
        crate::run::parse_function(&self.interp.function, 2).map_err(|e| key_error("interp.function", e))?;
        Ok(())
    }

    pub fn domain_boxes(&self) -> Result<BoxDomain, ConfigError> {
        if let Some(p) = &self.domain.preset {
            return preset(p).ok_or_else(|| key_error("domain.preset", format!("unknown preset {p:?}")));
        }
        let rows = self.domain.boxes.as_ref().ok_or_else(|| key_error("domain", "missing"))?;
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        if width == 0 || width % 2 != 0 || rows.iter().any(|r| r.len() != width) {
            return Err(key_error("domain.boxes", "each box needs 2d numbers [lo_1, hi_1, ..]"));
        }
        BoxDomain::from_flat(width / 2, rows).map_err(|e| key_error("domain.boxes", e))
    }

    pub fn coefficient(&self) -> Option<Coefficient> {
        self.coefficient.as_deref().map(|c| Coefficient::parse(c).expect("validated"))
    }

    pub fn method(&self) -> Method {
        Method::parse(&self.eig.method).expect("validated")
    }
}
