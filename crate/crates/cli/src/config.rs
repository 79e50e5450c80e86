//! Flat `key = value` run configuration with `[section]` headers.
//!
//! ```text
//! seed = 7
//!
//! [geometry]
//! nx = 4
//! bottom = slip
//!
//! [physics]
//! law = slip_weakening(1, 0.5, 0.5)
//! f = trig(20, 0)
//! ```
//!
//! Field and law selectors are written as `name` or `name(p1, p2, ...)`.
//! Comments start with `#` or `;`. Unknown sections or keys, duplicates and
//! malformed values are errors that carry the line number and key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hvi_core::friction::{FrictionError, FrictionLaw, LawParams};
use hvi_core::mesh::{BoundarySpec, BoundaryTag};
use hvi_core::rothe::{FieldSpec, StepOptions, FIELD_NAMES};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}, key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// A selector such as `trig(20, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Selector {
    pub name: String,
    pub params: Vec<f64>,
}

impl Selector {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, params) = match s.find('(') {
            None => (s, Vec::new()),
            Some(open) => {
                let inner = s[open + 1..].strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
                let params = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|p| parse_f64(p.trim())).collect::<Result<Vec<_>, _>>()?
                };
                (s[..open].trim(), params)
            }
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("`{s}` is not a selector of the form name(p1, p2, ...)"));
        }
        Ok(Self { name: name.to_string(), params })
    }

    pub fn field(&self) -> FieldSpec {
        FieldSpec::new(&self.name, &self.params)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.field())
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite number")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub boundary: BoundarySpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Physics {
    pub mu: f64,
    pub law: Selector,
    /// replaces the law's certified α_ψ when set
    pub alpha_psi: Option<f64>,
    pub u0: Selector,
    pub f: Selector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    /// write a VTK file every this many steps (0 disables VTK)
    pub vtk_stride: usize,
    pub csv_trajectory: bool,
    pub csv_step_stats: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceKind {
    /// Cauchy differences of the configured problem under k-halving
    Cauchy,
    /// ψ ≡ 0 manufactured solution with a known exact velocity
    Manufactured,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudySettings {
    pub convergence: ConvergenceKind,
    pub halvings: usize,
    pub max_ratio: f64,
    pub min_order: f64,
    pub amp: f64,
    pub pairs: usize,
    pub scale: f64,
    /// number of k values in the energy study, each half the previous
    pub levels: usize,
    pub max_spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidateSettings {
    pub samples: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: Geometry,
    pub physics: Physics,
    pub t_final: f64,
    pub n_steps: usize,
    pub solver: StepOptions,
    pub output: Outputs,
    pub study: StudySettings,
    pub validate: ValidateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            geometry: Geometry { lx: 1.0, ly: 1.0, nx: 4, ny: 4, boundary: BoundarySpec::slip_bottom() },
            physics: Physics {
                mu: 1.0,
                law: Selector { name: "quadratic".into(), params: vec![0.0] },
                alpha_psi: None,
                u0: Selector { name: "zero".into(), params: vec![] },
                f: Selector { name: "zero".into(), params: vec![] },
            },
            t_final: 1.0,
            n_steps: 16,
            solver: StepOptions::default(),
            output: Outputs { dir: None, vtk_stride: 0, csv_trajectory: true, csv_step_stats: true },
            study: StudySettings {
                convergence: ConvergenceKind::Cauchy,
                halvings: 4,
                max_ratio: 0.75,
                min_order: 0.8,
                amp: 1.0,
                pairs: 20,
                scale: 1.0,
                levels: 5,
                max_spread: 0.1,
            },
            validate: ValidateSettings { samples: 100_000, radius: 10.0 },
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn value_err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value { line, key: key.to_string(), message: message.into() }
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["seed"]),
    ("geometry", &["lx", "ly", "nx", "ny", "left", "right", "bottom", "top"]),
    ("physics", &["mu", "law", "alpha_psi", "u0", "f"]),
    ("time", &["t_final", "n"]),
    ("solver", &["tol", "max_iter", "omega"]),
    ("output", &["dir", "vtk_stride", "csv_trajectory", "csv_step_stats"]),
    ("study", &["convergence", "halvings", "max_ratio", "min_order", "amp", "pairs", "scale", "levels", "max_spread"]),
    ("validate", &["samples", "radius"]),
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = strip_comment(raw).trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, message: format!("malformed section header `{s}`") })?
                    .trim();
                if !KEYS.iter().any(|(sec, _)| *sec == name) || name.is_empty() {
                    return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{s}`") })?;
            let key = key.trim();
            let allowed = KEYS.iter().find(|(sec, _)| *sec == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                let place = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
                return Err(value_err(
                    line,
                    key,
                    format!("unknown key in {place} (expected one of: {})", allowed.join(", ")),
                ));
            }
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if let Some(prev) = entries.get(&full) {
                return Err(value_err(line, &full, format!("duplicate key (first set on line {})", prev.line)));
            }
            entries.insert(full, Entry { line, value: value.trim().to_string() });
        }

        let mut c = RunConfig::default();
        let mut r = Reader { entries: &entries };
        r.num("seed", &mut c.seed)?;
        let g = &mut c.geometry;
        r.float("geometry.lx", &mut g.lx)?;
        r.float("geometry.ly", &mut g.ly)?;
        r.num("geometry.nx", &mut g.nx)?;
        r.num("geometry.ny", &mut g.ny)?;
        r.tag("geometry.left", &mut g.boundary.left)?;
        r.tag("geometry.right", &mut g.boundary.right)?;
        r.tag("geometry.bottom", &mut g.boundary.bottom)?;
        r.tag("geometry.top", &mut g.boundary.top)?;
        let p = &mut c.physics;
        r.float("physics.mu", &mut p.mu)?;
        r.selector("physics.law", &mut p.law)?;
        r.selector("physics.u0", &mut p.u0)?;
        r.selector("physics.f", &mut p.f)?;
        if entries.contains_key("physics.alpha_psi") {
            let mut a = 0.0;
            r.float("physics.alpha_psi", &mut a)?;
            p.alpha_psi = Some(a);
        }
        r.float("time.t_final", &mut c.t_final)?;
        r.num("time.n", &mut c.n_steps)?;
        r.float("solver.tol", &mut c.solver.tol)?;
        r.num("solver.max_iter", &mut c.solver.max_iter)?;
        r.float("solver.omega", &mut c.solver.omega)?;
        if let Some(e) = entries.get("output.dir") {
            c.output.dir = Some(PathBuf::from(&e.value));
        }
        r.num("output.vtk_stride", &mut c.output.vtk_stride)?;
        r.flag("output.csv_trajectory", &mut c.output.csv_trajectory)?;
        r.flag("output.csv_step_stats", &mut c.output.csv_step_stats)?;
        let s = &mut c.study;
        if let Some(e) = entries.get("study.convergence") {
            s.convergence = match e.value.as_str() {
                "cauchy" => ConvergenceKind::Cauchy,
                "manufactured" => ConvergenceKind::Manufactured,
                other => {
                    return Err(value_err(
                        e.line,
                        "study.convergence",
                        format!("`{other}` is not cauchy or manufactured"),
                    ))
                }
            };
        }
        r.num("study.halvings", &mut s.halvings)?;
        r.float("study.max_ratio", &mut s.max_ratio)?;
        r.float("study.min_order", &mut s.min_order)?;
        r.float("study.amp", &mut s.amp)?;
        r.num("study.pairs", &mut s.pairs)?;
        r.float("study.scale", &mut s.scale)?;
        r.num("study.levels", &mut s.levels)?;
        r.float("study.max_spread", &mut s.max_spread)?;
        r.num("validate.samples", &mut c.validate.samples)?;
        r.float("validate.radius", &mut c.validate.radius)?;

        c.check(&entries)?;
        Ok(c)
    }

    fn check(&self, entries: &BTreeMap<String, Entry>) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| match entries.get(key) {
            Some(e) => value_err(e.line, key, message),
            None => ConfigError::Invalid { key: key.to_string(), message },
        };
        let g = &self.geometry;
        for (key, v) in [
            ("geometry.lx", g.lx),
            ("geometry.ly", g.ly),
            ("physics.mu", self.physics.mu),
            ("time.t_final", self.t_final),
        ] {
            if v <= 0.0 {
                return Err(fail(key, format!("must be positive, got {v}")));
            }
        }
        for (key, v) in [("geometry.nx", g.nx), ("geometry.ny", g.ny), ("time.n", self.n_steps)] {
            if v == 0 {
                return Err(fail(key, "must be at least 1".into()));
            }
        }
        if let Err(e) = g.boundary.validate() {
            return Err(fail("geometry.bottom", e.to_string()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(fail("solver.tol", "must be positive".into()));
        }
        if !(self.solver.omega > 0.0 && self.solver.omega < 2.0) {
            return Err(fail("solver.omega", format!("relaxation must lie in (0, 2), got {}", self.solver.omega)));
        }
        if let Some(a) = self.physics.alpha_psi {
            if a < 0.0 {
                return Err(fail("physics.alpha_psi", "must be non-negative".into()));
            }
        }
        self.law().map_err(|e| fail("physics.law", e.to_string()))?;
        for (key, sel) in [("physics.u0", &self.physics.u0), ("physics.f", &self.physics.f)] {
            if !FIELD_NAMES.contains(&sel.name.as_str()) {
                return Err(fail(
                    key,
                    format!("unknown field `{}` (expected one of: {})", sel.name, FIELD_NAMES.join(", ")),
                ));
            }
        }
        Ok(())
    }

    /// The friction law, with `alpha_psi` replaced when configured.
    pub fn law(&self) -> Result<FrictionLaw, FrictionError> {
        let sel = &self.physics.law;
        let p = &sel.params;
        let (params, expected) = match sel.name.as_str() {
            "quadratic" | "saturating" => {
                (LawParams { kappa: p.first().copied().unwrap_or(0.0), ..Default::default() }, 1)
            }
            "slip_weakening" => {
                let at = |i: usize| p.get(i).copied().unwrap_or(0.0);
                (LawParams { mu1: at(0), mu2: at(1), s0: at(2), ..Default::default() }, 3)
            }
            _ => (LawParams::default(), 0),
        };
        if expected > 0 && p.len() != expected {
            return Err(FrictionError::InvalidParameters {
                law: "config",
                reason: format!("`{}` takes {expected} parameter(s), got {}", sel.name, p.len()),
            });
        }
        let law = FrictionLaw::from_name(&sel.name, &params)?;
        Ok(match self.physics.alpha_psi {
            Some(a) => law.with_alpha(a),
            None => law,
        })
    }

    /// k = T/N
    pub fn k(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }
}

fn strip_comment(s: &str) -> &str {
    match s.find(['#', ';']) {
        Some(i) => &s[..i],
        None => s,
    }
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, Entry>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn float(&mut self, key: &str, out: &mut f64) -> Result<(), ConfigError> {
        if let Some(e) = self.get(key) {
            *out = parse_f64(&e.value).map_err(|m| value_err(e.line, key, m))?;
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str, out: &mut T) -> Result<(), ConfigError> {
        if let Some(e) = self.get(key) {
            *out = e
                .value
                .parse()
                .map_err(|_| value_err(e.line, key, format!("`{}` is not a non-negative integer", e.value)))?;
        }
        Ok(())
    }

    fn flag(&mut self, key: &str, out: &mut bool) -> Result<(), ConfigError> {
        if let Some(e) = self.get(key) {
            *out = match e.value.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                v => return Err(value_err(e.line, key, format!("`{v}` is not a boolean"))),
            };
        }
        Ok(())
    }

    fn tag(&mut self, key: &str, out: &mut BoundaryTag) -> Result<(), ConfigError> {
        if let Some(e) = self.get(key) {
            *out = match e.value.as_str() {
                "dirichlet" => BoundaryTag::Dirichlet,
                "slip" => BoundaryTag::Slip,
                v => return Err(value_err(e.line, key, format!("`{v}` is not dirichlet or slip"))),
            };
        }
        Ok(())
    }

    fn selector(&mut self, key: &str, out: &mut Selector) -> Result<(), ConfigError> {
        if let Some(e) = self.get(key) {
            *out = Selector::parse(&e.value).map_err(|m| value_err(e.line, key, m))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors() {
        assert_eq!(Selector::parse("zero").unwrap(), Selector { name: "zero".into(), params: vec![] });
        assert_eq!(Selector::parse(" trig( 20 , 1e-1 )").unwrap().params, vec![20.0, 0.1]);
        assert!(Selector::parse("trig(1, x)").is_err());
        assert!(Selector::parse("trig(1").is_err());
        assert!(Selector::parse("(1)").is_err());
    }

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse("seed = 3\n[time]\nn = 8 # steps\n[physics]\nlaw = saturating(0.5)\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.n_steps, 8);
        assert_eq!(c.k(), 0.125);
        assert_eq!(c.law().unwrap().name(), "saturating");
        assert_eq!(c.geometry.boundary, BoundarySpec::slip_bottom());
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = RunConfig::parse("[time]\n\nn = x\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("time.n"), "{e}");
        let e = RunConfig::parse("[physics]\nmu = 1\nmu = 2\n").unwrap_err().to_string();
        assert!(e.contains("duplicate") && e.contains("line 3") && e.contains("line 2"), "{e}");
        let e = RunConfig::parse("[nope]\n").unwrap_err().to_string();
        assert!(e.contains("unknown section"), "{e}");
        let e = RunConfig::parse("[physics]\nlaw = slip_weakening(1, 2, 3)\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("physics.law"), "{e}");
        let e = RunConfig::parse("[physics]\nf = wave(1)\n").unwrap_err().to_string();
        assert!(e.contains("unknown field"), "{e}");
        let e = RunConfig::parse("[geometry]\nleft = slip\nright = slip\ntop = slip\n").unwrap_err().to_string();
        assert!(e.contains("Dirichlet") && e.contains("geometry.bottom"), "{e}");
        assert!(RunConfig::parse("[time]\nn = 0\n").is_err());
        assert!(RunConfig::parse("just text\n").is_err());
    }

    #[test]
    fn alpha_override() {
        let c = RunConfig::parse("[physics]\nlaw = slip_weakening(1, 0.5, 0.5)\nalpha_psi = 0.5\n").unwrap();
        assert_eq!(c.law().unwrap().alpha_psi, 0.5);
    }
}
