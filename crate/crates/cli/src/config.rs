//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nematic_core::fem::ElasticConstants;
use nematic_core::manufactured::ManufacturedSolution;
use nematic_core::potential::{BmModel, BmParams, BulkPotential, LdgParams, DEFAULT_DUAL_TOL};
use nematic_core::solver::{Damping, NewtonConfig};
use nematic_core::sphere::DEFAULT_DEGREE;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

/// Every key the loader understands, with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("domain.n", "unit cube with n cells per edge"),
    ("domain.gmsh", "path to a Gmsh 2.2 ASCII tetrahedral mesh"),
    ("elastic.l1", "L1"),
    ("elastic.l2", "L2"),
    ("elastic.l3", "L3"),
    ("potential", "ldg, bm or none"),
    ("ldg.a", "LDG a"),
    ("ldg.b", "LDG b"),
    ("ldg.c", "LDG c"),
    (
        "ldg.alpha",
        "LDG alpha, with a = alpha (t_star - temperature)",
    ),
    ("ldg.t_star", "LDG supercooling temperature"),
    ("ldg.temperature", "LDG temperature"),
    ("bm.temperature", "BM absolute temperature T"),
    ("bm.kappa", "BM interaction strength"),
    ("bm.lebedev_degree", "exactness degree of the sphere rule"),
    ("bm.dual_tol", "tolerance of the multiplier solve"),
    ("boundary", "uniaxial, twisted or manufactured"),
    ("boundary.s", "scalar order parameter of the boundary data"),
    ("boundary.director", "director of uniaxial data, as x,y,z"),
    ("boundary.twist", "twist rate about z"),
    ("manufactured.base", "mean order of the manufactured field"),
    (
        "manufactured.amplitude",
        "bump amplitude of the manufactured field",
    ),
    ("newton.abs_tol", "absolute residual tolerance"),
    ("newton.rel_tol", "relative residual tolerance"),
    ("newton.max_iters", "iteration budget"),
    ("newton.damping", "none or halving"),
    (
        "newton.min_margin",
        "physicality margin kept by BM iterates",
    ),
    (
        "newton.linear_tol",
        "relative tolerance of the linear solves",
    ),
    ("newton.kantorovich", "record a1, b1, L and h* (true/false)"),
    (
        "quadrature.degree",
        "exactness degree of the tetrahedral rule",
    ),
    (
        "levels",
        "comma separated mesh levels for convergence and infsup",
    ),
    ("sweep.s_min", "first s of the potential table"),
    ("sweep.s_max", "last s of the potential table"),
    ("sweep.points", "number of rows of the potential table"),
    ("output.csv", "CSV file name"),
    ("output.vtk", "VTK file name"),
    ("output.report", "report file name"),
];

/// Raw key-value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            raw.set_pair(line)
                .map_err(|e| ConfigError(format!("line {}: {}", i + 1, e.0)))?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    /// Applies one `key=value` pair.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let Some((k, v)) = pair.split_once('=') else {
            return err(format!("expected key = value, got '{pair}'"));
        };
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return err(format!("unknown key '{key}'"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn has_prefix(&self, prefix: &str) -> Vec<&str> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .map(String::as_str)
            .collect()
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("bad value '{v}' for {key}"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| ConfigError(format!("bad entry '{t}' in {key}")))
        })
        .collect()
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => err(format!("bad boolean '{s}' for {key}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    UnitCube(usize),
    Gmsh(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialChoice {
    None,
    Ldg(LdgParams),
    Bm {
        params: BmParams,
        lebedev_degree: usize,
        dual_tol: f64,
    },
}

impl PotentialChoice {
    pub fn build(&self) -> nematic_core::Result<BulkPotential> {
        Ok(match self {
            PotentialChoice::None => BulkPotential::None,
            PotentialChoice::Ldg(p) => BulkPotential::Ldg(*p),
            PotentialChoice::Bm {
                params,
                lebedev_degree,
                dual_tol,
            } => BulkPotential::Bm(BmModel::new(*params, *lebedev_degree, *dual_tol)?),
        })
    }

    pub fn lebedev_degree(&self) -> usize {
        match self {
            PotentialChoice::Bm { lebedev_degree, .. } => *lebedev_degree,
            _ => DEFAULT_DEGREE,
        }
    }

    pub fn dual_tol(&self) -> f64 {
        match self {
            PotentialChoice::Bm { dual_tol, .. } => *dual_tol,
            _ => DEFAULT_DUAL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Uniaxial { s: f64, director: [f64; 3] },
    Twisted { s: f64, twist: f64 },
    Manufactured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.s_min],
            n => (0..n)
                .map(|i| self.s_min + (self.s_max - self.s_min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub csv: Option<String>,
    pub vtk: String,
    pub report: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub elastic: ElasticConstants,
    pub potential: PotentialChoice,
    pub boundary: Boundary,
    pub manufactured: ManufacturedSolution,
    pub newton: NewtonConfig,
    pub kantorovich: bool,
    pub quadrature_degree: Option<usize>,
    pub levels: Vec<usize>,
    pub sweep: Sweep,
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let domain = match (raw.parsed::<usize>("domain.n")?, raw.get("domain.gmsh")) {
            (Some(_), Some(_)) => return err("domain.n and domain.gmsh are mutually exclusive"),
            (_, Some(p)) => Domain::Gmsh(PathBuf::from(p)),
            (Some(0), None) => return err("domain.n must be positive"),
            (n, None) => Domain::UnitCube(n.unwrap_or(4)),
        };

        let elastic = ElasticConstants::new(
            raw.or("elastic.l1", 1.0)?,
            raw.or("elastic.l2", 0.0)?,
            raw.or("elastic.l3", 0.0)?,
        );

        let kind = raw.get("potential").unwrap_or("ldg");
        let foreign: Vec<&str> = match kind {
            "ldg" => raw.has_prefix("bm."),
            "bm" => raw.has_prefix("ldg."),
            "none" => [raw.has_prefix("ldg."), raw.has_prefix("bm.")].concat(),
            other => {
                return err(format!(
                    "unknown potential '{other}' (expected ldg, bm or none)"
                ))
            }
        };
        if let Some(k) = foreign.first() {
            return err(format!("key {k} does not apply to potential '{kind}'"));
        }
        let invalid = |e: nematic_core::Error| ConfigError(e.to_string());
        let potential = match kind {
            "ldg" => {
                let a = match raw.parsed::<f64>("ldg.alpha")? {
                    Some(alpha) => {
                        if raw.get("ldg.a").is_some() {
                            return err(
                                "give either ldg.a or ldg.alpha with temperatures, not both",
                            );
                        }
                        let (Some(ts), Some(t)) = (
                            raw.parsed::<f64>("ldg.t_star")?,
                            raw.parsed::<f64>("ldg.temperature")?,
                        ) else {
                            return err("ldg.alpha needs ldg.t_star and ldg.temperature");
                        };
                        alpha * (ts - t)
                    }
                    None => raw.or("ldg.a", 1.0)?,
                };
                PotentialChoice::Ldg(
                    LdgParams::new(a, raw.or("ldg.b", 1.0)?, raw.or("ldg.c", 1.0)?)
                        .map_err(invalid)?,
                )
            }
            "bm" => PotentialChoice::Bm {
                params: BmParams::new(raw.or("bm.temperature", 2.0)?, raw.or("bm.kappa", 1.0)?)
                    .map_err(invalid)?,
                lebedev_degree: raw.or("bm.lebedev_degree", DEFAULT_DEGREE)?,
                dual_tol: raw.or("bm.dual_tol", DEFAULT_DUAL_TOL)?,
            },
            _ => PotentialChoice::None,
        };

        let s = raw.or("boundary.s", 0.3)?;
        let boundary = match raw.get("boundary").unwrap_or("uniaxial") {
            "uniaxial" => {
                let d: Vec<f64> = match raw.get("boundary.director") {
                    Some(v) => parse_list("boundary.director", v)?,
                    None => vec![0.0, 0.0, 1.0],
                };
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if d.len() != 3 || !(norm > 0.0) {
                    return err("boundary.director must be three numbers, not all zero");
                }
                Boundary::Uniaxial {
                    s,
                    director: [d[0] / norm, d[1] / norm, d[2] / norm],
                }
            }
            "twisted" => Boundary::Twisted {
                s,
                twist: raw.or("boundary.twist", std::f64::consts::FRAC_PI_2)?,
            },
            "manufactured" => Boundary::Manufactured,
            other => return err(format!("unknown boundary preset '{other}'")),
        };
        let manufactured = ManufacturedSolution {
            base: raw.or("manufactured.base", 0.2)?,
            amplitude: raw.or("manufactured.amplitude", 0.1)?,
        };

        let d = NewtonConfig::default();
        let damping = match raw.get("newton.damping").unwrap_or("halving") {
            "none" => Damping::None,
            "halving" => Damping::PhysicalityHalving,
            other => {
                return err(format!(
                    "unknown damping '{other}' (expected none or halving)"
                ))
            }
        };
        let newton = NewtonConfig {
            abs_tol: raw.or("newton.abs_tol", d.abs_tol)?,
            rel_tol: raw.or("newton.rel_tol", d.rel_tol)?,
            max_iters: raw.or("newton.max_iters", d.max_iters)?,
            damping,
            min_margin: raw.or("newton.min_margin", d.min_margin)?,
            linear_tol: raw.or("newton.linear_tol", d.linear_tol)?,
            kantorovich: None,
        };
        newton.validate().map_err(invalid)?;
        let kantorovich = match raw.get("newton.kantorovich") {
            Some(v) => parse_bool("newton.kantorovich", v)?,
            None => false,
        };

        let levels = match raw.get("levels") {
            Some(v) => parse_list("levels", v)?,
            None => vec![2, 4, 8],
        };
        if levels.contains(&0) {
            return err("levels must be positive");
        }

        let sweep = Sweep {
            s_min: raw.or("sweep.s_min", -0.495)?,
            s_max: raw.or("sweep.s_max", 0.99)?,
            points: raw.or("sweep.points", 34)?,
        };

        Ok(RunConfig {
            domain,
            elastic,
            potential,
            boundary,
            manufactured,
            newton,
            kantorovich,
            quadrature_degree: raw.parsed("quadrature.degree")?,
            levels,
            sweep,
            outputs: Outputs {
                csv: raw.get("output.csv").map(str::to_string),
                vtk: raw.get("output.vtk").unwrap_or("solution.vtk").to_string(),
                report: raw.get("output.report").unwrap_or("report.txt").to_string(),
            },
        })
    }
}
