//! Run configuration: defaults, `key=value` files and overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::assembly::{FormParameters, Stabilization};
use crate::geometry::BUILTIN_GEOMETRIES;
use crate::quadrature::DEFAULT_DEGREE;
use crate::spaces::{Extension, SpaceVariant};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub levels: (u32, u32),
    pub space: SpaceVariant,
    pub extension: Extension,
    pub stabilization: Stabilization,
    pub tau_nitsche: f64,
    pub tau_j1: f64,
    pub tau_j2: f64,
    pub eta0: f64,
    pub geometry: String,
    pub out: Option<PathBuf>,
    /// Nonzero seeds draw the moving-domain positions at random.
    pub seed: u64,
    pub degree: usize,
    pub samples: usize,
    /// Refinement level of the moving-domain sweep.
    pub moving_level: u32,
    pub problem: Problem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// Smooth swirling flow with cubic pressure.
    Swirl,
    /// Linear velocity and pressure reproduced exactly by the spaces.
    Patch,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_dim(2)
    }
}

impl RunConfig {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            dim,
            levels: if dim == 2 { (3, 6) } else { (3, 4) },
            space: SpaceVariant::Aggregated,
            extension: Extension::Serendipity,
            stabilization: Stabilization::Alg3,
            tau_nitsche: 40.0,
            tau_j1: 0.01,
            tau_j2: 0.01,
            eta0: 0.0,
            geometry: if dim == 2 {
                "circle_cavity"
            } else {
                "sphere_cavity"
            }
            .to_string(),
            out: None,
            seed: 0,
            degree: DEFAULT_DEGREE,
            samples: 200,
            moving_level: if dim == 2 { 5 } else { 4 },
            problem: Problem::Swirl,
        }
    }

    pub fn form_parameters(&self) -> FormParameters {
        FormParameters {
            tau_nitsche: self.tau_nitsche,
            tau_j1: self.tau_j1,
            tau_j2: self.tau_j2,
            stabilization: match self.space {
                SpaceVariant::Standard => Stabilization::None,
                SpaceVariant::Aggregated => self.stabilization,
            },
            degree: self.degree,
        }
    }

    /// Applies one `key=value` setting; keys use the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "dim" => {
                let d: usize = parse(key, value)?;
                if d != 2 && d != 3 {
                    return Err(Error::Config(format!("dim must be 2 or 3, got {d}")));
                }
                let geometry_was_default = self.geometry == RunConfig::for_dim(self.dim).geometry;
                let levels_were_default = self.levels == RunConfig::for_dim(self.dim).levels;
                let moving_was_default =
                    self.moving_level == RunConfig::for_dim(self.dim).moving_level;
                let fresh = RunConfig::for_dim(d);
                if geometry_was_default {
                    self.geometry = fresh.geometry;
                }
                if levels_were_default {
                    self.levels = fresh.levels;
                }
                if moving_was_default {
                    self.moving_level = fresh.moving_level;
                }
                self.dim = d;
            }
            "levels" => self.levels = parse_levels(value)?,
            "space" => {
                self.space = match value {
                    "standard" => SpaceVariant::Standard,
                    "aggregated" => SpaceVariant::Aggregated,
                    _ => return Err(Error::Config(format!("unknown space '{value}'"))),
                }
            }
            "extension" => {
                self.extension = match value {
                    "standard" => Extension::Standard,
                    "serendipity" => Extension::Serendipity,
                    _ => return Err(Error::Config(format!("unknown extension '{value}'"))),
                }
            }
            "stabilization" => {
                self.stabilization = match value {
                    "none" => Stabilization::None,
                    "alg2" => Stabilization::Alg2,
                    "alg3" => Stabilization::Alg3,
                    _ => return Err(Error::Config(format!("unknown stabilization '{value}'"))),
                }
            }
            "problem" => {
                self.problem = match value {
                    "swirl" => Problem::Swirl,
                    "patch" => Problem::Patch,
                    _ => return Err(Error::Config(format!("unknown problem '{value}'"))),
                }
            }
            "tau-nitsche" => self.tau_nitsche = parse(key, value)?,
            "tau-j1" => self.tau_j1 = parse(key, value)?,
            "tau-j2" => self.tau_j2 = parse(key, value)?,
            "eta0" => self.eta0 = parse(key, value)?,
            "geometry" => {
                if !BUILTIN_GEOMETRIES.contains(&value) {
                    return Err(Error::UnknownGeometry {
                        name: value.to_string(),
                        valid: BUILTIN_GEOMETRIES.join(", "),
                    });
                }
                self.geometry = value.to_string();
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "degree" => self.degree = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "moving-level" => self.moving_level = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Reads settings from flat `key=value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

/// Parses `a..b` (inclusive) or a single level.
pub fn parse_levels(value: &str) -> Result<(u32, u32)> {
    let (a, b) = match value.split_once("..") {
        Some((a, b)) => (parse::<u32>("levels", a)?, parse::<u32>("levels", b)?),
        None => {
            let m = parse::<u32>("levels", value)?;
            (m, m)
        }
    };
    if a > b || b > 12 {
        return Err(Error::Config(format!("invalid level range '{value}'")));
    }
    Ok((a, b))
}
