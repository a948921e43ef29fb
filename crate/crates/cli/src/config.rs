//! Flat `key = value` experiment configuration.

use lgq_core::localize::{DiscreteSpace, PipelineConfig};
use lgq_core::profile::{ConstantBundle, ExponentChoice};
use lgq_core::spaces::SpaceSpec;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing key `{0}`")]
    Missing(String),
}

/// Every accepted key with its default (empty when there is none).
const KEYS: &[(&str, &str)] = &[
    ("space", "sphere2"),
    ("points", "1500"),
    ("levels", "10"),
    ("segment_length", "pi"),
    ("segment_offset", "0"),
    ("space_file", ""),
    ("N", "2"),
    ("v", "0.3"),
    ("alpha", ""),
    ("beta", ""),
    ("gamma", ""),
    ("riemannian", "false"),
    ("seed", "0"),
    ("center", "0"),
    ("blob", "0"),
    ("blob_center", ""),
    ("set_file", ""),
    ("profile_N", ""),
    ("profile_D", "2,2.5,3,pi"),
    (
        "profile_v",
        "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95",
    ),
    ("density", ""),
    ("cd_tol", "0.01"),
    ("tol_gamma_mesh", "2"),
    ("check_tol_mesh", "3"),
    ("delta_floor_mesh", "1"),
    ("sweep_key", "blob"),
    ("sweep_values", "0.01,0.02,0.04"),
    ("criteria", "1,2,3,4,5,6,7,8,9,10"),
];

/// Raw settings in key order; later assignments win.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig(BTreeMap::new());
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v.trim())
    }

    fn get(&self, key: &str) -> &str {
        self.0
            .get(key)
            .map(String::as_str)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d))
            .unwrap_or("")
    }

    fn opt(&self, key: &str) -> Option<&str> {
        Some(self.get(key)).filter(|s| !s.is_empty())
    }

    fn num(&self, key: &str) -> Result<f64, ConfigError> {
        parse_real(self.get(key)).map_err(|msg| ConfigError::Value {
            key: key.into(),
            msg,
        })
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.opt(key).map(|_| self.num(key)).transpose()
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::Value {
            key: key.into(),
            msg: format!("not an integer: `{}`", self.get(key)),
        })
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get(key)
            .split(',')
            .map(|s| {
                parse_real(s.trim()).map_err(|msg| ConfigError::Value {
                    key: key.into(),
                    msg,
                })
            })
            .collect()
    }

    fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(ConfigError::Value {
                key: key.into(),
                msg: format!("not a boolean: `{other}`"),
            }),
        }
    }

    pub fn value(&self, key: &str) -> String {
        self.get(key).to_string()
    }

    pub fn values(&self, key: &str) -> Vec<String> {
        self.get(key)
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }
}

/// Reals, with `pi` accepted as a literal and as `pi-x`.
fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("pi") {
        if rest.is_empty() {
            return Ok(PI);
        }
        if let Some(x) = rest.strip_prefix('-') {
            return x
                .trim()
                .parse::<f64>()
                .map(|x| PI - x)
                .map_err(|_| format!("not a number: `{s}`"));
        }
    }
    s.parse().map_err(|_| format!("not a number: `{s}`"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSource {
    Generated(SpaceSpec),
    File(PathBuf),
}

impl SpaceSource {
    pub fn load(&self) -> lgq_core::Result<DiscreteSpace> {
        match self {
            SpaceSource::Generated(spec) => spec.build(),
            SpaceSource::File(p) => DiscreteSpace::from_text(&std::fs::read_to_string(p)?),
        }
    }
}

/// How the test set `E` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSource {
    /// Cap of volume `v − blob` about `center`, plus a cap of volume `blob`
    /// about `blob_center` (default: the point farthest from `center`).
    Cap {
        center: usize,
        blob: f64,
        blob_center: Option<usize>,
    },
    /// Point ids listed in a file, separated by whitespace.
    File(PathBuf),
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub space: SpaceSource,
    pub n: f64,
    pub v: f64,
    pub exponents: ExponentChoice,
    pub seed: u64,
    pub set: SetSource,
    pub profile_n: Vec<f64>,
    pub profile_d: Vec<f64>,
    pub profile_v: Vec<f64>,
    pub density: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub sweep_key: String,
    pub sweep_values: Vec<String>,
    pub criteria: Vec<u8>,
}

impl Config {
    /// Validates `raw`; relative paths resolve against `base`. Exponent
    /// choices are checked here, before any computation.
    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self, ConfigError> {
        let path = |key: &str| raw.opt(key).map(|p| base.join(p));
        let n = raw.num("N")?;
        let points: usize = raw.int("points")?;
        let space = match raw.get("space") {
            "sphere2" => SpaceSource::Generated(SpaceSpec::Sphere2 { n: points }),
            "circle" => SpaceSource::Generated(SpaceSpec::Circle { n: points }),
            "segment" => SpaceSource::Generated(SpaceSpec::Segment1d {
                n: points,
                n_dim: n,
                d: raw.num("segment_length")?,
                xi: raw.num("segment_offset")?,
            }),
            "suspension" => SpaceSource::Generated(SpaceSpec::Suspension {
                base: points,
                levels: raw.int("levels")?,
                n_dim: n,
            }),
            "file" => SpaceSource::File(
                path("space_file").ok_or_else(|| ConfigError::Missing("space_file".into()))?,
            ),
            other => {
                return Err(ConfigError::Value {
                    key: "space".into(),
                    msg: format!(
                        "`{other}` is not one of sphere2, circle, segment, suspension, file"
                    ),
                })
            }
        };
        let exponents = ExponentChoice {
            alpha: raw.opt_num("alpha")?,
            beta: raw.opt_num("beta")?,
            gamma: raw.opt_num("gamma")?,
            riemannian: raw.flag("riemannian")?,
        };
        let v = raw.num("v")?;
        ConstantBundle::new(n, v, exponents).map_err(|e| ConfigError::Value {
            key: "alpha".into(),
            msg: e.to_string(),
        })?;
        let set = match path("set_file") {
            Some(p) => SetSource::File(p),
            None => SetSource::Cap {
                center: raw.int("center")?,
                blob: raw.num("blob")?,
                blob_center: raw
                    .opt("blob_center")
                    .map(|_| raw.int("blob_center"))
                    .transpose()?,
            },
        };
        let criteria = raw
            .values("criteria")
            .iter()
            .map(|c| match c.parse::<u8>() {
                Ok(id @ 1..=10) => Ok(id),
                _ => Err(ConfigError::Value {
                    key: "criteria".into(),
                    msg: format!("`{c}` is not a criterion number"),
                }),
            })
            .collect::<Result<_, _>>()?;
        Ok(Config {
            space,
            n,
            v,
            exponents,
            seed: raw.int("seed")?,
            set,
            profile_n: if raw.opt("profile_N").is_some() {
                raw.list("profile_N")?
            } else {
                vec![n]
            },
            profile_d: raw.list("profile_D")?,
            profile_v: raw.list("profile_v")?,
            density: path("density"),
            pipeline: PipelineConfig {
                exponents,
                tol_gamma_mesh: raw.num("tol_gamma_mesh")?,
                check_tol_mesh: raw.num("check_tol_mesh")?,
                delta_floor_mesh: raw.num("delta_floor_mesh")?,
                cd_tol: raw.num("cd_tol")?,
            },
            sweep_key: raw.value("sweep_key"),
            sweep_values: raw.values("sweep_values"),
            criteria,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut raw = RawConfig::parse("# demo\nN = 3\nv=0.2 # trailing\n\n").unwrap();
        raw.apply("v=0.4").unwrap();
        let c = Config::from_raw(&raw, Path::new(".")).unwrap();
        assert_eq!(c.n, 3.0);
        assert_eq!(c.v, 0.4);
        assert_eq!(c.profile_n, vec![3.0]);
        assert_eq!(c.profile_d[3], PI);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RawConfig::parse("N 3"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            RawConfig::parse("bogus = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
        let raw = RawConfig::parse("alpha = 0.5").unwrap();
        assert!(Config::from_raw(&raw, Path::new(".")).is_err());
        let raw = RawConfig::parse("space = torus").unwrap();
        assert!(Config::from_raw(&raw, Path::new(".")).is_err());
    }

    #[test]
    fn pi_literals() {
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("pi-0.5").unwrap(), PI - 0.5);
        assert!(parse_real("tau").is_err());
    }
}
