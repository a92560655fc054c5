//! Flat dotted-key configuration.
//!
//! A config file is TOML whose keys form dotted paths (`grid.tMin = 1e-4`,
//! `weights.v = "t^-0.5"`); nested tables and literal dotted keys are
//! equivalent. `--set KEY=VALUE` pairs overlay the file, last one winning.
//! Every key must belong to the documented vocabulary, so typos are caught
//! by name instead of being silently ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use cesaro_core::{Band, OracleConfig, SpecInput, Theorem};

/// A command failure carrying the process exit code: 1 for runtime errors,
/// 2 for invalid input, 3 for failed certifications.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<cesaro_core::Error> for Failure {
    fn from(e: cesaro_core::Error) -> Failure {
        use cesaro_core::Error;
        match e {
            Error::Parse { .. } | Error::InvalidSpec(_) | Error::Domain(_) => {
                Failure::invalid(e.to_string())
            }
            other => Failure::runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::runtime(e.to_string())
    }
}

const VOCABULARY: &[&str] = &[
    "theorem",
    "exponents.p",
    "exponents.q",
    "weights.u",
    "weights.v",
    "weights.w",
    "weights.a",
    "weights.b",
    "gamma_over_n",
    "grid.tMin",
    "grid.tMax",
    "grid.n",
    "oracle.subsample",
    "oracle.ascentIters",
    "oracle.seed",
    "band.cLower",
    "band.cUpper",
    "ibp.alphas",
    "ibp.instances",
    "ibp.seed",
    "sweep.axis",
    "sweep.values",
    "output.path",
    "output.format",
];

#[derive(Debug)]
pub struct Conf {
    map: BTreeMap<String, toml::Value>,
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match value {
        toml::Value::Table(table) => {
            for (key, inner) in table {
                let path = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten(&path, inner, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

impl Conf {
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Conf, Failure> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::invalid(format!("cannot read config {}: {e}", path.display()))
            })?;
            let value: toml::Value = text
                .parse()
                .map_err(|e| Failure::invalid(format!("config {}: {e}", path.display())))?;
            flatten("", &value, &mut map);
        }
        for pair in sets {
            let (key, raw) = pair.split_once('=').ok_or_else(|| {
                Failure::invalid(format!("--set expects KEY=VALUE, got {pair:?}"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Failure::invalid(format!(
                    "--set expects KEY=VALUE, got {pair:?}"
                )));
            }
            map.insert(key.to_string(), parse_scalar(raw));
        }
        let known: BTreeSet<&str> = VOCABULARY.iter().copied().collect();
        for key in map.keys() {
            if !known.contains(key.as_str()) {
                return Err(Failure::invalid(format!(
                    "unknown config key {key:?}; known keys are {}",
                    VOCABULARY.join(", ")
                )));
            }
        }
        Ok(Conf { map })
    }

    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.map.get(key)
    }

    pub fn get_str(&self, key: &str) -> Result<Option<String>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(toml::Value::Integer(i)) => Ok(Some(i.to_string())),
            Some(toml::Value::Float(x)) => Ok(Some(x.to_string())),
            Some(toml::Value::Boolean(b)) => Ok(Some(b.to_string())),
            Some(other) => Err(Failure::invalid(format!(
                "config key {key} must be a string, got {other}"
            ))),
        }
    }

    pub fn require_str(&self, key: &str) -> Result<String, Failure> {
        self.get_str(key)?
            .ok_or_else(|| Failure::invalid(format!("missing required config key {key}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(other) => Err(Failure::invalid(format!(
                "config key {key} must be a number, got {other}"
            ))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, Failure> {
        self.get_f64(key)?
            .ok_or_else(|| Failure::invalid(format!("missing required config key {key}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(other) => Err(Failure::invalid(format!(
                "config key {key} must be a nonnegative integer, got {other}"
            ))),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(Failure::invalid(format!(
                "config key {key} must be a nonnegative integer, got {other}"
            ))),
        }
    }

    pub fn get_f64_array(&self, key: &str) -> Result<Option<Vec<f64>>, Failure> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        toml::Value::Integer(i) => out.push(*i as f64),
                        toml::Value::Float(x) => out.push(*x),
                        other => {
                            return Err(Failure::invalid(format!(
                                "config key {key} must be an array of numbers, found {other}"
                            )))
                        }
                    }
                }
                Ok(Some(out))
            }
            Some(other) => Err(Failure::invalid(format!(
                "config key {key} must be an array of numbers, got {other}"
            ))),
        }
    }

    /// The problem description shared by eval, certify, and sweep.
    pub fn spec_input(&self) -> Result<SpecInput, Failure> {
        let theorem: Theorem = self
            .require_str("theorem")?
            .parse()
            .map_err(|e: cesaro_core::Error| Failure::invalid(e.to_string()))?;
        let n = self
            .get_usize("grid.n")?
            .ok_or_else(|| Failure::invalid("missing required config key grid.n"))?;
        if n < 8 {
            return Err(Failure::invalid(format!(
                "grid.n must be at least 8, got {n}"
            )));
        }
        Ok(SpecInput {
            theorem,
            p: self.require_f64("exponents.p")?,
            q: self.require_f64("exponents.q")?,
            t_min: self.require_f64("grid.tMin")?,
            t_max: self.require_f64("grid.tMax")?,
            n,
            u: self.get_str("weights.u")?,
            v: self.require_str("weights.v")?,
            w: self.require_str("weights.w")?,
            a: self.get_str("weights.a")?,
            b: self.get_str("weights.b")?,
            gamma_over_n: self.get_f64("gamma_over_n")?,
        })
    }

    pub fn oracle_config(&self) -> Result<OracleConfig, Failure> {
        let defaults = OracleConfig::default();
        Ok(OracleConfig {
            subsample: self.get_usize("oracle.subsample")?.unwrap_or(defaults.subsample),
            ascent_iters: self
                .get_usize("oracle.ascentIters")?
                .unwrap_or(defaults.ascent_iters),
            seed: self.get_u64("oracle.seed")?.unwrap_or(defaults.seed),
        })
    }

    pub fn band(&self) -> Result<Band, Failure> {
        let lo = self.require_f64("band.cLower")?;
        let hi = self.require_f64("band.cUpper")?;
        Band::new(lo, hi).map_err(|e| Failure::invalid(e.to_string()))
    }

    pub fn output_path(&self) -> Result<Option<String>, Failure> {
        self.get_str("output.path")
    }

    pub fn output_format(&self) -> Result<Option<String>, Failure> {
        self.get_str("output.format")
    }
}

/// Values passed by --set: anything TOML understands as a scalar, falling
/// back to a plain string (weight expressions like t^-0.5 land here).
fn parse_scalar(raw: &str) -> toml::Value {
    let trial = format!("x = {raw}");
    if let Ok(toml::Value::Table(mut t)) = trial.parse::<toml::Value>() {
        if let Some(v) = t.remove("x") {
            return v;
        }
    }
    toml::Value::String(raw.trim().to_string())
}
