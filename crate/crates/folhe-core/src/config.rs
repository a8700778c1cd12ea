//! Declarative run descriptions: `key = value` lines grouped under
//! `[section]` headers, `#` comments, duplicate keys allowed where a list is
//! natural (extension classes). The same file may carry a `[model]`, a
//! `[bundle]` and a `[solver]` section, or they can live in separate files —
//! the loaders only look at their own section.
//!
//! ```text
//! [model]
//! n = 1
//! m = 1
//! cutoff = 8
//! leaf_volume = 1.0
//! # optional: transverse metric, row-major, rows separated by ';'
//! g = 1 0; 0 1
//! # optional: rational dependency generators of the foliation directions,
//! # one row of d integers per 'dep' line (default: coordinate leaves)
//! dep = 0 0 1
//!
//! [bundle]
//! # '|' separates factors, each factor is n transverse Chern numbers
//! factors = 1 | 0
//! # optional rational twists per factor, 2n entries each
//! twists = 1/2,0 | 0,0
//! # optional deforming (0,1) classes: row col : mode (2n ints) : re im pairs
//! ext = 0 1 : 0 0 : 1 0
//! ```

use crate::bundle::{BundleError, BundleSpec, ExtClass, LineFactor};
use crate::exact::Ratio;
use crate::exterior::C;
use crate::model::{FoliatedTorusModel, ModelError};
use crate::solver::SolveOptions;
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key '{key}' in section [{section}]")]
    Missing { section: String, key: String },
    #[error("bad value for key '{key}' in section [{section}]: {msg}")]
    BadValue {
        section: String,
        key: String,
        msg: String,
    },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("bundle: {0}")]
    Bundle(#[from] BundleError),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Config {
    sections: BTreeMap<String, Vec<(String, String)>>,
    /// verbatim text, echoed into reports
    pub source: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                    line: i + 1,
                    msg: "unterminated section header".into(),
                })?;
                current = Some(name.trim().to_string());
                sections.entry(current.clone().unwrap()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            let sec = current.clone().ok_or(ConfigError::Syntax {
                line: i + 1,
                msg: format!("key '{}' before any [section] header", key.trim()),
            })?;
            sections
                .entry(sec)
                .or_default()
                .push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Config {
            sections,
            source: text.to_string(),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Config, ConfigError> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|kv| {
            kv.iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        })
    }

    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.sections
            .get(section)
            .map(|kv| {
                kv.iter()
                    .filter(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    pub fn parsed<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                section: section.into(),
                key: key.into(),
                msg: format!("cannot parse '{v}'"),
            }),
        }
    }

    pub fn parsed_or<T: FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        Ok(self.parsed(section, key)?.unwrap_or(default))
    }
}

fn bad(section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        section: section.into(),
        key: key.into(),
        msg: msg.into(),
    }
}

fn parse_row<T: FromStr>(section: &str, key: &str, row: &str) -> Result<Vec<T>, ConfigError> {
    row.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| bad(section, key, format!("cannot parse entry '{t}'")))
        })
        .collect()
}

fn parse_ratio(section: &str, key: &str, t: &str) -> Result<Ratio, ConfigError> {
    let mk = || bad(section, key, format!("cannot parse rational '{t}'"));
    match t.split_once('/') {
        Some((a, b)) => {
            let num: i128 = a.trim().parse().map_err(|_| mk())?;
            let den: i128 = b.trim().parse().map_err(|_| mk())?;
            if den == 0 {
                return Err(mk());
            }
            Ok(Ratio::new(num, den))
        }
        None => Ok(Ratio::from_int(t.trim().parse().map_err(|_| mk())?)),
    }
}

pub fn model_from_config(cfg: &Config) -> Result<Arc<FoliatedTorusModel>, ConfigError> {
    let sec = "model";
    let n: usize = cfg
        .require(sec, "n")?
        .parse()
        .map_err(|_| bad(sec, "n", "expected a positive integer"))?;
    let m: usize = cfg
        .require(sec, "m")?
        .parse()
        .map_err(|_| bad(sec, "m", "expected a positive integer"))?;
    let cutoff: usize = cfg
        .require(sec, "cutoff")?
        .parse()
        .map_err(|_| bad(sec, "cutoff", "expected a positive integer"))?;
    let leaf_volume: f64 = cfg.parsed_or(sec, "leaf_volume", 1.0)?;
    let g = match cfg.get(sec, "g") {
        None => None,
        Some(v) => {
            let rows: Vec<Vec<f64>> = v
                .split(';')
                .map(|r| parse_row(sec, "g", r))
                .collect::<Result<_, _>>()?;
            if rows.len() != 2 * n || rows.iter().any(|r| r.len() != 2 * n) {
                return Err(bad(sec, "g", format!("expected {0}×{0} entries", 2 * n)));
            }
            Some(DMatrix::from_fn(2 * n, 2 * n, |i, j| rows[i][j]))
        }
    };
    let deps = cfg.get_all(sec, "dep");
    let dep = if deps.is_empty() {
        None
    } else {
        let d = 2 * n + m;
        let rows: Vec<Vec<i128>> = deps
            .iter()
            .map(|r| parse_row(sec, "dep", r))
            .collect::<Result<_, _>>()?;
        if rows.iter().any(|r| r.len() != d) {
            return Err(bad(sec, "dep", format!("each row needs {d} integers")));
        }
        Some(rows)
    };
    let model = FoliatedTorusModel::new(n, m, g, leaf_volume, dep, cutoff)?;
    Ok(model)
}

pub fn bundle_from_config(
    cfg: &Config,
    model: &Arc<FoliatedTorusModel>,
) -> Result<BundleSpec, ConfigError> {
    let sec = "bundle";
    let n = model.n;
    let mut factors: Vec<LineFactor> = Vec::new();
    for chunk in cfg.require(sec, "factors")?.split('|') {
        let c: Vec<i64> = parse_row(sec, "factors", chunk)?;
        if c.len() != n {
            return Err(bad(
                sec,
                "factors",
                format!("each factor needs {n} Chern numbers"),
            ));
        }
        factors.push(LineFactor::new(c));
    }
    if let Some(tw) = cfg.get(sec, "twists") {
        let chunks: Vec<&str> = tw.split('|').collect();
        if chunks.len() != factors.len() {
            return Err(bad(sec, "twists", "one twist list per factor"));
        }
        for (f, chunk) in factors.iter_mut().zip(chunks) {
            let entries: Vec<Ratio> = chunk
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_ratio(sec, "twists", t))
                .collect::<Result<_, _>>()?;
            if entries.len() != 2 * n {
                return Err(bad(sec, "twists", format!("each twist needs {} entries", 2 * n)));
            }
            if entries.iter().any(|r| !r.is_zero()) {
                f.twist = Some(entries);
            }
        }
    }
    let mut ext: Vec<ExtClass> = Vec::new();
    for line in cfg.get_all(sec, "ext") {
        let parts: Vec<&str> = line.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(sec, "ext", "expected 'row col : mode : re im ...'"));
        }
        let rc: Vec<usize> = parse_row(sec, "ext", parts[0])?;
        if rc.len() != 2 {
            return Err(bad(sec, "ext", "expected two indices before the first ':'"));
        }
        let kap: Vec<i64> = parse_row(sec, "ext", parts[1])?;
        if kap.len() != 2 * n {
            return Err(bad(sec, "ext", format!("mode needs {} integers", 2 * n)));
        }
        let nums: Vec<f64> = parse_row(sec, "ext", parts[2])?;
        if nums.len() != 2 * n {
            return Err(bad(
                sec,
                "ext",
                format!("need {n} components as re/im pairs"),
            ));
        }
        let comps: Vec<C> = (0..n).map(|a| C::new(nums[2 * a], nums[2 * a + 1])).collect();
        ext.push(ExtClass {
            row: rc[0],
            col: rc[1],
            modes: vec![(kap, comps)],
        });
    }
    Ok(BundleSpec::new(model, factors, ext)?)
}

pub fn solve_options_from_config(cfg: &Config) -> Result<SolveOptions, ConfigError> {
    let sec = "solver";
    let d = SolveOptions::default();
    let opts = SolveOptions {
        eps_start: cfg.parsed_or(sec, "eps_start", d.eps_start)?,
        eps_target: cfg.parsed_or(sec, "eps_min", d.eps_target)?,
        ratio: cfg.parsed_or(sec, "ratio", d.ratio)?,
        newton_tol: cfg.parsed_or(sec, "tol", d.newton_tol)?,
        newton_max: cfg.parsed_or(sec, "newton_max", d.newton_max)?,
        gmres_max: cfg.parsed_or(sec, "gmres_max", d.gmres_max)?,
        blowup_norm: cfg.parsed_or(sec, "blowup_norm", d.blowup_norm)?,
        max_steps: cfg.parsed_or(sec, "max_steps", d.max_steps)?,
    };
    let ok = opts.eps_start > 0.0
        && opts.eps_target > 0.0
        && opts.eps_target <= opts.eps_start
        && opts.ratio > 0.0
        && opts.ratio < 1.0
        && opts.newton_tol > 0.0;
    if !ok {
        return Err(bad(sec, "eps_min", "solver schedule must be positive and strictly decreasing"));
    }
    Ok(opts)
}
