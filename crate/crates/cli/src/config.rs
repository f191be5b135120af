//! Run configuration for `heisenfrac verify`.
//!
//! A TOML file with a top-level `studies` list and one optional table per
//! study family. Missing tables and keys take library defaults; unknown keys
//! are rejected.

use std::fmt;

use heisenfrac_core::commutators::{generate_instance, generate_t_instance};
use heisenfrac_core::harness::{
    lp_exponent, CommonSettings, Cor12Settings, Thm11Settings, Thm12Settings,
};
use heisenfrac_core::lattice::Lattice;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Thm11,
    Thm12,
    Cor12,
    Prop61,
    NegativeControl,
    KernelIdentities,
    MultiplierIdentities,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Thm11 => "thm11",
            Self::Thm12 => "thm12",
            Self::Cor12 => "cor12",
            Self::Prop61 => "prop61",
            Self::NegativeControl => "negative-control",
            Self::KernelIdentities => "kernel-identities",
            Self::MultiplierIdentities => "multiplier-identities",
        }
    }

    /// Config table holding this study's parameters.
    fn table(self) -> Option<&'static str> {
        match self {
            Self::Thm11 => Some("thm11"),
            Self::Thm12 => Some("thm12"),
            Self::Cor12 => Some("cor12"),
            Self::Prop61 => Some("prop61"),
            Self::NegativeControl => Some("negative_control"),
            Self::KernelIdentities => Some("kernel_identities"),
            Self::MultiplierIdentities => None,
        }
    }

    fn needs_refinement(self) -> bool {
        !matches!(self, Self::KernelIdentities | Self::MultiplierIdentities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelIdentitySettings {
    /// Lattice size; the first entry of `common.m_list` when absent.
    pub m: Option<usize>,
    pub count: usize,
}

impl Default for KernelIdentitySettings {
    fn default() -> Self {
        Self { m: None, count: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub studies: Vec<StudyKind>,
    #[serde(default)]
    pub common: CommonSettings,
    #[serde(default)]
    pub thm11: Thm11Settings,
    #[serde(default)]
    pub thm12: Thm12Settings,
    #[serde(default)]
    pub cor12: Cor12Settings,
    #[serde(default)]
    pub prop61: Thm11Settings,
    #[serde(default)]
    pub negative_control: Thm11Settings,
    #[serde(default)]
    pub kernel_identities: KernelIdentitySettings,
}

/// A load-time failure located in the source text where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub table: Option<String>,
    pub keys: Vec<(String, Option<usize>)>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(t) = &self.table {
            write!(f, " in [{t}]")?;
        }
        for (key, line) in &self.keys {
            match line {
                Some(l) => write!(f, ", key `{key}` at line {l}")?,
                None => write!(f, ", key `{key}` (default)")?,
            }
        }
        write!(f, ": {}", self.message)
    }
}

/// 1-based line of `key = ...` inside `[table]`, or at top level for `None`.
pub fn locate_key(text: &str, table: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().map(|s| s.trim().to_string());
            continue;
        }
        if current.as_deref() != table {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    None
}

/// Keys of `table` whose names occur as words in `message`.
fn implicated_keys(
    text: &str,
    table: &str,
    candidates: &[&str],
    message: &str,
) -> Vec<(String, Option<usize>)> {
    let words: Vec<&str> = message
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .collect();
    candidates
        .iter()
        .filter(|k| words.contains(k))
        .map(|k| (k.to_string(), locate_key(text, Some(table), k)))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError {
            message: e.to_string().trim_end().to_string(),
            table: None,
            keys: vec![],
        })?;
        config.validate(text)?;
        Ok(config)
    }

    /// Lattice sizes touched by the configured studies, in ascending order.
    pub fn lattice_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        if self.studies.iter().any(|s| s.needs_refinement()) {
            sizes.extend(&self.common.m_list);
        }
        if self.studies.contains(&StudyKind::KernelIdentities) {
            sizes.push(self.kernel_identity_m());
        }
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    pub fn kernel_identity_m(&self) -> usize {
        self.kernel_identities
            .m
            .or(self.common.m_list.first().copied())
            .unwrap_or(4)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |table: Option<&str>, keys: &[&str], message: String| ConfigError {
            message,
            table: table.map(String::from),
            keys: keys
                .iter()
                .map(|k| (k.to_string(), locate_key(text, table, k)))
                .collect(),
        };
        if self.studies.is_empty() {
            return Err(fail(
                None,
                &["studies"],
                "at least one study is required".into(),
            ));
        }
        let c = &self.common;
        let common = Some("common");
        if c.n == 0 {
            return Err(fail(common, &["n"], "n >= 1 required".into()));
        }
        if c.pairs == 0 {
            return Err(fail(common, &["pairs"], "pairs >= 1 required".into()));
        }
        if !(c.t0 > 0.0) {
            return Err(fail(
                common,
                &["t0"],
                format!("t0 > 0 required, got {}", c.t0),
            ));
        }
        if c.calibration_count == 0 {
            return Err(fail(
                common,
                &["calibration_count"],
                "calibration_count >= 1 required".into(),
            ));
        }
        if self.studies.iter().any(|s| s.needs_refinement()) && c.m_list.len() < 2 {
            return Err(fail(
                common,
                &["m_list"],
                "refinement studies need at least two lattice sizes".into(),
            ));
        }
        for m in self.lattice_sizes() {
            let keys: &[&str] = if c.m_list.contains(&m) {
                &["m_list"]
            } else {
                &["m"]
            };
            let table = if c.m_list.contains(&m) {
                common
            } else {
                Some("kernel_identities")
            };
            Lattice::with_default_spacing(c.n, m)
                .map_err(|e| fail(table, keys, format!("M = {m}: {}", plain(&e.to_string()))))?;
        }
        for &study in &self.studies {
            let Some(table) = study.table() else { continue };
            let checked = match study {
                StudyKind::Thm11 | StudyKind::Prop61 | StudyKind::NegativeControl => {
                    let s = match study {
                        StudyKind::Thm11 => &self.thm11,
                        StudyKind::Prop61 => &self.prop61,
                        _ => &self.negative_control,
                    };
                    let mut r =
                        generate_instance(s.alpha, s.tau1, s.tau2, s.epsilon, c.grid, c.seed)
                            .map(|_| ());
                    if r.is_ok() && study == StudyKind::Prop61 {
                        for (name, v) in [("alpha", s.alpha), ("tau1", s.tau1), ("tau2", s.tau2)] {
                            if !(v > 0.0 && v < 2.0) {
                                r = Err(heisenfrac_core::Error::Usage(format!(
                                    "geometric route needs {name} in (0, 2), got {v}"
                                )));
                                break;
                            }
                        }
                    }
                    r.map_err(|e| (e.to_string(), &["alpha", "tau1", "tau2", "epsilon"][..]))
                }
                StudyKind::Thm12 => {
                    let s = &self.thm12;
                    generate_t_instance(s.tau, s.beta, s.delta, s.epsilon, c.grid, c.seed)
                        .map(|_| ())
                        .map_err(|e| (e.to_string(), &["tau", "beta", "delta", "epsilon"][..]))
                }
                StudyKind::Cor12 => {
                    let s = &self.cor12;
                    let q = 2 * c.n + 2;
                    let range = if s.alpha > 0.0 && s.alpha < q as f64 {
                        Ok(())
                    } else {
                        Err(heisenfrac_core::Error::Usage(format!(
                            "alpha must lie in (0, {q}), got {}",
                            s.alpha
                        )))
                    };
                    range
                        .and_then(|_| lp_exponent(s.alpha, s.q1, s.q2, q).map(|_| ()))
                        .map_err(|e| (e.to_string(), &["alpha", "q1", "q2"][..]))
                }
                StudyKind::KernelIdentities => {
                    if self.kernel_identities.count == 0 {
                        Err(("count >= 1 required".to_string(), &["count"][..]))
                    } else {
                        Ok(())
                    }
                }
                StudyKind::MultiplierIdentities => Ok(()),
            };
            if let Err((message, candidates)) = checked {
                let message = plain(&message);
                let mut keys = implicated_keys(text, table, candidates, &message);
                if keys.is_empty() {
                    keys = candidates
                        .iter()
                        .map(|k| (k.to_string(), locate_key(text, Some(table), k)))
                        .collect();
                }
                return Err(ConfigError {
                    message,
                    table: Some(table.to_string()),
                    keys,
                });
            }
        }
        Ok(())
    }
}

fn plain(message: &str) -> String {
    message
        .strip_prefix("usage error: ")
        .unwrap_or(message)
        .to_string()
}
