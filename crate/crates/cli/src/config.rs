//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Néel-state XY chain, Top-K budget 4096
//! model = xxz
//! L = 50
//! Jz = 0
//! t = 10
//! tau = 0.05
//! K = 4096
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys are case-sensitive
//! and may appear once. See [`KEYS`] for the accepted set.

use std::path::{Path, PathBuf};

use pauliprop::{Boundary, MagnetizationMode, PauliWord, TruncationPolicy};
use thiserror::Error;

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "model",
    "hamiltonian",
    "L",
    "Jx",
    "Jy",
    "Jz",
    "boundary",
    "t",
    "steps",
    "tau",
    "K",
    "policy",
    "buckets",
    "weight_cap",
    "prune_eps",
    "observable",
    "mode",
    "state",
    "record_every",
    "snapshot_every",
    "ose",
    "reference",
    "seed",
    "out_dir",
];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {0:?} given twice")]
    Duplicate(String),
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("{key} = {value:?}: {msg}")]
    BadValue {
        key: &'static str,
        value: String,
        msg: String,
    },
    #[error("{0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Xxz {
        len: usize,
        jx: f64,
        jy: f64,
        jz: f64,
        boundary: Boundary,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    StaggeredMz,
    SiteZ(usize),
    Word(PauliWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Neel,
    Up,
    Down,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyName {
    TopK,
    Bucket,
    Weight,
    Combined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: Model,
    pub time: f64,
    pub steps: usize,
    pub policy_name: PolicyName,
    /// `None` is an unlimited budget.
    pub k: Option<usize>,
    pub buckets: usize,
    pub weight_cap: Option<usize>,
    pub prune_eps: f64,
    pub observable: Observable,
    pub mode: MagnetizationMode,
    pub state: InitialState,
    pub record_every: usize,
    /// 0 disables operator snapshots.
    pub snapshot_every: usize,
    pub ose: bool,
    /// Also write the dense-oracle trajectory.
    pub reference: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                line: idx + 1,
                msg: "empty key or value".into(),
            });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if pairs.iter().any(|(seen, _)| seen == k) {
            return Err(ConfigError::Duplicate(k.to_string()));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

struct Lookup<'a>(&'a [(String, String)]);

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    key,
                    value: v.to_string(),
                    msg: e.to_string(),
                })
            })
            .transpose()
    }

    fn float(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parsed(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(ConfigError::BadValue {
                    key,
                    value: x.to_string(),
                    msg: "not finite".into(),
                });
            }
        }
        Ok(v)
    }
}

fn bad(key: &'static str, value: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key,
        value: value.to_string(),
        msg: msg.into(),
    }
}

impl SimConfig {
    /// Parses a configuration file body. Relative `hamiltonian` and `out_dir` paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text)?;
        Self::from_pairs(&pairs, base)
    }

    /// Rebuilds the configuration from the echo in an output header, ignoring non-config lines.
    pub fn from_header(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let body: String = text
            .lines()
            .map_while(|l| l.strip_prefix("# "))
            .filter(|l| {
                l.split_once('=')
                    .is_some_and(|(k, _)| KEYS.contains(&k.trim()))
            })
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            });
        Self::parse(&body, base)
    }

    fn from_pairs(pairs: &[(String, String)], base: &Path) -> Result<Self, ConfigError> {
        let get = Lookup(pairs);
        let model_name = get.raw("model").unwrap_or("xxz");
        let model = match model_name {
            "xxz" => {
                if get.raw("hamiltonian").is_some() {
                    return Err(ConfigError::Inconsistent(
                        "`hamiltonian` requires model = file".into(),
                    ));
                }
                let len: usize = get.parsed("L")?.ok_or(ConfigError::Missing("L"))?;
                if len < 2 {
                    return Err(bad("L", &len.to_string(), "chain needs at least 2 sites"));
                }
                Model::Xxz {
                    len,
                    jx: get.float("Jx")?.unwrap_or(1.0),
                    jy: get.float("Jy")?.unwrap_or(1.0),
                    jz: get.float("Jz")?.unwrap_or(0.0),
                    boundary: get.parsed("boundary")?.unwrap_or_default(),
                }
            }
            "file" => {
                for k in ["L", "Jx", "Jy", "Jz", "boundary"] {
                    if get.raw(k).is_some() {
                        return Err(ConfigError::Inconsistent(format!(
                            "`{k}` only applies to model = xxz"
                        )));
                    }
                }
                let path = get
                    .raw("hamiltonian")
                    .ok_or(ConfigError::Missing("hamiltonian"))?;
                Model::File(base.join(path))
            }
            other => return Err(bad("model", other, "expected xxz or file")),
        };

        let time = get.float("t")?.ok_or(ConfigError::Missing("t"))?;
        if time < 0.0 {
            return Err(bad("t", &time.to_string(), "must be non-negative"));
        }
        let steps = match (get.parsed::<usize>("steps")?, get.float("tau")?) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Inconsistent(
                    "give either `steps` or `tau`, not both".into(),
                ))
            }
            (Some(0), None) => return Err(bad("steps", "0", "must be at least 1")),
            (Some(n), None) => n,
            (None, Some(tau)) if tau > 0.0 => ((time / tau).round() as usize).max(1),
            (None, Some(tau)) => return Err(bad("tau", &tau.to_string(), "must be positive")),
            (None, None) => return Err(ConfigError::Missing("steps")),
        };

        let policy_name = match get.raw("policy").unwrap_or("topk") {
            "topk" => PolicyName::TopK,
            "bucket" => PolicyName::Bucket,
            "weight" => PolicyName::Weight,
            "combined" => PolicyName::Combined,
            other => {
                return Err(bad(
                    "policy",
                    other,
                    "expected topk, bucket, weight or combined",
                ))
            }
        };
        let k = match get.raw("K") {
            None if policy_name == PolicyName::Weight => None,
            None => return Err(ConfigError::Missing("K")),
            Some("inf") if policy_name == PolicyName::TopK => None,
            Some(v) => {
                let k: usize = v
                    .parse()
                    .map_err(|_| bad("K", v, "expected a positive integer or inf"))?;
                if k == 0 {
                    return Err(bad("K", v, "must be at least 1"));
                }
                Some(k)
            }
        };
        let buckets: usize = get.parsed("buckets")?.unwrap_or(32);
        if buckets == 0 {
            return Err(bad("buckets", "0", "must be at least 1"));
        }
        let weight_cap: Option<usize> = get.parsed("weight_cap")?;
        if matches!(policy_name, PolicyName::Weight | PolicyName::Combined) && weight_cap.is_none()
        {
            return Err(ConfigError::Missing("weight_cap"));
        }
        let prune_eps = get
            .float("prune_eps")?
            .unwrap_or(pauliprop::sparse::DEFAULT_PRUNE_EPS);
        if prune_eps < 0.0 {
            return Err(bad(
                "prune_eps",
                &prune_eps.to_string(),
                "must be non-negative",
            ));
        }

        let observable = match get.raw("observable").unwrap_or("staggered_mz") {
            "staggered_mz" => Observable::StaggeredMz,
            v if v.starts_with("Z:") => {
                let site = v[2..]
                    .parse()
                    .map_err(|_| bad("observable", v, "expected Z:<site>"))?;
                Observable::SiteZ(site)
            }
            v => Observable::Word(
                v.parse()
                    .map_err(|e| bad("observable", v, format!("{e}")))?,
            ),
        };
        let mode: MagnetizationMode = get.parsed("mode")?.unwrap_or_default();
        let state = match get.raw("state").unwrap_or("neel") {
            "neel" => InitialState::Neel,
            "up" => InitialState::Up,
            "down" => InitialState::Down,
            "plus" => InitialState::Plus,
            other => return Err(bad("state", other, "expected neel, up, down or plus")),
        };
        let record_every: usize = get.parsed("record_every")?.unwrap_or(1);
        if record_every == 0 {
            return Err(bad("record_every", "0", "must be at least 1"));
        }
        let snapshot_every: usize = get.parsed("snapshot_every")?.unwrap_or(0);
        let ose: bool = get.parsed("ose")?.unwrap_or(false);
        let reference = match get.raw("reference").unwrap_or("none") {
            "none" => false,
            "dense" => true,
            other => return Err(bad("reference", other, "expected none or dense")),
        };
        let single_operator =
            observable != Observable::StaggeredMz || mode == MagnetizationMode::Joint;
        if (snapshot_every > 0 || ose) && !single_operator {
            return Err(ConfigError::Inconsistent(
                "snapshots and OSE need a single propagated operator; set mode = joint".into(),
            ));
        }
        let cfg = SimConfig {
            model,
            time,
            steps,
            policy_name,
            k,
            buckets,
            weight_cap,
            prune_eps,
            observable,
            mode,
            state,
            record_every,
            snapshot_every,
            ose,
            reference,
            seed: get.parsed("seed")?.unwrap_or(0),
            out_dir: base.join(get.raw("out_dir").unwrap_or(".")),
        };
        cfg.policy()
            .validate()
            .map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        Ok(cfg)
    }

    pub fn policy(&self) -> TruncationPolicy {
        let k = self.k.unwrap_or(usize::MAX);
        let policy = match self.policy_name {
            PolicyName::TopK => TruncationPolicy::top_k(k),
            PolicyName::Bucket => TruncationPolicy::bucket(k, self.buckets),
            PolicyName::Weight => TruncationPolicy::weight_cap(self.weight_cap.unwrap_or_default()),
            PolicyName::Combined => {
                TruncationPolicy::combined(k, self.weight_cap.unwrap_or_default())
            }
        };
        policy.with_prune_eps(self.prune_eps)
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn echo(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push(format!("{k} = {v}"));
        match &self.model {
            Model::Xxz {
                len,
                jx,
                jy,
                jz,
                boundary,
            } => {
                push("model", "xxz".into());
                push("L", len.to_string());
                push("Jx", jx.to_string());
                push("Jy", jy.to_string());
                push("Jz", jz.to_string());
                push("boundary", boundary.to_string());
            }
            Model::File(path) => {
                push("model", "file".into());
                push("hamiltonian", path.display().to_string());
            }
        }
        push("t", self.time.to_string());
        push("steps", self.steps.to_string());
        push(
            "policy",
            match self.policy_name {
                PolicyName::TopK => "topk",
                PolicyName::Bucket => "bucket",
                PolicyName::Weight => "weight",
                PolicyName::Combined => "combined",
            }
            .into(),
        );
        if let Some(k) = self.k {
            push("K", k.to_string());
        } else if self.policy_name != PolicyName::Weight {
            push("K", "inf".into());
        }
        if self.policy_name == PolicyName::Bucket {
            push("buckets", self.buckets.to_string());
        }
        if let Some(m) = self.weight_cap {
            push("weight_cap", m.to_string());
        }
        push("prune_eps", format!("{:e}", self.prune_eps));
        let obs = match &self.observable {
            Observable::StaggeredMz => "staggered_mz".to_string(),
            Observable::SiteZ(i) => format!("Z:{i}"),
            Observable::Word(w) => w.to_string(),
        };
        push("observable", obs);
        push("mode", self.mode.to_string());
        let state = match self.state {
            InitialState::Neel => "neel",
            InitialState::Up => "up",
            InitialState::Down => "down",
            InitialState::Plus => "plus",
        };
        push("state", state.into());
        push("record_every", self.record_every.to_string());
        push("snapshot_every", self.snapshot_every.to_string());
        push("ose", self.ose.to_string());
        push(
            "reference",
            if self.reference { "dense" } else { "none" }.into(),
        );
        push("seed", self.seed.to_string());
        push("out_dir", self.out_dir.display().to_string());
        out
    }

    /// The echo as a config file body.
    #[cfg(test)]
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        self.echo().iter().fold(String::new(), |mut s, l| {
            let _ = writeln!(s, "{l}");
            s
        })
    }
}
