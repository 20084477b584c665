//! Run configuration: defaults, dataset profiles, flat `key = value` files
//! and command-line overrides, resolved in that order.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use dgnn::layer::{ablation_config, Ablation, DgnnHyperparams, Mode};
use dgnn::profiles::{profile, DEFAULT_K};
use dgnn::train::{PrepareOptions, TrainConfig};

/// Every knob of a run. Written next to the outputs as `config.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub profile: Option<String>,
    pub hp: DgnnHyperparams,
    pub k: usize,
    pub row_normalize: bool,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            profile: None,
            hp: DgnnHyperparams::default(),
            k: DEFAULT_K,
            row_normalize: true,
            train: TrainConfig::default(),
            seeds: vec![0],
            jobs: 1,
            out: PathBuf::from("out"),
        }
    }
}

/// Keys accepted in config files, in the order they are written.
pub const KEYS: [&str; 19] = [
    "dataset",
    "profile",
    "lambda",
    "alpha",
    "beta",
    "epsilon",
    "layers",
    "mode",
    "k",
    "row_normalize",
    "lr",
    "dropout",
    "max_epochs",
    "patience",
    "weight_decay",
    "seeds",
    "jobs",
    "out",
    "mem_budget",
];

/// `key = value` pairs in input order; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`", no + 1))?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) && key != "ablation" {
            bail!("line {}: unknown key {key:?}", no + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// A seed count `N` (seeds `0..N`) or an explicit comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if s.contains(',') {
        s.split(',')
            .map(|t| t.trim().parse().with_context(|| format!("invalid seed {t:?}")))
            .collect::<Result<_>>()?
    } else {
        let n: u64 = s.trim().parse().with_context(|| format!("invalid seed count {s:?}"))?;
        (0..n).collect()
    };
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }
    Ok(seeds)
}

/// Bytes, optionally suffixed with K, M or G (powers of 1024).
pub fn parse_bytes(s: &str) -> Result<u64> {
    let t = s.trim();
    let (num, shift) = match t.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&t[..t.len() - 1], 10),
        Some('M') => (&t[..t.len() - 1], 20),
        Some('G') => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    let v: u64 = num.trim().parse().with_context(|| format!("invalid byte count {s:?}"))?;
    v.checked_mul(1u64 << shift).context("byte count overflows")
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid boolean {s:?}"),
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    v.parse().with_context(|| format!("invalid value {v:?} for {key}"))
}

impl RunConfig {
    /// Applies a dataset profile's statistics-independent defaults.
    pub fn apply_profile(&mut self, name: &str) -> Result<()> {
        let p = profile(name)?;
        self.profile = Some(p.name.to_string());
        self.hp = DgnnHyperparams {
            mode: self.hp.mode,
            epsilon: self.hp.epsilon,
            ..p.hyperparams()
        };
        self.train.lr = p.lr;
        self.train.dropout = p.dropout;
        Ok(())
    }

    /// Sets one key. `ablation` rewrites the hyperparameters in place.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "profile" => self.apply_profile(v)?,
            "lambda" => self.hp.lambda = num(key, v)?,
            "alpha" => self.hp.alpha = num(key, v)?,
            "beta" => self.hp.beta = num(key, v)?,
            "epsilon" => self.hp.epsilon = num(key, v)?,
            "layers" => self.hp.layers = num(key, v)?,
            "mode" => self.hp.mode = v.parse::<Mode>()?,
            "k" => self.k = num(key, v)?,
            "row_normalize" => self.row_normalize = parse_bool(v)?,
            "lr" => self.train.lr = num(key, v)?,
            "dropout" => self.train.dropout = num(key, v)?,
            "max_epochs" => self.train.max_epochs = num(key, v)?,
            "patience" => self.train.patience = num(key, v)?,
            "weight_decay" => self.train.weight_decay = num(key, v)?,
            "seeds" => self.seeds = parse_seeds(v)?,
            "jobs" => self.jobs = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "mem_budget" => self.train.memory_budget = parse_bytes(v)?,
            "ablation" => self.hp = ablation_config(v.parse::<Ablation>()?, &self.hp),
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }

    /// Profile first, then the remaining pairs in order.
    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs.iter().filter(|(k, _)| k == "profile") {
            self.set(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "profile" && k != "ablation") {
            self.set(k, v).with_context(|| format!("setting {k}"))?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k == "ablation") {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        self.train.validate()?;
        if self.k == 0 {
            bail!("k must be >= 1");
        }
        if self.jobs == 0 {
            bail!("jobs must be >= 1");
        }
        Ok(())
    }

    pub fn prepare_options(&self) -> PrepareOptions {
        PrepareOptions {
            k: self.k,
            row_normalize: self.row_normalize,
        }
    }

    /// The resolved configuration; reading it back yields `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        for key in KEYS {
            let value = match key {
                "dataset" => match &self.dataset {
                    Some(p) => p.display().to_string(),
                    None => continue,
                },
                "profile" => continue,
                "lambda" => self.hp.lambda.to_string(),
                "alpha" => self.hp.alpha.to_string(),
                "beta" => self.hp.beta.to_string(),
                "epsilon" => self.hp.epsilon.to_string(),
                "layers" => self.hp.layers.to_string(),
                "mode" => self.hp.mode.to_string(),
                "k" => self.k.to_string(),
                "row_normalize" => self.row_normalize.to_string(),
                "lr" => self.train.lr.to_string(),
                "dropout" => self.train.dropout.to_string(),
                "max_epochs" => self.train.max_epochs.to_string(),
                "patience" => self.train.patience.to_string(),
                "weight_decay" => self.train.weight_decay.to_string(),
                "seeds" => seeds.join(","),
                "jobs" => self.jobs.to_string(),
                "out" => self.out.display().to_string(),
                "mem_budget" => self.train.memory_budget.to_string(),
                _ => unreachable!(),
            };
            writeln!(s, "{key} = {value}").unwrap();
        }
        s
    }

    /// Name used in report tables.
    pub fn title(&self) -> String {
        if let Some(p) = self.profile.as_deref().and_then(|n| profile(n).ok()) {
            return p.title.to_string();
        }
        self.dataset
            .as_ref()
            .and_then(|d| d.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut c = RunConfig::default();
        c.apply_profile("cora").unwrap();
        c.dataset = Some(PathBuf::from("data/cora"));
        c.seeds = vec![3, 1, 4];
        c.train.memory_budget = 123;
        let mut back = RunConfig::default();
        back.apply_pairs(&parse_pairs(&c.to_text()).unwrap()).unwrap();
        back.profile = c.profile.clone();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_pairs("lambda = 1\nlamda = 2\n").is_err());
        assert!(parse_pairs("no equals sign\n").is_err());
        assert_eq!(parse_pairs("# c\n\nk = 7 # trailing\n").unwrap(), [("k".into(), "7".into())]);
    }

    #[test]
    fn profile_then_overrides_then_ablation() {
        let pairs = parse_pairs("ablation = a3\nbeta = 0.5\nprofile = chameleon\n").unwrap();
        let mut c = RunConfig::default();
        c.apply_pairs(&pairs).unwrap();
        assert_eq!(c.hp.alpha, 2.5);
        assert_eq!(c.hp.beta, 0.0);
        assert_eq!(c.train.lr, 0.05);
    }

    #[test]
    fn zero_beta_and_a3_resolve_identically() {
        let mut a = RunConfig::default();
        a.apply_profile("cora").unwrap();
        let mut b = a.clone();
        a.set("beta", "0").unwrap();
        b.set("ablation", "A3").unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn seeds_and_bytes() {
        assert_eq!(parse_seeds("3").unwrap(), [0, 1, 2]);
        assert_eq!(parse_seeds("5,2").unwrap(), [5, 2]);
        assert!(parse_seeds("0").is_err());
        assert_eq!(parse_bytes("2G").unwrap(), 2 << 30);
        assert_eq!(parse_bytes("512m").unwrap(), 512 << 20);
        assert_eq!(parse_bytes("100").unwrap(), 100);
        assert!(parse_bytes("x").is_err());
    }
}
