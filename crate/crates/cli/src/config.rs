//! Flat `key = value` configuration layered over a training preset.

use std::path::{Path, PathBuf};

use qcomp_ppo::TrainConfig;

use crate::error::CliError;

/// Keys owned by the driver; the rest are routed to [`TrainConfig`].
pub const CLI_KEYS: [&str; 17] = [
    "decomposer.epsilon",
    "sk.depth",
    "sk.level",
    "compile.retries",
    "compile.seed",
    "bench.count",
    "bench.min_len",
    "bench.max_len",
    "bench.seed",
    "bench.sk",
    "bench.checkpoints",
    "bench.lmax",
    "bench.sweep_count",
    "io.out_dir",
    "io.net_cache",
    "io.checkpoint",
    "io.log",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub train: TrainConfig,
    pub decomposer_epsilon: f64,
    pub sk_depth: usize,
    pub sk_level: usize,
    pub compile_retries: usize,
    pub compile_seed: u64,
    pub bench_count: usize,
    pub bench_min_len: usize,
    pub bench_max_len: usize,
    pub bench_seed: u64,
    pub bench_sk: bool,
    pub bench_checkpoints: Vec<PathBuf>,
    pub bench_lmax: Vec<usize>,
    pub bench_sweep_count: usize,
    pub out_dir: PathBuf,
    pub net_cache: PathBuf,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

impl Config {
    pub fn from_preset(name: &str) -> Result<Self, CliError> {
        let train = TrainConfig::preset(name).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self {
            train,
            decomposer_epsilon: 0.1,
            sk_depth: 6,
            sk_level: 2,
            compile_retries: 16,
            compile_seed: 1,
            bench_count: 1500,
            bench_min_len: 10,
            bench_max_len: 80,
            bench_seed: 1,
            bench_sk: true,
            bench_checkpoints: Vec::new(),
            bench_lmax: Vec::new(),
            bench_sweep_count: 1000,
            out_dir: "out".into(),
            net_cache: "out/nets".into(),
            checkpoint: "out/checkpoint.json".into(),
            log: "out/train.csv".into(),
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let bad = |reason: &str| CliError::Usage(format!("invalid value `{v}` for `{key}`: {reason}"));
        macro_rules! num {
            () => {
                v.parse().map_err(|_| bad("not a number"))?
            };
        }
        match key {
            "decomposer.epsilon" => self.decomposer_epsilon = num!(),
            "sk.depth" => self.sk_depth = num!(),
            "sk.level" => self.sk_level = num!(),
            "compile.retries" => self.compile_retries = num!(),
            "compile.seed" => self.compile_seed = num!(),
            "bench.count" => self.bench_count = num!(),
            "bench.min_len" => self.bench_min_len = num!(),
            "bench.max_len" => self.bench_max_len = num!(),
            "bench.seed" => self.bench_seed = num!(),
            "bench.sk" => self.bench_sk = v.parse().map_err(|_| bad("expected true or false"))?,
            "bench.checkpoints" => self.bench_checkpoints = list(v).map(PathBuf::from).collect(),
            "bench.lmax" => {
                self.bench_lmax = list(v)
                    .map(|s| s.parse().map_err(|_| bad("expected comma-separated integers")))
                    .collect::<Result<_, _>>()?
            }
            "bench.sweep_count" => self.bench_sweep_count = num!(),
            "io.out_dir" => self.out_dir = v.into(),
            "io.net_cache" => self.net_cache = v.into(),
            "io.checkpoint" => self.checkpoint = v.into(),
            "io.log" => self.log = v.into(),
            _ if TrainConfig::is_key(key) => self.train.set(key, v).map_err(|e| CliError::Usage(e.to_string()))?,
            _ => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.decomposer_epsilon.is_finite() && self.decomposer_epsilon > 0.0) {
            return Err(CliError::Usage(format!("invalid value `{}` for `decomposer.epsilon`: must be positive", self.decomposer_epsilon)));
        }
        if self.bench_min_len == 0 || self.bench_min_len > self.bench_max_len {
            return Err(CliError::Usage(format!(
                "invalid value `{}` for `bench.min_len`: need 0 < bench.min_len <= bench.max_len ({})",
                self.bench_min_len, self.bench_max_len
            )));
        }
        Ok(())
    }

    /// Every key and value, training keys first.
    pub fn entries(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        let path = |p: &Path| p.display().to_string();
        let mut out = self.train.entries();
        let own = [
            self.decomposer_epsilon.to_string(),
            self.sk_depth.to_string(),
            self.sk_level.to_string(),
            self.compile_retries.to_string(),
            self.compile_seed.to_string(),
            self.bench_count.to_string(),
            self.bench_min_len.to_string(),
            self.bench_max_len.to_string(),
            self.bench_seed.to_string(),
            self.bench_sk.to_string(),
            join(self.bench_checkpoints.iter().map(|p| path(p)).collect()),
            join(self.bench_lmax.iter().map(|l| l.to_string()).collect()),
            self.bench_sweep_count.to_string(),
            path(&self.out_dir),
            path(&self.net_cache),
            path(&self.checkpoint),
            path(&self.log),
        ];
        out.extend(CLI_KEYS.iter().map(|k| k.to_string()).zip(own));
        out
    }

    /// Preset, then the file, then `--set` overrides, then validation.
    pub fn load(preset: &str, file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = Self::from_preset(preset)?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            for (line, k, v) in parse_pairs(&text)? {
                cfg.set(&k, &v).map_err(|e| CliError::Usage(format!("{}:{line}: {e}", path.display())))?;
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{o}`")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// `(line number, key, value)` for each non-blank, non-comment line.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = Config::load("default", None, &["sk.deepth=3".into()]).unwrap_err();
        assert!(err.to_string().contains("sk.deepth"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn training_keys_are_routed() {
        let c = Config::load("smoke", None, &["env.t_cost=2".into(), "sk.level=1".into()]).unwrap();
        assert_eq!(c.train.env.t_cost, 2.0);
        assert_eq!(c.sk_level, 1);
    }

    #[test]
    fn entries_reload_to_the_same_config() {
        let c = Config::load(
            "wide",
            None,
            &["bench.checkpoints=a.json,b.json".into(), "bench.lmax=8,16".into(), "io.out_dir=x".into()],
        )
        .unwrap();
        let mut back = Config::from_preset("default").unwrap();
        for (k, v) in c.entries() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn file_comments_and_blanks_skipped() {
        let pairs = parse_pairs("# header\n\nseed = 4  # trailing\n sk.depth=3\n").unwrap();
        assert_eq!(pairs, vec![(3, "seed".into(), "4".into()), (4, "sk.depth".into(), "3".into())]);
        assert!(parse_pairs("nonsense\n").is_err());
    }

    #[test]
    fn every_key_is_listed_once() {
        let c = Config::from_preset("default").unwrap();
        let keys: Vec<String> = c.entries().into_iter().map(|(k, _)| k).collect();
        let mut dedup = keys.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), keys.len());
        assert_eq!(keys.len(), qcomp_ppo::config::KEYS.len() + CLI_KEYS.len());
    }
}
