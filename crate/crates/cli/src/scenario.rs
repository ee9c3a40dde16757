//! Scenario parameters from flags and flat `key=value` config files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use stakepool::{CostDistribution, Error, GameParams, Result};

const KEYS: [&str; 12] = [
    "H", "M", "R", "lambda", "dist", "cd", "theta", "floor", "n", "m", "reps", "seed",
];

/// Flags shared by every subcommand. Flags override values from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Measure of honest agents [default: 1]
    #[arg(long = "H", global = true)]
    pub honest: Option<f64>,
    /// Measure of malicious agents [default: 0.5]
    #[arg(long = "M", global = true)]
    pub malicious: Option<f64>,
    /// Block reward [default: 1]
    #[arg(long = "R", global = true)]
    pub reward: Option<f64>,
    /// Share of pool rewards kept by the owner
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Cost distribution: uniform, uniform:T=x, power:alpha=a[,T=x], table:<csv>
    #[arg(long, global = true)]
    pub dist: Option<String>,
    /// Delegation cost
    #[arg(long, global = true)]
    pub cd: Option<f64>,
    /// Fault tolerance in [0, 1/2]
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Lower bound on lambda
    #[arg(long, global = true)]
    pub floor: Option<f64>,
    /// Honest agents in the finite game
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Malicious agents in the finite game
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Monte Carlo replications [default: 100]
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat key=value file with any of the keys above
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub honest: f64,
    pub malicious: f64,
    pub reward: f64,
    pub lambda: Option<f64>,
    pub dist: CostDistribution,
    pub cd: Option<f64>,
    pub theta: Option<f64>,
    pub floor: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub reps: usize,
    pub seed: u64,
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Spec(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Spec(format!(
                "{}:{}: unknown key '{k}' (allowed: {})",
                path.display(),
                i + 1,
                KEYS.join(", ")
            )));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Spec(format!("invalid value for {key}: '{v}'")))
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<Scenario> {
        let file = match &self.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        fn pick<T: std::str::FromStr + Clone>(
            flag: &Option<T>,
            file: &BTreeMap<String, String>,
            key: &str,
        ) -> Result<Option<T>> {
            match (flag, file.get(key)) {
                (Some(v), _) => Ok(Some(v.clone())),
                (None, Some(s)) => parse(key, s).map(Some),
                (None, None) => Ok(None),
            }
        }
        let dist_spec = pick(&self.dist, &file, "dist")?.unwrap_or_else(|| "uniform".into());
        Ok(Scenario {
            honest: pick(&self.honest, &file, "H")?.unwrap_or(1.0),
            malicious: pick(&self.malicious, &file, "M")?.unwrap_or(0.5),
            reward: pick(&self.reward, &file, "R")?.unwrap_or(1.0),
            lambda: pick(&self.lambda, &file, "lambda")?,
            dist: dist_spec.parse()?,
            cd: pick(&self.cd, &file, "cd")?,
            theta: pick(&self.theta, &file, "theta")?,
            floor: pick(&self.floor, &file, "floor")?,
            n: pick(&self.n, &file, "n")?,
            m: pick(&self.m, &file, "m")?,
            reps: pick(&self.reps, &file, "reps")?.unwrap_or(100),
            seed: pick(&self.seed, &file, "seed")?.unwrap_or(0),
        })
    }
}

impl Scenario {
    /// Game at the given λ, or at λ = 1 when none is set.
    pub fn game(&self) -> Result<GameParams> {
        GameParams::new(
            self.honest,
            self.malicious,
            self.reward,
            self.lambda.unwrap_or(1.0),
        )
    }

    pub fn require_lambda(&self) -> Result<f64> {
        self.lambda
            .ok_or_else(|| Error::InvalidParams("this command needs --lambda".into()))
    }

    pub fn require<T: Copy>(value: Option<T>, flag: &str) -> Result<T> {
        value.ok_or_else(|| Error::InvalidParams(format!("this command needs --{flag}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_values_and_overrides() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "# scenario\nH = 1\nM=0.4\nlambda=0.8\ndist=power:alpha=0.5"
        )
        .unwrap();
        let args = ScenarioArgs {
            config: Some(f.path().to_path_buf()),
            lambda: Some(0.9),
            ..Default::default()
        };
        let s = args.resolve().unwrap();
        assert_eq!(s.malicious, 0.4);
        assert_eq!(s.lambda, Some(0.9));
        assert_eq!(s.dist.to_string(), "power:alpha=0.5");
    }

    #[test]
    fn unknown_key_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "H=1\nmu=0.3").unwrap();
        let err = read_config(f.path()).unwrap_err();
        assert!(err.is_validation());
    }
}
