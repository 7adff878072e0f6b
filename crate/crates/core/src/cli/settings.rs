use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Command, PayoffCommand};
use crate::error::{Error, Result};
use crate::gfunction::ThetaSet;
use crate::gheat::{DEFAULT_CFL, DEFAULT_NX};

#[derive(Debug, Clone, Serialize, Args)]
#[command(allow_negative_numbers = true)]
pub struct DiscreteArgs {
    /// Built-in model family: exm2, exm3 or exm1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    /// TOML model document (points, measures, variables).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Variable name in the model document (default: identity).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    /// Truncation size of the built-in family.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Moment exponent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// upper, tail, capacity, markov, choquet, borel-cantelli, ui, monotone,
    /// membership or all.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSettings {
    pub example: Option<String>,
    pub model: Option<PathBuf>,
    pub variable: Option<String>,
    pub n: usize,
    pub p: f64,
    pub check: String,
}

impl Default for DiscreteSettings {
    fn default() -> Self {
        Self {
            example: None,
            model: None,
            variable: None,
            n: 64,
            p: 1.0,
            check: "all".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
#[command(allow_negative_numbers = true)]
pub struct GheatArgs {
    /// Lower volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    /// Upper volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    /// One-argument payoff expression.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    /// Terminal time
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Probe point
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Spatial grid nodes
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Courant number of the explicit scheme
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    /// Half-width of the spatial domain around the probe.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_width: Option<f64>,
    /// Write the final grid values as CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GheatSettings {
    pub theta_min: f64,
    pub theta_max: f64,
    pub payoff: Option<String>,
    pub t: f64,
    pub x: f64,
    pub nx: usize,
    pub cfl: f64,
    pub domain_width: Option<f64>,
    pub dump: bool,
}

impl Default for GheatSettings {
    fn default() -> Self {
        Self {
            theta_min: 1.0,
            theta_max: 2.0,
            payoff: None,
            t: 1.0,
            x: 0.0,
            nx: DEFAULT_NX,
            cfl: DEFAULT_CFL,
            domain_width: None,
            dump: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
#[command(allow_negative_numbers = true)]
pub struct CylinderArgs {
    /// Increasing payoff times, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Payoff in the increments x1..xn.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    /// Lower volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    /// Upper volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    /// Nodes per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Courant number of the explicit scheme
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    /// Also run the split-time consistency check at this time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderSettings {
    pub times: Vec<f64>,
    pub payoff: Option<String>,
    pub theta_min: f64,
    pub theta_max: f64,
    pub nx: Option<usize>,
    pub nx_per_axis: Option<Vec<usize>>,
    pub cfl: f64,
    pub split: Option<f64>,
}

impl Default for CylinderSettings {
    fn default() -> Self {
        Self {
            times: vec![1.0],
            payoff: None,
            theta_min: 1.0,
            theta_max: 2.0,
            nx: None,
            nx_per_axis: None,
            cfl: DEFAULT_CFL,
            split: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
#[command(allow_negative_numbers = true)]
pub struct McArgs {
    /// bangbang or const:<sigma>; repeat for a policy set.
    #[arg(long = "policy")]
    #[serde(skip_serializing_if = "Option::is_none", rename = "policies")]
    pub policies: Option<Vec<String>>,
    /// Payoff expression in x1..xn
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    /// Payoff times, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Number of simulated paths
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Euler step; defaults to a twentieth of the shortest increment.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_sim: Option<f64>,
    /// Pair each path with its mirror image
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
    /// Lower volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    /// Upper volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    /// Spatial nodes of the reference PDE solve.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Allowance for discretisation bias in the PDE comparison.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme_tolerance: Option<f64>,
    /// Write this many sample paths as CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub policies: Vec<String>,
    pub payoff: Option<String>,
    pub times: Vec<f64>,
    pub paths: usize,
    pub dt_sim: Option<f64>,
    pub antithetic: bool,
    pub theta_min: f64,
    pub theta_max: f64,
    pub nx: usize,
    pub scheme_tolerance: f64,
    pub dump_paths: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            policies: vec!["bangbang".into()],
            payoff: None,
            times: vec![1.0],
            paths: 100_000,
            dt_sim: None,
            antithetic: false,
            theta_min: 1.0,
            theta_max: 2.0,
            nx: DEFAULT_NX,
            scheme_tolerance: 5e-2,
            dump_paths: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
#[command(allow_negative_numbers = true)]
pub struct HolderArgs {
    /// Number of simulated paths.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Dyadic level L: 2^L steps on [0, 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    /// Hölder exponents to test, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    /// Lower volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    /// Upper volatility bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    /// Moment exponent p.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Excess exponent: increments bounded by c|t−s|^(1+ε).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Adds a bang-bang path group driven by this payoff.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSettings {
    pub paths: usize,
    pub level: u32,
    pub alpha: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
    pub p: f64,
    pub epsilon: f64,
    pub payoff: Option<String>,
}

impl Default for HolderSettings {
    fn default() -> Self {
        Self {
            paths: 512,
            level: 12,
            alpha: vec![0.2, 0.45, 0.6],
            theta_min: 1.0,
            theta_max: 2.0,
            p: 4.0,
            epsilon: 1.0,
            payoff: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
#[command(allow_negative_numbers = true)]
pub struct CertifyArgs {
    /// Payoff expression.
    #[arg(allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    /// Interval `lo,hi` applied to every variable.
    #[arg(long = "box", allow_hyphen_values = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none", rename = "domain")]
    pub domain: Option<Vec<f64>>,
    /// Number of variables (default: highest index used).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arity: Option<usize>,
    /// Random points for the Lipschitz estimate
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySettings {
    pub expr: Option<String>,
    pub domain: Vec<f64>,
    pub arity: Option<usize>,
    pub samples: usize,
}

impl Default for CertifySettings {
    fn default() -> Self {
        Self {
            expr: None,
            domain: vec![-10.0, 10.0],
            arity: None,
            samples: 10_000,
        }
    }
}

/// Resolved settings of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Settings {
    Discrete(DiscreteSettings),
    Gheat(GheatSettings),
    Cylinder(CylinderSettings),
    Mc(McSettings),
    Holder(HolderSettings),
    Certify(CertifySettings),
}

impl Settings {
    pub fn name(&self) -> &'static str {
        match self {
            Settings::Discrete(_) => "discrete",
            Settings::Gheat(_) => "gheat",
            Settings::Cylinder(_) => "cylinder",
            Settings::Mc(_) => "mc",
            Settings::Holder(_) => "holder",
            Settings::Certify(_) => "certify",
        }
    }
}

/// The `--config` document: global keys plus one table per command.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    theta: Option<Value>,
    sections: Map<String, Value>,
}

const SECTIONS: [&str; 6] = ["discrete", "gheat", "cylinder", "mc", "holder", "certify"];

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let mut doc = match serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))? {
            Value::Object(m) => m,
            _ => unreachable!("a TOML document is a table"),
        };
        let mut out = ConfigFile::default();
        let bad = |k: &str| Error::Config(format!("config key `{k}` has the wrong type"));
        if let Some(v) = doc.remove("seed") {
            out.seed = Some(v.as_u64().ok_or_else(|| bad("seed"))?);
        }
        if let Some(v) = doc.remove("threads") {
            out.threads = Some(v.as_u64().ok_or_else(|| bad("threads"))? as usize);
        }
        if let Some(v) = doc.remove("out_dir") {
            out.out_dir = Some(PathBuf::from(v.as_str().ok_or_else(|| bad("out_dir"))?));
        }
        out.theta = doc.remove("theta");
        for (k, v) in doc {
            if !SECTIONS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            if !v.is_object() {
                return Err(bad(&k));
            }
            out.sections.insert(k, v);
        }
        Ok(out)
    }

    fn section(&self, name: &str) -> Result<Map<String, Value>> {
        let mut m = match self.sections.get(name) {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        };
        let theta = m.remove("theta").or_else(|| self.theta.clone());
        if let Some(theta) = theta {
            if !matches!(name, "discrete" | "certify") {
                let set: ThetaSet =
                    serde_json::from_value(theta).map_err(|e| Error::Config(format!("theta: {e}")))?;
                set.validate()?;
                let (lo, hi) = set.bounds().map_err(|e| Error::Config(e.to_string()))?;
                m.entry("theta_min").or_insert(lo.into());
                m.entry("theta_max").or_insert(hi.into());
            }
        }
        Ok(m)
    }
}

fn overlay(base: &mut Value, top: Map<String, Value>) {
    if let Value::Object(b) = base {
        for (k, v) in top {
            b.insert(k, v);
        }
    }
}

fn layered<D, A>(name: &str, file: Option<&ConfigFile>, flags: &A) -> Result<D>
where
    D: Default + Serialize + for<'de> Deserialize<'de>,
    A: Serialize,
{
    let mut v = serde_json::to_value(D::default()).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(f) = file {
        overlay(&mut v, f.section(name)?);
    }
    if let Value::Object(m) = serde_json::to_value(flags).map_err(|e| Error::Config(e.to_string()))? {
        overlay(&mut v, m);
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("[{name}] {e}")))
}

/// Flags over config file over defaults.
pub fn resolve(cmd: &Command, file: Option<&ConfigFile>) -> Result<Settings> {
    Ok(match cmd {
        Command::Discrete(a) => Settings::Discrete(layered("discrete", file, a)?),
        Command::Gheat(a) => Settings::Gheat(layered("gheat", file, a)?),
        Command::Cylinder(a) => Settings::Cylinder(layered("cylinder", file, a)?),
        Command::Mc(a) => Settings::Mc(layered("mc", file, a)?),
        Command::Holder(a) => Settings::Holder(layered("holder", file, a)?),
        Command::Payoff {
            action: PayoffCommand::Certify(a),
        } => Settings::Certify(layered("certify", file, a)?),
        Command::Replay(_) => return Err(Error::Config("replay has no settings".into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let file = ConfigFile::parse(
            "seed = 7\ntheta = { kind = \"interval\", min = 0.5, max = 1.5 }\n[gheat]\nt = 2.0\nnx = 101\n",
        )
        .unwrap();
        assert_eq!(file.seed, Some(7));
        let args = GheatArgs {
            theta_min: None,
            theta_max: Some(3.0),
            payoff: Some("x".into()),
            t: None,
            x: None,
            nx: Some(201),
            cfl: None,
            domain_width: None,
            dump: None,
        };
        let s = resolve(&Command::Gheat(args), Some(&file)).unwrap();
        let Settings::Gheat(g) = s else { panic!() };
        assert_eq!((g.theta_min, g.theta_max, g.t, g.nx, g.x), (0.5, 3.0, 2.0, 201, 0.0));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(ConfigFile::parse("[nope]\na = 1\n").is_err());
        let file = ConfigFile::parse("[gheat]\nbogus = 1\n").unwrap();
        let args = GheatArgs {
            theta_min: None,
            theta_max: None,
            payoff: None,
            t: None,
            x: None,
            nx: None,
            cfl: None,
            domain_width: None,
            dump: None,
        };
        assert!(matches!(resolve(&Command::Gheat(args), Some(&file)), Err(Error::Config(_))));
    }

    #[test]
    fn settings_round_trip() {
        let s = Settings::Holder(HolderSettings::default());
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Settings>(&text).unwrap(), s);
    }
}
