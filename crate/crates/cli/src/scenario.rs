//! Flag grammar, config-file merging, and the resolved scenario types.
//!
//! Every subcommand takes long `--key value` flags only. A flat `key=value`
//! config file can pre-fill any flag; explicit flags win. Required values
//! missing from both places produce a usage error naming the flag.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "cartwright",
    version,
    about = "Two-sided growth estimates for harmonic functions in the unit ball: \
             kernel evaluation, weight regularity checks, auxiliary surfaces, \
             bound verification pipelines, and the sharpness example."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check every weight-regularity condition family on a log grid
    WeightCheck(WeightCheckArgs),
    /// Evaluate the cap-averaged kernel in one or more modes
    MuEval(MuEvalArgs),
    /// Build the auxiliary surface for a pipeline weight and sweep its bounds
    SurfaceBuild(SurfaceBuildArgs),
    /// Run a bound-verification pipeline over a depth grid
    Verify(VerifyArgs),
    /// Build the sharpness example and run its measurement suite
    Example(ExampleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format: json (full document), csv or plotdata (primary table)
    #[arg(long, default_value = "json")]
    pub format: String,
    /// Flat key=value config file supplying defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WeightCheckArgs {
    /// Dimension n (the ball lives in R^{n+1})
    #[arg(long)]
    pub n: Option<u32>,
    /// Weight spec, e.g. "family=power p=4"
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MuEvalArgs {
    #[arg(long)]
    pub n: Option<u32>,
    /// Polar angle of the evaluation point
    #[arg(long)]
    pub a: Option<f64>,
    /// Boundary distance of the evaluation point
    #[arg(long)]
    pub y: Option<f64>,
    /// Polar angle of the averaging circle
    #[arg(long)]
    pub t: Option<f64>,
    /// quadrature | lemma1 | smallangle | both | all
    #[arg(long)]
    pub mode: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SurfaceBuildArgs {
    #[arg(long)]
    pub n: Option<u32>,
    /// Weight spec feeding the pipeline majorant
    #[arg(long)]
    pub weight: Option<String>,
    /// Depth at which the majorant is formed
    #[arg(long)]
    pub theta: Option<f64>,
    /// Override the initial normalization constant lambda
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of surface sample points for the bound sweep
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed for sample placement
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the surface table (y, gamma, k_of_y, mu_at_beta, va_value) here
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// T1 | T2 | T2prime
    #[arg(long)]
    pub theorem: Option<String>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub theta_per_decade: Option<usize>,
    /// poisson | extremal
    #[arg(long)]
    pub test_function: Option<String>,
    /// Polar angle of the kernel test function's pole
    #[arg(long)]
    pub pole_angle: Option<f64>,
    /// Pulled-off depth of the kernel test function
    #[arg(long)]
    pub pole_depth: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Write the per-theta table here
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ExampleArgs {
    #[arg(long)]
    pub n: Option<u32>,
    /// Write the cascade table (t, f_0..f_{n+1}) here
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the axis table (rho, v) here
    #[arg(long)]
    pub axis_csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Overrides loaded from a flat `key=value` file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<ConfigFile, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                UsageError(format!(
                    "config line {} is not key=value: '{line}'",
                    lineno + 1
                ))
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, UsageError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| UsageError(format!("config value '{raw}' for {key} is malformed"))),
        }
    }
}

/// Resolve `flag.or(config).or(default)`, erroring with the flag name when a
/// required value is missing everywhere.
pub fn resolve<T: Clone + std::str::FromStr>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
    default: Option<T>,
) -> Result<T, UsageError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = config.parse::<T>(key)? {
        return Ok(v);
    }
    default.ok_or_else(|| UsageError(format!("missing required flag --{key}")))
}

/// The fully resolved scenarios, echoed verbatim into reports.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Scenario {
    WeightCheck {
        n: u32,
        weight: String,
        grid_min: f64,
        grid_max: f64,
        grid_points: usize,
    },
    MuEval {
        n: u32,
        a: f64,
        y: f64,
        t: f64,
        mode: String,
    },
    SurfaceBuild {
        n: u32,
        weight: String,
        theta: f64,
        lambda: f64,
        samples: usize,
        seed: u64,
    },
    Verify {
        theorem: String,
        n: u32,
        weight: String,
        theta_min: f64,
        theta_max: f64,
        theta_per_decade: usize,
        test_function: String,
        pole_angle: f64,
        pole_depth: f64,
        lambda: f64,
    },
    Example {
        n: u32,
    },
}

pub fn load_config(output: &OutputArgs) -> Result<ConfigFile, UsageError> {
    match &output.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[test]
    fn parses_the_documented_invocations() {
        let cli = Cli::parse_from([
            "cartwright",
            "verify",
            "--theorem",
            "T1",
            "--n",
            "2",
            "--weight",
            "family=power p=5",
            "--theta-min",
            "1e-3",
            "--theta-max",
            "0.3",
        ]);
        match cli.command {
            Command::Verify(v) => {
                assert_eq!(v.theorem.as_deref(), Some("T1"));
                assert_eq!(v.n, Some(2));
                assert_eq!(v.weight.as_deref(), Some("family=power p=5"));
                assert_eq!(v.theta_min, Some(1e-3));
                assert_eq!(v.theta_max, Some(0.3));
            }
            other => panic!("wrong command: {other:?}"),
        }

        let cli = Cli::parse_from([
            "cartwright", "mu-eval", "--n", "1", "--a", "0.8", "--y", "0.01", "--t", "0.4",
            "--mode", "both",
        ]);
        match cli.command {
            Command::MuEval(m) => {
                assert_eq!(m.mode.as_deref(), Some("both"));
                assert_eq!(m.y, Some(0.01));
            }
            other => panic!("wrong command: {other:?}"),
        }
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["cartwright", "mu-eval", "--frobnicate", "1"]).is_err());
    }

    #[test]
    fn missing_required_value_names_the_flag() {
        let cfg = ConfigFile::default();
        let err = resolve::<u32>(None, &cfg, "n", None).unwrap_err();
        assert!(err.0.contains("--n"), "{}", err.0);
    }

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join("cartwright-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.txt");
        std::fs::write(&path, "n=3\ntheta=0.25\n# comment\n").unwrap();
        let cfg = ConfigFile::load(&path).unwrap();
        assert_eq!(resolve::<u32>(None, &cfg, "n", None).unwrap(), 3);
        assert_eq!(resolve::<u32>(Some(5), &cfg, "n", None).unwrap(), 5);
        assert_eq!(
            resolve::<f64>(None, &cfg, "theta", Some(0.1)).unwrap(),
            0.25
        );
        assert_eq!(resolve::<f64>(None, &cfg, "absent", Some(0.1)).unwrap(), 0.1);
    }
}
