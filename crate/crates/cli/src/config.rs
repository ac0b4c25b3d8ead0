//! Flat key-value run configuration. Values come from an optional JSON file
//! and are overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use rebasesim::sweep::{default_a_values, default_b_values, default_lambdas, GridSpec};
use rebasesim::{LossWeights, MarketParams, PolicyParams};

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Per-step log drift of the market cap
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Per-step log volatility of the market cap
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Initial market cap
    #[arg(long)]
    pub y0: Option<f64>,
    /// Number of steps
    #[arg(long)]
    pub n: Option<usize>,
    /// Inactive band half-width (relative to the target price)
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Adjustment divisor: supply moves by dP / B outside the band
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Target price
    #[arg(long, allow_hyphen_values = true)]
    pub p_star: Option<f64>,
    /// Weight on squared supply change
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Master seed for all randomness
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo paths per grid cell
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Path index to dump (simulate)
    #[arg(long)]
    pub path_index: Option<u64>,
    /// Comma-separated A grid
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a_values: Option<Vec<f64>>,
    /// Comma-separated B grid
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b_values: Option<Vec<f64>>,
    /// Comma-separated λ list for the frontier
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambdas: Option<Vec<f64>>,
    /// B held fixed for the monotonicity-in-A check
    #[arg(long)]
    pub fixed_b: Option<f64>,
}

impl Settings {
    pub fn load(file: Option<&Path>) -> Result<Settings, CliError> {
        let Some(file) = file else {
            return Ok(Settings::default());
        };
        let text = fs::read_to_string(file)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", file.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", file.display())))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(self, flags: Settings) -> Settings {
        Settings {
            mu: flags.mu.or(self.mu),
            sigma: flags.sigma.or(self.sigma),
            y0: flags.y0.or(self.y0),
            n: flags.n.or(self.n),
            a: flags.a.or(self.a),
            b: flags.b.or(self.b),
            p_star: flags.p_star.or(self.p_star),
            lambda: flags.lambda.or(self.lambda),
            seed: flags.seed.or(self.seed),
            n_paths: flags.n_paths.or(self.n_paths),
            path_index: flags.path_index.or(self.path_index),
            a_values: flags.a_values.or(self.a_values),
            b_values: flags.b_values.or(self.b_values),
            lambdas: flags.lambdas.or(self.lambdas),
            fixed_b: flags.fixed_b.or(self.fixed_b),
        }
    }

    pub fn market(&self) -> Result<MarketParams, CliError> {
        Ok(MarketParams::new(
            self.mu.unwrap_or(0.0),
            self.sigma.unwrap_or(0.05),
            self.y0.unwrap_or(100e6),
            self.n.unwrap_or(100),
        )?)
    }

    pub fn target_price(&self) -> f64 {
        self.p_star.unwrap_or(1.0)
    }

    pub fn policy(&self) -> Result<PolicyParams, CliError> {
        Ok(PolicyParams::new(
            self.a.unwrap_or(0.05),
            self.b.unwrap_or(5.0),
            self.target_price(),
        )?)
    }

    pub fn weights(&self) -> Result<LossWeights, CliError> {
        Ok(LossWeights::new(self.lambda.unwrap_or(1.0))?)
    }

    pub fn n_paths(&self) -> Result<usize, CliError> {
        match self.n_paths.unwrap_or(200) {
            0 => Err(CliError::Config("invalid parameter n_paths: must be >= 1".into())),
            n => Ok(n),
        }
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(
            self.a_values.clone().unwrap_or_else(default_a_values),
            self.b_values.clone().unwrap_or_else(default_b_values),
            self.target_price(),
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn lambdas_or_default(&self) -> Result<Vec<f64>, CliError> {
        let lambdas = self.lambdas.clone().unwrap_or_else(default_lambdas);
        if lambdas.is_empty() {
            return Err(CliError::Config("lambda list is empty".into()));
        }
        for &l in &lambdas {
            LossWeights::new(l)?;
        }
        Ok(lambdas)
    }

    pub fn fixed_b(&self) -> f64 {
        self.fixed_b.unwrap_or(5.0)
    }
}

/// Command-line flags shared by the simulation subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config file with flat keys matching the flag names (snake_case)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub settings: Settings,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<Settings, CliError> {
        Ok(Settings::load(self.config.as_deref())?.overridden_by(self.settings.clone()))
    }
}
