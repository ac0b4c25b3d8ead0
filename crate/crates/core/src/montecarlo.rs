//! Expected-loss estimation over seeded GBM paths.
//!
//! Paths are simulated in parallel but always aggregated serially in
//! path-index order, so every estimate is bit-identical for any number of
//! worker threads. The per-path price and supply components are summarized
//! as first and second moments; since the loss is affine in λ, an estimate
//! at any other λ is recovered exactly from the same summary.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gbm::{generate_cap_path, PathSeed};
use crate::model::{LossWeights, MarketParams, PolicyParams};
use crate::simulate::{path_loss, run_path, SimError};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum EstimateError {
    #[error("all {n_paths} paths hit degenerate supply")]
    AllPathsFailed { n_paths: usize },
    #[error("at least one path is required")]
    NoPaths,
    #[error("at least one configuration is required")]
    NoConfigs,
}

/// Sample moments of the per-path (price, supply) loss components over the
/// successful paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentStats {
    pub n_paths: usize,
    pub n_failed: usize,
    pub mean_price: f64,
    pub mean_supply: f64,
    pub var_price: f64,
    pub var_supply: f64,
    pub cov_price_supply: f64,
}

impl ComponentStats {
    /// Aggregates per-path components in slice order. `None` marks a failed path.
    pub fn from_components(components: &[Option<(f64, f64)>]) -> Result<Self, EstimateError> {
        let n_paths = components.len();
        if n_paths == 0 {
            return Err(EstimateError::NoPaths);
        }
        let ok: Vec<(f64, f64)> = components.iter().flatten().copied().collect();
        let k = ok.len();
        if k == 0 {
            return Err(EstimateError::AllPathsFailed { n_paths });
        }

        let kf = k as f64;
        let mean_price = ok.iter().map(|c| c.0).sum::<f64>() / kf;
        let mean_supply = ok.iter().map(|c| c.1).sum::<f64>() / kf;

        let (mut spp, mut sss, mut sps) = (0.0, 0.0, 0.0);
        for &(p, s) in &ok {
            let dp = p - mean_price;
            let ds = s - mean_supply;
            spp += dp * dp;
            sss += ds * ds;
            sps += dp * ds;
        }
        let denom = if k > 1 { kf - 1.0 } else { 1.0 };

        Ok(Self {
            n_paths,
            n_failed: n_paths - k,
            mean_price,
            mean_supply,
            var_price: spp / denom,
            var_supply: sss / denom,
            cov_price_supply: sps / denom,
        })
    }

    pub fn n_successful(&self) -> usize {
        self.n_paths - self.n_failed
    }

    /// Estimate of the expected loss at weight `w`.
    pub fn estimate(&self, w: LossWeights) -> EstimateResult {
        let lambda = w.lambda();
        let var_total =
            (self.var_price + 2.0 * lambda * self.cov_price_supply + lambda * lambda * self.var_supply).max(0.0);
        EstimateResult {
            lambda,
            mean_total: self.mean_price + lambda * self.mean_supply,
            mean_price_component: self.mean_price,
            mean_supply_component: self.mean_supply,
            std_error: (var_total / self.n_successful() as f64).sqrt(),
            n_paths: self.n_paths,
            n_failed: self.n_failed,
            components: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateResult {
    pub lambda: f64,
    pub mean_total: f64,
    pub mean_price_component: f64,
    pub mean_supply_component: f64,
    /// Standard error of `mean_total`.
    pub std_error: f64,
    pub n_paths: usize,
    pub n_failed: usize,
    #[serde(skip)]
    pub components: ComponentStats,
}

impl EstimateResult {
    /// The same estimate at another weight, without re-simulating.
    pub fn reweight(&self, w: LossWeights) -> EstimateResult {
        self.components.estimate(w)
    }
}

/// Cap paths for path indices `0..n_paths`, in index order.
pub fn simulate_cap_paths(m: &MarketParams, n_paths: usize, master_seed: u64) -> Vec<Vec<f64>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| generate_cap_path(m, PathSeed::new(master_seed, i)))
        .collect()
}

fn path_components(cap: &[f64], p: &PolicyParams) -> Result<Option<(f64, f64)>, SimError> {
    match run_path(cap, p) {
        Ok(path) => {
            let l = path_loss(&path, LossWeights::new(0.0).expect("zero weight is valid"));
            Ok(Some((l.price_component, l.supply_component)))
        }
        Err(e) if e.is_degenerate_supply() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Component moments for policy `p` over a shared set of cap paths.
pub fn component_stats(caps: &[Vec<f64>], p: &PolicyParams) -> Result<ComponentStats, EstimateError> {
    let components: Vec<Option<(f64, f64)>> = caps
        .par_iter()
        .map(|cap| {
            // GBM paths are positive and at least two points long, so only
            // degenerate supply can fail here.
            path_components(cap, p).unwrap_or(None)
        })
        .collect();
    ComponentStats::from_components(&components)
}

/// Mean loss over `n_paths` GBM paths seeded `(master_seed, 0..n_paths)`.
pub fn estimate_loss(
    m: &MarketParams,
    p: &PolicyParams,
    w: LossWeights,
    n_paths: usize,
    master_seed: u64,
) -> Result<EstimateResult, EstimateError> {
    if n_paths == 0 {
        return Err(EstimateError::NoPaths);
    }
    let components: Vec<Option<(f64, f64)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let cap = generate_cap_path(m, PathSeed::new(master_seed, i));
            path_components(&cap, p).unwrap_or(None)
        })
        .collect();
    Ok(ComponentStats::from_components(&components)?.estimate(w))
}

/// Evaluates every configuration on the same cap paths (common random
/// numbers). Element `i` equals `estimate_loss` for `configs[i]`.
pub fn estimate_loss_crn(
    m: &MarketParams,
    configs: &[(PolicyParams, LossWeights)],
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<Result<EstimateResult, EstimateError>>, EstimateError> {
    if configs.is_empty() {
        return Err(EstimateError::NoConfigs);
    }
    if n_paths == 0 {
        return Err(EstimateError::NoPaths);
    }
    let caps = simulate_cap_paths(m, n_paths, master_seed);
    Ok(configs
        .par_iter()
        .map(|(p, w)| component_stats(&caps, p).map(|s| s.estimate(*w)))
        .collect())
}
