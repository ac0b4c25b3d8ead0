//! Grid sweeps over (A, B), argmin extraction, the λ frontier and the
//! robustness battery across market regimes.
//!
//! Every cell of a sweep is evaluated on one shared set of cap paths, and
//! cells keep their component moments so re-weighting to another λ is exact.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{InvalidParam, LossWeights, MarketParams, PolicyParams};
use crate::montecarlo::{component_stats, simulate_cap_paths, EstimateError, EstimateResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("grid axis {0} is empty")]
    EmptyAxis(&'static str),
    #[error("grid axis {0} must be strictly increasing")]
    UnsortedAxis(&'static str),
    #[error(transparent)]
    InvalidParam(#[from] InvalidParam),
    #[error("surface has no successful cell")]
    EmptySurface,
    #[error("lambda list is empty")]
    NoLambdas,
    #[error("variant list is empty")]
    NoVariants,
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// Candidate values for A and B, sharing one target price.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    a_values: Vec<f64>,
    b_values: Vec<f64>,
    target_price: f64,
}

impl GridSpec {
    pub fn new(a_values: Vec<f64>, b_values: Vec<f64>, target_price: f64) -> Result<Self, SweepError> {
        check_axis("A", &a_values)?;
        check_axis("B", &b_values)?;
        for &a in &a_values {
            for &b in &b_values {
                PolicyParams::new(a, b, target_price)?;
            }
        }
        Ok(Self {
            a_values,
            b_values,
            target_price,
        })
    }

    /// A in {0.00, 0.01, ..., 0.10}, B in {1.0, 1.5, ..., 10.0}.
    pub fn default_grid(target_price: f64) -> Result<Self, SweepError> {
        Self::new(default_a_values(), default_b_values(), target_price)
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }

    pub fn target_price(&self) -> f64 {
        self.target_price
    }

    pub fn len(&self) -> usize {
        self.a_values.len() * self.b_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Policies in A-major order.
    pub fn policies(&self) -> Vec<PolicyParams> {
        self.a_values
            .iter()
            .flat_map(|&a| {
                self.b_values
                    .iter()
                    .map(move |&b| PolicyParams::new(a, b, self.target_price).expect("validated in GridSpec::new"))
            })
            .collect()
    }
}

fn check_axis(name: &'static str, values: &[f64]) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::EmptyAxis(name));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SweepError::UnsortedAxis(name));
    }
    Ok(())
}

pub fn default_a_values() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 100.0).collect()
}

pub fn default_b_values() -> Vec<f64> {
    (0..=18).map(|i| 1.0 + 0.5 * i as f64).collect()
}

pub fn default_lambdas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub a: f64,
    pub b: f64,
    pub outcome: Result<EstimateResult, EstimateError>,
}

/// Sweep inputs sufficient to regenerate a surface bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepProvenance {
    pub market: MarketParams,
    pub lambda: f64,
    pub target_price: f64,
    pub n_paths: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSurface {
    pub provenance: SweepProvenance,
    /// A-major: cell `i * b_len + j` holds `(a_values[i], b_values[j])`.
    pub cells: Vec<SurfaceCell>,
}

impl LossSurface {
    /// The same surface at another λ, from stored components.
    pub fn reweight(&self, w: LossWeights) -> LossSurface {
        LossSurface {
            provenance: SweepProvenance {
                lambda: w.lambda(),
                ..self.provenance.clone()
            },
            cells: self
                .cells
                .iter()
                .map(|c| SurfaceCell {
                    a: c.a,
                    b: c.b,
                    outcome: c.outcome.as_ref().map(|r| r.reweight(w)).map_err(Clone::clone),
                })
                .collect(),
        }
    }

    pub fn get(&self, a: f64, b: f64) -> Option<&SurfaceCell> {
        self.cells.iter().find(|c| c.a == a && c.b == b)
    }

    /// Columns `A,B,mean_total,mean_price,mean_supply,std_error,n_failed`.
    /// Failed cells report NaN means and `n_failed = n_paths`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "A,B,mean_total,mean_price,mean_supply,std_error,n_failed")?;
        for c in &self.cells {
            match &c.outcome {
                Ok(r) => writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.a, c.b, r.mean_total, r.mean_price_component, r.mean_supply_component, r.std_error, r.n_failed
                )?,
                Err(_) => writeln!(out, "{},{},NaN,NaN,NaN,NaN,{}", c.a, c.b, self.provenance.n_paths)?,
            }
        }
        Ok(())
    }
}

/// Evaluates every grid cell on the same `n_paths` cap paths.
pub fn sweep_grid(
    m: &MarketParams,
    grid: &GridSpec,
    w: LossWeights,
    n_paths: usize,
    master_seed: u64,
) -> Result<LossSurface, SweepError> {
    if n_paths == 0 {
        return Err(EstimateError::NoPaths.into());
    }
    let caps = simulate_cap_paths(m, n_paths, master_seed);
    let cells = grid
        .policies()
        .par_iter()
        .map(|p| SurfaceCell {
            a: p.band_halfwidth(),
            b: p.adjust_divisor(),
            outcome: component_stats(&caps, p).map(|s| s.estimate(w)),
        })
        .collect();
    Ok(LossSurface {
        provenance: SweepProvenance {
            market: *m,
            lambda: w.lambda(),
            target_price: grid.target_price(),
            n_paths,
            master_seed,
        },
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalPolicy {
    pub a: f64,
    pub b: f64,
    pub estimate: EstimateResult,
}

/// Cell with the smallest `mean_total`; ties go to smaller A, then smaller B.
pub fn optimal_policy(surface: &LossSurface) -> Result<OptimalPolicy, SweepError> {
    surface
        .cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|r| (c, r)))
        .min_by(|(c1, r1), (c2, r2)| {
            r1.mean_total
                .total_cmp(&r2.mean_total)
                .then(c1.a.total_cmp(&c2.a))
                .then(c1.b.total_cmp(&c2.b))
        })
        .map(|(c, r)| OptimalPolicy {
            a: c.a,
            b: c.b,
            estimate: *r,
        })
        .ok_or(SweepError::EmptySurface)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub lambda: f64,
    pub a_star: f64,
    pub b_star: f64,
    pub mean_total: f64,
}

/// Argmin over the grid for each λ.
pub fn frontier_from_surface(surface: &LossSurface, lambdas: &[f64]) -> Result<Vec<FrontierPoint>, SweepError> {
    if lambdas.is_empty() {
        return Err(SweepError::NoLambdas);
    }
    lambdas
        .iter()
        .map(|&l| {
            let opt = optimal_policy(&surface.reweight(LossWeights::new(l)?))?;
            Ok(FrontierPoint {
                lambda: l,
                a_star: opt.a,
                b_star: opt.b,
                mean_total: opt.estimate.mean_total,
            })
        })
        .collect()
}

/// Simulates the grid once and re-weights the cell components per λ.
pub fn lambda_frontier(
    m: &MarketParams,
    grid: &GridSpec,
    lambdas: &[f64],
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<FrontierPoint>, SweepError> {
    for &l in lambdas {
        LossWeights::new(l)?;
    }
    let first = lambdas.first().ok_or(SweepError::NoLambdas)?;
    let surface = sweep_grid(m, grid, LossWeights::new(*first)?, n_paths, master_seed)?;
    frontier_from_surface(&surface, lambdas)
}

/// Columns `lambda,A_star,B_star,mean_total`.
pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "lambda,A_star,B_star,mean_total")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.lambda, p.a_star, p.b_star, p.mean_total)?;
    }
    Ok(())
}

/// Spearman rank correlation with average ranks for ties.
/// `None` when fewer than two points or either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 1-based average rank of the tie group
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            out[idx] = rank;
        }
        start = end;
    }
    out
}

/// Spearman correlation between A and `mean_total` along the A axis at a
/// fixed B. Failed cells are skipped.
pub fn monotonicity_in_a(surface: &LossSurface, b: f64) -> Option<f64> {
    let (a, loss): (Vec<f64>, Vec<f64>) = surface
        .cells
        .iter()
        .filter(|c| c.b == b)
        .filter_map(|c| c.outcome.as_ref().ok().map(|r| (c.a, r.mean_total)))
        .unzip();
    spearman(&a, &loss)
}

/// Market-regime override applied on top of the base market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketVariant {
    pub name: String,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
}

impl MarketVariant {
    pub fn apply(&self, base: &MarketParams) -> Result<MarketParams, InvalidParam> {
        let mut m = *base;
        if let Some(mu) = self.mu {
            m = m.with_mu(mu)?;
        }
        if let Some(sigma) = self.sigma {
            m = m.with_sigma(sigma)?;
        }
        Ok(m)
    }

    /// Positive drift, negative drift, and high volatility.
    pub fn standard_presets() -> Vec<MarketVariant> {
        vec![
            MarketVariant {
                name: "drift_pos".into(),
                mu: Some(0.01),
                sigma: None,
            },
            MarketVariant {
                name: "drift_neg".into(),
                mu: Some(-0.01),
                sigma: None,
            },
            MarketVariant {
                name: "high_vol".into(),
                mu: Some(0.0),
                sigma: Some(0.5),
            },
        ]
    }
}

/// Base configuration for the comparative-statics checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessBase {
    pub market: MarketParams,
    pub grid: GridSpec,
    /// λ for the monotonicity-in-A check.
    pub lambda: f64,
    /// B held fixed along the A axis for the monotonicity check.
    pub fixed_b: f64,
    pub lambdas: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessOutcome {
    pub variant: MarketVariant,
    pub market: MarketParams,
    /// Spearman(A, mean_total) at `fixed_b`.
    pub monotonicity: Option<f64>,
    pub frontier: Vec<FrontierPoint>,
    #[serde(skip)]
    pub surface: LossSurface,
}

/// Reruns the A-monotonicity check and the λ frontier under each variant.
pub fn robustness_battery(
    base: &RobustnessBase,
    variants: &[MarketVariant],
) -> Result<Vec<RobustnessOutcome>, SweepError> {
    if variants.is_empty() {
        return Err(SweepError::NoVariants);
    }
    let weights = LossWeights::new(base.lambda)?;
    let a_axis = GridSpec::new(
        base.grid.a_values().to_vec(),
        vec![base.fixed_b],
        base.grid.target_price(),
    )?;
    variants
        .iter()
        .map(|v| {
            let market = v.apply(&base.market)?;
            let axis = sweep_grid(&market, &a_axis, weights, base.n_paths, base.master_seed)?;
            let surface = sweep_grid(&market, &base.grid, weights, base.n_paths, base.master_seed)?;
            Ok(RobustnessOutcome {
                variant: v.clone(),
                market,
                monotonicity: monotonicity_in_a(&axis, base.fixed_b),
                frontier: frontier_from_surface(&surface, &base.lambdas)?,
                surface,
            })
        })
        .collect()
}
