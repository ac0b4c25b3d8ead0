//! Couples an exogenous market-cap path with the rebase rule.

use std::io::{self, Write};

use thiserror::Error;

use crate::model::{LossBreakdown, LossWeights, PolicyParams, SimPath};
use crate::rebase::{rebase_step, RebaseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step {step}: {source}")]
    Rebase {
        step: usize,
        #[source]
        source: RebaseError,
    },
    #[error("market cap at step {step} must be finite and > 0 (got {value})")]
    InvalidCap { step: usize, value: f64 },
    #[error("initial supply must be finite and > 0 (got {0})")]
    InvalidSupply(f64),
    #[error("cap path needs at least two points, got {0}")]
    TooShort(usize),
}

impl SimError {
    pub fn is_degenerate_supply(&self) -> bool {
        matches!(self, SimError::Rebase { .. })
    }
}

/// Runs the rule from parity: S_0 = Y_0 / P*, so P_0 = P*.
pub fn run_path(cap_path: &[f64], p: &PolicyParams) -> Result<SimPath, SimError> {
    let y0 = cap_path.first().copied().ok_or(SimError::TooShort(0))?;
    run_path_with(cap_path, y0 / p.target_price(), |_| p)
}

/// Runs the rule from an explicit initial supply with a policy that may vary
/// by step. `policy_at(t)` is the rule that sets S_t (t >= 1) and against
/// whose target dP_t is measured.
pub fn run_path_with<'a, F>(cap_path: &[f64], initial_supply: f64, policy_at: F) -> Result<SimPath, SimError>
where
    F: Fn(usize) -> &'a PolicyParams,
{
    if cap_path.len() < 2 {
        return Err(SimError::TooShort(cap_path.len()));
    }
    if let Some((step, &value)) = cap_path.iter().enumerate().find(|(_, &y)| !(y > 0.0 && y.is_finite())) {
        return Err(SimError::InvalidCap { step, value });
    }
    if !(initial_supply > 0.0 && initial_supply.is_finite()) {
        return Err(SimError::InvalidSupply(initial_supply));
    }

    let n = cap_path.len() - 1;
    let mut supply = Vec::with_capacity(n + 1);
    let mut price = Vec::with_capacity(n + 1);
    let mut d_price = Vec::with_capacity(n);
    let mut d_supply = Vec::with_capacity(n);

    supply.push(initial_supply);
    price.push(cap_path[0] / initial_supply);

    for t in 1..=n {
        let p = policy_at(t);
        let prev_supply = supply[t - 1];
        let s = rebase_step(price[t - 1], prev_supply, p).map_err(|source| SimError::Rebase { step: t, source })?;
        let pt = cap_path[t] / s;
        d_price.push(p.deviation(pt));
        d_supply.push((s - prev_supply) / prev_supply);
        supply.push(s);
        price.push(pt);
    }

    Ok(SimPath {
        market_cap: cap_path.to_vec(),
        supply,
        price,
        d_price,
        d_supply,
    })
}

/// Σ dP_t² + λ Σ dS_t² over t = 1..=n.
pub fn path_loss(path: &SimPath, w: LossWeights) -> LossBreakdown {
    LossBreakdown::from_series(&path.d_price, &path.d_supply, w)
}

/// Writes `t,Y,S,P,dP,dS`. The t = 0 row leaves dP and dS empty.
pub fn write_path_csv<W: Write>(path: &SimPath, mut out: W) -> io::Result<()> {
    writeln!(out, "t,Y,S,P,dP,dS")?;
    writeln!(out, "0,{},{},{},,", path.market_cap[0], path.supply[0], path.price[0])?;
    for t in 1..=path.steps() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t,
            path.market_cap[t],
            path.supply[t],
            path.price[t],
            path.d_price[t - 1],
            path.d_supply[t - 1]
        )?;
    }
    Ok(())
}
