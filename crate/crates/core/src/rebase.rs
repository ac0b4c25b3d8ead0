//! One step of the supply rule.

use crate::model::PolicyParams;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RebaseError {
    /// `1 + d / B <= 0`: the contraction would wipe out the whole supply.
    #[error("degenerate supply: deviation {deviation} with divisor {divisor} would annihilate supply")]
    DegenerateSupply { deviation: f64, divisor: f64 },
}

/// Slack on the band edge so that decimal boundaries such as 1.05 around a
/// target of 1 with A = 0.05 count as inside despite rounding in `dP`.
const EDGE_ULPS: f64 = 8.0 * f64::EPSILON;

fn within_band(deviation: f64, p: &PolicyParams) -> bool {
    let a = p.band_halfwidth();
    deviation.abs() <= a + EDGE_ULPS * (1.0 + a)
}

/// True iff `price` lies inside the inactive band (boundary inclusive).
pub fn in_band(price: f64, p: &PolicyParams) -> bool {
    within_band(p.deviation(price), p)
}

/// Supply after rebasing at `prev_price`.
///
/// Inside the band supply is left alone. Outside, every balance is scaled by
/// `1 + d / B` where `d` is the relative deviation, so a price above target
/// expands supply and a price below target contracts it.
pub fn rebase_step(prev_price: f64, prev_supply: f64, p: &PolicyParams) -> Result<f64, RebaseError> {
    let d = p.deviation(prev_price);
    if within_band(d, p) {
        return Ok(prev_supply);
    }
    let factor = 1.0 + d / p.adjust_divisor();
    if factor <= 0.0 {
        return Err(RebaseError::DegenerateSupply {
            deviation: d,
            divisor: p.adjust_divisor(),
        });
    }
    Ok(prev_supply * factor)
}
