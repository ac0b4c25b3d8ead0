//! Domain types shared by every other module.
//!
//! All types validate on construction and are plain immutable values
//! afterwards, so they can be shared freely between worker threads.

use serde::Serialize;
use thiserror::Error;

/// A parameter failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter {field}: {reason} (got {value})")]
pub struct InvalidParam {
    pub field: &'static str,
    pub reason: &'static str,
    pub value: f64,
}

impl InvalidParam {
    fn new(field: &'static str, reason: &'static str, value: f64) -> Self {
        Self { field, reason, value }
    }
}

/// The rebase rule: an inactive band of relative half-width `band_halfwidth`
/// (A) around `target_price` (P*), and an adjustment divisor
/// `adjust_divisor` (B) so that outside the band supply moves by `dP / B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyParams {
    band_halfwidth: f64,
    adjust_divisor: f64,
    target_price: f64,
}

impl PolicyParams {
    pub fn new(band_halfwidth: f64, adjust_divisor: f64, target_price: f64) -> Result<Self, InvalidParam> {
        validate_policy(Self {
            band_halfwidth,
            adjust_divisor,
            target_price,
        })
    }

    pub fn band_halfwidth(&self) -> f64 {
        self.band_halfwidth
    }

    pub fn adjust_divisor(&self) -> f64 {
        self.adjust_divisor
    }

    pub fn target_price(&self) -> f64 {
        self.target_price
    }

    pub fn with_adjust_divisor(self, adjust_divisor: f64) -> Result<Self, InvalidParam> {
        Self::new(self.band_halfwidth, adjust_divisor, self.target_price)
    }

    /// Relative deviation of `price` from the target.
    #[inline]
    pub fn deviation(&self, price: f64) -> f64 {
        (price - self.target_price) / self.target_price
    }
}

/// Returns `p` unchanged if every field is in range.
pub fn validate_policy(p: PolicyParams) -> Result<PolicyParams, InvalidParam> {
    // `!(x >= 0)` also rejects NaN.
    if !(p.band_halfwidth >= 0.0) || !p.band_halfwidth.is_finite() {
        return Err(InvalidParam::new(
            "A",
            "band half-width must be finite and >= 0",
            p.band_halfwidth,
        ));
    }
    if !(p.adjust_divisor > 0.0) || !p.adjust_divisor.is_finite() {
        return Err(InvalidParam::new(
            "B",
            "adjustment divisor must be finite and > 0",
            p.adjust_divisor,
        ));
    }
    if !(p.target_price > 0.0) || !p.target_price.is_finite() {
        return Err(InvalidParam::new(
            "P_star",
            "target price must be finite and > 0",
            p.target_price,
        ));
    }
    Ok(p)
}

/// Exogenous market-cap process: exact GBM with per-step drift `mu` and
/// volatility `sigma`, one step per period (dt = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    mu: f64,
    sigma: f64,
    initial_cap: f64,
    horizon: usize,
}

impl MarketParams {
    /// Step length. Fixed; the model has no finer time discretization.
    pub const DT: f64 = 1.0;

    pub fn new(mu: f64, sigma: f64, initial_cap: f64, horizon: usize) -> Result<Self, InvalidParam> {
        Self {
            mu,
            sigma,
            initial_cap,
            horizon,
        }
        .validate()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn initial_cap(&self) -> f64 {
        self.initial_cap
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_mu(self, mu: f64) -> Result<Self, InvalidParam> {
        Self { mu, ..self }.validate()
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self, InvalidParam> {
        Self { sigma, ..self }.validate()
    }

    pub fn with_initial_cap(self, initial_cap: f64) -> Result<Self, InvalidParam> {
        Self { initial_cap, ..self }.validate()
    }

    fn validate(self) -> Result<Self, InvalidParam> {
        if !self.mu.is_finite() {
            return Err(InvalidParam::new("mu", "drift must be finite", self.mu));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(InvalidParam::new(
                "sigma",
                "volatility must be finite and >= 0",
                self.sigma,
            ));
        }
        if !(self.initial_cap > 0.0) || !self.initial_cap.is_finite() {
            return Err(InvalidParam::new(
                "Y0",
                "initial market cap must be finite and > 0",
                self.initial_cap,
            ));
        }
        if self.horizon == 0 {
            return Err(InvalidParam::new("n", "horizon must be at least one step", 0.0));
        }
        Ok(self)
    }
}

/// Weight on squared supply change in the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    lambda: f64,
}

impl LossWeights {
    pub fn new(lambda: f64) -> Result<Self, InvalidParam> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(InvalidParam::new("lambda", "weight must be finite and >= 0", lambda));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// One realized trajectory.
///
/// `market_cap`, `supply` and `price` are indexed by t = 0..=n.
/// `d_price` and `d_supply` are indexed by t = 1..=n, so `d_price[0]` is dP_1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPath {
    pub market_cap: Vec<f64>,
    pub supply: Vec<f64>,
    pub price: Vec<f64>,
    pub d_price: Vec<f64>,
    pub d_supply: Vec<f64>,
}

impl SimPath {
    /// Number of policy steps n.
    pub fn steps(&self) -> usize {
        self.d_price.len()
    }
}

/// Loss decomposed into its price and supply terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub price_component: f64,
    pub supply_component: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(price_component: f64, supply_component: f64, weights: LossWeights) -> Self {
        Self {
            price_component,
            supply_component,
            total: price_component + weights.lambda * supply_component,
        }
    }

    /// Sum of squared deviations over two equal-length series.
    pub fn from_series(d_price: &[f64], d_supply: &[f64], weights: LossWeights) -> Self {
        let price = d_price.iter().map(|d| d * d).sum();
        let supply = d_supply.iter().map(|d| d * d).sum();
        Self::new(price, supply, weights)
    }
}
