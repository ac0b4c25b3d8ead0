//! Exact-scheme geometric Brownian motion for the market cap.
//!
//! Each path owns an independent random stream keyed by
//! `(master_seed, path_index)`, so path `i` is the same value whether it is
//! generated alone, serially, or on any number of worker threads.
//!
//! The generator is pinned so that frozen fixtures stay portable:
//!
//! ```text
//! mix(z)   = SplitMix64 finalizer
//! state_0  = mix(master_seed) ^ mix(path_index * GAMMA + GAMMA)
//! next()   : state += GAMMA; return mix(state)
//! uniform  = ((next() >> 11) + 0.5) * 2^-53            in (0, 1)
//! normals  : Box-Muller on (u1, u2), cos branch first, sin branch cached
//! ```
//!
//! Each step then applies `Y_{t+1} = Y_t * exp((mu - sigma^2 / 2) + sigma * Z_t)`.

use crate::model::MarketParams;
use serde::Serialize;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies the randomness of a single path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PathSeed {
    pub master_seed: u64,
    pub path_index: u64,
}

impl PathSeed {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self {
            master_seed,
            path_index,
        }
    }
}

/// Per-path source of uniforms and standard normals.
#[derive(Debug, Clone)]
pub struct NormalStream {
    state: u64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Stream for one path. Identical inputs give identical streams.
pub fn derive_stream(master_seed: u64, path_index: u64) -> NormalStream {
    let key = path_index.wrapping_mul(GAMMA).wrapping_add(GAMMA);
    NormalStream {
        state: mix64(master_seed) ^ mix64(key),
        spare: None,
    }
}

/// Market-cap path Y_0..=Y_n.
pub fn generate_cap_path(m: &MarketParams, seed: PathSeed) -> Vec<f64> {
    let mut stream = derive_stream(seed.master_seed, seed.path_index);
    let n = m.horizon();
    let sigma = m.sigma();
    let drift = (m.mu() - 0.5 * sigma * sigma) * MarketParams::DT;
    let vol = sigma * MarketParams::DT.sqrt();

    let mut path = Vec::with_capacity(n + 1);
    let mut cap = m.initial_cap();
    path.push(cap);
    for _ in 0..n {
        let z = stream.next_normal();
        cap *= (drift + vol * z).exp();
        path.push(cap);
    }
    path
}
