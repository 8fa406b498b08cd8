//! Regime-switching Monte Carlo pricer used to cross-check the PDE value.
//!
//! Paths live in the frame coordinate `ξ(s) = log S_s + (r−δ)(T−s)`, where
//! the boundaries from the PDE solve apply directly. In this frame both
//! payoffs collapse to `e^{ξ−rT}`: at default time and at maturity (capped
//! at 1) alike.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundaries::BoundaryTrace;
use crate::model::ValidatedParams;
use crate::traveling_wave::TravelingWave;

/// Simulation steps per unit of maturity when `dt_sim` is not given.
pub const DEFAULT_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: usize,
    /// `None` means `maturity / 2000`.
    pub dt_sim: Option<f64>,
    pub seed: u64,
    pub s0: f64,
    pub maturity: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt_sim: None,
            seed: 20_240_601,
            s0: 2.0,
            maturity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("n_paths must be at least 1")]
    NoPaths,
    #[error("{name} must be finite and positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("boundaries cover time to maturity up to {available}, need {needed}")]
    Coverage { needed: f64, available: f64 },
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.n_paths == 0 {
            return Err(McError::NoPaths);
        }
        for (name, value) in [
            ("dt_sim", self.dt_sim.unwrap_or(1.0)),
            ("s0", self.s0),
            ("maturity", self.maturity),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(McError::NotPositive { name, value });
            }
        }
        Ok(())
    }

    /// Number of steps and their length; the last step is never shorter
    /// than the others because the count is rounded up.
    pub fn steps(&self) -> (usize, f64) {
        let n = match self.dt_sim {
            Some(dt) => ((self.maturity / dt).ceil() as usize).max(1),
            None => DEFAULT_STEPS,
        };
        (n, self.maturity / n as f64)
    }

    /// Starting frame coordinate `log S₀ + (r−δ)T`.
    pub fn xi0(&self, p: &ValidatedParams) -> f64 {
        self.s0.ln() + (p.r() - p.delta()) * self.maturity
    }
}

/// Default and transit boundaries as functions of time to maturity.
pub trait RegimeBoundaries {
    /// Largest time to maturity covered.
    fn horizon(&self) -> f64;
    /// `(κ̂(τ), η̂(τ))`.
    fn at(&self, tau: f64) -> (f64, f64);
}

impl RegimeBoundaries for BoundaryTrace {
    fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    fn at(&self, tau: f64) -> (f64, f64) {
        BoundaryTrace::at(self, tau)
    }
}

/// A solved trace continued by the traveling-wave limits `(κ*, η*)` beyond
/// its last time.
#[derive(Debug, Clone, Copy)]
pub struct WithWaveTail<'a> {
    pub trace: &'a BoundaryTrace,
    pub wave: &'a TravelingWave,
}

impl RegimeBoundaries for WithWaveTail<'_> {
    fn horizon(&self) -> f64 {
        f64::INFINITY
    }

    fn at(&self, tau: f64) -> (f64, f64) {
        if self.trace.is_empty() || tau > self.trace.horizon() {
            (self.wave.kappa_star, self.wave.eta_star)
        } else {
            self.trace.at(tau)
        }
    }
}

/// No default and no migration: every path stays in the high regime.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSwitching;

impl RegimeBoundaries for NoSwitching {
    fn horizon(&self) -> f64 {
        f64::INFINITY
    }

    fn at(&self, _tau: f64) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    }
}

/// One simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// Discounted payoff.
    pub payoff: f64,
    pub defaulted: bool,
    pub migrations: u32,
}

/// Boundary values tabulated on the simulation grid.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    xi0: f64,
    dt: f64,
    discount: f64,
    sigma_h: f64,
    sigma_l: f64,
    delta: f64,
    /// Boundaries at calendar step `k`, i.e. time to maturity `T − k·dt`.
    kappa: Vec<f64>,
    eta: Vec<f64>,
}

impl PathSimulator {
    pub fn new(
        p: &ValidatedParams,
        boundaries: &dyn RegimeBoundaries,
        cfg: &McConfig,
    ) -> Result<Self, McError> {
        cfg.validate()?;
        // Allow round-off in the last stored time.
        if boundaries.horizon() < cfg.maturity * (1.0 - 1e-12) {
            return Err(McError::Coverage {
                needed: cfg.maturity,
                available: boundaries.horizon(),
            });
        }
        let (n, dt) = cfg.steps();
        let (kappa, eta) = (0..=n)
            .map(|k| {
                let tau = if k == n { 0.0 } else { cfg.maturity - k as f64 * dt };
                boundaries.at(tau.max(0.0))
            })
            .unzip();
        Ok(Self {
            xi0: cfg.xi0(p),
            dt,
            discount: (-p.r() * cfg.maturity).exp(),
            sigma_h: p.sigma_h(),
            sigma_l: p.sigma_l(),
            delta: p.delta(),
            kappa,
            eta,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.kappa.len() - 1
    }

    /// Runs one path driven by the given standard normal draws.
    pub fn simulate_with(&self, mut normal: impl FnMut() -> f64) -> PathOutcome {
        let mut xi = self.xi0;
        if xi <= self.kappa[0] {
            return self.defaulted(xi, 0);
        }
        let sqrt_dt = self.dt.sqrt();
        let mut high = xi > self.eta[0];
        let mut migrations = 0;
        for k in 0..self.n_steps() {
            let now_high = xi > self.eta[k];
            if now_high != high {
                migrations += 1;
                high = now_high;
            }
            let sigma = if high { self.sigma_h } else { self.sigma_l };
            xi += (self.delta - 0.5 * sigma * sigma) * self.dt + sigma * sqrt_dt * normal();
            if xi <= self.kappa[k + 1] {
                return self.defaulted(xi, migrations);
            }
        }
        PathOutcome {
            payoff: self.discount * xi.exp().min(1.0),
            defaulted: false,
            migrations,
        }
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> PathOutcome {
        self.simulate_with(|| rng.sample(StandardNormal))
    }

    fn defaulted(&self, xi: f64, migrations: u32) -> PathOutcome {
        PathOutcome {
            payoff: self.discount * xi.exp(),
            defaulted: true,
            migrations,
        }
    }
}

/// Independent stream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Single-path convenience wrapper around [`PathSimulator`].
pub fn simulate_path<R: Rng + ?Sized>(
    rng: &mut R,
    p: &ValidatedParams,
    boundaries: &dyn RegimeBoundaries,
    cfg: &McConfig,
) -> Result<PathOutcome, McError> {
    Ok(PathSimulator::new(p, boundaries, cfg)?.simulate(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McResult {
    pub price: f64,
    /// Zero when only one path is drawn.
    pub std_error: f64,
    pub n_paths: usize,
    pub n_default: usize,
    pub n_migrations: u64,
}

pub fn price_bond_mc(
    p: &ValidatedParams,
    boundaries: &dyn RegimeBoundaries,
    cfg: &McConfig,
) -> Result<McResult, McError> {
    let sim = PathSimulator::new(p, boundaries, cfg)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut n_default = 0;
    let mut n_migrations = 0u64;
    for i in 0..cfg.n_paths {
        let out = sim.simulate(&mut path_rng(cfg.seed, i as u64));
        sum += out.payoff;
        sum_sq += out.payoff * out.payoff;
        n_default += out.defaulted as usize;
        n_migrations += out.migrations as u64;
    }
    let n = cfg.n_paths as f64;
    let price = sum / n;
    let std_error = if cfg.n_paths > 1 {
        ((sum_sq - n * price * price).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(McResult {
        price,
        std_error,
        n_paths: cfg.n_paths,
        n_default,
        n_migrations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McComparison {
    pub mc_price: f64,
    pub pde_price: f64,
    pub std_error: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    /// `(mc − pde) / std_error`; infinite when the error is zero but the
    /// prices differ.
    pub z_score: f64,
    /// `|mc − pde| ≤ max(1% of pde, 3 std_error)`.
    pub agrees: bool,
}

pub fn compare_mc_pde(mc: &McResult, pde_price: f64) -> McComparison {
    let diff = mc.price - pde_price;
    let z_score = if diff == 0.0 {
        0.0
    } else if mc.std_error > 0.0 {
        diff / mc.std_error
    } else {
        f64::INFINITY.copysign(diff)
    };
    McComparison {
        mc_price: mc.price,
        pde_price,
        std_error: mc.std_error,
        abs_diff: diff.abs(),
        rel_diff: diff.abs() / pde_price.abs(),
        z_score,
        agrees: diff.abs() <= (0.01 * pde_price.abs()).max(3.0 * mc.std_error),
    }
}

/// `e^{−rT} min(S_T, 1)` in expectation under a single lognormal regime:
/// a zero-coupon unit minus a unit-strike put.
pub fn single_regime_price(s0: f64, r: f64, sigma: f64, maturity: f64, normal_cdf: impl Fn(f64) -> f64) -> f64 {
    let sd = sigma * maturity.sqrt();
    let d1 = (s0.ln() + (r + 0.5 * sigma * sigma) * maturity) / sd;
    let d2 = d1 - sd;
    let df = (-r * maturity).exp();
    let put = df * normal_cdf(-d2) - s0 * normal_cdf(-d1);
    df - put
}
