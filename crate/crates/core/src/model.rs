//! Model parameters and the pointwise transformations shared by every solver.
//!
//! Two value frames are in use. `u(ξ, t)` is the discounted bond value in the
//! moving log-asset coordinate `ξ = log S + (r − δ)t`, with obstacle `u ≤ e^ξ`.
//! `v = e^{−ξ} u` is the debt-to-asset frame, with obstacle `v ≤ 1` and the
//! rating threshold `v = γ`. Face value is fixed at 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw model constants as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Risk-free rate.
    pub r: f64,
    /// Credit discount rate.
    pub delta: f64,
    /// Volatility in the high rating region.
    pub sigma_h: f64,
    /// Volatility in the low rating region.
    pub sigma_l: f64,
    /// Debt-to-asset migration threshold.
    pub gamma: f64,
}

impl ModelParams {
    /// Parameter set used for the reference experiments.
    pub const REFERENCE: ModelParams = ModelParams {
        r: 0.05,
        delta: 0.03,
        sigma_h: 0.2,
        sigma_l: 0.3,
        gamma: 0.6,
    };

    pub fn validate(self) -> Result<ValidatedParams, ParamError> {
        validate_params(self)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {name} = {value} is not finite")]
    NotFinite { name: &'static str, value: f64 },
    #[error("r_positive: risk-free rate r = {0} must be > 0")]
    RateNotPositive(f64),
    #[error("delta_positive: credit discount rate delta = {0} must be > 0")]
    DeltaNotPositive(f64),
    #[error("sigma_positive: volatilities must be > 0 (sigma_h = {sigma_h}, sigma_l = {sigma_l})")]
    SigmaNotPositive { sigma_h: f64, sigma_l: f64 },
    #[error("sigma_order: need sigma_h < sigma_l (sigma_h = {sigma_h}, sigma_l = {sigma_l})")]
    SigmaOrder { sigma_h: f64, sigma_l: f64 },
    #[error("gamma_range: need 0 < gamma < 1 (gamma = {0})")]
    GammaRange(f64),
    #[error("main_sigma: need sigma_h^2/2 < delta < sigma_l^2/2 (sigma_h^2/2 = {lower}, delta = {delta}, sigma_l^2/2 = {upper})")]
    MainSigma { lower: f64, delta: f64, upper: f64 },
}

impl ParamError {
    /// Short tag of the violated constraint.
    pub fn constraint(&self) -> &'static str {
        match self {
            ParamError::NotFinite { .. } => "finite",
            ParamError::RateNotPositive(_) => "r_positive",
            ParamError::DeltaNotPositive(_) => "delta_positive",
            ParamError::SigmaNotPositive { .. } => "sigma_positive",
            ParamError::SigmaOrder { .. } => "sigma_order",
            ParamError::GammaRange(_) => "gamma_range",
            ParamError::MainSigma { .. } => "main_sigma",
        }
    }
}

/// Model parameters that satisfy every structural constraint of the model.
///
/// Only obtainable through [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedParams(ModelParams);

impl ValidatedParams {
    pub fn r(&self) -> f64 {
        self.0.r
    }
    pub fn delta(&self) -> f64 {
        self.0.delta
    }
    pub fn sigma_h(&self) -> f64 {
        self.0.sigma_h
    }
    pub fn sigma_l(&self) -> f64 {
        self.0.sigma_l
    }
    pub fn gamma(&self) -> f64 {
        self.0.gamma
    }
    pub fn raw(&self) -> &ModelParams {
        &self.0
    }
    pub fn derived(&self) -> DerivedConstants {
        derived_constants(self)
    }
}

pub fn validate_params(p: ModelParams) -> Result<ValidatedParams, ParamError> {
    for (name, value) in [
        ("r", p.r),
        ("delta", p.delta),
        ("sigma_h", p.sigma_h),
        ("sigma_l", p.sigma_l),
        ("gamma", p.gamma),
    ] {
        if !value.is_finite() {
            return Err(ParamError::NotFinite { name, value });
        }
    }
    if p.r <= 0.0 {
        return Err(ParamError::RateNotPositive(p.r));
    }
    if p.delta <= 0.0 {
        return Err(ParamError::DeltaNotPositive(p.delta));
    }
    if p.sigma_h <= 0.0 || p.sigma_l <= 0.0 {
        return Err(ParamError::SigmaNotPositive {
            sigma_h: p.sigma_h,
            sigma_l: p.sigma_l,
        });
    }
    if p.sigma_h >= p.sigma_l {
        return Err(ParamError::SigmaOrder {
            sigma_h: p.sigma_h,
            sigma_l: p.sigma_l,
        });
    }
    if !(p.gamma > 0.0 && p.gamma < 1.0) {
        return Err(ParamError::GammaRange(p.gamma));
    }
    let lower = 0.5 * p.sigma_h * p.sigma_h;
    let upper = 0.5 * p.sigma_l * p.sigma_l;
    if !(lower < p.delta && p.delta < upper) {
        return Err(ParamError::MainSigma {
            lower,
            delta: p.delta,
            upper,
        });
    }
    Ok(ValidatedParams(p))
}

/// Dimensionless ratios and the moving-frame drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// `2δ / σ_L²`, always below 1.
    pub c_l: f64,
    /// `2δ / σ_H²`, always above 1.
    pub c_h: f64,
    /// Frame drift `r − δ`.
    pub c: f64,
}

pub fn derived_constants(p: &ValidatedParams) -> DerivedConstants {
    DerivedConstants {
        c_l: 2.0 * p.delta() / (p.sigma_l() * p.sigma_l()),
        c_h: 2.0 * p.delta() / (p.sigma_h() * p.sigma_h()),
        c: p.r() - p.delta(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("smoothing width must be > 0, got {0}")]
pub struct SmoothingWidthError(pub f64);

/// Quintic smoothed Heaviside: 0 for `z ≤ −eps`, 1 for `z ≥ 0`, and
/// `6(z/ε)⁵ + 15(z/ε)⁴ + 10(z/ε)³ + 1` in between. C¹ with zero slope at
/// both ends.
pub fn smoothed_heaviside(z: f64, eps: f64) -> Result<f64, SmoothingWidthError> {
    if !(eps > 0.0) {
        return Err(SmoothingWidthError(eps));
    }
    Ok(heaviside_unchecked(z, eps))
}

#[inline]
pub(crate) fn heaviside_unchecked(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else if z <= -eps {
        0.0
    } else {
        let s = z / eps;
        // Horner form of 6s^5 + 15s^4 + 10s^3 + 1.
        (((6.0 * s + 15.0) * s + 10.0) * s * s * s + 1.0).clamp(0.0, 1.0)
    }
}

/// Smoothed regime volatility `σ_H + (σ_L − σ_H) H_ε(u − γ e^ξ)` in the u-frame.
pub fn sigma_eff(
    u: f64,
    xi: f64,
    p: &ValidatedParams,
    eps: f64,
) -> Result<f64, SmoothingWidthError> {
    let h = smoothed_heaviside(u - p.gamma() * xi.exp(), eps)?;
    Ok(p.sigma_h() + (p.sigma_l() - p.sigma_h()) * h)
}

#[inline]
pub(crate) fn sigma_eff_unchecked(u: f64, exp_xi: f64, p: &ValidatedParams, eps: f64) -> f64 {
    p.sigma_h() + (p.sigma_l() - p.sigma_h()) * heaviside_unchecked(u - p.gamma() * exp_xi, eps)
}

/// `v = e^{−ξ} u`.
#[inline]
pub fn u_to_v(u: f64, xi: f64) -> f64 {
    u * (-xi).exp()
}

/// `u = e^{ξ} v`.
#[inline]
pub fn v_to_u(v: f64, xi: f64) -> f64 {
    v * xi.exp()
}
