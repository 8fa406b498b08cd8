//! Closed-form stationary profile `K(ξ)` of the obstacle problem in the v-frame.
//!
//! `K ≡ 1` left of the default point `κ*`, solves
//! `K″ + K′ + c_L(K′ + K) = 0` on `(κ*, η*)` and
//! `K″ + K′ + c_H(K′ + K) = 0` above the transit point `η*`, with
//! `K(κ*) = 1`, `K′(κ*) = 0`, `K(η*) = γ`, C¹ matching at `η*` and
//! `e^ξ K(ξ) → 1` at infinity. The gap `η* − κ*` is the root of
//! `Ψ(x) = γ` where `Ψ(x) = (e^{−c_L x} − c_L e^{−x}) / (1 − c_L)`.

use serde::Serialize;
use thiserror::Error;

use crate::model::{DerivedConstants, ValidatedParams};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const MAX_BISECTION_ITERS: usize = 200;
const BRACKET_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("psi is only defined for x >= 0, got {0}")]
    NegativeArgument(f64),
    #[error("c_l = {0} must lie in (0, 1)")]
    RatioOutOfRange(f64),
    #[error("target level {0} must lie in (0, 1)")]
    LevelOutOfRange(f64),
    #[error("bisection tolerance must be > 0, got {0}")]
    BadTolerance(f64),
    #[error("could not bracket psi(x) = {gamma}: psi({cap}) is still above the level")]
    BracketCap { gamma: f64, cap: f64 },
}

fn check_ratio(c_l: f64) -> Result<(), WaveError> {
    if c_l > 0.0 && c_l < 1.0 {
        Ok(())
    } else {
        Err(WaveError::RatioOutOfRange(c_l))
    }
}

#[inline]
fn psi_unchecked(x: f64, c_l: f64) -> f64 {
    ((-c_l * x).exp() - c_l * (-x).exp()) / (1.0 - c_l)
}

/// `Ψ(x) = −c_L/(1−c_L) e^{−x} + 1/(1−c_L) e^{−c_L x}`; decreasing from 1 to 0.
pub fn psi(x: f64, c_l: f64) -> Result<f64, WaveError> {
    if !(x >= 0.0) {
        return Err(WaveError::NegativeArgument(x));
    }
    check_ratio(c_l)?;
    Ok(psi_unchecked(x, c_l))
}

/// Solves `Ψ(x) = gamma` by bisection.
///
/// The bracket starts at `[0, 1]` and its right end doubles until
/// `Ψ(X) < gamma`. Iteration stops once the bracket is narrower than `tol`.
pub fn psi_inverse(gamma: f64, c_l: f64, tol: f64) -> Result<f64, WaveError> {
    check_ratio(c_l)?;
    if !(tol > 0.0) {
        return Err(WaveError::BadTolerance(tol));
    }
    if !(gamma < 1.0) || gamma.is_nan() {
        return Err(WaveError::LevelOutOfRange(gamma));
    }
    let mut hi = 1.0;
    while psi_unchecked(hi, c_l) >= gamma {
        if hi >= BRACKET_CAP {
            return Err(WaveError::BracketCap {
                gamma,
                cap: BRACKET_CAP,
            });
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTION_ITERS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if psi_unchecked(mid, c_l) > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Built traveling wave; immutable once constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TravelingWave {
    pub kappa_star: f64,
    pub eta_star: f64,
    /// `Ψ⁻¹(γ) = η* − κ*`.
    pub gap: f64,
    /// Coefficient of `e^{−c_H ξ}` above `η*`.
    pub coef_b: f64,
    /// Coefficient of `e^{−ξ}` on `(κ*, η*)`.
    pub coef_c: f64,
    /// Coefficient of `e^{−c_L ξ}` on `(κ*, η*)`.
    pub coef_d: f64,
    pub constants: DerivedConstants,
    pub gamma: f64,
}

/// Which analytic piece of `K` applies at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Default,
    Low,
    High,
}

pub fn build_traveling_wave(p: &ValidatedParams, tol: f64) -> Result<TravelingWave, WaveError> {
    let constants = p.derived();
    let (c_l, c_h) = (constants.c_l, constants.c_h);
    let gamma = p.gamma();
    let gap = psi_inverse(gamma, c_l, tol)?;
    let eta_star = -(gamma + (-c_l * gap).exp() / (c_h - 1.0)).ln();
    let kappa_star = eta_star - gap;
    Ok(TravelingWave {
        kappa_star,
        eta_star,
        gap,
        coef_b: (gamma - (-eta_star).exp()) * (c_h * eta_star).exp(),
        coef_c: -c_l / (1.0 - c_l) * kappa_star.exp(),
        coef_d: (c_l * kappa_star).exp() / (1.0 - c_l),
        constants,
        gamma,
    })
}

impl TravelingWave {
    pub fn build(p: &ValidatedParams) -> Result<Self, WaveError> {
        build_traveling_wave(p, DEFAULT_ROOT_TOL)
    }

    pub fn branch(&self, xi: f64) -> Branch {
        if xi <= self.kappa_star {
            Branch::Default
        } else if xi <= self.eta_star {
            Branch::Low
        } else {
            Branch::High
        }
    }

    /// `(e^{-ξ}, e^{-c ξ})` style pieces evaluated relative to the branch
    /// anchor, returned as (a, b, rate): K = a + b on the branch, with the
    /// second exponential decaying at `rate`.
    #[inline]
    fn pieces(&self, xi: f64) -> (f64, f64, f64) {
        let DerivedConstants { c_l, c_h, .. } = self.constants;
        if xi <= self.eta_star {
            let s = xi - self.kappa_star;
            let a = -c_l / (1.0 - c_l) * (-s).exp();
            let b = (-c_l * s).exp() / (1.0 - c_l);
            (a, b, c_l)
        } else {
            let a = (-xi).exp();
            let b = (self.gamma - (-self.eta_star).exp()) * (-c_h * (xi - self.eta_star)).exp();
            (a, b, c_h)
        }
    }

    /// `K(ξ)`.
    pub fn value(&self, xi: f64) -> f64 {
        if xi <= self.kappa_star {
            return 1.0;
        }
        if xi == self.eta_star {
            return self.gamma;
        }
        let (a, b, _) = self.pieces(xi);
        a + b
    }

    /// `K′(ξ)`; the right limit 0 at `κ*`.
    pub fn derivative(&self, xi: f64) -> f64 {
        if xi <= self.kappa_star {
            return 0.0;
        }
        let (a, b, rate) = self.pieces(xi);
        -a - rate * b
    }

    /// `K″(ξ)` on either open branch.
    pub fn second_derivative(&self, xi: f64) -> f64 {
        if xi <= self.kappa_star {
            return 0.0;
        }
        let (a, b, rate) = self.pieces(xi);
        a + rate * rate * b
    }

    /// `K″ + K′ + c(K′ + K)` with the regime ratio chosen by position.
    pub fn residual(&self, xi: f64) -> f64 {
        let ratio = match self.branch(xi) {
            Branch::Default => return 0.0,
            Branch::Low => self.constants.c_l,
            Branch::High => self.constants.c_h,
        };
        self.residual_with_ratio(xi, ratio)
    }

    /// Same ODE residual but with an explicitly supplied ratio.
    pub fn residual_with_ratio(&self, xi: f64, ratio: f64) -> f64 {
        let k = self.value(xi);
        let dk = self.derivative(xi);
        let d2k = self.second_derivative(xi);
        d2k + dk + ratio * (dk + k)
    }

    /// Stationary profile in the u-frame, `e^ξ K(ξ)`.
    pub fn u_value(&self, xi: f64) -> f64 {
        if xi <= self.kappa_star {
            return xi.exp();
        }
        if xi > self.eta_star {
            // 1 + (γ − e^{−η*}) e^{ξ − c_H(ξ − η*)} without forming e^ξ.
            let c_h = self.constants.c_h;
            let tail = (self.gamma - (-self.eta_star).exp())
                * (xi - c_h * (xi - self.eta_star)).exp();
            return 1.0 + tail;
        }
        xi.exp() * self.value(xi)
    }
}

pub fn tw_value(tw: &TravelingWave, xi: f64) -> f64 {
    tw.value(xi)
}

pub fn tw_derivative(tw: &TravelingWave, xi: f64) -> f64 {
    tw.derivative(xi)
}

pub fn tw_residual(tw: &TravelingWave, xi: f64) -> f64 {
    tw.residual(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    // 40-digit bisection of the same closed forms (mpmath), reference params.
    const PSI_INV_REF: f64 = 1.701_823_276_749_514_3;
    const ETA_REF: f64 = -0.217_635_873_085_367_63;
    const KAPPA_REF: f64 = -1.919_459_149_834_881_9;
    const B_REF: f64 = -0.464_007_074_439_874_97;

    fn wave() -> TravelingWave {
        TravelingWave::build(&ModelParams::REFERENCE.validate().unwrap()).unwrap()
    }

    #[test]
    fn psi_endpoints() {
        let c_l = 2.0 / 3.0;
        assert!((psi(0.0, c_l).unwrap() - 1.0).abs() < 1e-15);
        assert!(psi(50.0, c_l).unwrap() < 1e-9);
        assert!((psi(1.7, c_l).unwrap() - 0.600_507_766_507_558_4).abs() < 1e-12);
        assert!(psi(-0.1, c_l).is_err());
        assert!(psi(1.0, 1.0).is_err());
    }

    #[test]
    fn psi_inverse_values() {
        let c_l = 2.0 / 3.0;
        assert!(psi_inverse(1.0 - 1e-15, c_l, 1e-12).unwrap() < 1e-6);
        let x = psi_inverse(0.6, c_l, 1e-12).unwrap();
        assert!((x - PSI_INV_REF).abs() < 1e-10);
        let x4 = psi_inverse(0.4, c_l, 1e-12).unwrap();
        assert!((x4 - 2.511_530_216_483_427).abs() < 1e-10);
        assert!(x4 > x);
    }

    #[test]
    fn psi_inverse_rejects_bad_levels() {
        let c_l = 2.0 / 3.0;
        assert!(matches!(
            psi_inverse(0.0, c_l, 1e-12),
            Err(WaveError::BracketCap { .. })
        ));
        assert!(matches!(
            psi_inverse(-0.5, c_l, 1e-12),
            Err(WaveError::BracketCap { .. })
        ));
        assert!(psi_inverse(1.0, c_l, 1e-12).is_err());
        assert!(psi_inverse(0.5, c_l, 0.0).is_err());
    }

    #[test]
    fn reference_wave_matches_oracle() {
        let tw = wave();
        assert!((tw.gap - PSI_INV_REF).abs() < 1e-10);
        assert!((tw.eta_star - ETA_REF).abs() < 1e-10);
        assert!((tw.kappa_star - KAPPA_REF).abs() < 1e-10);
        assert!((tw.coef_b - B_REF).abs() < 1e-10);
        assert!(tw.gamma - (-tw.eta_star).exp() < 0.0);
    }

    #[test]
    fn coefficients_reproduce_branches() {
        let tw = wave();
        let c = tw.constants;
        for xi in [-1.5, -1.0, -0.5] {
            let direct = tw.coef_c * (-xi as f64).exp() + tw.coef_d * (-c.c_l * xi).exp();
            assert!((direct - tw.value(xi)).abs() < 1e-12);
        }
        for xi in [0.0, 1.0, 4.0] {
            let direct = (-xi as f64).exp() + tw.coef_b * (-c.c_h * xi).exp();
            assert!((direct - tw.value(xi)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_conditions() {
        let tw = wave();
        assert_eq!(tw.value(tw.kappa_star), 1.0);
        assert!((tw.value(tw.kappa_star + 1e-12) - 1.0).abs() < 1e-12);
        assert!(tw.derivative(tw.kappa_star + 1e-14).abs() < 1e-12);
        assert_eq!(tw.value(tw.eta_star), tw.gamma);
        let below = tw.value(tw.eta_star - 1e-13);
        let above = tw.value(tw.eta_star + 1e-13);
        assert!((below - tw.gamma).abs() < 1e-12 && (above - tw.gamma).abs() < 1e-12);
        let (h, l) = (1e-13, -1e-13);
        let dl = tw.derivative(tw.eta_star + l);
        let dh = tw.derivative(tw.eta_star + h);
        assert!((dl - dh).abs() < 1e-10);
        assert!(((10f64).exp() * tw.value(10.0) - 1.0).abs() < 0.01);
        assert!(((30f64).exp() * tw.value(30.0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn residual_vanishes_and_detects_wrong_regime() {
        let tw = wave();
        let hi = tw.eta_star + 1.0;
        let mid = 0.5 * (tw.kappa_star + tw.eta_star);
        assert!(tw.residual(hi).abs() < 1e-10);
        assert!(tw.residual(mid).abs() < 1e-10);
        let wrong = tw.residual_with_ratio(hi, tw.constants.c_l);
        assert!(wrong.abs() > 1e-3);
    }

    #[test]
    fn u_value_matches_direct_product() {
        let tw = wave();
        for xi in [-4.0, -1.0, 0.0, 0.5, 3.0, 6.0] {
            let direct = f64::exp(xi) * tw.value(xi);
            assert!((tw.u_value(xi) - direct).abs() < 1e-12);
        }
        assert!((tw.u_value(200.0) - 1.0).abs() < 1e-12);
    }
}
