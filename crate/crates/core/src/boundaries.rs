//! Default and transit boundary extraction from grid rows.
//!
//! Both boundaries are level crossings of `v = e^{−ξ}u`: the default boundary
//! is where `v` first drops below 1, the transit boundary where it crosses
//! `γ`. Crossings are located between nodes by linear interpolation.

use serde::Serialize;
use thiserror::Error;

use crate::solver::Grid;
use crate::traveling_wave::TravelingWave;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundaryError {
    #[error("v never crosses gamma = {gamma} on the grid")]
    NoCrossing { gamma: f64 },
    #[error("v crosses gamma = {gamma} more than once (first extra crossing near xi = {xi})")]
    MultipleCrossings { gamma: f64, xi: f64 },
    #[error("v sits on gamma = {gamma} over a plateau starting at xi = {xi}")]
    Plateau { gamma: f64, xi: f64 },
    #[error("row length {got} does not match grid with {expected} nodes")]
    Length { expected: usize, got: usize },
}

/// Boundary positions per time step.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BoundaryTrace {
    pub times: Vec<f64>,
    pub kappa_hat: Vec<f64>,
    pub eta_hat: Vec<f64>,
}

impl BoundaryTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            kappa_hat: Vec::with_capacity(n),
            eta_hat: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, kappa: f64, eta: f64) {
        self.times.push(t);
        self.kappa_hat.push(kappa);
        self.eta_hat.push(eta);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Boundaries at time `t`, linearly interpolated between stored times
    /// and held constant outside them.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let n = self.times.len();
        assert!(n > 0, "empty boundary trace");
        if t <= self.times[0] {
            return (self.kappa_hat[0], self.eta_hat[0]);
        }
        if t >= self.times[n - 1] {
            return (self.kappa_hat[n - 1], self.eta_hat[n - 1]);
        }
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        (
            self.kappa_hat[i] + w * (self.kappa_hat[i + 1] - self.kappa_hat[i]),
            self.eta_hat[i] + w * (self.eta_hat[i + 1] - self.eta_hat[i]),
        )
    }

    pub fn last(&self) -> Option<(f64, f64, f64)> {
        let n = self.times.len();
        (n > 0).then(|| (self.times[n - 1], self.kappa_hat[n - 1], self.eta_hat[n - 1]))
    }
}

#[inline]
fn v_at(u_row: &[f64], grid: &Grid, j: usize) -> f64 {
    let xi = grid.xi(j);
    u_row[j] * (-xi).exp()
}

/// Smallest `ξ` where `v` drops below `1 − tol_b`, refined inside the
/// bracketing cell. Returns `xi_min` when the first node already lies below
/// the level or when no node does.
pub fn extract_default_boundary(u_row: &[f64], grid: &Grid, tol_b: f64) -> f64 {
    let level = 1.0 - tol_b;
    let n = u_row.len().min(grid.n_points());
    let Some(j) = (0..n).find(|&j| v_at(u_row, grid, j) < level) else {
        return grid.xi_min;
    };
    if j == 0 {
        return grid.xi_min;
    }
    let (va, vb) = (v_at(u_row, grid, j - 1), v_at(u_row, grid, j));
    let (xa, xb) = (grid.xi(j - 1), grid.xi(j));
    xa + (va - level) / (va - vb) * (xb - xa)
}

/// Unique crossing of `v = γ`, located by linear interpolation.
pub fn extract_transit_boundary(
    u_row: &[f64],
    grid: &Grid,
    gamma: f64,
) -> Result<f64, BoundaryError> {
    let n = grid.n_points();
    if u_row.len() != n {
        return Err(BoundaryError::Length {
            expected: n,
            got: u_row.len(),
        });
    }
    let mut last_above: Option<usize> = None;
    let mut crossing: Option<(usize, usize)> = None;
    let mut prev: Option<(usize, bool)> = None;
    // Nodes within round-off of the level count as sitting on it.
    let on_level = 4.0 * f64::EPSILON * gamma.abs();
    for j in 0..n {
        let d = v_at(u_row, grid, j) - gamma;
        if d.abs() <= on_level {
            continue;
        }
        let above = d > 0.0;
        if let Some((pj, pabove)) = prev {
            if pabove != above {
                if crossing.is_some() || !pabove {
                    return Err(BoundaryError::MultipleCrossings {
                        gamma,
                        xi: grid.xi(j),
                    });
                }
                crossing = Some((pj, j));
            }
        }
        if above {
            last_above = Some(j);
        }
        prev = Some((j, above));
    }
    let Some((a, b)) = crossing else {
        return match (last_above, prev) {
            (None, None) => Err(BoundaryError::Plateau {
                gamma,
                xi: grid.xi_min,
            }),
            _ => Err(BoundaryError::NoCrossing { gamma }),
        };
    };
    match b - a {
        1 => {
            let (va, vb) = (v_at(u_row, grid, a), v_at(u_row, grid, b));
            let (xa, xb) = (grid.xi(a), grid.xi(b));
            Ok(xa + (va - gamma) / (va - vb) * (xb - xa))
        }
        2 => Ok(grid.xi(a + 1)),
        _ => Err(BoundaryError::Plateau {
            gamma,
            xi: grid.xi(a + 1),
        }),
    }
}

/// `max_j |u_j − e^{ξ_j} K(ξ_j)|`.
pub fn sup_error_vs_tw(u_row: &[f64], tw: &TravelingWave, grid: &Grid) -> f64 {
    u_row
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (j, &u)| m.max((u - tw.u_value(grid.xi(j))).abs()))
}
