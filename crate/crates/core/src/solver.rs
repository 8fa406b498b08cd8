//! Penalized implicit upwind scheme for the u-frame obstacle problem.
//!
//! Each time step solves
//!
//! ```text
//! (U_j − P_j)/Δt − ½σ_j² D²U_j − b_j D^{up}U_j + ε⁻¹ (U_j − e^{ξ_j})⁺ = 0
//! ```
//!
//! where `P` is the previous step, `σ_j` is the smoothed regime volatility
//! frozen at `P_j`, `b_j = δ − ½σ_j²` and `D^{up}` is the one-sided
//! difference chosen by the sign of `b_j`. The penalty is linearized on its
//! active set and iterated (Newton on a piecewise-linear map) until the
//! active set settles and the relative sup-norm update drops below the
//! tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundaries::{self, BoundaryError, BoundaryTrace};
use crate::model::{sigma_eff_unchecked, ValidatedParams};
use crate::traveling_wave::{TravelingWave, WaveError};
use crate::tridiag::{solve_bands, TridiagError, TridiagonalSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("domain [{xi_min}, {xi_max}] is empty")]
    EmptyDomain { xi_min: f64, xi_max: f64 },
    #[error("need at least 2 space intervals, got {0}")]
    TooFewIntervals(usize),
    #[error("time step must be > 0, got {0}")]
    BadTimeStep(f64),
    #[error("grid spacing must be > 0, got {0}")]
    BadSpacing(f64),
    #[error("xi_min = {xi_min} must be below kappa* - 1 = {limit}")]
    LeftTooNarrow { xi_min: f64, limit: f64 },
    #[error("xi_max = {xi_max} must exceed log(1/gamma) + 1 = {limit}")]
    RightTooNarrow { xi_max: f64, limit: f64 },
}

/// Uniform space-time mesh: nodes `ξ_j = xi_min + j Δξ`, `j = 0..=n_space`,
/// times `t_i = i Δt`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_space: usize,
    pub dxi: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl Grid {
    pub fn new(
        xi_min: f64,
        xi_max: f64,
        n_space: usize,
        dt: f64,
        n_steps: usize,
    ) -> Result<Self, GridError> {
        if !(xi_max > xi_min) || !xi_min.is_finite() || !xi_max.is_finite() {
            return Err(GridError::EmptyDomain { xi_min, xi_max });
        }
        if n_space < 2 {
            return Err(GridError::TooFewIntervals(n_space));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(GridError::BadTimeStep(dt));
        }
        Ok(Self {
            xi_min,
            xi_max,
            n_space,
            dxi: (xi_max - xi_min) / n_space as f64,
            dt,
            n_steps,
        })
    }

    /// Grid from a spacing and a horizon; counts are rounded to the nearest
    /// integer.
    pub fn from_spacing(
        xi_min: f64,
        xi_max: f64,
        dxi: f64,
        dt: f64,
        t_final: f64,
    ) -> Result<Self, GridError> {
        if !(dxi > 0.0) {
            return Err(GridError::BadSpacing(dxi));
        }
        if !(dt > 0.0) {
            return Err(GridError::BadTimeStep(dt));
        }
        let n_space = ((xi_max - xi_min) / dxi).round() as usize;
        let n_steps = (t_final.max(0.0) / dt).round() as usize;
        Self::new(xi_min, xi_max, n_space, dt, n_steps)
    }

    /// Checks that the domain holds both boundary trajectories.
    pub fn check_domain(&self, tw: &TravelingWave) -> Result<(), GridError> {
        let left = tw.kappa_star - 1.0;
        if !(self.xi_min < left) {
            return Err(GridError::LeftTooNarrow {
                xi_min: self.xi_min,
                limit: left,
            });
        }
        let right = (1.0 / tw.gamma).ln() + 1.0;
        if !(self.xi_max > right) {
            return Err(GridError::RightTooNarrow {
                xi_max: self.xi_max,
                limit: right,
            });
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.n_space + 1
    }

    #[inline]
    pub fn xi(&self, j: usize) -> f64 {
        if j == self.n_space {
            self.xi_max
        } else {
            self.xi_min + j as f64 * self.dxi
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points()).map(|j| self.xi(j)).collect()
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.n_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub eps_penalty: f64,
    pub eps_heaviside: f64,
    pub tol_newton: f64,
    pub max_newton_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_penalty: 1e-8,
            eps_heaviside: 1e-3,
            tol_newton: 1e-4,
            max_newton_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must be > 0, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("max_newton_iters must be >= 2, got {0}")]
    TooFewIterations(usize),
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("eps_penalty", self.eps_penalty),
            ("eps_heaviside", self.eps_heaviside),
            ("tol_newton", self.tol_newton),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ConfigError::NotPositive { name, value });
            }
        }
        if self.max_newton_iters < 2 {
            return Err(ConfigError::TooFewIterations(self.max_newton_iters));
        }
        Ok(())
    }

    /// Default-boundary detection threshold `10ε + 10⁻⁶`.
    pub fn boundary_tolerance(&self) -> f64 {
        10.0 * self.eps_penalty + 1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error("vector of length {got} does not match grid with {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("step {step}: {source}")]
    Linear { step: usize, source: TridiagError },
    #[error("step {step}: penalty iteration did not converge in {iterations} iterations (last relative update {last_change:e})")]
    Newton {
        step: usize,
        iterations: usize,
        last_change: f64,
        last_iterate: Vec<f64>,
    },
    #[error("step {step}: {source}")]
    Boundary { step: usize, source: BoundaryError },
    #[error("snapshot time {0} lies outside the simulated horizon")]
    SnapshotOutOfRange(f64),
}

/// `U_{0,j} = min(1, e^{ξ_j})`.
pub fn initial_condition(grid: &Grid) -> Vec<f64> {
    (0..grid.n_points()).map(|j| grid.xi(j).exp().min(1.0)).collect()
}

/// Coefficient of `∂u/∂ξ`, `δ − ½σ²`.
#[inline]
pub fn convection_coefficient(sigma: f64, delta: f64) -> f64 {
    delta - 0.5 * sigma * sigma
}

/// Assembles the implicit step operator around `u_prev`, without penalty.
///
/// Row `j` of the interior holds the coefficients of
/// `U_j/Δt − ½σ_j² D²U_j − b_j D^{up}U_j` and `rhs_j = P_j/Δt`. The end
/// rows pin `U_0 = e^{ξ_min}` (default region) and `U_N = 1`.
pub fn assemble_system(
    u_prev: &[f64],
    grid: &Grid,
    p: &ValidatedParams,
    cfg: &SolverConfig,
) -> Result<TridiagonalSystem, SolveError> {
    let exp_xi: Vec<f64> = grid.nodes().iter().map(|x| x.exp()).collect();
    let mut sys = TridiagonalSystem::zeros(grid.n_points());
    assemble_into(&mut sys, u_prev, &exp_xi, grid, p, cfg)?;
    Ok(sys)
}

fn assemble_into(
    sys: &mut TridiagonalSystem,
    u_prev: &[f64],
    exp_xi: &[f64],
    grid: &Grid,
    p: &ValidatedParams,
    cfg: &SolverConfig,
) -> Result<(), SolveError> {
    let n = grid.n_points();
    if u_prev.len() != n {
        return Err(SolveError::Length {
            expected: n,
            got: u_prev.len(),
        });
    }
    let inv_dt = 1.0 / grid.dt;
    let inv_dx = 1.0 / grid.dxi;
    let inv_dx2 = inv_dx * inv_dx;
    for j in 1..n - 1 {
        let sigma = sigma_eff_unchecked(u_prev[j], exp_xi[j], p, cfg.eps_heaviside);
        let half_var = 0.5 * sigma * sigma * inv_dx2;
        let b = convection_coefficient(sigma, p.delta());
        let mut lower = -half_var;
        let mut diag = inv_dt + 2.0 * half_var;
        let mut upper = -half_var;
        if b >= 0.0 {
            upper -= b * inv_dx;
            diag += b * inv_dx;
        } else {
            lower += b * inv_dx;
            diag -= b * inv_dx;
        }
        sys.lower[j] = lower;
        sys.diag[j] = diag;
        sys.upper[j] = upper;
        sys.rhs[j] = u_prev[j] * inv_dt;
    }
    sys.lower[0] = 0.0;
    sys.diag[0] = 1.0;
    sys.upper[0] = 0.0;
    sys.rhs[0] = exp_xi[0];

    let last = n - 1;
    sys.lower[last] = 0.0;
    sys.diag[last] = 1.0;
    sys.upper[last] = 0.0;
    sys.rhs[last] = 1.0;
    Ok(())
}

/// Result of one penalized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
}

/// Reusable buffers for [`newton_penalty_solve`].
#[derive(Debug, Default)]
pub struct NewtonWorkspace {
    diag: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    next: Vec<f64>,
}

/// Solves `A U + ε⁻¹ (U − g)⁺ = rhs` for a fixed operator `A = sys`.
///
/// Starts from `u_prev`; iterate `k` solves the system with the penalty
/// linearized on `{U^{k−1} > g}`. Stops once that set is unchanged by the
/// update and `‖U^k − U^{k−1}‖∞ / max(1, ‖U^{k−1}‖∞) < tol`.
pub fn newton_penalty_solve(
    sys: &TridiagonalSystem,
    obstacle: &[f64],
    u_prev: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonOutcome, SolveError> {
    let mut ws = NewtonWorkspace::default();
    let mut u = u_prev.to_vec();
    let iterations = newton_in_place(sys, obstacle, &mut u, cfg, &mut ws, 0)?;
    Ok(NewtonOutcome { u, iterations })
}

fn newton_in_place(
    sys: &TridiagonalSystem,
    obstacle: &[f64],
    u: &mut Vec<f64>,
    cfg: &SolverConfig,
    ws: &mut NewtonWorkspace,
    step: usize,
) -> Result<usize, SolveError> {
    let n = sys.len();
    for v in [obstacle.len(), u.len()] {
        if v != n {
            return Err(SolveError::Length {
                expected: n,
                got: v,
            });
        }
    }
    ws.diag.resize(n, 0.0);
    ws.rhs.resize(n, 0.0);
    ws.scratch.resize(n, 0.0);
    ws.next.resize(n, 0.0);
    let inv_eps = 1.0 / cfg.eps_penalty;
    let mut last_change = f64::INFINITY;
    for k in 1..=cfg.max_newton_iters {
        ws.diag.copy_from_slice(&sys.diag);
        ws.rhs.copy_from_slice(&sys.rhs);
        // Boundary rows carry their own data and never take the penalty.
        for j in 1..n - 1 {
            if u[j] > obstacle[j] {
                ws.diag[j] += inv_eps;
                ws.rhs[j] += inv_eps * obstacle[j];
            }
        }
        solve_bands(
            &sys.lower,
            &ws.diag,
            &sys.upper,
            &ws.rhs,
            &mut ws.next,
            &mut ws.scratch,
        )
        .map_err(|source| SolveError::Linear { step, source })?;

        let mut diff = 0.0f64;
        let mut scale = 1.0f64;
        let mut same_set = true;
        for j in 0..n {
            diff = diff.max((ws.next[j] - u[j]).abs());
            scale = scale.max(u[j].abs());
            if j > 0 && j < n - 1 && (ws.next[j] > obstacle[j]) != (u[j] > obstacle[j]) {
                same_set = false;
            }
        }
        std::mem::swap(u, &mut ws.next);
        last_change = diff / scale;
        if same_set && last_change < cfg.tol_newton {
            return Ok(k);
        }
    }
    Err(SolveError::Newton {
        step,
        iterations: cfg.max_newton_iters,
        last_change,
        last_iterate: u.clone(),
    })
}

/// Stored state at one time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

/// Structural checks run on every assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MatrixStats {
    pub checked: usize,
    pub violations: usize,
    /// First step whose operator failed, if any.
    pub first_violation_step: Option<usize>,
}

/// Per-step quantities measured on every step, not only on snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepExtremes {
    /// Largest `U_{i,j} − U_{i−1,j}` over all steps and nodes.
    pub max_time_increase: f64,
    /// `(step, ξ)` where the largest time increase occurred.
    pub time_increase_at: (usize, f64),
    /// Largest `(U_{i,j} − e^{ξ_j})⁺` over all steps and nodes.
    pub max_penalty_excess: f64,
}

/// Output of a full march.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: Grid,
    /// Sparse snapshots in increasing step order; always holds step 0 and
    /// the final step.
    pub snapshots: Vec<Snapshot>,
    /// Boundary positions at every step, including step 0.
    pub trace: BoundaryTrace,
    /// `sup_j |U_{i,j} − e^{ξ_j}K(ξ_j)|` at every step.
    pub sup_error: Vec<f64>,
    /// Penalty iterations used at steps 1..=n_steps.
    pub newton_counts: Vec<u32>,
    pub matrix: MatrixStats,
    pub extremes: StepExtremes,
    pub wave: TravelingWave,
}

impl SolutionField {
    pub fn times(&self) -> &[f64] {
        &self.trace.times
    }

    pub fn snapshot_at_step(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }

    pub fn final_values(&self) -> &[f64] {
        &self.snapshots.last().expect("final snapshot always stored").values
    }

    /// Final-time `u` at `xi`, linear between nodes; `None` off the grid.
    pub fn final_value_at(&self, xi: f64) -> Option<f64> {
        let g = &self.grid;
        if !(xi >= g.xi_min && xi <= g.xi_max) {
            return None;
        }
        let u = self.final_values();
        let j = (((xi - g.xi_min) / g.dxi).floor() as usize).min(g.n_space - 1);
        let (x0, x1) = (g.xi(j), g.xi(j + 1));
        let w = (xi - x0) / (x1 - x0);
        Some(u[j] + w * (u[j + 1] - u[j]))
    }
}

/// Maps requested snapshot times onto step indices.
pub fn snapshot_steps(grid: &Grid, times: &[f64]) -> Result<Vec<usize>, SolveError> {
    let horizon = grid.final_time();
    let mut steps = vec![0, grid.n_steps];
    for &t in times {
        if !(t >= 0.0) || t > horizon + 0.5 * grid.dt {
            return Err(SolveError::SnapshotOutOfRange(t));
        }
        steps.push(((t / grid.dt).round() as usize).min(grid.n_steps));
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Marches the scheme from the payoff for `grid.n_steps` steps.
pub fn run_solver(
    p: &ValidatedParams,
    grid: &Grid,
    cfg: &SolverConfig,
    snapshot_times: &[f64],
) -> Result<SolutionField, SolveError> {
    cfg.validate()?;
    let wave = TravelingWave::build(p)?;
    grid.check_domain(&wave)?;
    let keep = snapshot_steps(grid, snapshot_times)?;

    let n = grid.n_points();
    let nodes = grid.nodes();
    let exp_xi: Vec<f64> = nodes.iter().map(|x| x.exp()).collect();
    let wave_row: Vec<f64> = nodes.iter().map(|&x| wave.u_value(x)).collect();
    let tol_b = cfg.boundary_tolerance();

    let mut u = initial_condition(grid);
    let mut trace = BoundaryTrace::with_capacity(grid.n_steps + 1);
    let mut sup_error = Vec::with_capacity(grid.n_steps + 1);
    let mut newton_counts = Vec::with_capacity(grid.n_steps);
    let mut snapshots = Vec::with_capacity(keep.len());
    let mut matrix = MatrixStats::default();
    let mut extremes = StepExtremes::default();
    let mut keep_iter = keep.iter().peekable();

    let mut record = |step: usize,
                      u: &[f64],
                      trace: &mut BoundaryTrace,
                      sup_error: &mut Vec<f64>,
                      snapshots: &mut Vec<Snapshot>|
     -> Result<(), SolveError> {
        let kappa = boundaries::extract_default_boundary(u, grid, tol_b);
        let eta = boundaries::extract_transit_boundary(u, grid, p.gamma())
            .map_err(|source| SolveError::Boundary { step, source })?;
        trace.push(grid.time(step), kappa, eta);
        sup_error.push(max_abs_diff(u, &wave_row));
        if keep_iter.peek() == Some(&&step) {
            keep_iter.next();
            snapshots.push(Snapshot {
                step,
                t: grid.time(step),
                values: u.to_vec(),
            });
        }
        Ok(())
    };

    record(0, &u, &mut trace, &mut sup_error, &mut snapshots)?;

    let mut sys = TridiagonalSystem::zeros(n);
    let mut ws = NewtonWorkspace::default();
    let mut prev = vec![0.0; n];
    for step in 1..=grid.n_steps {
        prev.copy_from_slice(&u);
        assemble_into(&mut sys, &prev, &exp_xi, grid, p, cfg)?;
        matrix.checked += 1;
        if !sys.is_m_matrix() {
            matrix.violations += 1;
            matrix.first_violation_step.get_or_insert(step);
        }
        let iters = newton_in_place(&sys, &exp_xi, &mut u, cfg, &mut ws, step)?;
        newton_counts.push(iters as u32);
        for j in 0..n {
            if u[j] - prev[j] > extremes.max_time_increase {
                extremes.max_time_increase = u[j] - prev[j];
                extremes.time_increase_at = (step, nodes[j]);
            }
            extremes.max_penalty_excess = extremes.max_penalty_excess.max(u[j] - exp_xi[j]);
        }
        record(step, &u, &mut trace, &mut sup_error, &mut snapshots)?;
    }

    Ok(SolutionField {
        grid: *grid,
        snapshots,
        trace,
        sup_error,
        newton_counts,
        matrix,
        extremes,
        wave,
    })
}

#[inline]
fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
