//! Invariant suite for computed solutions.
//!
//! Every check reports the worst observed value of its defect next to the
//! tolerance it is held to, so a failing run says how badly and where.

use serde::Serialize;

use crate::solver::{SolutionField, SolverConfig};
use crate::traveling_wave::TravelingWave;
use crate::tridiag::TridiagonalSystem;

/// Pointwise slack on snapshot invariants, `10ε + 10⁻⁸`.
pub fn snapshot_slack(cfg: &SolverConfig) -> f64 {
    10.0 * cfg.eps_penalty + 1e-8
}

/// Allowed per-step rise of the sup-error series.
pub const SUP_ERROR_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub t: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst defect found; the check passes when it is at most `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub location: Option<Location>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupErrorSummary {
    pub initial: f64,
    pub last: f64,
    pub max_step_increase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonStats {
    pub steps: usize,
    pub total_iterations: u64,
    pub mean: f64,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySummary {
    pub t_final: f64,
    pub kappa_hat: f64,
    pub eta_hat: f64,
    pub kappa_star: f64,
    pub eta_star: f64,
    pub kappa_gap_cells: f64,
    pub eta_gap_cells: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<InvariantCheck>,
    pub sup_error: SupErrorSummary,
    pub newton: NewtonStats,
    pub boundaries: BoundarySummary,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Plain-text table, one line per invariant.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<30} {:>6} {:>14} {:>12}  {}\n",
            "invariant", "status", "worst", "tolerance", "where"
        );
        for c in &self.checks {
            let place = c
                .location
                .map(|l| match l.xi.is_nan() {
                    true => format!("t={:.4}", l.t),
                    false => format!("t={:.4} xi={:.4}", l.t, l.xi),
                })
                .unwrap_or_default();
            out.push_str(&format!(
                "{:<30} {:>6} {:>14.6e} {:>12.3e}  {}\n",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.worst,
                c.tolerance,
                place
            ));
        }
        out
    }
}

/// Worst defect tracker.
struct Worst {
    value: f64,
    at: Option<Location>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: None,
        }
    }

    fn offer(&mut self, value: f64, t: f64, xi: f64) {
        if value > self.value {
            self.value = value;
            self.at = Some(Location { t, xi });
        }
    }

    fn finish(self, name: &'static str, tolerance: f64) -> InvariantCheck {
        // No samples means nothing could be violated.
        let worst = if self.value.is_finite() { self.value } else { 0.0 };
        InvariantCheck {
            name,
            passed: worst <= tolerance,
            worst,
            tolerance,
            location: self.at,
        }
    }
}

/// True iff the matrix has a positive diagonal, non-positive off-diagonals
/// and strict row diagonal dominance.
pub fn check_m_matrix(sys: &TridiagonalSystem) -> bool {
    sys.is_m_matrix()
}

/// Evaluates the full invariant list on a solved field.
pub fn check_invariants(
    field: &SolutionField,
    tw: &TravelingWave,
    cfg: &SolverConfig,
) -> DiagnosticsReport {
    let grid = &field.grid;
    let slack = snapshot_slack(cfg);
    let cell = grid.dxi;
    let nodes = grid.nodes();
    let exp_xi: Vec<f64> = nodes.iter().map(|x| x.exp()).collect();
    let mut checks = Vec::new();

    let mut init = Worst::new();
    if let Some(s0) = field.snapshot_at_step(0) {
        for (j, (&u, &e)) in s0.values.iter().zip(&exp_xi).enumerate() {
            init.offer((u - e.min(1.0)).abs(), 0.0, nodes[j]);
        }
    } else {
        init.offer(f64::INFINITY, 0.0, grid.xi_min);
    }
    checks.push(init.finish("initial_condition", 0.0));

    let mut bounds = Worst::new();
    let mut u_mono = Worst::new();
    let mut v_mono = Worst::new();
    let mut concave = Worst::new();
    let mut penalty = Worst::new();
    for snap in &field.snapshots {
        let u = &snap.values;
        let t = snap.t;
        let v: Vec<f64> = u.iter().zip(&exp_xi).map(|(u, e)| u / e).collect();
        for j in 0..u.len() {
            let cap = exp_xi[j].min(1.0);
            bounds.offer((u[j] - cap).max(-u[j]), t, nodes[j]);
            penalty.offer(u[j] - exp_xi[j], t, nodes[j]);
            if j + 1 < u.len() {
                u_mono.offer(u[j] - u[j + 1], t, nodes[j]);
                v_mono.offer(v[j + 1] - v[j], t, nodes[j]);
            }
            if j > 0 && j + 1 < u.len() {
                // Δξ² (v″ + v′) with centred differences.
                let d2 = v[j + 1] - 2.0 * v[j] + v[j - 1];
                let d1 = 0.5 * cell * (v[j + 1] - v[j - 1]);
                concave.offer(d2 + d1, t, nodes[j]);
            }
        }
    }
    checks.push(bounds.finish("bounds", slack));
    checks.push(u_mono.finish("u_nondecreasing_in_xi", slack));
    checks.push(v_mono.finish("v_nonincreasing_in_xi", slack));
    checks.push(concave.finish("v_xixi_plus_v_xi_nonpositive", slack));

    let mut in_time = Worst::new();
    for pair in field.snapshots.windows(2) {
        for j in 0..pair[0].values.len() {
            in_time.offer(pair[1].values[j] - pair[0].values[j], pair[1].t, nodes[j]);
        }
    }
    let (step, xi) = field.extremes.time_increase_at;
    if field.extremes.max_time_increase > 0.0 {
        in_time.offer(field.extremes.max_time_increase, grid.time(step), xi);
    }
    checks.push(in_time.finish("u_nonincreasing_in_t", slack));

    if field.extremes.max_penalty_excess > penalty.value {
        penalty.value = field.extremes.max_penalty_excess;
        penalty.at = None;
    }
    checks.push(penalty.finish("penalty_consistency", 10.0 * cfg.eps_penalty));

    checks.push(InvariantCheck {
        name: "m_matrix",
        passed: field.matrix.violations == 0,
        worst: field.matrix.violations as f64,
        tolerance: 0.0,
        location: field.matrix.first_violation_step.map(|s| Location {
            t: grid.time(s),
            xi: f64::NAN,
        }),
    });

    let trace = &field.trace;
    let mut kappa_up = Worst::new();
    let mut eta_up = Worst::new();
    let mut separation = Worst::new();
    for i in 0..trace.len() {
        let t = trace.times[i];
        separation.offer(trace.kappa_hat[i] - trace.eta_hat[i], t, trace.kappa_hat[i]);
        if i + 1 < trace.len() {
            let t1 = trace.times[i + 1];
            kappa_up.offer(trace.kappa_hat[i + 1] - trace.kappa_hat[i], t1, trace.kappa_hat[i + 1]);
            eta_up.offer(trace.eta_hat[i + 1] - trace.eta_hat[i], t1, trace.eta_hat[i + 1]);
        }
    }
    checks.push(kappa_up.finish("kappa_hat_nonincreasing", cell));
    checks.push(eta_up.finish("eta_hat_nonincreasing", cell));
    // Strict separation: the worst value of κ̂ − η̂ has to stay negative.
    let sep = separation.finish("boundaries_separated", 0.0);
    checks.push(InvariantCheck {
        passed: sep.worst < 0.0,
        ..sep
    });

    if !trace.is_empty() {
        let n = trace.len();
        let initial_gap = trace.eta_hat[0] - trace.kappa_hat[0];
        let final_gap = trace.eta_hat[n - 1] - trace.kappa_hat[n - 1];
        let floor = initial_gap.min(final_gap) - cell;
        let mut narrowing = Worst::new();
        for i in 0..n {
            narrowing.offer(floor - (trace.eta_hat[i] - trace.kappa_hat[i]), trace.times[i], trace.kappa_hat[i]);
        }
        checks.push(narrowing.finish("separation_floor", 0.0));

        let mut start = Worst::new();
        start.offer(trace.kappa_hat[0].abs(), 0.0, trace.kappa_hat[0]);
        start.offer((trace.eta_hat[0] - (1.0 / tw.gamma).ln()).abs(), 0.0, trace.eta_hat[0]);
        checks.push(start.finish("initial_boundaries", cell));
    }

    let mut rise = Worst::new();
    for (i, w) in field.sup_error.windows(2).enumerate() {
        rise.offer(w[1] - w[0], grid.time(i + 1), f64::NAN);
    }
    let max_step_increase = if rise.value.is_finite() { rise.value } else { 0.0 };
    checks.push(rise.finish("sup_error_nonincreasing", SUP_ERROR_SLACK));

    let total: u64 = field.newton_counts.iter().map(|&c| c as u64).sum();
    let newton = NewtonStats {
        steps: field.newton_counts.len(),
        total_iterations: total,
        mean: if field.newton_counts.is_empty() {
            0.0
        } else {
            total as f64 / field.newton_counts.len() as f64
        },
        max: field.newton_counts.iter().copied().max().unwrap_or(0),
    };

    let (t_final, kappa_hat, eta_hat) = trace.last().unwrap_or((0.0, f64::NAN, f64::NAN));
    let boundaries = BoundarySummary {
        t_final,
        kappa_hat,
        eta_hat,
        kappa_star: tw.kappa_star,
        eta_star: tw.eta_star,
        kappa_gap_cells: (kappa_hat - tw.kappa_star).abs() / cell,
        eta_gap_cells: (eta_hat - tw.eta_star).abs() / cell,
    };

    DiagnosticsReport {
        checks,
        sup_error: SupErrorSummary {
            initial: field.sup_error.first().copied().unwrap_or(f64::NAN),
            last: field.sup_error.last().copied().unwrap_or(f64::NAN),
            max_step_increase,
        },
        newton,
        boundaries,
    }
}
