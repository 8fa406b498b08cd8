//! Banded storage and Thomas elimination for tridiagonal systems.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TridiagError {
    #[error("band lengths disagree: lower {lower}, diag {diag}, upper {upper}, rhs {rhs}")]
    Shape {
        lower: usize,
        diag: usize,
        upper: usize,
        rhs: usize,
    },
    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },
}

/// `lower[i]` multiplies `x[i-1]` and `upper[i]` multiplies `x[i+1]` in row
/// `i`; `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn check_shape(&self) -> Result<(), TridiagError> {
        let n = self.diag.len();
        if self.lower.len() != n || self.upper.len() != n || self.rhs.len() != n {
            return Err(TridiagError::Shape {
                lower: self.lower.len(),
                diag: n,
                upper: self.upper.len(),
                rhs: self.rhs.len(),
            });
        }
        Ok(())
    }

    /// `A x` using the stored bands.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Structural M-matrix test: positive diagonal, non-positive
    /// off-diagonals and strict row diagonal dominance.
    pub fn is_m_matrix(&self) -> bool {
        self.first_m_matrix_violation().is_none()
    }

    /// Index of the first row breaking the M-matrix structure, if any.
    pub fn first_m_matrix_violation(&self) -> Option<usize> {
        let n = self.len();
        (0..n).find(|&i| {
            let lo = if i > 0 { self.lower[i] } else { 0.0 };
            let up = if i + 1 < n { self.upper[i] } else { 0.0 };
            !(self.diag[i] > 0.0 && lo <= 0.0 && up <= 0.0 && self.diag[i] > lo.abs() + up.abs())
        })
    }
}

/// Solves the system by Thomas elimination; O(n).
pub fn thomas_solve(sys: &TridiagonalSystem) -> Result<Vec<f64>, TridiagError> {
    sys.check_shape()?;
    let n = sys.len();
    let mut x = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    solve_bands(&sys.lower, &sys.diag, &sys.upper, &sys.rhs, &mut x, &mut scratch)?;
    Ok(x)
}

/// Allocation-free Thomas sweep. `out` and `scratch` must have the band length.
pub(crate) fn solve_bands(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<(), TridiagError> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(TridiagError::ZeroPivot { row: 0 });
    }
    out[0] = rhs[0] / pivot;
    for i in 1..n {
        scratch[i] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i] * scratch[i];
        if pivot == 0.0 {
            return Err(TridiagError::ZeroPivot { row: i });
        }
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i + 1] * out[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let mut sys = TridiagonalSystem::zeros(4);
        sys.diag.fill(1.0);
        sys.rhs = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(thomas_solve(&sys).unwrap(), sys.rhs);
    }

    #[test]
    fn two_by_two_by_hand() {
        let sys = TridiagonalSystem {
            lower: vec![0.0, -1.0],
            diag: vec![2.0, 2.0],
            upper: vec![-1.0, 0.0],
            rhs: vec![1.0, 1.0],
        };
        let x = thomas_solve(&sys).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_dominant_system_matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut sys = TridiagonalSystem::zeros(n);
        for i in 0..n {
            sys.lower[i] = if i > 0 { rng.random_range(-1.0..1.0) } else { 0.0 };
            sys.upper[i] = if i + 1 < n { rng.random_range(-1.0..1.0) } else { 0.0 };
            sys.diag[i] = sys.lower[i].abs() + sys.upper[i].abs() + rng.random_range(0.1..2.0);
            if rng.random_bool(0.5) {
                sys.diag[i] = -sys.diag[i];
            }
            sys.rhs[i] = rng.random_range(-5.0..5.0);
        }
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = sys.diag[i];
            if i > 0 {
                dense[i][i - 1] = sys.lower[i];
            }
            if i + 1 < n {
                dense[i][i + 1] = sys.upper[i];
            }
        }
        let x = thomas_solve(&sys).unwrap();
        let oracle = dense_solve(dense, sys.rhs.clone());
        let bnorm = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let resid = sys
            .apply(&x)
            .iter()
            .zip(&sys.rhs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(resid <= 1e-12 * bnorm);
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_pivot_and_shape_errors() {
        let sys = TridiagonalSystem {
            lower: vec![0.0, 1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0, 0.0],
            rhs: vec![1.0, 1.0],
        };
        assert_eq!(thomas_solve(&sys), Err(TridiagError::ZeroPivot { row: 1 }));
        let bad = TridiagonalSystem {
            lower: vec![0.0],
            diag: vec![1.0, 1.0],
            upper: vec![0.0, 0.0],
            rhs: vec![0.0, 0.0],
        };
        assert!(matches!(thomas_solve(&bad), Err(TridiagError::Shape { .. })));
    }

    #[test]
    fn m_matrix_check() {
        let heat = TridiagonalSystem {
            lower: vec![0.0, -1.0, -1.0],
            diag: vec![3.0, 3.0, 3.0],
            upper: vec![-1.0, -1.0, 0.0],
            rhs: vec![0.0; 3],
        };
        assert!(heat.is_m_matrix());
        let mut positive_off = heat.clone();
        positive_off.upper[1] = 0.5;
        assert_eq!(positive_off.first_m_matrix_violation(), Some(1));
        let mut weak = heat.clone();
        weak.diag[1] = 2.0;
        assert!(!weak.is_m_matrix());
        // ignored corners do not count against the row.
        let mut corner = heat;
        corner.lower[0] = 7.0;
        corner.upper[2] = 7.0;
        assert!(corner.is_m_matrix());
    }
}
