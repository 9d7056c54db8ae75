//! Dense two-phase simplex for `min cᵀx  s.t.  A x = b, x >= 0`.
//!
//! Bland's rule throughout, so the method cannot cycle. Intended for the
//! small polytopes of the maximum-entropy module.

use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal {
        x: Vec<T>,
        value: T,
    },
    /// No `x >= 0` satisfies `A x = b`; `residual` is the minimal
    /// `‖A x - b‖₁` reached by phase one.
    Infeasible {
        residual: T,
    },
    Unbounded,
}

const MAX_PIVOTS: usize = 50_000;

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    width: usize,
}

impl<T: Real> Tableau<T> {
    fn rhs(&self, i: usize) -> T {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v = *v / p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                if f != T::zero() {
                    for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                        *v = *v - f * pv;
                    }
                }
            }
        }
        self.basis[r] = col;
    }

    /// Reduced costs of `cost` (indexed by column) under the current basis.
    fn reduced(&self, cost: &[T]) -> Vec<T> {
        let mut red: Vec<T> = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != T::zero() {
                for (j, r) in red.iter_mut().enumerate() {
                    *r = *r - cb * self.rows[i][j];
                }
            }
        }
        red
    }

    /// Runs Bland pivots on `cost` over the columns `allowed`. Returns
    /// `Ok(false)` when unbounded.
    fn optimize(&mut self, cost: &[T], allowed: &[bool], tol: T) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let red = self.reduced(cost);
            let Some(col) = (0..self.width).find(|&j| allowed[j] && red[j] < -tol) else {
                return Ok(true);
            };
            let mut best: Option<(T, usize, usize)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > tol {
                    let ratio = self.rhs(i) / a;
                    let better = match best {
                        None => true,
                        Some((r, _, b)) => {
                            ratio < r - tol || (ratio <= r + tol && self.basis[i] < b)
                        }
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((_, r, _)) => self.pivot(r, col),
            }
        }
        Err(Error::Convergence {
            iterations: MAX_PIVOTS,
            residual: f64::NAN,
        })
    }
}

/// Solves `min cᵀx` over `{x >= 0 : A x = b}`.
pub fn minimize<T: Real>(c: &[T], a: &Dense<T>, b: &[T], tol: T) -> Result<LpOutcome<T>> {
    let (m, n) = (a.rows, a.cols);
    if c.len() != n || b.len() != m {
        return Err(Error::usage("linear program dimensions disagree"));
    }
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        let mut row = vec![T::zero(); width + 1];
        for j in 0..n {
            row[j] = sign * a.get(i, j);
        }
        row[n + i] = T::one();
        row[width] = sign * b[i];
        rows.push(row);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };
    let scale = b.iter().fold(T::one(), |s, v| s.max(v.abs()));

    let mut phase1 = vec![T::zero(); width];
    phase1[n..].iter_mut().for_each(|v| *v = T::one());
    let all = vec![true; width];
    tab.optimize(&phase1, &all, tol)?;
    let infeasibility: T = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i))
        .sum();
    if infeasibility > tol * scale {
        return Ok(LpOutcome::Infeasible {
            residual: infeasibility,
        });
    }

    // drive zero-level artificials out of the basis where possible
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.rows[i][j].abs() > tol) {
                tab.pivot(i, j);
            }
        }
    }

    let mut cost = vec![T::zero(); width];
    cost[..n].copy_from_slice(c);
    let mut allowed = vec![true; width];
    allowed[n..].iter_mut().for_each(|v| *v = false);
    if !tab.optimize(&cost, &allowed, tol)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![T::zero(); n];
    for (i, &bcol) in tab.basis.iter().enumerate() {
        if bcol < n {
            x[bcol] = tab.rhs(i).max(T::zero());
        }
    }
    let value = c.iter().zip(&x).map(|(&ci, &xi)| ci * xi).sum();
    Ok(LpOutcome::Optimal { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = Dense::from_rows(&[vec![1.0_f64, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]]);
        match minimize(&[-1.0, -1.0, 0.0, 0.0], &a, &[4.0, 6.0], 1e-12).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
                assert!((value + 2.8).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = Dense::from_rows(&[vec![1.0_f64, 1.0]]);
        assert!(matches!(
            minimize(&[0.0, 0.0], &a, &[-1.0], 1e-12).unwrap(),
            LpOutcome::Infeasible { residual } if (residual - 1.0).abs() < 1e-12
        ));
        let a = Dense::from_rows(&[vec![1.0, -1.0]]);
        assert_eq!(
            minimize(&[-1.0, 0.0], &a, &[1.0], 1e-12).unwrap(),
            LpOutcome::Unbounded
        );
    }

    #[test]
    fn redundant_rows() {
        let a = Dense::from_rows(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]]);
        match minimize(&[1.0, 2.0, 3.0], &a, &[1.0, 2.0], 1e-12).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![1.0, 0.0, 0.0]);
                assert_eq!(value, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
