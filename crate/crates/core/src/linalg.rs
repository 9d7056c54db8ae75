//! Small dense and banded solvers used by the generic modules.

use crate::scalar::Real;

/// Thomas algorithm for a tridiagonal system. `sub[i]` couples row `i + 1`
/// to column `i`, `sup[i]` couples row `i` to column `i + 1`.
pub fn solve_tridiagonal<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Option<Vec<T>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom == T::zero() {
        return None;
    }
    c[0] = if n > 1 { sup[0] / denom } else { T::zero() };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i - 1] * c[i - 1];
        if denom == T::zero() {
            return None;
        }
        if i + 1 < n {
            c[i] = sup[i] / denom;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Some(d)
}

/// Solves a symmetric positive-definite banded system by Cholesky.
/// `bands[k][i]` holds `A[i][i + k]` for `k = 0..=bandwidth`.
pub fn solve_banded_spd<T: Real>(bands: &[Vec<T>], rhs: &[T]) -> Option<Vec<T>> {
    let n = rhs.len();
    let p = bands.len().saturating_sub(1);
    let at = |i: usize, j: usize| -> T {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = j - i;
        if k > p {
            T::zero()
        } else {
            bands[k][i]
        }
    };
    // lower factor, l[i][k] = L[i][i - k]
    let mut l = vec![vec![T::zero(); p + 1]; n];
    for i in 0..n {
        let lo = i.saturating_sub(p);
        for j in lo..=i {
            let mut s = at(i, j);
            let klo = lo.max(j.saturating_sub(p));
            for k in klo..j {
                s = s - l[i][i - k] * l[j][j - k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][0] = s.sqrt();
            } else {
                l[i][i - j] = s / l[j][0];
            }
        }
    }
    let mut z = rhs.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in i.saturating_sub(p)..i {
            s = s - l[i][i - k] * z[k];
        }
        z[i] = s / l[i][0];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..(i + p + 1).min(n) {
            s = s - l[k][k - i] * z[k];
        }
        z[i] = s / l[i][0];
    }
    Some(z)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Keeps only the listed columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                out.set(i, jj, self.get(i, j));
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let data = rows
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` when the pivot falls
/// below `tol` relative to the largest entry.
pub fn solve_dense<T: Real>(a: &Dense<T>, b: &[T], tol: T) -> Option<Vec<T>> {
    let n = a.rows;
    debug_assert_eq!(a.cols, n);
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    let scale = m
        .iter()
        .fold(T::zero(), |s, v| s.max(v.abs()))
        .max(T::min_positive_value());
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .abs()
                .partial_cmp(&m[j * n + col].abs())
                .unwrap()
        })?;
        if m[piv * n + col].abs() <= tol * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        let p = m[col * n + col];
        for i in col + 1..n {
            let f = m[i * n + col] / p;
            if f != T::zero() {
                for k in col..n {
                    m[i * n + k] = m[i * n + k] - f * m[col * n + k];
                }
                x[i] = x[i] - f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s = s - m[i * n + k] * x[k];
        }
        x[i] = s / m[i * n + i];
    }
    Some(x)
}

/// Indices of a maximal linearly independent subset of `rows`, chosen
/// greedily in order by Gram-Schmidt with relative tolerance `tol`.
pub fn independent_rows<T: Real>(rows: &[Vec<T>], tol: T) -> Vec<usize> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut keep = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let norm0 = dot(r, r).sqrt();
        if norm0 == T::zero() {
            continue;
        }
        let mut v = r.clone();
        // two passes for stability
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (vi, &bi) in v.iter_mut().zip(b) {
                    *vi = *vi - c * bi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > tol * norm0 {
            v.iter_mut().for_each(|x| *x = *x / norm);
            basis.push(v);
            keep.push(i);
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense() {
        let sub = [1.0, 2.0, 0.5];
        let diag = [4.0_f64, 5.0, 6.0, 3.0];
        let sup = [1.0, -1.0, 0.25];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        let mut a = Dense::zeros(4, 4);
        for i in 0..4 {
            a.set(i, i, diag[i]);
        }
        for i in 0..3 {
            a.set(i + 1, i, sub[i]);
            a.set(i, i + 1, sup[i]);
        }
        let y = solve_dense(&a, &rhs, 1e-14).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn banded_cholesky_matches_dense() {
        let n = 6;
        let d0: Vec<f64> = (0..n).map(|i| 6.0 + i as f64).collect();
        let d1: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    -1.0 - 0.1 * i as f64
                } else {
                    0.0
                }
            })
            .collect();
        let d2: Vec<f64> = (0..n).map(|i| if i + 2 < n { 0.5 } else { 0.0 }).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_banded_spd(&[d0.clone(), d1.clone(), d2.clone()], &rhs).unwrap();
        let mut a = Dense::zeros(n, n);
        for i in 0..n {
            a.set(i, i, d0[i]);
            if i + 1 < n {
                a.set(i, i + 1, d1[i]);
                a.set(i + 1, i, d1[i]);
            }
            if i + 2 < n {
                a.set(i, i + 2, d2[i]);
                a.set(i + 2, i, d2[i]);
            }
        }
        let y = solve_dense(&a, &rhs, 1e-14).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_and_rank() {
        let a = Dense::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve_dense(&a, &[1.0, 2.0], 1e-12).is_none());
        let rows = vec![
            vec![1.0, 0.0, 1.0],
            vec![2.0, 0.0, 2.0],
            vec![0.0, 1.0, 0.0],
        ];
        assert_eq!(independent_rows(&rows, 1e-10), vec![0, 2]);
    }
}
