//! Minimal enclosing Euclidean balls.

use crate::linalg::{dot, independent_rows, solve_dense, Dense};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    fn contains(&self, p: &[T], slack: T) -> bool {
        self.radius >= T::zero() && dist(&self.center, p) <= self.radius + slack
    }
}

pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Largest pairwise distance.
pub fn diameter<T: Real>(points: &[Vec<T>]) -> T {
    let mut d = T::zero();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max(dist(&points[i], &points[j]));
        }
    }
    d
}

/// Smallest ball whose boundary passes through all of `boundary`, centered in
/// their affine hull.
fn circumball<T: Real>(points: &[Vec<T>], boundary: &[usize]) -> Ball<T> {
    let Some(&first) = boundary.first() else {
        return Ball {
            center: Vec::new(),
            radius: -T::one(),
        };
    };
    let p0 = &points[first];
    let dirs: Vec<Vec<T>> = boundary[1..]
        .iter()
        .map(|&i| points[i].iter().zip(p0).map(|(&a, &b)| a - b).collect())
        .collect();
    let keep = independent_rows(&dirs, T::tol(1e-10));
    let k = keep.len();
    let mut center = p0.clone();
    if k > 0 {
        let mut gram = Dense::zeros(k, k);
        let mut rhs = vec![T::zero(); k];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                gram.set(a, b, T::lit(2.0) * dot(&dirs[i], &dirs[j]));
            }
            rhs[a] = dot(&dirs[i], &dirs[i]);
        }
        if let Some(coef) = solve_dense(&gram, &rhs, T::tol(1e-14)) {
            for (c, &i) in coef.iter().zip(&keep) {
                for (x, &d) in center.iter_mut().zip(&dirs[i]) {
                    *x = *x + *c * d;
                }
            }
        }
    }
    let radius = boundary
        .iter()
        .map(|&i| dist(&center, &points[i]))
        .fold(T::zero(), T::max);
    Ball { center, radius }
}

fn move_to_front<T: Real>(
    points: &[Vec<T>],
    order: &mut Vec<usize>,
    end: usize,
    boundary: &mut Vec<usize>,
    max_boundary: usize,
    slack: T,
) -> Ball<T> {
    let mut ball = circumball(points, boundary);
    if boundary.len() == max_boundary {
        return ball;
    }
    for i in 0..end {
        let p = order[i];
        if !ball.contains(&points[p], slack) {
            boundary.push(p);
            ball = move_to_front(points, order, i, boundary, max_boundary, slack);
            boundary.pop();
            let moved = order.remove(i);
            order.insert(0, moved);
        }
    }
    ball
}

/// Welzl's move-to-front algorithm. Points are processed in the given
/// order, so the result is deterministic.
pub fn min_enclosing_ball<T: Real>(points: &[Vec<T>]) -> Ball<T> {
    if points.is_empty() {
        return Ball {
            center: Vec::new(),
            radius: -T::one(),
        };
    }
    let dim = points[0].len();
    let scale = points
        .iter()
        .flatten()
        .fold(T::zero(), |s, v| s.max(v.abs()))
        .max(T::one());
    let slack = T::tol(1e-12) * scale;
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut boundary = Vec::with_capacity(dim + 1);
    move_to_front(
        points,
        &mut order,
        points.len(),
        &mut boundary,
        dim + 1,
        slack,
    )
}
