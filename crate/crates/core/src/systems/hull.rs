//! Distance to the convex hull of finitely many points (Wolfe's
//! minimum-norm-point algorithm).

use crate::linalg::{dot, norm, norm_sq, sub};

const MAX_ITERS: usize = 1000;

/// Point of `conv(points)` closest to the origin, with its convex weights.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert!(!points.is_empty(), "convex hull of an empty set");
    let n = points[0].len();
    let scale = points.iter().map(|p| norm_sq(p)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;

    let start = (0..points.len())
        .min_by(|&a, &b| norm_sq(&points[a]).total_cmp(&norm_sq(&points[b])))
        .expect("nonempty");
    let mut active = vec![start];
    let mut w = vec![1.0];

    let combine = |active: &[usize], w: &[f64]| {
        let mut x = vec![0.0; n];
        for (&i, &wi) in active.iter().zip(w) {
            for (xd, pd) in x.iter_mut().zip(&points[i]) {
                *xd += wi * pd;
            }
        }
        x
    };

    for _ in 0..MAX_ITERS {
        let x = combine(&active, &w);
        let xx = norm_sq(&x);
        let (j, best) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if best >= xx - tol || active.contains(&j) {
            break;
        }
        active.push(j);
        w.push(0.0);

        for _ in 0..MAX_ITERS {
            let a = affine_min_norm(points, &active);
            if a.iter().all(|&v| v > 1e-15) {
                let total: f64 = a.iter().sum();
                w = a.iter().map(|v| v / total).collect();
                break;
            }
            let mut theta = 1.0f64;
            for (&wi, &ai) in w.iter().zip(&a) {
                if ai <= 1e-15 && wi - ai > 0.0 {
                    theta = theta.min(wi / (wi - ai));
                }
            }
            for (wi, ai) in w.iter_mut().zip(&a) {
                *wi = theta * ai + (1.0 - theta) * *wi;
            }
            let mut i = 0;
            while i < active.len() {
                if w[i] <= 1e-15 {
                    active.remove(i);
                    w.remove(i);
                } else {
                    i += 1;
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
        }
    }

    let x = combine(&active, &w);
    let mut weights = vec![0.0; points.len()];
    for (&i, &wi) in active.iter().zip(&w) {
        weights[i] += wi;
    }
    (x, weights)
}

/// `|v − conv(points)|`.
pub fn hull_distance(points: &[Vec<f64>], v: &[f64]) -> f64 {
    if points.len() == 1 {
        return norm(&sub(&points[0], v));
    }
    let shifted: Vec<Vec<f64>> = points.iter().map(|p| sub(p, v)).collect();
    norm(&min_norm_point(&shifted).0)
}

/// Weights `a` (summing to one) of the point of the affine hull of the
/// selected points nearest the origin.
pub(crate) fn affine_min_norm(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let m = idx.len();
    // KKT system [G 1; 1ᵀ 0] [a; λ] = [0; 1].
    let mut a = vec![vec![0.0; m + 2]; m + 1];
    for r in 0..m {
        for c in 0..m {
            a[r][c] = dot(&points[idx[r]], &points[idx[c]]);
        }
        a[r][m] = 1.0;
        a[m][r] = 1.0;
    }
    a[m][m + 1] = 1.0;
    let sol = solve(a, m + 1);
    sol[..m].to_vec()
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
/// A vanishing pivot is replaced by a tiny ridge term.
fn solve(mut a: Vec<Vec<f64>>, n: usize) -> Vec<f64> {
    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("nonempty");
        a.swap(col, piv);
        if a[col][col].abs() < 1e-14 * scale {
            a[col][col] = 1e-14 * scale;
        }
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}
