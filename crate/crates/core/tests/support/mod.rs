//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Squared distance from `r` to the convex hull of `vertices`, by Wolfe's
/// minimum-norm-point algorithm on the shifted points v_i - r.
pub fn hull_distance_sq(vertices: &[Vec<f64>], r: &[f64]) -> f64 {
    let pts: Vec<DVector<f64>> = vertices
        .iter()
        .map(|v| DVector::from_iterator(r.len(), v.iter().zip(r).map(|(a, b)| a - b)))
        .collect();
    let scale = pts.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-13;

    let start = (0..pts.len())
        .min_by(|&a, &b| pts[a].norm_squared().total_cmp(&pts[b].norm_squared()))
        .expect("at least one vertex");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = pts[start].clone();

    for _ in 0..10_000 {
        let (j, best) = (0..pts.len())
            .map(|j| (j, x.dot(&pts[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if best >= x.norm_squared() - tol * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            let alpha = affine_minimizer(&pts, &active);
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-14 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let keep: Vec<usize> = (0..active.len()).filter(|&i| lambda[i] > 1e-14).collect();
            active = keep.iter().map(|&i| active[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
        x = active
            .iter()
            .zip(&lambda)
            .fold(DVector::zeros(r.len()), |acc, (&i, &l)| acc + &pts[i] * l);
    }
    x.norm_squared()
}

/// argmin ||sum a_i p_i|| subject to sum a_i = 1 over the active points.
fn affine_minimizer(pts: &[DVector<f64>], active: &[usize]) -> Vec<f64> {
    let m = active.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            kkt[(a, b)] = pts[i].dot(&pts[j]);
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| kkt.pseudo_inverse(1e-12).expect("pseudo-inverse") * &rhs);
    sol.rows(0, m).iter().copied().collect()
}

/// Row-major sign patterns of length `len` for every mask.
pub fn signs(mask: u64, len: usize) -> Vec<f64> {
    (0..len).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}
