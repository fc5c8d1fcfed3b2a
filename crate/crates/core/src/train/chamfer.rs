//! Symmetric nearest-neighbor reconstruction loss between two point sets.
//!
//! Both directions average plain Euclidean distances (not squared). The
//! subgradient at coincident points is pinned to zero and nearest-neighbor
//! ties resolve to the lowest index, so the gradient is deterministic.

use nalgebra::Vector3;
use ndarray::{Array2, ArrayView2};

use crate::geom::PointCloud;
use crate::train::TrainError;

/// Index and distance of the nearest row of `pts` to `q`, scanning in index
/// order with a strict comparison so ties keep the lowest index.
fn nearest(q: &Vector3<f64>, pts: &[Vector3<f64>]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let d = (q - p).norm();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn row(v: &ArrayView2<f64>, i: usize) -> Vector3<f64> {
    Vector3::new(v[[i, 0]], v[[i, 1]], v[[i, 2]])
}

/// Loss and its gradient with respect to the `recon` rows.
///
/// `recon` is an `(M, 3)` matrix of reconstructed points, `target` the
/// reference set. Returns the scalar loss together with an `(M, 3)`
/// gradient (no batch scaling applied).
pub fn chamfer_and_grad(
    recon: &ArrayView2<f64>,
    target: &[Vector3<f64>],
) -> Result<(f64, Array2<f64>), TrainError> {
    let m = recon.nrows();
    if m == 0 || target.is_empty() {
        return Err(TrainError::EmptyPointSet);
    }
    let recon_pts: Vec<Vector3<f64>> = (0..m).map(|i| row(recon, i)).collect();
    let mut grad = Array2::<f64>::zeros((m, 3));
    let inv_m = 1.0 / m as f64;
    let inv_t = 1.0 / target.len() as f64;

    let mut loss = 0.0;
    // Reconstruction to target: every reconstructed point pulls toward its
    // nearest reference point.
    for (i, r) in recon_pts.iter().enumerate() {
        let (j, d) = nearest(r, target);
        loss += inv_m * d;
        if d > 0.0 {
            let u = (r - target[j]) / d;
            for a in 0..3 {
                grad[[i, a]] += inv_m * u[a];
            }
        }
    }
    // Target to reconstruction: every reference point pulls its nearest
    // reconstructed point toward itself.
    for t in target {
        let (i, d) = nearest(t, &recon_pts);
        loss += inv_t * d;
        if d > 0.0 {
            let u = (recon_pts[i] - t) / d;
            for a in 0..3 {
                grad[[i, a]] += inv_t * u[a];
            }
        }
    }
    Ok((loss, grad))
}

/// Symmetric mean nearest-neighbor distance between two clouds.
pub fn chamfer_loss(a: &PointCloud, b: &PointCloud) -> Result<f64, TrainError> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(TrainError::EmptyPointSet);
    }
    let mut loss = 0.0;
    for p in &a.points {
        loss += nearest(p, &b.points).1 / a.points.len() as f64;
    }
    for q in &b.points {
        loss += nearest(q, &a.points).1 / b.points.len() as f64;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn identical_sets_have_zero_loss() {
        let a = cloud(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.5], [0.0, 0.0, 0.0]]);
        assert_eq!(chamfer_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn unit_offset_pair_scores_two() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_loss(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn loss_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut rand_cloud = |n: usize| {
            PointCloud::new(
                (0..n)
                    .map(|_| {
                        Vector3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect(),
            )
        };
        let a = rand_cloud(17);
        let b = rand_cloud(23);
        let ab = chamfer_loss(&a, &b).unwrap();
        let ba = chamfer_loss(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-15, "{ab} vs {ba}");
        assert!(ab > 0.0);
    }

    #[test]
    fn matches_brute_force_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = |n: usize| -> Vec<Vector3<f64>> {
            (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    )
                })
                .collect()
        };
        let a = pts(50);
        let b = pts(60);

        // Independent double-loop accumulation.
        let mut want = 0.0;
        for p in &a {
            let d = b
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            want += d / a.len() as f64;
        }
        for q in &b {
            let d = a
                .iter()
                .map(|p| (q - p).norm())
                .fold(f64::INFINITY, f64::min);
            want += d / b.len() as f64;
        }

        let got = chamfer_loss(&PointCloud::new(a), &PointCloud::new(b)).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_set_is_an_error() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let e = cloud(&[]);
        assert!(matches!(chamfer_loss(&a, &e), Err(TrainError::EmptyPointSet)));
        assert!(matches!(chamfer_loss(&e, &a), Err(TrainError::EmptyPointSet)));
    }

    #[test]
    fn tie_resolves_to_lowest_index_neighbor() {
        // One reconstructed point exactly between two targets: the match (and
        // hence the gradient direction) must use target 0.
        let recon = Array2::from_shape_vec((1, 3), vec![0.0, 0.0, 0.0]).unwrap();
        let target = vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)];
        let (loss, grad) = chamfer_and_grad(&recon.view(), &target).unwrap();
        // loss = 1 (recon term) + (1 + 1)/2 (target term) = 2.
        assert!((loss - 2.0).abs() < 1e-15);
        // Recon term pulls toward target 0: unit vector (r - t0) = (-1,0,0).
        // Target term: both targets match recon point 0 and their pulls cancel
        // in x except for magnitudes 1/2 each of (r-t)/d = (∓1,0,0).
        // Net gradient x: -1 (from term 1) + (-1/2 + 1/2) = -1.
        assert!((grad[[0, 0]] - (-1.0)).abs() < 1e-15);
        assert_eq!(grad[[0, 1]], 0.0);
        assert_eq!(grad[[0, 2]], 0.0);
    }

    #[test]
    fn coincident_points_get_zero_subgradient() {
        let recon = Array2::from_shape_vec((1, 3), vec![0.5, -0.25, 0.125]).unwrap();
        let target = vec![Vector3::new(0.5, -0.25, 0.125)];
        let (loss, grad) = chamfer_and_grad(&recon.view(), &target).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 7;
        let mut recon = Array2::<f64>::zeros((m, 3));
        for v in recon.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let target: Vec<Vector3<f64>> = (0..9)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let (_, grad) = chamfer_and_grad(&recon.view(), &target).unwrap();
        let h = 1e-6;
        for i in 0..m {
            for a in 0..3 {
                let mut plus = recon.clone();
                plus[[i, a]] += h;
                let mut minus = recon.clone();
                minus[[i, a]] -= h;
                let lp = chamfer_and_grad(&plus.view(), &target).unwrap().0;
                let lm = chamfer_and_grad(&minus.view(), &target).unwrap().0;
                let fd = (lp - lm) / (2.0 * h);
                assert!(
                    (fd - grad[[i, a]]).abs() < 1e-6,
                    "point {i} axis {a}: fd {fd} vs analytic {}",
                    grad[[i, a]]
                );
            }
        }
    }
}
