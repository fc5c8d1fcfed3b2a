//! Equiangular sampling grids on the sphere and the rotation group.
//!
//! For a bandwidth `b` the sphere grid has `2b x 2b` nodes
//!
//! ```text
//! alpha_j = 2*pi*j / (2b)          j = 0..2b-1   (azimuth)
//! beta_k  = pi*(2k + 1) / (4b)     k = 0..2b-1   (inclination, pole-free)
//! ```
//!
//! and the rotation-group grid is the `(2b)^3` product of the same angle
//! lists in ZYZ order. Both carry quadrature weights for the rotation
//! invariant measure normalized to total mass one, so discrete inner
//! products approximate `(1/4pi) * integral over S^2` and
//! `(1/8pi^2) * integral over SO(3)` and are exact for band-limited
//! integrands.

use super::rotation::RotationZYZ;

/// Quadrature weights over the beta nodes for `integral f(beta) sin(beta)
/// d(beta)` on `[0, pi]`.
///
/// ```text
/// w_b(k) = (2/b) * sin(beta_k) * sum_{j=0}^{b-1} sin((2j+1)*beta_k) / (2j+1)
/// ```
///
/// These are the classical weights for the pole-free equiangular grid: they
/// integrate products of two degree-`< b` Wigner-d functions (times
/// `sin(beta)`) exactly, which is what makes the harmonic transforms in this
/// crate invertible on band-limited signals. The weights sum to 2, the mass
/// of `sin(beta)` on `[0, pi]`.
pub fn beta_quadrature_weights(bandwidth: usize) -> Vec<f64> {
    assert!(bandwidth >= 1, "bandwidth must be at least 1");
    let n = 2 * bandwidth;
    let mut w = Vec::with_capacity(n);
    for k in 0..n {
        let beta = std::f64::consts::PI * (2 * k + 1) as f64 / (2.0 * n as f64);
        let mut s = 0.0;
        for j in 0..bandwidth {
            let odd = (2 * j + 1) as f64;
            s += (odd * beta).sin() / odd;
        }
        w.push(2.0 / bandwidth as f64 * beta.sin() * s);
    }
    w
}

/// The `2b x 2b` sphere grid for one bandwidth, with normalized quadrature.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub bandwidth: usize,
    /// Azimuth nodes, length `2b`.
    pub alphas: Vec<f64>,
    /// Inclination nodes, length `2b`.
    pub betas: Vec<f64>,
    /// Per-cell quadrature weight for every cell in beta-row `k`; the weights
    /// of all `(2b)^2` cells sum to 1.
    pub row_weight: Vec<f64>,
}

impl SphereGrid {
    pub fn new(bandwidth: usize) -> Self {
        let n = 2 * bandwidth;
        let alphas = (0..n)
            .map(|j| std::f64::consts::TAU * j as f64 / n as f64)
            .collect();
        let betas = (0..n)
            .map(|k| std::f64::consts::PI * (2 * k + 1) as f64 / (2.0 * n as f64))
            .collect();
        let row_weight = beta_quadrature_weights(bandwidth)
            .into_iter()
            .map(|w| w / (2.0 * n as f64))
            .collect();
        SphereGrid {
            bandwidth,
            alphas,
            betas,
            row_weight,
        }
    }

    pub fn n(&self) -> usize {
        2 * self.bandwidth
    }

    /// Fraction of the full solid angle covered by one cell of beta-row `k`.
    ///
    /// Cells tile the sphere: azimuth width `pi/b`, inclination spanning
    /// `[pi*k/2b, pi*(k+1)/2b]`, whose midpoint is exactly the node `beta_k`.
    /// The fractions of all cells sum to 1.
    pub fn cell_solid_fraction(&self, k: usize) -> f64 {
        let n = self.n() as f64;
        let lo = std::f64::consts::PI * k as f64 / n;
        let hi = std::f64::consts::PI * (k + 1) as f64 / n;
        (lo.cos() - hi.cos()) / (2.0 * n)
    }
}

/// The `(2b)^3` ZYZ Euler grid on the rotation group.
#[derive(Debug, Clone)]
pub struct So3Grid {
    pub bandwidth: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Per-cell weight for any cell whose beta index is `k`; all `(2b)^3`
    /// cell weights sum to 1.
    pub row_weight: Vec<f64>,
}

impl So3Grid {
    pub fn new(bandwidth: usize) -> Self {
        let sphere = SphereGrid::new(bandwidth);
        let n = 2 * bandwidth;
        let row_weight = beta_quadrature_weights(bandwidth)
            .into_iter()
            .map(|w| w / (2.0 * (n * n) as f64))
            .collect();
        So3Grid {
            bandwidth,
            alphas: sphere.alphas.clone(),
            betas: sphere.betas,
            gammas: sphere.alphas,
            row_weight,
        }
    }

    pub fn n(&self) -> usize {
        2 * self.bandwidth
    }

    /// The rotation at grid node `(j, k, l)` = (alpha, beta, gamma) indices.
    pub fn rotation(&self, j: usize, k: usize, l: usize) -> RotationZYZ {
        RotationZYZ::new(self.alphas[j], self.betas[k], self.gammas[l])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD_EPS: f64 = 1e-12;

    /// Plain adaptive Simpson on `[a, b]`, used as an independent check of
    /// the closed-form quadrature weights.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, eps: f64) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if (left + right - whole).abs() < 15.0 * eps {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, left, eps / 2.0) + recurse(f, m, b, right, eps / 2.0)
            }
        }
        recurse(f, a, b, simpson(f, a, b), eps)
    }

    #[test]
    fn beta_weights_sum_to_two() {
        for b in [1, 2, 4, 8, 16] {
            let s: f64 = beta_quadrature_weights(b).iter().sum();
            assert!((s - 2.0).abs() < QUAD_EPS, "b={b}: weight sum {s}");
        }
    }

    #[test]
    fn sphere_grid_weights_normalized() {
        for b in [1, 4, 8] {
            let g = SphereGrid::new(b);
            let total: f64 = g.row_weight.iter().map(|w| w * g.n() as f64).sum();
            assert!((total - 1.0).abs() < QUAD_EPS, "b={b}: grid mass {total}");
        }
    }

    #[test]
    fn so3_grid_weights_normalized() {
        let g = So3Grid::new(4);
        let total: f64 = g
            .row_weight
            .iter()
            .map(|w| w * (g.n() * g.n()) as f64)
            .sum();
        assert!((total - 1.0).abs() < QUAD_EPS);
    }

    #[test]
    fn quadrature_integrates_legendre_exactly() {
        // integral of P_l(cos beta) sin(beta) d(beta) over [0, pi] is
        // 2*delta_{l,0}; the weights must reproduce that for l < 2b.
        let b = 8;
        let g = SphereGrid::new(b);
        let w = beta_quadrature_weights(b);
        for l in 0..2 * b {
            let mut acc = 0.0;
            for k in 0..g.n() {
                let x = g.betas[k].cos();
                // Legendre recursion evaluated on the fly.
                let (mut p0, mut p1) = (1.0, x);
                let p = match l {
                    0 => p0,
                    1 => p1,
                    _ => {
                        let mut p = 0.0;
                        for deg in 2..=l {
                            p = ((2 * deg - 1) as f64 * x * p1 - (deg - 1) as f64 * p0)
                                / deg as f64;
                            p0 = p1;
                            p1 = p;
                        }
                        p
                    }
                };
                acc += w[k] * p;
            }
            let expect = if l == 0 { 2.0 } else { 0.0 };
            assert!(
                (acc - expect).abs() < 1e-10,
                "P_{l}: quadrature {acc} vs {expect}"
            );
        }
    }

    #[test]
    fn quadrature_matches_adaptive_integration() {
        // A smooth low-degree integrand: f(beta) = cos(beta) * (1 + cos(beta))/2,
        // integrated against sin(beta). Closed quadrature vs adaptive Simpson.
        let b = 8;
        let g = SphereGrid::new(b);
        let w = beta_quadrature_weights(b);
        let f = |beta: f64| beta.cos() * (1.0 + beta.cos()) / 2.0;
        let quad: f64 = (0..g.n()).map(|k| w[k] * f(g.betas[k])).sum();
        let exact = adaptive_simpson(&|t: f64| f(t) * t.sin(), 0.0, std::f64::consts::PI, 1e-10);
        assert!(
            (quad - exact).abs() < 1e-6,
            "quadrature {quad} vs adaptive {exact}"
        );
    }

    #[test]
    fn cell_fractions_tile_the_sphere() {
        let g = SphereGrid::new(8);
        let total: f64 = (0..g.n())
            .map(|k| g.cell_solid_fraction(k) * g.n() as f64)
            .sum();
        assert!((total - 1.0).abs() < QUAD_EPS);
        // Node beta_k is the midpoint of its cell.
        for k in 0..g.n() {
            let lo = std::f64::consts::PI * k as f64 / g.n() as f64;
            let hi = std::f64::consts::PI * (k + 1) as f64 / g.n() as f64;
            assert!((0.5 * (lo + hi) - g.betas[k]).abs() < QUAD_EPS);
        }
    }
}
