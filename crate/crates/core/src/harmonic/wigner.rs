//! Real rotation kernels `d^l_{m,n}(beta)` ("little-d" functions).
//!
//! `d^l_{m,n}(beta)` is the matrix element of a rotation by `beta` about the
//! y axis in the degree-`l` representation. The evaluator computes every
//! degree `l < bandwidth` and every order pair at a fixed angle with a
//! three-term recursion in `l`:
//!
//! ```text
//! d^{l+1}_{mn} = [ (2l+1) ( l(l+1) cos(beta) - m n ) d^l_{mn}
//!                  - (l+1) sqrt((l^2-m^2)(l^2-n^2)) d^{l-1}_{mn} ]
//!                / ( l sqrt(((l+1)^2-m^2)((l+1)^2-n^2)) )
//! ```
//!
//! seeded at the lowest degree `l0 = max(|m|, |n|)` carrying the pair, where
//! the closed form is a single product of half-angle powers:
//!
//! ```text
//! d^{l0}_{ l0, n} =  sqrt(C(2 l0, l0+n)) cos(beta/2)^{l0+n} (-sin(beta/2))^{l0-n}
//! d^{l0}_{-l0, n} =  sqrt(C(2 l0, l0+n)) cos(beta/2)^{l0-n}   sin(beta/2)^{l0+n}
//! ```
//!
//! with the `n = +-l0` seeds obtained from the symmetry
//! `d^l_{m,n}(-beta) = d^l_{n,m}(beta)`. The recursion's `l = l0` step needs
//! no lower neighbor because its coefficient `sqrt((l0^2-m^2)(l0^2-n^2))`
//! vanishes.
//!
//! Storage is a flat array over `(l, m, n)` with degree-`l` block offset
//! `l (2l-1)(2l+1) / 3` (the sum of the preceding block sizes `(2k+1)^2`)
//! and in-block index `(m+l)(2l+1) + (n+l)`; the same layout is used for
//! rotation-group spectra so code can walk both in step.

/// Offset of the degree-`l` block in the flat `(l, m, n)` layout:
/// `sum_{k<l} (2k+1)^2 = l(2l-1)(2l+1)/3`, written to avoid underflow at 0.
#[inline]
pub fn block_offset(l: usize) -> usize {
    (4 * l * l * l - l) / 3
}

/// Total flat length for all degrees `l < bandwidth`.
#[inline]
pub fn total_len(bandwidth: usize) -> usize {
    block_offset(bandwidth)
}

/// In-block index of `(m, n)` within the degree-`l` block.
#[inline]
pub fn entry_index(l: usize, m: i64, n: i64) -> usize {
    let w = 2 * l + 1;
    (m + l as i64) as usize * w + (n + l as i64) as usize
}

/// All kernels `d^l_{m,n}(beta)` for `l < bandwidth` at one angle.
#[derive(Debug, Clone)]
pub struct WignerSeries {
    pub bandwidth: usize,
    values: Vec<f64>,
}

impl WignerSeries {
    /// `d^l_{m,n}` at the angle this series was built for.
    #[inline]
    pub fn get(&self, l: usize, m: i64, n: i64) -> f64 {
        debug_assert!(l < self.bandwidth);
        debug_assert!(m.unsigned_abs() as usize <= l && n.unsigned_abs() as usize <= l);
        self.values[block_offset(l) + entry_index(l, m, n)]
    }

    /// The contiguous degree-`l` block, row-major over `(m+l, n+l)`.
    #[inline]
    pub fn block(&self, l: usize) -> &[f64] {
        let w = 2 * l + 1;
        &self.values[block_offset(l)..block_offset(l) + w * w]
    }
}

/// sqrt of the binomial coefficient C(2j, j+k), via iterative products.
fn sqrt_binom(j: i64, k: i64) -> f64 {
    // C(2j, j+k) = prod_{i=1}^{j+k} (j - k + i) / i.
    let top = j + k;
    let mut acc = 1.0f64;
    for i in 1..=top {
        acc *= (j - k + i) as f64 / i as f64;
    }
    acc.sqrt()
}

/// Evaluates every `d^l_{m,n}(beta)` with `l < bandwidth`.
pub fn wigner_series(bandwidth: usize, beta: f64) -> WignerSeries {
    assert!(bandwidth >= 1);
    let mut values = vec![0.0; total_len(bandwidth)];
    let x = beta.cos();
    let c = (beta / 2.0).cos();
    let s = (beta / 2.0).sin();
    let lmax = bandwidth as i64 - 1;
    for m in -lmax..=lmax {
        for n in -lmax..=lmax {
            let l0 = m.abs().max(n.abs());
            let (mut prev, mut cur, start);
            if l0 == 0 {
                // The l = 0 recursion step divides by zero, so seed the pair
                // (0, 0) one degree higher with the closed form d^1_00 = cos.
                values[0] = 1.0;
                if bandwidth == 1 {
                    continue;
                }
                values[block_offset(1) + entry_index(1, 0, 0)] = x;
                prev = 1.0;
                cur = x;
                start = 1;
            } else {
                let seed = if m.abs() >= n.abs() {
                    if m >= 0 {
                        sqrt_binom(l0, n) * c.powi((l0 + n) as i32) * (-s).powi((l0 - n) as i32)
                    } else {
                        sqrt_binom(l0, n) * c.powi((l0 - n) as i32) * s.powi((l0 + n) as i32)
                    }
                } else if n >= 0 {
                    // d^{l0}_{m, l0}(beta) = d^{l0}_{l0, m}(-beta)
                    sqrt_binom(l0, m) * c.powi((l0 + m) as i32) * s.powi((l0 - m) as i32)
                } else {
                    // d^{l0}_{m, -l0}(beta) = d^{l0}_{-l0, m}(-beta)
                    sqrt_binom(l0, m) * c.powi((l0 - m) as i32) * (-s).powi((l0 + m) as i32)
                };
                values[block_offset(l0 as usize) + entry_index(l0 as usize, m, n)] = seed;
                // The first step's lower-neighbor coefficient vanishes at
                // l = l0, so any prev value works; use zero.
                prev = 0.0;
                cur = seed;
                start = l0;
            }
            for l in start..lmax {
                let lf = l as f64;
                let num = (2.0 * lf + 1.0) * (lf * (lf + 1.0) * x - (m * n) as f64) * cur
                    - (lf + 1.0)
                        * (((l * l - m * m) * (l * l - n * n)) as f64).sqrt()
                        * prev;
                let den = lf
                    * ((((l + 1) * (l + 1) - m * m) * ((l + 1) * (l + 1) - n * n)) as f64).sqrt();
                let next = num / den;
                prev = cur;
                cur = next;
                values[block_offset(l as usize + 1) + entry_index(l as usize + 1, m, n)] = cur;
            }
        }
    }
    WignerSeries { bandwidth, values }
}
