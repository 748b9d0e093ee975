// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Selected eigenpairs of a real symmetric band matrix.
//!
//! Eigenvalues inside a window are located by bisection on the matrix
//! inertia (negative pivots of an `LDL^T` factorization of `A - lambda I`),
//! eigenvectors by inverse iteration against a partially pivoted band LU.
//! Near-degenerate clusters are re-orthogonalized during the iteration.

/// Symmetric band matrix stored by diagonals: `bands[j][i] = A[i][i + j]`.
#[derive(Clone, Debug)]
pub struct SymmetricBand {
    n: usize,
    bands: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    /// Unit Euclidean norm.
    pub vector: Vec<f64>,
}

impl SymmetricBand {
    /// `bands[0]` is the diagonal (length `n`), `bands[j]` has length `n - j`.
    pub fn new(bands: Vec<Vec<f64>>) -> Self {
        let n = bands.first().map_or(0, Vec::len);
        for (j, b) in bands.iter().enumerate() {
            assert_eq!(b.len(), n.saturating_sub(j), "band {j} has wrong length");
        }
        SymmetricBand { n, bands }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len().saturating_sub(1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let off = c - r;
        if off > self.bandwidth() {
            0.0
        } else {
            self.bands[off][r]
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (yi, (d, xi)) in y.iter_mut().zip(self.bands[0].iter().zip(x)) {
            *yi = d * xi;
        }
        for (j, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] += a * x[i + j];
                y[i + j] += a * x[i];
            }
        }
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut radius = 0.0;
            for j in 1..=self.bandwidth() {
                if i + j < self.n {
                    radius += self.bands[j][i].abs();
                }
                if i >= j {
                    radius += self.bands[j][i - j].abs();
                }
            }
            let d = self.bands[0][i];
            lo = lo.min(d - radius);
            hi = hi.max(d + radius);
        }
        (lo, hi)
    }

    fn scale(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let b = self.bandwidth();
        let n = self.n;
        let pivmin = f64::EPSILON * self.scale();
        // l[i * b + m] = L[i][i - 1 - m]
        let mut l = vec![0.0; n * b.max(1)];
        let mut d = vec![0.0; n];
        let mut count = 0;
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..i {
                let mut s = self.bands[i - j][j];
                for k in j0..j {
                    s -= l[i * b + (i - 1 - k)] * l[j * b + (j - 1 - k)] * d[k];
                }
                l[i * b + (i - 1 - j)] = s / d[j];
            }
            let mut di = self.bands[0][i] - lambda;
            for k in j0..i {
                let lik = l[i * b + (i - 1 - k)];
                di -= lik * lik * d[k];
            }
            if di.abs() < pivmin {
                di = -pivmin;
            }
            if di < 0.0 {
                count += 1;
            }
            d[i] = di;
        }
        count
    }

    /// All eigenvalues in `[lo, hi)`, ascending.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let k0 = self.count_below(lo);
        let k1 = self.count_below(hi);
        let tol = 4.0 * f64::EPSILON * self.scale();
        let mut out = Vec::with_capacity(k1.saturating_sub(k0));
        let mut left = lo;
        for k in k0..k1 {
            // invariant: count_below(a) <= k < count_below(b)
            let mut a = left;
            let mut b = hi;
            for _ in 0..200 {
                if b - a <= tol {
                    break;
                }
                let mid = 0.5 * (a + b);
                if self.count_below(mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let value = 0.5 * (a + b);
            out.push(value);
            left = a;
        }
        out
    }

    /// Eigenpairs with eigenvalues in `[lo, hi)`, ascending.
    pub fn eigenpairs_in(&self, lo: f64, hi: f64) -> Vec<EigenPair> {
        let values = self.eigenvalues_in(lo, hi);
        let cluster_gap = 1e-6 * self.scale();
        let mut pairs: Vec<EigenPair> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        for (idx, &value) in values.iter().enumerate() {
            if idx > 0 && value - values[idx - 1] > cluster_gap {
                cluster_start = idx;
            }
            let vector = self.inverse_iteration(value, idx, &pairs[cluster_start..]);
            pairs.push(EigenPair { value, vector });
        }
        pairs
    }

    fn inverse_iteration(&self, value: f64, seed: usize, cluster: &[EigenPair]) -> Vec<f64> {
        let n = self.n;
        let scale = self.scale();
        let lu = BandLu::factor(self, value, f64::EPSILON * scale);
        let mut x = start_vector(n, seed);
        let mut ax = vec![0.0; n];
        for iter in 0..12 {
            lu.solve(&mut x);
            for other in cluster {
                let proj = dot(&x, &other.vector);
                for (xi, oi) in x.iter_mut().zip(&other.vector) {
                    *xi -= proj * oi;
                }
            }
            let norm = dot(&x, &x).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                x = start_vector(n, seed + 7919 * (iter + 1));
                continue;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            self.matvec(&x, &mut ax);
            let resid = ax
                .iter()
                .zip(&x)
                .map(|(a, v)| (a - value * v).powi(2))
                .sum::<f64>()
                .sqrt();
            if iter >= 1 && resid < 64.0 * f64::EPSILON * scale {
                break;
            }
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic, well-spread starting vector.
fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15_u64 ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// LU factorization with partial pivoting of `A - shift I` for a band `A`.
///
/// Row `r` is stored over the absolute columns `[r - b, r + 2b]`, enough to
/// hold the fill produced by row interchanges.
struct BandLu {
    n: usize,
    b: usize,
    rows: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(b: usize) -> usize {
        3 * b + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        let start = r as isize - self.b as isize;
        let off = c as isize - start;
        if off < 0 || off >= Self::width(self.b) as isize {
            0.0
        } else {
            self.rows[r * Self::width(self.b) + off as usize]
        }
    }

    fn slot(&mut self, r: usize, c: usize) -> &mut f64 {
        let start = r as isize - self.b as isize;
        let off = (c as isize - start) as usize;
        debug_assert!(off < Self::width(self.b));
        let w = Self::width(self.b);
        &mut self.rows[r * w + off]
    }

    fn factor(a: &SymmetricBand, shift: f64, pivmin: f64) -> Self {
        let n = a.dim();
        let b = a.bandwidth();
        let w = Self::width(b);
        let mut lu = BandLu {
            n,
            b,
            rows: vec![0.0; n * w],
            mult: vec![0.0; n * b.max(1)],
            piv: vec![0; n],
        };
        for r in 0..n {
            let c0 = r.saturating_sub(b);
            let c1 = (r + b).min(n - 1);
            for c in c0..=c1 {
                let v = a.get(r, c) - if r == c { shift } else { 0.0 };
                *lu.slot(r, c) = v;
            }
        }
        for k in 0..n {
            let last = (k + b).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for r in k + 1..=last {
                let v = lu.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.piv[k] = p;
            let cmax = (k + 2 * b).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let vk = lu.at(k, c);
                    let vp = lu.at(p, c);
                    *lu.slot(k, c) = vp;
                    *lu.slot(p, c) = vk;
                }
            }
            let mut pivot = lu.at(k, k);
            if pivot.abs() < pivmin {
                pivot = if pivot < 0.0 { -pivmin } else { pivmin };
                *lu.slot(k, k) = pivot;
            }
            for r in k + 1..=last {
                let m = lu.at(r, k) / pivot;
                lu.mult[k * b + (r - k - 1)] = m;
                *lu.slot(r, k) = 0.0;
                if m != 0.0 {
                    for c in k + 1..=cmax {
                        let u = lu.at(k, c);
                        if u != 0.0 {
                            *lu.slot(r, c) -= m * u;
                        }
                    }
                }
            }
        }
        lu
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for r in k + 1..=(k + b).min(n - 1) {
                x[r] -= self.mult[k * b + (r - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + 2 * b).min(n - 1) {
                s -= self.at(k, c) * x[c];
            }
            x[k] = s / self.at(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymmetricBand {
        SymmetricBand::new(vec![vec![2.0; n], vec![-1.0; n - 1]])
    }

    #[test]
    fn tridiagonal_laplacian_spectrum() {
        let n = 50;
        let a = laplacian(n);
        let values = a.eigenvalues_in(-1.0, 5.0);
        assert_eq!(values.len(), n);
        for (k, v) in values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "k={k}: {v} vs {exact}");
        }
    }

    #[test]
    fn pentadiagonal_pairs_have_small_residual() {
        let n = 200;
        let diag: Vec<f64> = (0..n)
            .map(|i| 2.5 + (i as f64 * 0.37).cos() + 0.01 * i as f64)
            .collect();
        let a = SymmetricBand::new(vec![diag, vec![-1.3; n - 1], vec![0.08; n - 2]]);
        let pairs = a.eigenpairs_in(0.0, 3.0);
        assert!(!pairs.is_empty());
        let mut ax = vec![0.0; n];
        for p in &pairs {
            a.matvec(&p.vector, &mut ax);
            let r: f64 = ax
                .iter()
                .zip(&p.vector)
                .map(|(u, v)| (u - p.value * v).powi(2))
                .sum();
            assert!(r.sqrt() < 1e-11);
        }
        for i in 0..pairs.len() {
            for j in 0..i {
                assert!(dot(&pairs[i].vector, &pairs[j].vector).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_cluster_is_orthogonalized() {
        // two decoupled identical blocks: every eigenvalue is doubly degenerate
        let m = 20;
        let mut diag = vec![2.0; 2 * m];
        diag[m - 1] = 2.0;
        let mut off = vec![-1.0; 2 * m - 1];
        off[m - 1] = 0.0;
        let a = SymmetricBand::new(vec![diag, off]);
        let pairs = a.eigenpairs_in(-1.0, 1.0);
        assert_eq!(pairs.len() % 2, 0);
        for w in pairs.chunks(2) {
            assert!((w[0].value - w[1].value).abs() < 1e-12);
            assert!(dot(&w[0].vector, &w[1].vector).abs() < 1e-9);
        }
    }

    #[test]
    fn count_matches_dense_inertia() {
        let a = laplacian(10);
        assert_eq!(a.count_below(0.0), 0);
        assert_eq!(a.count_below(2.0 + 1e-9), 5);
        assert_eq!(a.count_below(4.5), 10);
    }
}
