//! Banded matrices: symmetric storage for the discretized operators, a
//! partially pivoted band LU (real or complex) for time stepping and inverse
//! iteration, and a bisection eigensolver driven by LDLᵀ inertia counts.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

/// Symmetric band matrix; `bands[d][i] = A[i][i + d]` for `d = 0..=p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        Self { n, bands }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = j - i;
        if d > self.bandwidth() {
            0.0
        } else {
            self.bands[d][i]
        }
    }

    /// Sets `A[i][i+d]` (and its mirror).
    pub fn set(&mut self, i: usize, d: usize, v: f64) {
        self.bands[d][i] = v;
    }

    pub fn diag(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn add_diag(&mut self, values: &[f64]) {
        for (a, v) in self.bands[0].iter_mut().zip(values) {
            *a += v;
        }
    }

    pub fn shift(&mut self, sigma: f64) {
        for a in self.bands[0].iter_mut() {
            *a += sigma;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            bands: self.bands.iter().map(|b| b.iter().map(|v| v * s).collect()).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(a, v)| a * v).collect();
        for (d, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] += a * x[i + d];
                y[i + d] += a * x[i];
            }
        }
        y
    }

    /// `xᵀ A y`
    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::grid::dot(x, &self.matvec(y))
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut r = 0.0;
            for d in 1..=self.bandwidth() {
                if i + d < self.n {
                    r += self.bands[d][i].abs();
                }
                if i >= d {
                    r += self.bands[d][i - d].abs();
                }
            }
            lo = lo.min(self.bands[0][i] - r);
            hi = hi.max(self.bands[0][i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia of
    /// the unpivoted LDLᵀ of `A - σI`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let p = self.bandwidth();
        let n = self.n;
        // l[i][t] = L[i][i - 1 - t] for t < p
        let mut l = vec![vec![0.0; p]; n];
        let mut dvals = vec![0.0; n];
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + sigma.abs());
        let mut count = 0;
        for j in 0..n {
            let mut dj = self.bands[0][j] - sigma;
            for t in 0..p.min(j) {
                let k = j - 1 - t;
                dj -= l[j][t] * l[j][t] * dvals[k];
            }
            if dj == 0.0 {
                dj = -tiny;
            }
            dvals[j] = dj;
            if dj < 0.0 {
                count += 1;
            }
            for i in (j + 1)..(j + 1 + p).min(n) {
                let mut s = self.get(i, j);
                for k in i.saturating_sub(p)..j {
                    s -= l[i][i - 1 - k] * l[j][j - 1 - k] * dvals[k];
                }
                l[i][i - 1 - j] = s / dj;
            }
        }
        count
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Band LU of `A + diag(shift)` lifted into the scalar type `T`.
    pub fn lu_with_diag<T: ComplexField<RealField = f64> + Copy>(&self, diag_shift: &[T]) -> Result<BandLu<T>> {
        let p = self.bandwidth();
        BandLu::factor(self.n, p, p, |i, j| {
            let v = T::from_real(self.get(i, j));
            if i == j {
                v + diag_shift[i]
            } else {
                v
            }
        })
    }

    pub fn lu(&self) -> Result<BandLu<f64>> {
        self.lu_with_diag(&vec![0.0; self.n])
    }
}

#[derive(Debug, Clone)]
struct BandRow<T> {
    start: usize,
    vals: Vec<T>,
}

impl<T: ComplexField + Copy> BandRow<T> {
    fn get(&self, j: usize) -> T {
        if j < self.start || j >= self.start + self.vals.len() {
            T::zero()
        } else {
            self.vals[j - self.start]
        }
    }

    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn cover(&mut self, lo: usize, hi: usize) {
        if lo < self.start {
            let mut v = vec![T::zero(); self.start - lo];
            v.extend_from_slice(&self.vals);
            self.vals = v;
            self.start = lo;
        }
        if hi > self.end() {
            let extra = hi - self.end();
            self.vals.extend(std::iter::repeat_n(T::zero(), extra));
        }
    }
}

/// Partially pivoted LU of a band matrix with `kl` sub- and `ku`
/// super-diagonals.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    rows: Vec<BandRow<T>>,
    // multipliers[k] = (row index, multiplier) for the elimination at step k
    multipliers: Vec<Vec<(usize, T)>>,
    pivots: Vec<usize>,
}

impl<T: ComplexField<RealField = f64> + Copy> BandLu<T> {
    pub fn factor(n: usize, kl: usize, ku: usize, entry: impl Fn(usize, usize) -> T) -> Result<Self> {
        let mut rows: Vec<BandRow<T>> = (0..n)
            .map(|i| {
                let start = i.saturating_sub(kl);
                let end = (i + ku + 1).min(n);
                BandRow { start, vals: (start..end).map(|j| entry(i, j)).collect() }
            })
            .collect();
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = Vec::with_capacity(n);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[k].get(k).modulus();
            for (i, row) in rows.iter().enumerate().take(last + 1).skip(k + 1) {
                let m = row.get(k).modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if !best.is_finite() {
                return Err(Error::invalid("non-finite entry in band factorization"));
            }
            rows.swap(k, p);
            pivots.push(p);
            let mut pivot = rows[k].get(k);
            if pivot.modulus() == 0.0 {
                // exactly singular: nudge so inverse iteration still works
                pivot = T::from_real(f64::EPSILON * (1.0 + best));
                rows[k].cover(k, k + 1);
                let idx = k - rows[k].start;
                rows[k].vals[idx] = pivot;
            }
            let (lo, hi) = (k, rows[k].end());
            let mut mk = Vec::new();
            for i in (k + 1)..=last {
                let a = rows[i].get(k);
                if a.modulus() == 0.0 {
                    continue;
                }
                let m = a / pivot;
                rows[i].cover(lo, hi);
                let pivot_row = rows[k].clone();
                let row = &mut rows[i];
                for j in lo..hi {
                    let v = pivot_row.get(j);
                    let idx = j - row.start;
                    row.vals[idx] -= m * v;
                }
                let idx = k - row.start;
                row.vals[idx] = T::zero();
                mk.push((i, m));
            }
            multipliers.push(mk);
        }
        Ok(Self { n, rows, multipliers, pivots })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut b = rhs.to_vec();
        for k in 0..self.n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for &(i, m) in &self.multipliers[k] {
                b[i] -= m * bk;
            }
        }
        for k in (0..self.n).rev() {
            let row = &self.rows[k];
            let mut s = b[k];
            for j in (k + 1)..row.end() {
                s -= row.get(j) * b[j];
            }
            b[k] = s / row.get(k);
        }
        b
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Lowest `count` eigenpairs of a symmetric band matrix; eigenvectors have
/// unit Euclidean norm and are mutually orthogonal.
pub fn lowest_eigenpairs(a: &SymBand, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n();
    if count > n {
        return Err(Error::TooManyModes { requested: count, available: n });
    }
    let (glo, ghi) = a.gershgorin();
    let scale = glo.abs().max(ghi.abs()).max(1.0);
    let mut values = Vec::with_capacity(count);
    for idx in 0..count {
        let mut lo = match values.last() {
            Some(&prev) => prev - 4.0 * f64::EPSILON * scale,
            None => glo - 1e-12 * scale,
        };
        let mut hi = ghi + 1e-12 * scale;
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if a.count_below(mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * (lo.abs().max(hi.abs())) {
                break;
            }
        }
        values.push(0.5 * (lo + hi));
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (idx, &lambda) in values.iter().enumerate() {
        let offset = 1e-10 * (lambda.abs() + 1.0).max(1e-6 * scale * f64::EPSILON.sqrt());
        let shift = vec![-(lambda + offset); n];
        let lu = a.lu_with_diag(&shift)?;
        let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.3 * ((j as f64) * 1.618 + 0.5).sin()).collect();
        for _ in 0..4 {
            v = lu.solve(&v);
            // keep neighbours in a cluster apart
            for (jdx, w) in vectors.iter().enumerate() {
                if (values[jdx] - lambda).abs() < 1e-8 * (1.0 + lambda.abs()) {
                    let c = crate::grid::dot(&v, w);
                    for (x, y) in v.iter_mut().zip(w) {
                        *x -= c * y;
                    }
                }
            }
            let nv = crate::grid::dot(&v, &v).sqrt();
            if nv == 0.0 || !nv.is_finite() {
                return Err(Error::invalid(format!("inverse iteration broke down for eigenvalue {idx}")));
            }
            v.iter_mut().for_each(|x| *x /= nv);
        }
        // sign: first entry with magnitude above noise is positive
        let pos = v.iter().position(|x| x.abs() > 1e-8).unwrap_or(0);
        if v[pos] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn laplacian(n: usize) -> SymBand {
        let mut a = SymBand::zeros(n, 1);
        for i in 0..n {
            a.set(i, 0, 2.0);
            if i + 1 < n {
                a.set(i, 1, -1.0);
            }
        }
        a
    }

    fn random_band(n: usize, p: usize, seed: u64) -> SymBand {
        let mut a = SymBand::zeros(n, p);
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for d in 0..=p {
            for i in 0..n - d {
                a.set(i, d, next() + if d == 0 { 3.0 } else { 0.0 });
            }
        }
        a
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        let a = random_band(30, 2, 7);
        let lu = a.lu().unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let x = lu.solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_band_lu_solves() {
        let a = random_band(25, 2, 3);
        let shift: Vec<Complex64> = (0..25).map(|i| Complex64::new(0.1, 0.2 * i as f64)).collect();
        let lu = a.lu_with_diag(&shift).unwrap();
        let b: Vec<Complex64> = (0..25).map(|i| Complex64::new(1.0, i as f64)).collect();
        let x = lu.solve(&b);
        for i in 0..25 {
            let mut s = shift[i] * x[i];
            for j in 0..25 {
                s += Complex64::new(a.get(i, j), 0.0) * x[j];
            }
            assert!((s - b[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn inertia_counts_match_dense() {
        let a = random_band(40, 2, 11);
        let eig = a.to_dense().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for sigma in [-1.0, 0.5, 2.0, 3.0, 4.5] {
            let expected = ev.iter().filter(|&&l| l < sigma).count();
            assert_eq!(a.count_below(sigma), expected, "sigma = {sigma}");
        }
    }

    #[test]
    fn lowest_eigenpairs_of_laplacian() {
        let n = 50;
        let (vals, vecs) = lowest_eigenpairs(&laplacian(n), 5).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let theta = (k as f64 + 1.0) * std::f64::consts::PI / (2.0 * (n as f64 + 1.0));
            let exact = 4.0 * theta.sin().powi(2);
            assert!((v - exact).abs() < 1e-12);
        }
        for i in 0..5 {
            for j in 0..5 {
                let d = crate::grid::dot(&vecs[i], &vecs[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn too_many_modes() {
        assert!(lowest_eigenpairs(&laplacian(5), 6).is_err());
    }
}
