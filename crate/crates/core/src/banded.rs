//! Symmetric banded matrices, inertia counts and the largest eigenpair of a
//! symmetric-definite pencil.
//!
//! The top eigenvalue is bracketed with Sylvester inertia counts of `K - λM`
//! (an `LDLᵀ` factorization without pivoting), refined by inverse iteration with a
//! shift just above the bracket, and reported as the Rayleigh quotient of the
//! converged vector.

use crate::error::{NskError, Result};

/// Symmetric band matrix stored by rows of its lower triangle:
/// `data[i * (bw + 1) + d] = A[i][i - d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = SymBanded::zeros(values.len(), 0);
        for (i, &v) in values.iter().enumerate() {
            m.data[i] = v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, d: usize) -> usize {
        i * (self.bw + 1) + d
    }

    /// Entry `A[i][j]`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        if d > self.bw {
            0.0
        } else {
            self.data[self.idx(r, d)]
        }
    }

    /// Add `v` to `A[i][j]` (and to `A[j][i]`).
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        assert!(d <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.idx(r, d);
        self.data[k] += v;
    }

    /// `Σ cᵢ Aᵢ` over matrices of equal order.
    pub fn combine(terms: &[(f64, &SymBanded)]) -> SymBanded {
        let n = terms[0].1.n;
        let bw = terms.iter().map(|t| t.1.bw).max().unwrap_or(0);
        let mut out = SymBanded::zeros(n, bw);
        for &(c, m) in terms {
            assert_eq!(m.n, n, "order mismatch");
            if c == 0.0 {
                continue;
            }
            for i in 0..n {
                for d in 0..=m.bw.min(i) {
                    let k = out.idx(i, d);
                    out.data[k] += c * m.data[m.idx(i, d)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> SymBanded {
        SymBanded { n: self.n, bw: self.bw, data: self.data.iter().map(|v| c * v).collect() }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] += row[0] * x[i];
            for d in 1..=self.bw.min(i) {
                let j = i - d;
                y[i] += row[d] * x[j];
                y[j] += row[d] * x[i];
            }
        }
    }

    /// `xᵀ A x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let y = self.matvec(x);
        dot(x, &y)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest asymmetry is zero by construction; kept for dense comparisons.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Number of positive, negative and zero pivots of an `LDLᵀ` factorization.
    /// By Sylvester's law this is the inertia of the matrix.
    pub fn inertia(&self) -> Inertia {
        let n = self.n;
        let b = self.bw;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let pivmin = f64::EPSILON * f64::EPSILON * scale;
        // l[i*(b+1)+d] = L[i][i-d] for d>=1; slot 0 unused.
        let mut l = vec![0.0; n * (b + 1)];
        let mut dvals = vec![0.0; n];
        let mut inertia = Inertia::default();
        for j in 0..n {
            let mut dj = self.data[self.idx(j, 0)];
            for k in j.saturating_sub(b)..j {
                let ljk = l[j * (b + 1) + (j - k)];
                dj -= ljk * ljk * dvals[k];
            }
            if dj.abs() < pivmin {
                dj = -pivmin;
            }
            dvals[j] = dj;
            if dj > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            for i in (j + 1)..(j + b + 1).min(n) {
                let mut s = self.data[self.idx(i, i - j)];
                for k in i.saturating_sub(b)..j {
                    s -= l[i * (b + 1) + (i - k)] * l[j * (b + 1) + (j - k)] * dvals[k];
                }
                l[i * (b + 1) + (i - j)] = s / dj;
            }
        }
        inertia
    }

    /// Banded Cholesky factorization; `None` if the matrix is not numerically SPD.
    pub fn cholesky(&self) -> Option<BandCholesky> {
        let n = self.n;
        let b = self.bw;
        let mut l = vec![0.0; n * (b + 1)];
        for j in 0..n {
            let mut s = self.data[self.idx(j, 0)];
            for k in j.saturating_sub(b)..j {
                let v = l[j * (b + 1) + (j - k)];
                s -= v * v;
            }
            if !(s > 0.0) || !s.is_finite() {
                return None;
            }
            let ljj = s.sqrt();
            l[j * (b + 1)] = ljj;
            for i in (j + 1)..(j + b + 1).min(n) {
                let mut s = self.data[self.idx(i, i - j)];
                for k in i.saturating_sub(b)..j {
                    s -= l[i * (b + 1) + (i - k)] * l[j * (b + 1) + (j - k)];
                }
                l[i * (b + 1) + (i - j)] = s / ljj;
            }
        }
        Some(BandCholesky { n, bw: b, l })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

/// Lower Cholesky factor in the same band layout as [`SymBanded`].
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let b = self.bw;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.l[i * (b + 1) + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * (b + 1)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for r in (i + 1)..(i + b + 1).min(n) {
                s -= self.l[r * (b + 1) + (r - i)] * x[r];
            }
            x[i] = s / self.l[i * (b + 1)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenpair of `K x = λ M x` with `M` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct TopEigen {
    pub value: f64,
    pub vector: Vec<f64>,
    /// Normwise backward error `‖Kx − λMx‖ / ((‖K‖ + |λ|‖M‖)‖x‖)`, with the
    /// matrix norms bounded by `max|entry| · (2·bandwidth + 1)`.
    pub residual: f64,
}

/// Count of eigenvalues of the pencil strictly above `lambda`.
pub fn count_above(k: &SymBanded, m: &SymBanded, lambda: f64) -> usize {
    SymBanded::combine(&[(1.0, k), (-lambda, m)]).inertia().positive
}

/// Largest eigenpair of the symmetric-definite pencil `(K, M)`.
///
/// `guess` (if given) seeds both the lower bracket, through its Rayleigh quotient,
/// and the inverse iteration.
pub fn top_eigenpair(k: &SymBanded, m: &SymBanded, guess: Option<&[f64]>) -> Result<TopEigen> {
    let n = k.n();
    if n == 0 || m.n() != n {
        return Err(NskError::NoConvergence("empty or mismatched pencil".into()));
    }
    let scale = (0..n)
        .map(|i| k.get(i, i).abs() / m.get(i, i).abs().max(f64::MIN_POSITIVE))
        .fold(0.0_f64, f64::max)
        .max(k.max_abs() / m.max_abs().max(f64::MIN_POSITIVE))
        .max(1e-300);

    let start: Vec<f64> = match guess {
        Some(g) if g.len() == n && g.iter().any(|v| *v != 0.0) => g.to_vec(),
        _ => (0..n).map(|i| 1.0 + 0.1 * (1.3 * i as f64).sin()).collect(),
    };

    // Bracket: count(lo) >= 1, count(hi) == 0.
    let rq = k.quad(&start) / m.quad(&start);
    let mut lo = rq - 1e-12 * scale;
    let mut step = scale;
    let mut tries = 0;
    while count_above(k, m, lo) == 0 {
        lo -= step;
        step *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(NskError::NoConvergence("no lower bracket".into()));
        }
    }
    let mut hi = lo.max(0.0) + scale;
    step = scale;
    tries = 0;
    while count_above(k, m, hi) > 0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(NskError::NoConvergence("no upper bracket".into()));
        }
    }
    for _ in 0..200 {
        let width = hi - lo;
        if width <= 1e-9 * hi.abs().max(lo.abs()).max(1e-6 * scale) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if count_above(k, m, mid) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Inverse iteration with a shift above the spectrum: σM − K is SPD.
    let mut margin = (hi - lo).max(1e-9 * hi.abs()).max(1e-12 * scale);
    let mut factor = None;
    for _ in 0..40 {
        let sigma = hi + margin;
        if let Some(f) = SymBanded::combine(&[(sigma, m), (-1.0, k)]).cholesky() {
            factor = Some(f);
            break;
        }
        margin *= 4.0;
    }
    let factor = factor.ok_or_else(|| NskError::NoConvergence("shifted factorization failed".into()))?;

    let width_k = (2 * k.bandwidth() + 1) as f64;
    let width_m = (2 * m.bandwidth() + 1) as f64;
    let knorm = k.max_abs() * width_k;
    let mnorm = m.max_abs() * width_m;
    let mut x = start;
    normalize_m(&mut x, m);
    let mut value = k.quad(&x);
    let mut residual = f64::INFINITY;
    for _ in 0..100 {
        let mut y = m.matvec(&x);
        factor.solve_in_place(&mut y);
        normalize_m(&mut y, m);
        let new_value = k.quad(&y);
        x = y;
        let kx = k.matvec(&x);
        let mx = m.matvec(&x);
        let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - new_value * b).powi(2)).sum::<f64>().sqrt();
        let denom = (knorm + new_value.abs() * mnorm) * norm2(&x);
        residual = if denom > 0.0 { r / denom } else { r };
        let settled = (new_value - value).abs() <= 4.0 * f64::EPSILON * (new_value.abs() + 1e-6 * scale);
        value = new_value;
        if residual < 1e-13 || (settled && residual < 1e-10) {
            break;
        }
    }
    if !(residual < 1e-8) {
        return Err(NskError::NoConvergence(format!("inverse iteration residual {residual:.3e}")));
    }
    Ok(TopEigen { value, vector: x, residual })
}

fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn normalize_m(x: &mut [f64], m: &SymBanded) {
    let s = m.quad(x).sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// Flip the sign so that the entry of largest magnitude is positive.
pub fn fix_sign(x: &mut [f64]) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &v in x.iter() {
        if v.abs() > best * (1.0 + 1e-12) {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}
