//! Eigenvalues of symmetric matrices, eigenvalue counting functions and
//! right-continuous step functions with the sup norm.

use std::fmt::Write as _;

use crate::error::{usage, Error, Result};
use crate::hamiltonian::SymmetricMatrix;

/// Largest dimension solved by QL iteration; larger ones use bisection.
pub const QL_LIMIT: usize = 4096;

/// Eigenvalues closer than this (relative to the spectral scale) share a
/// breakpoint in a counting function.
pub const CLUSTER_TOLERANCE: f64 = 1e-12;

/// Relative pivot size below which an inertia count is refused.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Relative shift suggested after a pivot breakdown.
pub const RETRY_SHIFT: f64 = 1e-8;

/// All eigenvalues in ascending order, with multiplicity.
pub fn eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    if n == 0 {
        return usage("eigenvalues of an empty matrix");
    }
    if m.diagonal()
        .iter()
        .chain(m.upper().iter().map(|e| &e.2))
        .any(|v| !v.is_finite())
    {
        return usage("matrix has non-finite entries");
    }
    let b = m.bandwidth();
    let (d, e) = if b <= 1 {
        tridiagonal_of(m)
    } else if 4 * b <= n {
        band_to_tridiagonal(m)
    } else if n <= QL_LIMIT {
        householder(m.to_dense())
    } else {
        return Err(Error::Resource(format!(
            "dense eigensolve of dimension {n} with bandwidth {b} is beyond the supported size"
        )));
    };
    let mut eigs = if n <= QL_LIMIT {
        tridiagonal_ql(d, e)?
    } else {
        tridiagonal_bisection(&d, &e)
    };
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

fn tridiagonal_of(m: &SymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let mut e = vec![0.0; n.saturating_sub(1)];
    for &(i, j, v) in m.upper() {
        debug_assert_eq!(j, i + 1);
        e[i] = v;
    }
    (m.diagonal().to_vec(), e)
}

/// Symmetric band storage with room for one diagonal of fill.
struct Band {
    n: usize,
    w: usize,
    a: Vec<f64>,
}

impl Band {
    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.w {
            0.0
        } else {
            self.a[j * (self.w + 1) + (i - j)]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.w || v == 0.0);
        if i - j <= self.w {
            self.a[j * (self.w + 1) + (i - j)] = v;
        }
    }

    /// Similarity by the rotation acting on rows and columns `p`, `p + 1`
    /// that zeroes entry `(p + 1, col)` against `(p, col)`. Rows `p`, `p + 1`
    /// must vanish outside columns `p − k ..= p + 1 + k`.
    fn rotate(&mut self, p: usize, col: usize, k: usize) {
        let q = p + 1;
        let stride = self.w + 1;
        let x = self.get(p, col);
        let y = self.get(q, col);
        if y == 0.0 {
            return;
        }
        let r = x.hypot(y);
        let (c, s) = (x / r, y / r);
        let a = &mut self.a;
        // Columns left of p: (p, m) and (q, m) sit next to each other.
        for m in p.saturating_sub(k)..p {
            let i = m * stride + (p - m);
            let (u, v) = (a[i], a[i + 1]);
            a[i] = c * u + s * v;
            a[i + 1] = -s * u + c * v;
        }
        // Rows below q: (m, p) in column p, (m, q) in column q.
        let hi = (q + k).min(self.n - 1);
        for m in q + 1..=hi {
            let i = p * stride + (m - p);
            let j = q * stride + (m - q);
            let (u, v) = (a[i], a[j]);
            a[i] = c * u + s * v;
            a[j] = -s * u + c * v;
        }
        self.set(q, col, 0.0);
        let (app, aqq, apq) = (self.get(p, p), self.get(q, q), self.get(p, q));
        self.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
        self.set(p, q, (c * c - s * s) * apq + c * s * (aqq - app));
    }
}

/// Reduces a band matrix to tridiagonal form by Givens rotations, one
/// outer diagonal at a time, chasing the fill down the band.
fn band_to_tridiagonal(m: &SymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let b = m.bandwidth();
    let w = b + 1;
    let mut band = Band {
        n,
        w,
        a: vec![0.0; n * (w + 1)],
    };
    for (i, &d) in m.diagonal().iter().enumerate() {
        band.set(i, i, d);
    }
    for &(i, j, v) in m.upper() {
        band.set(i, j, v);
    }
    for k in (2..=b).rev() {
        for j in 0..n.saturating_sub(k) {
            let (mut row, mut col) = (j + k, j);
            loop {
                band.rotate(row - 1, col, k);
                // The rotation spills into (row + k, row - 1).
                if row + k >= n {
                    break;
                }
                col = row - 1;
                row += k;
            }
        }
    }
    let d = (0..n).map(|i| band.get(i, i)).collect();
    let e = (0..n - 1).map(|i| band.get(i + 1, i)).collect();
    (d, e)
}

/// Householder reduction of a dense symmetric matrix to tridiagonal form.
fn householder(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = a[i][..=l].iter().map(|x| x.abs()).sum();
            if scale == 0.0 {
                e[i] = a[i][l];
            } else {
                for k in 0..=l {
                    a[i][k] /= scale;
                    h += a[i][k] * a[i][k];
                }
                let f = a[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i][l] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j][k] * a[i][k];
                    }
                    for k in j + 1..=l {
                        g += a[k][j] * a[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i][j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j][k] -= f * e[k] + g * a[i][k];
                    }
                }
            }
        } else {
            e[i] = a[i][l];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[i][i];
    }
    e.remove(0);
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL.
fn tridiagonal_ql(mut d: Vec<f64>, e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    let mut e: Vec<f64> = e.into_iter().chain(std::iter::once(0.0)).collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Resource("QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_bisection(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let (lo, hi) = (lo - 1e-9 * scale, hi + 1e-9 * scale);
    let tol = 4.0 * f64::EPSILON * scale;
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![(lo, hi, 0usize, n)];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if ca == cb {
            continue;
        }
        let mid = 0.5 * (a + b);
        if b - a <= tol || mid <= a || mid >= b {
            out.extend(std::iter::repeat_n(mid, cb - ca));
            continue;
        }
        let cm = sturm_count(d, e, mid);
        stack.push((mid, b, cm, cb));
        stack.push((a, mid, ca, cm));
    }
    out
}

/// Number of eigenvalues `≤ energy` from the inertia of `M − energy·I`,
/// via a banded `LDLᵀ` factorisation without pivoting.
pub fn inertia_count(m: &SymmetricMatrix, energy: f64) -> Result<usize> {
    let n = m.dim();
    let w = m.bandwidth();
    let scale = m.norm_bound().max(energy.abs()).max(1.0);
    // Lower band, column-major: a[j * (w + 1) + (i - j)] = A[i][j].
    let mut a = vec![0.0; n * (w + 1)];
    for (i, &d) in m.diagonal().iter().enumerate() {
        a[i * (w + 1)] = d - energy;
    }
    for &(i, j, v) in m.upper() {
        a[i * (w + 1) + (j - i)] = v;
    }
    let mut negative = 0;
    let mut column = vec![0.0; w + 1];
    for k in 0..n {
        let pivot = a[k * (w + 1)];
        if pivot.abs() <= PIVOT_TOLERANCE * scale {
            return Err(Error::InertiaBreakdown {
                energy,
                pivot,
                suggested_shift: RETRY_SHIFT * scale,
            });
        }
        if pivot < 0.0 {
            negative += 1;
        }
        let reach = w.min(n - 1 - k);
        column[..=reach].copy_from_slice(&a[k * (w + 1)..k * (w + 1) + reach + 1]);
        for s in 1..=reach {
            let l = column[s] / pivot;
            if l == 0.0 {
                continue;
            }
            let j = k + s;
            for t in s..=reach {
                a[j * (w + 1) + (t - s)] -= l * column[t];
            }
        }
    }
    Ok(negative)
}

/// `(v₀, v₁, …, v_m)` on `(−∞, E₁), [E₁, E₂), …, [E_m, ∞)`, in canonical
/// form: strictly increasing breakpoints, consecutive values distinct.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return usage("a step function needs one more value than breakpoints");
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return usage("breakpoints must be strictly increasing");
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return usage("step functions are finite");
        }
        Ok(Self::canonical(breakpoints, values))
    }

    pub fn constant(c: f64) -> Self {
        StepFunction {
            breakpoints: Vec::new(),
            values: vec![c],
        }
    }

    fn canonical(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        let mut b = Vec::with_capacity(breakpoints.len());
        let mut v = vec![values[0]];
        for (e, &x) in breakpoints.into_iter().zip(&values[1..]) {
            if x != *v.last().expect("nonempty") {
                b.push(e);
                v.push(x);
            }
        }
        StepFunction {
            breakpoints: b,
            values: v,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, energy: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= energy)]
    }

    /// Limit from the left at `energy`.
    pub fn eval_left(&self, energy: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b < energy)]
    }

    pub fn scale(&self, a: f64) -> StepFunction {
        Self::canonical(
            self.breakpoints.clone(),
            self.values.iter().map(|v| a * v).collect(),
        )
    }

    /// Canonical form of `a·f + b·g`.
    pub fn linear_combine(a: f64, f: &StepFunction, b: f64, g: &StepFunction) -> StepFunction {
        let mut merged = Vec::with_capacity(f.breakpoints.len() + g.breakpoints.len());
        let (mut i, mut j) = (0, 0);
        let mut values = vec![a * f.values[0] + b * g.values[0]];
        while i < f.breakpoints.len() || j < g.breakpoints.len() {
            let fe = f.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            let ge = g.breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
            let e = fe.min(ge);
            if fe == e {
                i += 1;
            }
            if ge == e {
                j += 1;
            }
            merged.push(e);
            values.push(a * f.values[i] + b * g.values[j]);
        }
        Self::canonical(merged, values)
    }

    /// Canonical form of `Σ w_k·f_k`, built from the sorted jumps of all terms.
    pub fn weighted_sum(terms: &[(f64, &StepFunction)]) -> StepFunction {
        let mut start = 0.0;
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        for &(w, f) in terms {
            start += w * f.values[0];
            for (k, &e) in f.breakpoints.iter().enumerate() {
                jumps.push((e, w * (f.values[k + 1] - f.values[k])));
            }
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut breakpoints = Vec::new();
        let mut values = vec![start];
        let mut current = start;
        for (k, &(e, dv)) in jumps.iter().enumerate() {
            current += dv;
            if jumps.get(k + 1).is_some_and(|next| next.0 == e) {
                continue;
            }
            breakpoints.push(e);
            values.push(current);
        }
        Self::canonical(breakpoints, values)
    }

    /// `sup_E |f(E) − g(E)|`, exact: a step function attains each of its
    /// values on a nonempty interval.
    pub fn sup_norm(f: &StepFunction, g: &StepFunction) -> f64 {
        Self::linear_combine(1.0, f, -1.0, g)
            .values
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `breakpoint,value`, a `-inf` row carrying `v₀`, then
    /// one row per breakpoint; numbers with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("breakpoint,value\n");
        let _ = writeln!(out, "-inf,{:.16e}", self.values[0]);
        for (e, v) in self.breakpoints.iter().zip(&self.values[1..]) {
            let _ = writeln!(out, "{e:.16e},{v:.16e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("breakpoint,value") {
            return usage("step function CSV must start with breakpoint,value");
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Usage(format!("not a number: {s:?}")))
        };
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let (e, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Usage(format!("malformed row {line:?}")))?;
            if k == 0 {
                if e.trim() != "-inf" {
                    return usage("first data row must be -inf");
                }
            } else {
                breakpoints.push(parse(e)?);
            }
            values.push(parse(v)?);
        }
        if values.is_empty() {
            return usage("step function CSV has no rows");
        }
        StepFunction::new(breakpoints, values)
    }
}

/// `E ↦ #{λ ≤ E}`. Eigenvalues within [`CLUSTER_TOLERANCE`] times the
/// spectral scale of their predecessor share its breakpoint.
pub fn counting_function(eigs: &[f64]) -> StepFunction {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scale = sorted.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = CLUSTER_TOLERANCE * scale;
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut values = vec![0.0];
    let mut prev = f64::NEG_INFINITY;
    for (k, &l) in sorted.iter().enumerate() {
        if l - prev <= tol {
            *values.last_mut().expect("nonempty") = (k + 1) as f64;
        } else {
            breakpoints.push(l);
            values.push((k + 1) as f64);
        }
        prev = l;
    }
    StepFunction {
        breakpoints,
        values,
    }
}
