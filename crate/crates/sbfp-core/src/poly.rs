//! Dense real polynomials and root finding via companion-matrix eigenvalues.
//!
//! Coefficients are stored in ascending powers. Roots are computed as the
//! eigenvalues of the balanced companion matrix, using the Francis
//! double-shift QR iteration on the (already Hessenberg) companion form,
//! then polished by a few Newton steps.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::math;

/// Relative threshold below which trailing coefficients are considered zero.
const TRIM_REL: f64 = 1e-14;

/// A dense real polynomial, coefficients in ascending powers of x.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Build from ascending coefficients; trailing zeros are trimmed.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c + s*x`.
    pub fn linear(c: f64, s: f64) -> Self {
        Self::new(vec![c, s])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(math::abs(*c)))
    }

    /// Drop trailing coefficients that are negligible against the largest one.
    fn trim(&mut self) {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            self.coeffs.clear();
            return;
        }
        while let Some(&last) = self.coeffs.last() {
            if math::abs(last) <= TRIM_REL * scale {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Multiply by x (shift coefficients up one power).
    pub fn mul_x(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + 1];
        out[1..].copy_from_slice(&self.coeffs);
        Poly::new(out)
    }

    /// Deflate by the real root `r`, returning (quotient, remainder).
    pub fn deflate_real(&self, r: f64) -> (Poly, f64) {
        if self.coeffs.is_empty() {
            return (Poly::zero(), 0.0);
        }
        let n = self.coeffs.len();
        let mut quot = vec![0.0; n - 1];
        let mut carry = 0.0;
        for i in (0..n).rev() {
            let v = self.coeffs[i] + carry * r;
            if i == 0 {
                return (Poly::new(quot), v);
            }
            quot[i - 1] = v;
            carry = v;
        }
        unreachable!()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if i == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, " + {c}*x^{i}")?;
            }
        }
        Ok(())
    }
}

/// Synthetic division of complex coefficients by `(x - r)`.
/// Returns the remainder (the value at `r`); `c` becomes the quotient.
pub fn synth_div(c: &mut Vec<Complex64>, r: Complex64) -> Complex64 {
    if c.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let mut carry = Complex64::new(0.0, 0.0);
    for i in (0..c.len()).rev() {
        let v = c[i] + carry * r;
        c[i] = v;
        carry = v;
    }
    c.remove(0)
}

/// First `k` Taylor coefficients of the polynomial at `r`
/// (value, first derivative / 1!, second / 2!, ...).
pub fn taylor_at(coeffs: &[f64], r: Complex64, k: usize) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = coeffs.iter().map(|c| Complex64::new(*c, 0.0)).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        if work.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
        } else {
            out.push(synth_div(&mut work, r));
        }
    }
    out
}

/// Eigenvalue iteration failed to converge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoConvergence;

impl fmt::Display for NoConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "companion-matrix QR iteration did not converge")
    }
}

impl core::error::Error for NoConvergence {}

/// All complex roots of the polynomial (with multiplicity, unsorted).
///
/// The polynomial is normalized to monic form, exact zero roots are deflated
/// first, and the remaining roots come from the balanced companion matrix.
pub fn roots(p: &Poly) -> Result<Vec<Complex64>, NoConvergence> {
    let mut coeffs = p.coeffs().to_vec();
    if coeffs.len() <= 1 {
        return Ok(vec![]);
    }
    // Normalize to monic.
    let lead = *coeffs.last().expect("nonempty");
    for c in &mut coeffs {
        *c /= lead;
    }

    let mut out = Vec::with_capacity(coeffs.len() - 1);
    // Exact roots at zero.
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        out.push(Complex64::new(0.0, 0.0));
        coeffs.remove(0);
    }

    let n = coeffs.len() - 1;
    match n {
        0 => {}
        1 => out.push(Complex64::new(-coeffs[0], 0.0)),
        2 => {
            let (r1, r2) = quadratic_roots(coeffs[1], coeffs[0]);
            out.push(r1);
            out.push(r2);
        }
        _ => {
            let mut m = companion(&coeffs, n);
            balance(&mut m, n);
            let eigs = hessenberg_eigenvalues(&mut m, n)?;
            out.extend(eigs);
        }
    }

    // Newton polish (keeps the polished value only if it improves |p|).
    for r in &mut out {
        let mut z = *r;
        let mut best = z;
        let mut best_abs = p.eval_complex(z).norm();
        for _ in 0..3 {
            let pv = p.eval_complex(z);
            let dv = p.derivative().eval_complex(z);
            if dv.norm() == 0.0 {
                break;
            }
            z -= pv / dv;
            let a = p.eval_complex(z).norm();
            if a < best_abs {
                best_abs = a;
                best = z;
            }
        }
        *r = best;
    }
    Ok(out)
}

/// Roots of the monic quadratic `x^2 + b x + c`.
fn quadratic_roots(b: f64, c: f64) -> (Complex64, Complex64) {
    let half = -b / 2.0;
    let disc = half * half - c;
    if disc >= 0.0 {
        let sq = math::sqrt(disc);
        // Stable form: compute the larger-magnitude root first.
        let r1 = if half >= 0.0 { half + sq } else { half - sq };
        let r2 = if r1 != 0.0 { c / r1 } else { half - sq };
        (Complex64::new(r1, 0.0), Complex64::new(r2, 0.0))
    } else {
        let sq = math::sqrt(-disc);
        (Complex64::new(half, sq), Complex64::new(half, -sq))
    }
}

/// Companion matrix of a monic polynomial (row-major n x n, upper Hessenberg).
fn companion(monic: &[f64], n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + (n - 1)] = -monic[i];
        if i + 1 < n {
            m[(i + 1) * n + i] = 1.0;
        }
    }
    m
}

/// Parlett-Reinsch balancing with powers of two (norm equalization).
fn balance(m: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += math::abs(m[j * n + i]);
                    r += math::abs(m[i * n + j]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = c + r;
            let mut c2 = c;
            let mut r2 = r;
            while c2 < r2 / RADIX {
                c2 *= RADIX;
                r2 /= RADIX;
                f *= RADIX;
            }
            while c2 >= r2 * RADIX {
                c2 /= RADIX;
                r2 *= RADIX;
                f /= RADIX;
            }
            if (c2 + r2) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[i * n + j] /= f;
                    m[j * n + i] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Eigenvalues of a 2x2 block.
fn eig2(a: f64, b: f64, c: f64, d: f64) -> (Complex64, Complex64) {
    let half_tr = (a + d) / 2.0;
    let det = a * d - b * c;
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let sq = math::sqrt(disc);
        (
            Complex64::new(half_tr + sq, 0.0),
            Complex64::new(half_tr - sq, 0.0),
        )
    } else {
        let sq = math::sqrt(-disc);
        (Complex64::new(half_tr, sq), Complex64::new(half_tr, -sq))
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns eigenvalues.
fn hessenberg_eigenvalues(h: &mut [f64], n: usize) -> Result<Vec<Complex64>, NoConvergence> {
    let mut eigs = Vec::with_capacity(n);
    let mut p = n;
    let mut iters_block = 0usize;
    let mut total = 0usize;
    let max_total = 80 * n.max(1);

    while p > 0 {
        if p == 1 {
            eigs.push(Complex64::new(h[0], 0.0));
            break;
        }
        // Find the start of the trailing unreduced block [l, p).
        let mut l = p - 1;
        while l > 0 {
            let s = math::abs(h[(l - 1) * n + (l - 1)]) + math::abs(h[l * n + l]);
            let s = if s == 0.0 { 1.0 } else { s };
            if math::abs(h[l * n + (l - 1)]) <= f64::EPSILON * s {
                h[l * n + (l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        let block = p - l;
        if block == 1 {
            eigs.push(Complex64::new(h[(p - 1) * n + (p - 1)], 0.0));
            p -= 1;
            iters_block = 0;
        } else if block == 2 {
            let (e1, e2) = eig2(
                h[(p - 2) * n + (p - 2)],
                h[(p - 2) * n + (p - 1)],
                h[(p - 1) * n + (p - 2)],
                h[(p - 1) * n + (p - 1)],
            );
            eigs.push(e1);
            eigs.push(e2);
            p -= 2;
            iters_block = 0;
        } else {
            total += 1;
            if total > max_total {
                return Err(NoConvergence);
            }
            let exceptional = iters_block > 0 && iters_block % 12 == 0;
            francis_sweep(h, n, l, p, exceptional);
            iters_block += 1;
        }
    }
    Ok(eigs)
}

/// One Francis double-shift bulge chase on the block rows/cols [l, p).
fn francis_sweep(h: &mut [f64], n: usize, l: usize, p: usize, exceptional: bool) {
    let bn = p - l;
    let at = |i: usize, j: usize| (l + i) * n + (l + j);

    let (s, t) = if exceptional {
        let sh = math::abs(h[at(bn - 1, bn - 2)]) + math::abs(h[at(bn - 2, bn - 3)]);
        (1.5 * sh, sh * sh)
    } else {
        let a = h[at(bn - 2, bn - 2)];
        let b = h[at(bn - 2, bn - 1)];
        let c = h[at(bn - 1, bn - 2)];
        let d = h[at(bn - 1, bn - 1)];
        (a + d, a * d - b * c)
    };

    // Inject the bulge at the lowest row where the spill through the
    // incoming subdiagonal is negligible; a near-zero subdiagonal in the
    // middle of the block otherwise destroys the shift information before
    // it reaches the trailing end.
    let mut m = bn - 3;
    let mut x;
    let mut y;
    let mut z;
    loop {
        let hmm = h[at(m, m)];
        x = hmm * hmm + h[at(m, m + 1)] * h[at(m + 1, m)] - s * hmm + t;
        y = h[at(m + 1, m)] * (hmm + h[at(m + 1, m + 1)] - s);
        z = h[at(m + 1, m)] * h[at(m + 2, m + 1)];
        if m == 0 {
            break;
        }
        let spill = math::abs(h[at(m, m - 1)]) * (math::abs(y) + math::abs(z));
        let anchor = math::abs(x)
            * (math::abs(h[at(m - 1, m - 1)]) + math::abs(hmm) + math::abs(h[at(m + 1, m + 1)]));
        if spill <= f64::EPSILON * anchor {
            break;
        }
        m -= 1;
    }

    for k in m..=(bn - 3) {
        apply_reflector3(h, n, l, bn, k, x, y, z);
        x = h[at(k + 1, k)];
        y = h[at(k + 2, k)];
        if k + 3 < bn {
            z = h[at(k + 3, k)];
        }
        if k + 3 >= bn {
            break;
        }
    }
    // Final 2-element reflector on rows (bn-2, bn-1).
    apply_reflector2(h, n, l, bn, bn - 2, x, y);
}

/// Householder reflector zeroing (y, z) of the bulge column, applied as a
/// similarity on rows/cols (l+k, l+k+1, l+k+2) of the block.
fn apply_reflector3(h: &mut [f64], n: usize, l: usize, bn: usize, k: usize, x: f64, y: f64, z: f64) {
    let norm = math::sqrt(x * x + y * y + z * z);
    if norm == 0.0 {
        return;
    }
    let alpha = if x >= 0.0 { -norm } else { norm };
    let v0 = x - alpha;
    let v1 = y;
    let v2 = z;
    let vsq = v0 * v0 + v1 * v1 + v2 * v2;
    if vsq == 0.0 {
        return;
    }
    let beta = 2.0 / vsq;
    let r0 = l + k;
    let r1 = l + k + 1;
    let r2 = l + k + 2;
    // Left: P * H on block columns.
    for j in 0..bn {
        let col = l + j;
        let s = beta * (v0 * h[r0 * n + col] + v1 * h[r1 * n + col] + v2 * h[r2 * n + col]);
        h[r0 * n + col] -= s * v0;
        h[r1 * n + col] -= s * v1;
        h[r2 * n + col] -= s * v2;
    }
    // Right: H * P on block rows.
    for i in 0..bn {
        let row = l + i;
        let s = beta * (v0 * h[row * n + r0] + v1 * h[row * n + r1] + v2 * h[row * n + r2]);
        h[row * n + r0] -= s * v0;
        h[row * n + r1] -= s * v1;
        h[row * n + r2] -= s * v2;
    }
}

fn apply_reflector2(h: &mut [f64], n: usize, l: usize, bn: usize, k: usize, x: f64, y: f64) {
    let norm = math::hypot(x, y);
    if norm == 0.0 {
        return;
    }
    let alpha = if x >= 0.0 { -norm } else { norm };
    let v0 = x - alpha;
    let v1 = y;
    let vsq = v0 * v0 + v1 * v1;
    if vsq == 0.0 {
        return;
    }
    let beta = 2.0 / vsq;
    let r0 = l + k;
    let r1 = l + k + 1;
    for j in 0..bn {
        let col = l + j;
        let s = beta * (v0 * h[r0 * n + col] + v1 * h[r1 * n + col]);
        h[r0 * n + col] -= s * v0;
        h[r1 * n + col] -= s * v1;
    }
    for i in 0..bn {
        let row = l + i;
        let s = beta * (v0 * h[row * n + r0] + v1 * h[row * n + r1]);
        h[row * n + r0] -= s * v0;
        h[row * n + r1] -= s * v1;
    }
}
