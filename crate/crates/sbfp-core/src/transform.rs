//! Transform analytics for the memoryless observation case.
//!
//! With exponential interarrivals every Laplace-Stieltjes block is the
//! rational function `(1 + mean * argument)^-1`, so the joint functional of
//! the first turning point is a rational function of the Laplace-Carson
//! variable `x`. This module evaluates those blocks pointwise, assembles the
//! functional as an exact [`RationalFn`], inverts it at a horizon `h` either
//! exactly (partial fractions over numerically found denominator roots) or
//! numerically (Gaver-Stehfest), and extracts the restricted moments.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::math;
use crate::poly::{self, Poly};

/// Evaluation refuses points closer than this to a pole.
const POLE_GUARD: f64 = 1e-10;

/// Default Gaver-Stehfest order.
pub const DEFAULT_GS_ORDER: usize = 14;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Errors from transform evaluation and inversion.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformError {
    /// A denominator vanished at the requested evaluation point.
    PoleHit { at: f64 },
    /// Denominator roots are clustered beyond what partial fractions can
    /// resolve; fall back to [`lc_inverse_numeric`].
    IllConditioned,
    /// Successive Gaver-Stehfest orders failed to stabilize.
    Divergent,
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PoleHit { at } => write!(f, "transform evaluated within {POLE_GUARD} of a pole (argument {at})"),
            Self::IllConditioned => write!(f, "denominator roots too clustered for partial fractions"),
            Self::Divergent => write!(f, "Gaver-Stehfest estimates failed to stabilize"),
        }
    }
}

impl core::error::Error for TransformError {}

/// Parameter validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidParams(pub &'static str);

impl fmt::Display for InvalidParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameters: {}", self.0)
    }
}

impl core::error::Error for InvalidParams {}

// ---------------------------------------------------------------------------
// Parameters and context
// ---------------------------------------------------------------------------

/// Scalar parameters of the memoryless-case transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LstParams {
    /// Mean interarrival time of observations (> 0).
    pub delta_mean: f64,
    /// Mean of the initial observation delay (>= 0; 0 means no delay).
    pub delta0_mean: f64,
    /// Volatility (>= 0).
    pub sigma: f64,
    /// Initial position.
    pub a0: f64,
    /// Mean drift slope across observed steps.
    pub w_bar: f64,
    /// Drift slope of the step before the turning point.
    pub w_prev: f64,
    /// Drift slope of the turning step.
    pub w_exit: f64,
}

impl LstParams {
    pub fn new(
        delta_mean: f64,
        delta0_mean: f64,
        sigma: f64,
        a0: f64,
        w_bar: f64,
        w_prev: f64,
        w_exit: f64,
    ) -> Result<Self, InvalidParams> {
        let p = Self { delta_mean, delta0_mean, sigma, a0, w_bar, w_prev, w_exit };
        if !(p.delta_mean > 0.0) || !p.delta_mean.is_finite() {
            return Err(InvalidParams("delta_mean must be positive and finite"));
        }
        if !(p.delta0_mean >= 0.0) || !p.delta0_mean.is_finite() {
            return Err(InvalidParams("delta0_mean must be nonnegative and finite"));
        }
        if !(p.sigma >= 0.0) || !p.sigma.is_finite() {
            return Err(InvalidParams("sigma must be nonnegative and finite"));
        }
        for v in [p.a0, p.w_bar, p.w_prev, p.w_exit] {
            if !v.is_finite() {
                return Err(InvalidParams("all drift fields must be finite"));
            }
        }
        Ok(p)
    }
}

/// Transform-variable bundle: the duals of the pre-exit position, the exit
/// position, the pre-exit time and the exit time, plus the horizon `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformContext {
    pub u: f64,
    pub v: f64,
    /// Dual of the pre-exit observation time.
    pub vartheta: f64,
    /// Dual of the exit time.
    pub theta: f64,
    /// Horizon (time level) at which the transform is inverted.
    pub h: f64,
}

impl TransformContext {
    /// Context with only `u` set, the common slice for moment work.
    pub fn u_only(u: f64, h: f64) -> Self {
        Self { u, v: 0.0, vartheta: 0.0, theta: 0.0, h }
    }
}

// ---------------------------------------------------------------------------
// Scalar Laplace-Stieltjes blocks
// ---------------------------------------------------------------------------

/// LST of the interarrival law: `(1 + delta_mean * theta)^-1`.
pub fn delta_lst(theta: f64, delta_mean: f64) -> f64 {
    1.0 / (1.0 + delta_mean * theta)
}

/// LST of the initial delay: `(1 + delta0_mean * theta)^-1`.
pub fn delta0_lst(theta: f64, delta0_mean: f64) -> f64 {
    1.0 / (1.0 + delta0_mean * theta)
}

/// Which drift slope (and which delay mean) a gamma block carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaKind {
    /// Initial-observation block: uses `a0` and the initial-delay mean.
    Initial,
    /// Turning-step block: uses `w_exit`.
    Exit,
    /// Pre-exit-step block: uses `w_prev`.
    Prev,
    /// Averaged block: uses `w_bar`.
    Average,
}

/// Marginal LST `1 / (1 + mean * (sigma^2/2 * omega^2 + w * omega + x))`.
pub fn gamma_fn(
    kind: GammaKind,
    omega: f64,
    x: f64,
    params: &LstParams,
) -> Result<f64, TransformError> {
    let (mean, w) = match kind {
        GammaKind::Initial => (params.delta0_mean, params.a0),
        GammaKind::Exit => (params.delta_mean, params.w_exit),
        GammaKind::Prev => (params.delta_mean, params.w_prev),
        GammaKind::Average => (params.delta_mean, params.w_bar),
    };
    let arg = 0.5 * params.sigma * params.sigma * omega * omega + w * omega + x;
    let den = 1.0 + mean * arg;
    if math::abs(den) < POLE_GUARD {
        return Err(TransformError::PoleHit { at: arg });
    }
    Ok(1.0 / den)
}

// ---------------------------------------------------------------------------
// The Psi transform (dual of the pre-exit position)
// ---------------------------------------------------------------------------

/// Scalar intermediates of the component form of Psi at a given `(u, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiComponents {
    pub g0: f64,
    pub g1: f64,
    pub d: f64,
    pub d0: f64,
    pub d2: f64,
}

/// The intermediates G0, G1, D, D0, D2 of the component form.
pub fn psi_components(x: f64, u: f64, params: &LstParams) -> PsiComponents {
    let half_s2 = 0.5 * params.sigma * params.sigma;
    let dm = params.delta_mean;
    let d0m = params.delta0_mean;
    PsiComponents {
        g0: d0m * x / (d0m * x + 1.0),
        g1: dm * x / (dm * x + 1.0),
        d: dm * (half_s2 * u * u + params.w_bar * u + x),
        d0: d0m * (half_s2 * u * u + params.a0 * u + x),
        d2: dm * (half_s2 * u * u + params.w_prev * u + x),
    }
}

/// Both algebraic forms of Psi evaluated independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiForms {
    /// Assembled from the gamma blocks.
    pub gamma_form: f64,
    /// Assembled from the G/D intermediates.
    pub component_form: f64,
}

pub fn psi_forms(x: f64, u: f64, params: &LstParams) -> Result<PsiForms, TransformError> {
    // Gamma-block form.
    let g_init_0 = gamma_fn(GammaKind::Initial, 0.0, x, params)?;
    let g_init_u = gamma_fn(GammaKind::Initial, u, x, params)?;
    let g_prev_u = gamma_fn(GammaKind::Prev, u, x, params)?;
    let g_exit_0 = gamma_fn(GammaKind::Exit, 0.0, x, params)?;
    let g_avg_u = gamma_fn(GammaKind::Average, u, x, params)?;
    let quad = g_avg_u * g_avg_u - 2.0 * g_avg_u;
    if math::abs(quad) < POLE_GUARD {
        return Err(TransformError::PoleHit { at: x });
    }
    let gamma_form = (1.0 - g_init_0) - 0.5 * g_init_u * g_prev_u * (1.0 - g_exit_0) / quad;

    // Component form.
    let c = psi_components(x, u, params);
    let one_d = 1.0 + c.d;
    let den = (2.0 * c.d + 1.0) * (1.0 + c.d0) * (1.0 + c.d2);
    if math::abs(den) < POLE_GUARD {
        return Err(TransformError::PoleHit { at: x });
    }
    let component_form = c.g0 + 0.5 * c.g1 * one_d * one_d / den;

    Ok(PsiForms { gamma_form, component_form })
}

/// Psi at `(x, u)` (the component form).
pub fn psi_transform(x: f64, u: f64, params: &LstParams) -> Result<f64, TransformError> {
    Ok(psi_forms(x, u, params)?.component_form)
}

// ---------------------------------------------------------------------------
// Rational functions of the Laplace-Carson variable
// ---------------------------------------------------------------------------

/// A real rational function, coefficient lists in ascending powers of x.
///
/// The denominator's leading coefficient is normalized to 1 on construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RationalFn {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalFn {
    /// Build from ascending coefficient lists. Panics if the denominator is
    /// (numerically) the zero polynomial.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Self {
        let num = Poly::new(num);
        let den = Poly::new(den);
        assert!(!den.is_zero(), "rational function with zero denominator");
        let lead = den.leading();
        Self {
            num: num.scale(1.0 / lead).coeffs().to_vec(),
            den: den.scale(1.0 / lead).coeffs().to_vec(),
        }
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn num_poly(&self) -> Poly {
        Poly::new(self.num.clone())
    }

    pub fn den_poly(&self) -> Poly {
        Poly::new(self.den.clone())
    }

    /// True when `deg(num) <= deg(den)`.
    pub fn is_proper(&self) -> bool {
        self.num.len() <= self.den.len()
    }

    pub fn eval(&self, x: f64) -> Result<f64, TransformError> {
        let den = Poly::new(self.den.clone()).eval(x);
        if math::abs(den) < POLE_GUARD {
            return Err(TransformError::PoleHit { at: x });
        }
        Ok(Poly::new(self.num.clone()).eval(x) / den)
    }
}

// --- factored assembly -----------------------------------------------------

fn same_root(a: f64, b: f64) -> bool {
    math::abs(a - b) <= 1e-9 * math::abs(a).max(math::abs(b)).max(1.0)
}

/// Linear factor `1 + mean * (q + x)` as `(c, s)` with `c = 1 + mean*q`.
fn lst_factor(mean: f64, q: f64) -> (f64, f64) {
    (1.0 + mean * q, mean)
}

// --- sums of scaled monic products --------------------------------------
//
// The joint-transform assembly is a sum of terms whose numerators and
// denominators are products of known linear factors. Keeping that structure
// (instead of expanding to coefficients) preserves relative precision when
// perturbed factors nearly coincide, which the finite-difference moments
// depend on.

/// `coef * prod (x - num_roots_i) / prod (x - den_roots_j)`.
struct ProductTerm {
    coef: f64,
    num_roots: Vec<f64>,
    den_roots: Vec<f64>,
}

impl ProductTerm {
    /// Build from linear factors `c + s x`; constant factors fold into the
    /// coefficient, linear ones become monic roots.
    fn new(mut coef: f64, num_factors: &[(f64, f64)], den_factors: &[(f64, f64)]) -> Self {
        let mut num_roots = Vec::new();
        for &(c, s) in num_factors {
            if s == 0.0 {
                coef *= c;
            } else {
                coef *= s;
                num_roots.push(-c / s);
            }
        }
        let mut den_roots = Vec::new();
        for &(c, s) in den_factors {
            if s == 0.0 {
                debug_assert!(math::abs(c) > POLE_GUARD, "degenerate constant factor");
                coef /= c;
            } else {
                coef /= s;
                den_roots.push(-c / s);
            }
        }
        Self { coef, num_roots, den_roots }
    }
}

/// A transform as a sum of product terms over a shared pole multiset.
///
/// Each stored term's `num_roots` already includes the lcm-completion
/// factors, so the common numerator is `sum coef_t prod (x - root)` and the
/// denominator is `prod (x - pole)^mult`.
struct FactoredSum {
    terms: Vec<ProductTerm>,
    poles: Vec<(f64, usize)>,
}

impl FactoredSum {
    /// Truncated Taylor coefficients of the common numerator at `r`
    /// (`k` terms), computed factor by factor so near-zero values keep
    /// relative precision.
    fn num_taylor_at(&self, r: f64, k: usize) -> Vec<f64> {
        let mut total = vec![0.0; k];
        for t in &self.terms {
            let mut series = vec![0.0; k];
            series[0] = t.coef;
            for &root in &t.num_roots {
                let c0 = r - root;
                for j in (0..k).rev() {
                    let lower = if j > 0 { series[j - 1] } else { 0.0 };
                    series[j] = series[j] * c0 + lower;
                }
            }
            for j in 0..k {
                total[j] += series[j];
            }
        }
        total
    }
}

fn group_roots(roots: impl Iterator<Item = f64>) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for r in roots {
        match out.iter_mut().find(|(g, _)| same_root(*g, r)) {
            Some((_, m)) => *m += 1,
            None => out.push((r, 1)),
        }
    }
    out
}

/// Combine product terms over their least common denominator.
///
/// Returns the expanded rational function (with exact common numerator
/// factors cancelled) and the factored sum over the uncancelled pole
/// multiset.
fn combine_products(terms: Vec<ProductTerm>) -> (RationalFn, FactoredSum) {
    // Union pole multiset: per-root maximum multiplicity across terms.
    let mut union: Vec<(f64, usize)> = Vec::new();
    for t in &terms {
        if t.coef == 0.0 {
            continue;
        }
        for (r, m) in group_roots(t.den_roots.iter().copied()) {
            match union.iter_mut().find(|(g, _)| same_root(*g, r)) {
                Some((_, gm)) => *gm = (*gm).max(m),
                None => union.push((r, m)),
            }
        }
    }

    // Complete each term's numerator with its missing lcm factors.
    let mut completed: Vec<ProductTerm> = Vec::new();
    for t in terms {
        if t.coef == 0.0 {
            continue;
        }
        let mut num_roots = t.num_roots.clone();
        for &(r, m) in &union {
            let own = t.den_roots.iter().filter(|d| same_root(**d, r)).count();
            for _ in own..m {
                num_roots.push(r);
            }
        }
        completed.push(ProductTerm { coef: t.coef, num_roots, den_roots: t.den_roots });
    }

    // Expanded numerator and denominator for the coefficient-facing view.
    let mut num = Poly::zero();
    for t in &completed {
        let mut part = Poly::constant(t.coef);
        for &r in &t.num_roots {
            part = part.mul(&Poly::linear(-r, 1.0));
        }
        num = num.add(&part);
    }
    let mut mults = union.clone();
    loop {
        let mut cancelled = false;
        for entry in mults.iter_mut() {
            if entry.1 == 0 || num.is_zero() {
                continue;
            }
            let (quot, rem) = num.deflate_real(entry.0);
            let scale: f64 = num
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| math::abs(*c) * math::powi(math::abs(entry.0), i as i32))
                .sum();
            if math::abs(rem) <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                num = quot;
                entry.1 -= 1;
                cancelled = true;
            }
        }
        if !cancelled {
            break;
        }
    }
    let mut den = Poly::constant(1.0);
    for (r, m) in &mults {
        for _ in 0..*m {
            den = den.mul(&Poly::linear(-r, 1.0));
        }
    }
    let rational = RationalFn::new(num.coeffs().to_vec(), den.coeffs().to_vec());
    (rational, FactoredSum { terms: completed, poles: union })
}

/// Exact rational representation of Psi in x at a fixed `u`.
pub fn psi_rational(u: f64, params: &LstParams) -> RationalFn {
    let half_s2 = 0.5 * params.sigma * params.sigma;
    let dm = params.delta_mean;
    let d0m = params.delta0_mean;

    let q_avg = half_s2 * u * u + params.w_bar * u;
    let q_init = half_s2 * u * u + params.a0 * u;
    let q_prev = half_s2 * u * u + params.w_prev * u;

    let g0_den = lst_factor(d0m, 0.0); // 1 + d0m x
    let g1_den = lst_factor(dm, 0.0); // 1 + dm x
    let one_d = lst_factor(dm, q_avg); // 1 + D
    let factor_a = (1.0 + 2.0 * dm * q_avg, 2.0 * dm); // 2D + 1
    let factor_b = lst_factor(d0m, q_init); // 1 + D0
    let factor_c = lst_factor(dm, q_prev); // 1 + D2

    let mut terms = Vec::new();
    // G0 = d0m x / (1 + d0m x); vanishes when there is no initial delay.
    if d0m > 0.0 {
        terms.push(ProductTerm::new(1.0, &[(0.0, d0m)], &[g0_den]));
    }
    // (G1/2) (1+D)^2 / ((2D+1)(1+D0)(1+D2)) with G1 = dm x / (1 + dm x).
    terms.push(ProductTerm::new(
        0.5,
        &[(0.0, dm), one_d, one_d],
        &[g1_den, factor_a, factor_b, factor_c],
    ));
    combine_products(terms).0
}

/// Exact rational representation of `-dPsi/du` at `u = 0`.
///
/// Derived by the quotient rule on the component form; the shared
/// `(1 + delta_mean x)` factors are cancelled symbolically before expansion
/// so genuine pole multiplicities stay at two.
pub fn d_du_psi_rational(params: &LstParams) -> RationalFn {
    let dm = params.delta_mean;
    let d0m = params.delta0_mean;

    let fa = (1.0, 2.0 * dm); // A = 2 dm x + 1
    let fb = (1.0, d0m); // B = 1 + d0m x
    let fc = (1.0, dm); // C = 1 + dm x
    let x = (0.0, 1.0);
    let den = [fa, fa, fb, fb, fc];

    // num = (dm x / 2) [ A (d0m a0 C + dm w_prev B) - 2 dm^2 w_bar x B ],
    // expanded into three monic products over the shared denominator.
    let terms = vec![
        ProductTerm::new(0.5 * dm * d0m * params.a0, &[x, fa, fc], &den),
        ProductTerm::new(0.5 * dm * dm * params.w_prev, &[x, fa, fb], &den),
        ProductTerm::new(-dm * dm * dm * params.w_bar, &[x, x, fb], &den),
    ];
    combine_products(terms).0
}

/// The full joint transform in x at fixed `(u, v, vartheta, theta)`.
///
/// At `v = vartheta = theta = 0` this reduces exactly to [`psi_rational`],
/// which is assembled independently from the component form.
pub fn phi_transform(
    u: f64,
    v: f64,
    vartheta: f64,
    theta: f64,
    params: &LstParams,
) -> Result<RationalFn, TransformError> {
    Ok(phi_transform_parts(u, v, vartheta, theta, params)?.0)
}

/// The joint transform together with its factored-sum representation.
fn phi_transform_parts(
    u: f64,
    v: f64,
    vartheta: f64,
    theta: f64,
    params: &LstParams,
) -> Result<(RationalFn, FactoredSum), TransformError> {
    let half_s2 = 0.5 * params.sigma * params.sigma;
    let dm = params.delta_mean;
    let d0m = params.delta0_mean;
    let uv = u + v;

    // psi0 and Gamma0 are scalar gamma blocks (no x dependence).
    let q_psi = half_s2 * v * v + params.a0 * v + theta;
    let c_psi = 1.0 + d0m * q_psi;
    if math::abs(c_psi) < POLE_GUARD {
        return Err(TransformError::PoleHit { at: q_psi });
    }
    let q_exit = half_s2 * v * v + params.w_exit * v + theta;
    let c_exit = 1.0 + dm * q_exit;
    if math::abs(c_exit) < POLE_GUARD {
        return Err(TransformError::PoleHit { at: q_exit });
    }

    // Linear factors in x.
    let l1 = lst_factor(d0m, q_psi); // den of psi1 = gamma_init(v, theta + x)
    let l2 = lst_factor(d0m, half_s2 * uv * uv + params.a0 * uv + vartheta + theta);
    let l3 = lst_factor(dm, half_s2 * uv * uv + params.w_prev * uv + vartheta + theta);
    let l4 = lst_factor(dm, q_exit); // den of gamma_exit(v, theta + x)
    let l5 = lst_factor(dm, half_s2 * uv * uv + params.w_bar * uv + vartheta + theta);
    // phibar^2 - 2 phibar = (1 - 2 L5) / L5^2 for phibar = 1/L5.
    let w = (1.0 - 2.0 * l5.0, -2.0 * l5.1);
    if w.1 == 0.0 && math::abs(w.0) < POLE_GUARD {
        return Err(TransformError::PoleHit { at: l5.0 });
    }

    let mut terms = Vec::new();
    // psi0 - psi1 = (psi0 L1 - 1)/L1 = (s1/c1) x / L1 since psi0 = 1/c1.
    if l1.1 != 0.0 {
        terms.push(ProductTerm::new(1.0 / c_psi, &[(0.0, l1.1)], &[l1]));
    }
    // -(Gamma0 L4 - 1) L5^2 / (2 L2 L3 L4 W) with Gamma0 = 1/c4, so the
    // numerator is (s4/c4) x * L5^2.
    terms.push(ProductTerm::new(
        -1.0 / (2.0 * c_exit),
        &[(0.0, l4.1), l5, l5],
        &[l2, l3, l4, w],
    ));
    Ok(combine_products(terms))
}

// ---------------------------------------------------------------------------
// Exact Laplace-Carson inversion by partial fractions
// ---------------------------------------------------------------------------

/// One damped term `e^{root h} * sum_j coeffs[j] h^j / j!` of an inverse.
#[derive(Debug, Clone)]
pub struct ExpPolyTerm {
    pub root: Complex64,
    /// Coefficient of `h^j / j!` (index j).
    pub coeffs: Vec<Complex64>,
}

/// An inverse transform as a finite sum of exponential-polynomial terms.
///
/// Complex roots arrive in conjugate pairs; evaluation takes the real part,
/// which combines each pair into a damped oscillation.
#[derive(Debug, Clone)]
pub struct InverseTerms {
    terms: Vec<ExpPolyTerm>,
}

impl InverseTerms {
    pub fn terms(&self) -> &[ExpPolyTerm] {
        &self.terms
    }

    pub fn eval(&self, h: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut poly = Complex64::new(0.0, 0.0);
            let mut hpow = 1.0;
            let mut fact = 1.0;
            for (j, c) in t.coeffs.iter().enumerate() {
                if j > 0 {
                    hpow *= h;
                    fact *= j as f64;
                }
                poly += c * (hpow / fact);
            }
            acc += (t.root * h).exp() * poly;
        }
        acc.re
    }

    /// Term-by-term derivative in h (same roots, shifted coefficients).
    pub fn derivative(&self) -> InverseTerms {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let n = t.coeffs.len();
                let coeffs = (0..n)
                    .map(|j| {
                        let carry = if j + 1 < n { t.coeffs[j + 1] } else { Complex64::new(0.0, 0.0) };
                        t.root * t.coeffs[j] + carry
                    })
                    .collect();
                ExpPolyTerm { root: t.root, coeffs }
            })
            .collect();
        InverseTerms { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Cluster radii tried in turn until the decomposition verifies.
const MERGE_RADII: [f64; 5] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

fn cluster_roots(roots: &[Complex64], radius: f64) -> Vec<(Complex64, usize)> {
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&a, &b| {
        roots[a]
            .re
            .partial_cmp(&roots[b].re)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(roots[a].im.partial_cmp(&roots[b].im).unwrap_or(core::cmp::Ordering::Equal))
    });
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    'outer: for &i in &order {
        let r = roots[i];
        for c in clusters.iter_mut() {
            let tol = radius * c.iter().fold(1.0_f64, |m, z| m.max(z.norm())).max(r.norm());
            if c.iter().any(|z| (*z - r).norm() <= tol) {
                c.push(r);
                continue 'outer;
            }
        }
        clusters.push(vec![r]);
    }
    clusters
        .into_iter()
        .map(|c| {
            let n = c.len();
            let mean = c.iter().sum::<Complex64>() / n as f64;
            (mean, n)
        })
        .collect()
}

/// Newton-polish a multiple root on the (m-1)-th derivative, then snap tiny
/// imaginary parts to zero.
fn polish_cluster(den_full: &Poly, root: Complex64, mult: usize) -> Complex64 {
    let mut target = den_full.clone();
    for _ in 1..mult {
        target = target.derivative();
    }
    let dtarget = target.derivative();
    let mut z = root;
    let mut best = z;
    let mut best_abs = target.eval_complex(z).norm();
    for _ in 0..10 {
        let f = target.eval_complex(z);
        let d = dtarget.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        z -= f / d;
        let a = target.eval_complex(z).norm();
        if a < best_abs {
            best_abs = a;
            best = z;
        } else {
            break;
        }
    }
    let mut out = best;
    if math::abs(out.im) <= 1e-10 * math::abs(out.re).max(1.0) {
        out.im = 0.0;
    }
    out
}

fn taylor_at_complex(coeffs: &[Complex64], r: Complex64, k: usize) -> Vec<Complex64> {
    let mut work = coeffs.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        if work.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
        } else {
            out.push(poly::synth_div(&mut work, r));
        }
    }
    out
}

/// Invert the Laplace-Carson transform `g` into exponential-polynomial terms.
///
/// Computes the partial fractions of `g(x)/x` over the numerically found
/// denominator roots. Roots are clustered into multiplicities starting at
/// the base radius; each candidate decomposition is verified against direct
/// evaluation at probe points and the radius is widened until verification
/// passes.
pub fn invert_rational(g: &RationalFn) -> Result<InverseTerms, TransformError> {
    assert!(g.is_proper(), "Laplace-Carson inversion needs deg(num) <= deg(den)");
    let num = g.num_poly();
    if num.is_zero() {
        return Ok(InverseTerms { terms: vec![] });
    }
    let den = g.den_poly();
    let den_full = den.mul_x();

    let mut all_roots = poly::roots(&den).map_err(|_| TransformError::IllConditioned)?;
    all_roots.push(Complex64::new(0.0, 0.0));

    let num_c: Vec<Complex64> = num.coeffs().iter().map(|c| Complex64::new(*c, 0.0)).collect();
    let den_full_c: Vec<Complex64> =
        den_full.coeffs().iter().map(|c| Complex64::new(*c, 0.0)).collect();

    for radius in MERGE_RADII {
        let clusters = cluster_roots(&all_roots, radius);
        let mut terms: Vec<ExpPolyTerm> = Vec::with_capacity(clusters.len());
        let mut ok = true;
        for (centroid, mult) in &clusters {
            let root = if *mult > 1 {
                polish_cluster(&den_full, *centroid, *mult)
            } else {
                let mut r = *centroid;
                if math::abs(r.im) <= 1e-10 * math::abs(r.re).max(1.0) {
                    r.im = 0.0;
                }
                r
            };
            // R(x) = den_full / (x - root)^mult.
            let mut rpoly = den_full_c.clone();
            for _ in 0..*mult {
                poly::synth_div(&mut rpoly, root);
            }
            let p_taylor = taylor_at_complex(&num_c, root, *mult);
            let r_taylor = taylor_at_complex(&rpoly, root, *mult);
            if r_taylor[0].norm() == 0.0 {
                ok = false;
                break;
            }
            // Series division: s_k = (p_k - sum r_j s_{k-j}) / r_0.
            let mut s = vec![Complex64::new(0.0, 0.0); *mult];
            for k in 0..*mult {
                let mut acc = p_taylor[k];
                for j in 1..=k {
                    acc -= r_taylor[j] * s[k - j];
                }
                s[k] = acc / r_taylor[0];
            }
            // Pole order j+1 carries h^j/j!: coeffs[j] = s[mult-1-j].
            let coeffs = (0..*mult).map(|j| s[*mult - 1 - j]).collect();
            terms.push(ExpPolyTerm { root, coeffs });
        }
        if !ok {
            continue;
        }
        if verify_partial_fractions(&num, &den, &terms) {
            return Ok(InverseTerms { terms });
        }
    }
    Err(TransformError::IllConditioned)
}

/// Compare the decomposition against `num/(x den)` at probe points.
fn verify_partial_fractions(num: &Poly, den: &Poly, terms: &[ExpPolyTerm]) -> bool {
    let max_pole = terms.iter().fold(0.0_f64, |m, t| m.max(t.root.norm()));
    let rho = 1.0 + max_pole;
    let probes = [1.37 * rho, 2.11 * rho, 3.03 * rho];
    let mut max_diff = 0.0_f64;
    let mut max_val = 0.0_f64;
    for &x in &probes {
        let direct = num.eval(x) / (x * den.eval(x));
        let z = Complex64::new(x, 0.0);
        let mut pf = Complex64::new(0.0, 0.0);
        for t in terms {
            let base = z - t.root;
            let mut pw = base;
            for (j, c) in t.coeffs.iter().enumerate() {
                if j > 0 {
                    pw *= base;
                }
                pf += c / pw;
            }
        }
        max_diff = max_diff.max(math::abs(pf.re - direct) + math::abs(pf.im));
        max_val = max_val.max(math::abs(direct));
    }
    max_diff <= 1e-8 * max_val.max(1e-30)
}

/// Exact inversion of the transform `g` at the level `h` (>= 0).
pub fn lc_inverse_rational(g: &RationalFn, h: f64) -> Result<f64, TransformError> {
    assert!(h >= 0.0, "inversion level must be nonnegative");
    Ok(invert_rational(g)?.eval(h))
}

/// Partial fractions of a factored-sum transform divided by x, against its
/// exactly known real pole multiset (no numerical root finding, no
/// coefficient expansion). Keeps full precision when perturbed poles nearly
/// coincide, which the finite-difference moments depend on.
fn invert_factored_sum(fs: &FactoredSum) -> Result<InverseTerms, TransformError> {
    if fs.terms.is_empty() {
        return Ok(InverseTerms { terms: vec![] });
    }
    // Append the Laplace-Carson 1/x pole, merging with an existing zero.
    let mut all: Vec<(f64, usize)> = Vec::with_capacity(fs.poles.len() + 1);
    let mut zero_mult = 1usize;
    for &(r, m) in &fs.poles {
        if r == 0.0 {
            zero_mult += m;
        } else {
            all.push((r, m));
        }
    }
    all.push((0.0, zero_mult));

    // Merge poles closer than 1e-6 relative: splitting costs cancellation
    // noise ~eps/gap, merging costs ~(gap*h)^2, and below this radius merging
    // wins at every horizon in play.
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut merged: Vec<(f64, usize)> = Vec::with_capacity(all.len());
    for (r, m) in all {
        match merged.last_mut() {
            Some((lr, lm)) if math::abs(*lr - r) <= 1e-6 * math::abs(r).max(1.0) => {
                *lr = (*lr * *lm as f64 + r * m as f64) / (*lm + m) as f64;
                *lm += m;
            }
            _ => merged.push((r, m)),
        }
    }
    let all = merged;

    let mut terms = Vec::with_capacity(all.len());
    for (i, &(root, mult)) in all.iter().enumerate() {
        // Taylor series at the pole of the product of the other factors,
        // accumulated linear factor by linear factor.
        let mut r_taylor = vec![0.0; mult];
        r_taylor[0] = 1.0;
        for (j, &(rj, mj)) in all.iter().enumerate() {
            if i == j {
                continue;
            }
            let c0 = root - rj;
            for _ in 0..mj {
                for k in (0..mult).rev() {
                    let lower = if k > 0 { r_taylor[k - 1] } else { 0.0 };
                    r_taylor[k] = r_taylor[k] * c0 + lower;
                }
            }
        }
        if r_taylor[0] == 0.0 {
            return Err(TransformError::IllConditioned);
        }
        let p_taylor = fs.num_taylor_at(root, mult);
        let mut s = vec![0.0; mult];
        for k in 0..mult {
            let mut acc = p_taylor[k];
            for j in 1..=k {
                acc -= r_taylor[j] * s[k - j];
            }
            s[k] = acc / r_taylor[0];
        }
        let coeffs = (0..mult)
            .map(|j| Complex64::new(s[mult - 1 - j], 0.0))
            .collect();
        terms.push(ExpPolyTerm { root: Complex64::new(root, 0.0), coeffs });
    }
    Ok(InverseTerms { terms })
}

// ---------------------------------------------------------------------------
// Gaver-Stehfest inversion
// ---------------------------------------------------------------------------

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Stehfest weights for an even order.
fn stehfest_weights(order: usize) -> Vec<f64> {
    let half = order / 2;
    let mut out = Vec::with_capacity(order);
    for k in 1..=order {
        let mut sum = 0.0;
        let lo = k.div_ceil(2);
        let hi = k.min(half);
        for j in lo..=hi {
            sum += math::powi(j as f64, half as i32) * factorial(2 * j)
                / (factorial(half - j)
                    * factorial(j)
                    * factorial(j - 1)
                    * factorial(k - j)
                    * factorial(2 * j - k));
        }
        let sign = if (k + half) % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * sum);
    }
    out
}

fn gs_estimate(g: &impl Fn(f64) -> f64, h: f64, order: usize) -> f64 {
    let weights = stehfest_weights(order);
    let ln2_h = core::f64::consts::LN_2 / h;
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let k = (i + 1) as f64;
            w * g(k * ln2_h) / k
        })
        .sum()
}

/// Gaver-Stehfest inversion of the Laplace-Carson transform `g` at `h > 0`.
///
/// Evaluates at orders `order-4`, `order-2` and `order`; if the last two do
/// not stabilize the transform is reported as [`TransformError::Divergent`].
/// For smooth transforms the documented accuracy is about 1e-6 relative in
/// double precision.
pub fn lc_inverse_numeric(
    g: impl Fn(f64) -> f64,
    h: f64,
    order: usize,
) -> Result<f64, TransformError> {
    assert!(h > 0.0, "Gaver-Stehfest needs h > 0");
    assert!(order % 2 == 0 && (6..=18).contains(&order), "order must be even in 6..=18");
    let lower = gs_estimate(&g, h, order - 2);
    let value = gs_estimate(&g, h, order);
    let spread = math::abs(value - lower);
    if spread > 1e-4 * math::abs(value).max(math::abs(lower)).max(1.0) {
        return Err(TransformError::Divergent);
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// The inverted functional and its restricted moments
// ---------------------------------------------------------------------------

/// The joint functional inverted at the horizon `ctx.h`.
///
/// The assembly knows the exact denominator factors, so the inversion runs
/// against them directly (this keeps full precision even when perturbed
/// variables put two poles within 1e-4 of each other, which matters for the
/// finite-difference moments). Falls back to the numerically-rooted route
/// and then Gaver-Stehfest if the factored structure degenerates.
pub fn phi_nu(ctx: &TransformContext, params: &LstParams) -> Result<f64, TransformError> {
    let (g, factored) = phi_transform_parts(ctx.u, ctx.v, ctx.vartheta, ctx.theta, params)?;
    if let Ok(terms) = invert_factored_sum(&factored) {
        return Ok(terms.eval(ctx.h));
    }
    match invert_rational(&g) {
        Ok(terms) => Ok(terms.eval(ctx.h)),
        Err(TransformError::IllConditioned) if ctx.h > 0.0 => {
            lc_inverse_numeric(|x| g.eval(x).unwrap_or(f64::NAN), ctx.h, DEFAULT_GS_ORDER)
        }
        Err(e) => Err(e),
    }
}

/// Which transform variable a finite-difference moment differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentVar {
    /// Pre-exit position (dual u).
    APrev,
    /// Pre-exit time (dual vartheta).
    TauPrev,
    /// Exit position (dual v).
    AExit,
    /// Exit time (dual theta).
    TauExit,
}

/// Restricted moment by Richardson-extrapolated central differences
/// (steps 1e-4 and 5e-5) of the inverted functional at the origin.
pub fn moment_fd(params: &LstParams, h: f64, var: MomentVar) -> Result<f64, TransformError> {
    let eval = |s: f64| -> Result<f64, TransformError> {
        let mut ctx = TransformContext { u: 0.0, v: 0.0, vartheta: 0.0, theta: 0.0, h };
        match var {
            MomentVar::APrev => ctx.u = s,
            MomentVar::TauPrev => ctx.vartheta = s,
            MomentVar::AExit => ctx.v = s,
            MomentVar::TauExit => ctx.theta = s,
        }
        phi_nu(&ctx, params)
    };
    let diff = |s: f64| -> Result<f64, TransformError> { Ok((eval(s)? - eval(-s)?) / (2.0 * s)) };
    let d1 = diff(1e-4)?;
    let d2 = diff(5e-5)?;
    Ok(-(4.0 * d2 - d1) / 3.0)
}

/// Indicator-restricted first moments at the horizon `h`.
///
/// These carry the pre-exit confinement indicator; they are not conditional
/// means. The pre-exit position uses the exact rational derivative route;
/// the other entries use finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RestrictedMoments {
    pub a_prev: f64,
    pub tau_prev: f64,
    pub a_exit: f64,
    pub tau_exit: f64,
    /// Mean exit index from the exit-time moment: |tau_exit| / delta_mean.
    pub nu: f64,
}

pub fn restricted_moments(params: &LstParams, h: f64) -> Result<RestrictedMoments, TransformError> {
    let a_prev = lc_inverse_rational(&d_du_psi_rational(params), h)?;
    let tau_prev = moment_fd(params, h, MomentVar::TauPrev)?;
    let a_exit = moment_fd(params, h, MomentVar::AExit)?;
    let tau_exit = moment_fd(params, h, MomentVar::TauExit)?;
    Ok(RestrictedMoments {
        a_prev,
        tau_prev,
        a_exit,
        tau_exit,
        nu: math::abs(tau_exit) / params.delta_mean,
    })
}

// ---------------------------------------------------------------------------
