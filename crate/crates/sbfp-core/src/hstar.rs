//! The optimal turning-point moment.
//!
//! Two routes are implemented and cross-compared, never merged:
//!
//! - **paper mode** solves the explicit transcendental equation
//!   `A e^{h/(2 delta)} = (U - h)/(h - V)` built from the drift constants;
//! - **direct mode** inverts the exact u-derivative transform into a sum of
//!   exponential terms `m(h)`, differentiates it term by term and looks for
//!   a stationary point of `m`.
//!
//! Paper mode ignores the initial position and delay (they do not appear in
//! its constants); direct mode carries them. The two do not agree in
//! general, so [`compare_modes`] reports both sides without asserting
//! equality.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::transform::{self, LstParams, TransformError};

/// Points in the paper-mode sign scan.
const PAPER_GRID: usize = 512;
/// Points in the direct-mode sign scan.
const DIRECT_GRID: usize = 1024;
/// The residual is never evaluated closer than this to the pole at `h = V`.
const V_POLE_GUARD: f64 = 1e-8;
/// Default residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

/// Inputs of the turning-point problem.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HstarProblem {
    pub delta_mean: f64,
    pub w_bar: f64,
    pub w_prev: f64,
    /// Initial position; only direct mode uses it.
    pub a0: f64,
    /// Initial-delay mean; only direct mode uses it.
    pub delta0_mean: f64,
}

impl HstarProblem {
    /// Problem with direct-mode defaults `a0 = 0`, `delta0_mean = delta_mean`.
    pub fn new(delta_mean: f64, w_bar: f64, w_prev: f64) -> Self {
        Self { delta_mean, w_bar, w_prev, a0: 0.0, delta0_mean: delta_mean }
    }

    pub fn with_initial(mut self, a0: f64, delta0_mean: f64) -> Self {
        self.a0 = a0;
        self.delta0_mean = delta0_mean;
        self
    }

    /// The matching transform parameters (volatility does not enter the
    /// u-derivative at the origin, nor does the exit slope).
    pub fn lst_params(&self) -> LstParams {
        LstParams {
            delta_mean: self.delta_mean,
            delta0_mean: self.delta0_mean,
            sigma: 0.0,
            a0: self.a0,
            w_bar: self.w_bar,
            w_prev: self.w_prev,
            w_exit: 0.0,
        }
    }
}

/// The constants of the explicit turning-point equation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UvaConstants {
    pub u_const: f64,
    pub v_const: f64,
    pub a_const: f64,
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum HstarError {
    /// `w_bar == w_prev` or `w_bar == 0`: the constants are undefined.
    DegenerateDrift,
    /// The residual has no sign change; carries the grid minimum of |g|.
    NoRootInBracket { min_abs: f64, at: f64 },
    /// The derivative of the inverted functional has no sign change.
    NoStationaryPoint { min_abs: f64, at: f64 },
    /// Direct-mode parameters disagree with the problem fields.
    InconsistentParams,
    /// Transform-side failure in direct mode.
    Transform(TransformError),
}

impl fmt::Display for HstarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DegenerateDrift => write!(f, "degenerate drift: w_bar equals w_prev or is zero"),
            Self::NoRootInBracket { min_abs, at } => {
                write!(f, "no sign change of the residual (min |g| = {min_abs:.3e} at h = {at:.6})")
            }
            Self::NoStationaryPoint { min_abs, at } => {
                write!(f, "no stationary point (min |m'| = {min_abs:.3e} at h = {at:.6})")
            }
            Self::InconsistentParams => write!(f, "transform parameters disagree with the problem"),
            Self::Transform(e) => write!(f, "transform failure: {e}"),
        }
    }
}

impl core::error::Error for HstarError {}

impl From<TransformError> for HstarError {
    fn from(e: TransformError) -> Self {
        Self::Transform(e)
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SolverMode {
    Paper,
    Direct,
}

/// Classification of a direct-mode stationary point by the second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StationaryKind {
    Maximum,
    Minimum,
    Flat,
}

/// One refined root of the scanned function.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootInfo {
    pub h: f64,
    pub residual: f64,
    pub kind: Option<StationaryKind>,
}

/// Sign-scan summary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanDiagnostics {
    pub grid_points: usize,
    pub grid_min_abs: f64,
    pub grid_min_at: f64,
    pub grid_max_abs: f64,
    /// Every refined root, smallest first.
    pub roots: Vec<RootInfo>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HstarResult {
    pub h_star: f64,
    pub residual: f64,
    pub mode: SolverMode,
    /// Interval searched.
    pub bracket: (f64, f64),
    pub feasible: bool,
    pub stationary: Option<StationaryKind>,
    pub diagnostics: ScanDiagnostics,
}

// ---------------------------------------------------------------------------
// Constants and feasibility
// ---------------------------------------------------------------------------

/// `U`, `V`, `A` of the explicit equation.
pub fn uva_constants(p: &HstarProblem) -> Result<UvaConstants, HstarError> {
    let d = p.delta_mean;
    if p.w_bar == p.w_prev || p.w_bar == 0.0 {
        return Err(HstarError::DegenerateDrift);
    }
    Ok(UvaConstants {
        u_const: ((2.0 + d) * p.w_prev - (3.0 + d) * p.w_bar) / (p.w_bar - p.w_prev),
        v_const: ((3.0 + 2.0 * d) * p.w_bar - 2.0 * p.w_prev) / p.w_bar,
        a_const: p.w_bar / (2.0 * (p.w_prev - p.w_bar)),
    })
}

/// Feasibility window for the pre-exit slope.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibilityCheck {
    pub feasible: bool,
    pub lower: f64,
    pub upper: f64,
}

/// The first-turning-point condition on the pre-exit slope, bounds inclusive.
pub fn feasibility(p: &HstarProblem) -> FeasibilityCheck {
    let d = p.delta_mean;
    let lower = (3.0 + d) / (2.0 + d) * p.w_bar;
    let upper = (3.0 + 2.0 * d) / 2.0 * p.w_bar;
    FeasibilityCheck { feasible: lower <= p.w_prev && p.w_prev <= upper, lower, upper }
}

// ---------------------------------------------------------------------------
// Sign-scan + bisection machinery
// ---------------------------------------------------------------------------

struct Scan {
    grid_min_abs: f64,
    grid_min_at: f64,
    grid_max_abs: f64,
    brackets: Vec<(f64, f64)>,
    exact_hits: Vec<f64>,
}

/// Evaluate `f` on a uniform grid over `(lo, hi]` and collect sign changes.
///
/// An exact zero on the grid counts as a root only when it bridges values
/// of opposite sign; a function that merely touches (or is identically)
/// zero has no sign change.
fn sign_scan(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Scan {
    let mut scan = Scan {
        grid_min_abs: f64::INFINITY,
        grid_min_at: lo,
        grid_max_abs: 0.0,
        brackets: Vec::new(),
        exact_hits: Vec::new(),
    };
    let step = (hi - lo) / n as f64;
    let mut last_nonzero: Option<(f64, f64)> = None;
    let mut pending_zero: Option<f64> = None;
    for i in 1..=n {
        let h = lo + step * i as f64;
        let v = f(h);
        if !v.is_finite() {
            last_nonzero = None;
            pending_zero = None;
            continue;
        }
        let a = math::abs(v);
        if a < scan.grid_min_abs {
            scan.grid_min_abs = a;
            scan.grid_min_at = h;
        }
        if a > scan.grid_max_abs {
            scan.grid_max_abs = a;
        }
        if v == 0.0 {
            pending_zero.get_or_insert(h);
            continue;
        }
        if let Some((ph, pv)) = last_nonzero {
            if pv * v < 0.0 {
                match pending_zero {
                    Some(z) => scan.exact_hits.push(z),
                    None => scan.brackets.push((ph, h)),
                }
            }
        }
        pending_zero = None;
        last_nonzero = Some((h, v));
    }
    scan
}

/// Bisection to `|f| <= tol` (or until the bracket degenerates).
fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut flo = f(lo);
    let mut best = (lo, math::abs(flo));
    let fhi = f(hi);
    if math::abs(fhi) < best.1 {
        best = (hi, math::abs(fhi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        let am = math::abs(fm);
        if am < best.1 {
            best = (mid, am);
        }
        if am <= tol {
            return best;
        }
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    best
}

fn refine(
    f: &impl Fn(f64) -> f64,
    scan: &Scan,
    tol: f64,
) -> Vec<(f64, f64)> {
    let mut roots: Vec<(f64, f64)> = scan.exact_hits.iter().map(|&h| (h, 0.0)).collect();
    for &(lo, hi) in &scan.brackets {
        roots.push(bisect(f, lo, hi, tol));
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    roots
}

// ---------------------------------------------------------------------------
// Paper mode
// ---------------------------------------------------------------------------

/// Residual of the explicit equation at `h`.
pub fn paper_residual(uva: &UvaConstants, delta_mean: f64, h: f64) -> f64 {
    let pole = h - uva.v_const;
    if math::abs(pole) < V_POLE_GUARD {
        return f64::NAN;
    }
    uva.a_const * math::exp(h / (2.0 * delta_mean)) - (uva.u_const - h) / pole
}

/// Solve the explicit equation by sign scan and bisection, returning the
/// smallest root. The search interval is `(0, V)` when `V > 0`, otherwise
/// `(0, 20 delta_mean)`.
pub fn solve_paper(p: &HstarProblem, tol: f64) -> Result<HstarResult, HstarError> {
    let uva = uva_constants(p)?;
    let feas = feasibility(p);
    let hi = if uva.v_const > 0.0 {
        uva.v_const - V_POLE_GUARD
    } else {
        20.0 * p.delta_mean
    };
    if !(hi > 0.0) {
        return Err(HstarError::NoRootInBracket { min_abs: f64::INFINITY, at: 0.0 });
    }
    let g = |h: f64| paper_residual(&uva, p.delta_mean, h);
    let scan = sign_scan(&g, 0.0, hi, PAPER_GRID);
    let roots = refine(&g, &scan, tol);
    let diagnostics = ScanDiagnostics {
        grid_points: PAPER_GRID,
        grid_min_abs: scan.grid_min_abs,
        grid_min_at: scan.grid_min_at,
        grid_max_abs: scan.grid_max_abs,
        roots: roots
            .iter()
            .map(|&(h, residual)| RootInfo { h, residual, kind: None })
            .collect(),
    };
    match roots.first() {
        Some(&(h_star, residual)) => Ok(HstarResult {
            h_star,
            residual,
            mode: SolverMode::Paper,
            bracket: (0.0, hi),
            feasible: feas.feasible,
            stationary: None,
            diagnostics,
        }),
        None => Err(HstarError::NoRootInBracket {
            min_abs: scan.grid_min_abs,
            at: scan.grid_min_at,
        }),
    }
}

// ---------------------------------------------------------------------------
// Direct mode
// ---------------------------------------------------------------------------

fn consistent(a: f64, b: f64) -> bool {
    math::abs(a - b) <= 1e-12 * math::abs(a).max(math::abs(b)).max(1.0)
}

/// Stationary point of the inverted pre-exit-position functional.
///
/// Builds `m(h)` as an explicit sum of exponential terms from the exact
/// u-derivative transform, differentiates it analytically and scans
/// `(0, 50 delta_mean)` for sign changes of `m'`. `tol` is relative to the
/// largest `|m'|` seen on the grid.
pub fn solve_direct(
    p: &HstarProblem,
    params: &LstParams,
    tol: f64,
) -> Result<HstarResult, HstarError> {
    if !consistent(params.delta_mean, p.delta_mean)
        || !consistent(params.w_bar, p.w_bar)
        || !consistent(params.w_prev, p.w_prev)
        || !consistent(params.delta0_mean, p.delta0_mean)
        || !consistent(params.a0, p.a0)
    {
        return Err(HstarError::InconsistentParams);
    }
    let feas = feasibility(p);
    let m_tf = transform::d_du_psi_rational(params);
    let m = transform::invert_rational(&m_tf)?;
    let m1 = m.derivative();
    let m2 = m1.derivative();

    let hi = 50.0 * p.delta_mean;
    let f = |h: f64| m1.eval(h);
    let scan = sign_scan(&f, 0.0, hi, DIRECT_GRID);
    let abs_tol = tol * scan.grid_max_abs;
    let roots = refine(&f, &scan, abs_tol);
    let classify = |h: f64| {
        let c = m2.eval(h);
        if c < 0.0 {
            StationaryKind::Maximum
        } else if c > 0.0 {
            StationaryKind::Minimum
        } else {
            StationaryKind::Flat
        }
    };
    let diagnostics = ScanDiagnostics {
        grid_points: DIRECT_GRID,
        grid_min_abs: scan.grid_min_abs,
        grid_min_at: scan.grid_min_at,
        grid_max_abs: scan.grid_max_abs,
        roots: roots
            .iter()
            .map(|&(h, residual)| RootInfo { h, residual, kind: Some(classify(h)) })
            .collect(),
    };
    match roots.first() {
        Some(&(h_star, residual)) => Ok(HstarResult {
            h_star,
            residual,
            mode: SolverMode::Direct,
            bracket: (0.0, hi),
            feasible: feas.feasible,
            stationary: Some(classify(h_star)),
            diagnostics,
        }),
        None => Err(HstarError::NoStationaryPoint {
            min_abs: if scan.grid_min_abs.is_finite() { scan.grid_min_abs } else { 0.0 },
            at: scan.grid_min_at,
        }),
    }
}

// ---------------------------------------------------------------------------
// Mode reconciliation
// ---------------------------------------------------------------------------

/// One case of the reconciliation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareCase {
    pub problem: HstarProblem,
    pub params: LstParams,
}

impl CompareCase {
    pub fn from_problem(problem: HstarProblem) -> Self {
        let params = problem.lst_params();
        Self { problem, params }
    }
}

/// Per-mode outcome inside a comparison row.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "kebab-case"))]
pub enum ModeOutcome {
    Solved { h_star: f64, residual: f64 },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompareRow {
    pub delta_mean: f64,
    pub w_bar: f64,
    pub w_prev: f64,
    pub feasible: bool,
    pub paper: ModeOutcome,
    pub direct: ModeOutcome,
    /// |h_paper - h_direct| when both modes solved. The two moments answer
    /// differently-parameterized questions, so equality is never asserted.
    pub abs_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompareRecord {
    pub rows: Vec<CompareRow>,
}

/// Run both solvers over the supplied cases; failures are embedded per row.
pub fn compare_modes(cases: &[CompareCase], tol: f64) -> CompareRecord {
    let rows = cases
        .iter()
        .map(|case| {
            let feas = feasibility(&case.problem);
            let paper = match solve_paper(&case.problem, tol) {
                Ok(r) => ModeOutcome::Solved { h_star: r.h_star, residual: r.residual },
                Err(e) => ModeOutcome::Failed { reason: format!("{e}") },
            };
            let direct = match solve_direct(&case.problem, &case.params, tol) {
                Ok(r) => ModeOutcome::Solved { h_star: r.h_star, residual: r.residual },
                Err(e) => ModeOutcome::Failed { reason: format!("{e}") },
            };
            let abs_difference = match (&paper, &direct) {
                (
                    ModeOutcome::Solved { h_star: hp, .. },
                    ModeOutcome::Solved { h_star: hd, .. },
                ) => Some(math::abs(hp - hd)),
                _ => None,
            };
            CompareRow {
                delta_mean: case.problem.delta_mean,
                w_bar: case.problem.w_bar,
                w_prev: case.problem.w_prev,
                feasible: feas.feasible,
                paper,
                direct,
                abs_difference,
            }
        })
        .collect();
    CompareRecord { rows }
}

// ---------------------------------------------------------------------------
