//! The 2x2 Hold/Action vs Up/Down mixed-strategy game.
//!
//! Player 1 (the controller) picks a row, player 2 (the uncontrollable
//! side) picks a column. `p` is the probability of "Hold", `q` the
//! probability of "Up". Payoffs can be arbitrary or built from process
//! analytics around the first turning point.

use alloc::string::{String, ToString};
use core::fmt;

use crate::math;

// ---------------------------------------------------------------------------
// Game data
// ---------------------------------------------------------------------------

fn default_row_labels() -> [String; 2] {
    ["Hold".to_string(), "Action".to_string()]
}

fn default_col_labels() -> [String; 2] {
    ["Up".to_string(), "Down".to_string()]
}

/// A two-player 2x2 normal-form game.
///
/// `payoff1[i][j]` / `payoff2[i][j]` are the players' payoffs when player 1
/// plays row `i` and player 2 plays column `j` (row-major).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Game2x2 {
    #[cfg_attr(feature = "serde", serde(default = "default_row_labels"))]
    pub row_labels: [String; 2],
    #[cfg_attr(feature = "serde", serde(default = "default_col_labels"))]
    pub col_labels: [String; 2],
    pub payoff1: [[f64; 2]; 2],
    pub payoff2: [[f64; 2]; 2],
}

impl Game2x2 {
    pub fn new(payoff1: [[f64; 2]; 2], payoff2: [[f64; 2]; 2]) -> Self {
        Self {
            row_labels: default_row_labels(),
            col_labels: default_col_labels(),
            payoff1,
            payoff2,
        }
    }

    /// Zero-sum reading of an uncontrollable opponent: payoff2 = -payoff1.
    pub fn zero_sum(payoff1: [[f64; 2]; 2]) -> Self {
        let payoff2 = [
            [-payoff1[0][0], -payoff1[0][1]],
            [-payoff1[1][0], -payoff1[1][1]],
        ];
        Self::new(payoff1, payoff2)
    }

    pub fn with_payoff1_entry(mut self, row: usize, col: usize, value: f64) -> Self {
        self.payoff1[row][col] = value;
        self
    }

    pub fn with_payoff2_entry(mut self, row: usize, col: usize, value: f64) -> Self {
        self.payoff2[row][col] = value;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.payoff1
            .iter()
            .chain(self.payoff2.iter())
            .all(|row| row.iter().all(|v| v.is_finite()))
    }
}

/// Payoffs built from turning-point analytics.
///
/// Player 1 rates holding against acting one observation before the peak:
/// holding into a further up-step keeps the expected gain, holding into the
/// turn leaves the post-peak position, acting locks the pre-peak position
/// minus the transaction cost. The entries are a parameterized stand-in and
/// player 2 defaults to an indifferent (zero) matrix; override entries or
/// use [`Game2x2::zero_sum`] for other readings.
pub fn payoff_from_analytics(a_prev: f64, a_exit: f64, mean_step: f64, cost: f64) -> Game2x2 {
    let act = a_prev - cost;
    Game2x2::new([[a_prev + mean_step, a_exit], [act, act]], [[0.0; 2]; 2])
}

// ---------------------------------------------------------------------------
// Equilibria
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EquilibriumKind {
    /// Both indifference conditions hold at interior probabilities.
    Interior,
    PureStrategy,
    /// At least one player is indifferent along a whole line; the returned
    /// probability is the canonical representative 0.5.
    Continuum,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Interior => write!(f, "interior"),
            Self::PureStrategy => write!(f, "pure"),
            Self::Continuum => write!(f, "continuum"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixedEquilibrium {
    /// Probability player 1 plays the first row ("Hold").
    pub p: f64,
    /// Probability player 2 plays the first column ("Up").
    pub q: f64,
    pub value1: f64,
    pub value2: f64,
    pub kind: EquilibriumKind,
}

/// Expected payoffs of the mixed profile `(p, q)`.
pub fn expected_payoff(g: &Game2x2, p: f64, q: f64) -> (f64, f64) {
    let prob = [[p * q, p * (1.0 - q)], [(1.0 - p) * q, (1.0 - p) * (1.0 - q)]];
    let mut v1 = 0.0;
    let mut v2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            v1 += prob[i][j] * g.payoff1[i][j];
            v2 += prob[i][j] * g.payoff2[i][j];
        }
    }
    (v1, v2)
}

/// Player 1's expected payoff for a pure row against the column mix `q`.
fn row_payoff(g: &Game2x2, row: usize, q: f64) -> f64 {
    q * g.payoff1[row][0] + (1.0 - q) * g.payoff1[row][1]
}

/// Player 2's expected payoff for a pure column against the row mix `p`.
fn col_payoff(g: &Game2x2, col: usize, p: f64) -> f64 {
    p * g.payoff2[0][col] + (1.0 - p) * g.payoff2[1][col]
}

/// Largest payoff either player could gain by a unilateral pure deviation.
pub fn deviation_gain(g: &Game2x2, p: f64, q: f64) -> f64 {
    let (v1, v2) = expected_payoff(g, p, q);
    let g1 = (row_payoff(g, 0, q) - v1).max(row_payoff(g, 1, q) - v1);
    let g2 = (col_payoff(g, 0, p) - v2).max(col_payoff(g, 1, p) - v2);
    g1.max(g2).max(0.0)
}

/// One player's indifference equation solved for the opponent's mix.
enum Indifference {
    /// Unique solution (possibly outside [0, 1]).
    At(f64),
    /// Indifferent for every mix.
    Everywhere,
    /// Never indifferent (one strategy strictly better for every mix).
    Never,
}

fn solve_indifference(num: f64, den: f64) -> Indifference {
    if den == 0.0 {
        if num == 0.0 {
            Indifference::Everywhere
        } else {
            Indifference::Never
        }
    } else {
        Indifference::At(num / den)
    }
}

fn pure_profile(g: &Game2x2, row: usize, col: usize, kind: EquilibriumKind) -> MixedEquilibrium {
    let p = if row == 0 { 1.0 } else { 0.0 };
    let q = if col == 0 { 1.0 } else { 0.0 };
    let (value1, value2) = expected_payoff(g, p, q);
    MixedEquilibrium { p, q, value1, value2, kind }
}

/// Solve for a mixed-strategy equilibrium.
///
/// Order of resolution: a strictly dominant pure pair wins outright; then
/// the two indifference equations (`q` from player 1's rows, `p` from
/// player 2's columns); solutions outside [0, 1] are never clamped: the
/// solver falls back to enumerating pure best-response profiles instead.
/// A degenerate indifference line yields [`EquilibriumKind::Continuum`]
/// with 0.5 as the canonical representative.
pub fn solve_mixed(g: &Game2x2) -> MixedEquilibrium {
    let a = &g.payoff1;
    let b = &g.payoff2;

    // Strictly dominant pure pair.
    let row_dominant = if a[0][0] > a[1][0] && a[0][1] > a[1][1] {
        Some(0)
    } else if a[1][0] > a[0][0] && a[1][1] > a[0][1] {
        Some(1)
    } else {
        None
    };
    let col_dominant = if b[0][0] > b[0][1] && b[1][0] > b[1][1] {
        Some(0)
    } else if b[0][1] > b[0][0] && b[1][1] > b[1][0] {
        Some(1)
    } else {
        None
    };
    if let (Some(row), Some(col)) = (row_dominant, col_dominant) {
        return pure_profile(g, row, col, EquilibriumKind::PureStrategy);
    }

    // Indifference equations.
    let q_sol = solve_indifference(a[1][1] - a[0][1], a[0][0] - a[0][1] - a[1][0] + a[1][1]);
    let p_sol = solve_indifference(b[1][1] - b[1][0], b[0][0] - b[0][1] - b[1][0] + b[1][1]);

    let in_unit = |x: f64| (0.0..=1.0).contains(&x);
    let resolved = match (&q_sol, &p_sol) {
        (Indifference::At(q), Indifference::At(p)) if in_unit(*q) && in_unit(*p) => {
            Some((*p, *q, EquilibriumKind::Interior))
        }
        (Indifference::At(q), Indifference::Everywhere) if in_unit(*q) => {
            Some((0.5, *q, EquilibriumKind::Continuum))
        }
        (Indifference::Everywhere, Indifference::At(p)) if in_unit(*p) => {
            Some((*p, 0.5, EquilibriumKind::Continuum))
        }
        (Indifference::Everywhere, Indifference::Everywhere) => {
            Some((0.5, 0.5, EquilibriumKind::Continuum))
        }
        _ => None,
    };
    if let Some((p, q, kind)) = resolved {
        let (value1, value2) = expected_payoff(g, p, q);
        return MixedEquilibrium { p, q, value1, value2, kind };
    }

    // Best-response enumeration over pure profiles.
    for row in 0..2 {
        for col in 0..2 {
            let best_row = a[row][col] >= a[1 - row][col];
            let best_col = b[row][col] >= b[row][1 - col];
            if best_row && best_col {
                return pure_profile(g, row, col, EquilibriumKind::PureStrategy);
            }
        }
    }

    // A 2x2 game with no pure equilibrium has an interior one, so the
    // fallback above is only reached when an indifference equation was
    // solvable; this point is unreachable for finite payoffs.
    debug_assert!(false, "no equilibrium found for {g:?}");
    let (value1, value2) = expected_payoff(g, 0.5, 0.5);
    MixedEquilibrium { p: 0.5, q: 0.5, value1, value2, kind: EquilibriumKind::Continuum }
}

/// Grid approximation of the least-exploitable profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceResult {
    pub p: f64,
    pub q: f64,
    /// Maximum unilateral-deviation gain at the returned point (>= 0).
    pub deviation_gain: f64,
}

/// Combined indifference residual, the tie-breaker among zero-gain points.
fn indifference_residual(g: &Game2x2, p: f64, q: f64) -> f64 {
    math::abs(row_payoff(g, 0, q) - row_payoff(g, 1, q))
        + math::abs(col_payoff(g, 0, p) - col_payoff(g, 1, p))
}

/// Scan the (p, q) grid for the profile minimizing the maximum
/// unilateral-deviation gain (an oracle for [`solve_mixed`]).
///
/// Selection among near-minimal candidates mirrors the solver's
/// indifference-first order. An interior equilibrium generically falls
/// between grid points, where its snapped deviation gain (~slope/grid) can
/// never beat an on-grid pure equilibrium's exact zero; so when the grid
/// contains an indifference candidate (residual below slope x step) the
/// scan returns the smallest-residual point, otherwise the smallest-gain
/// point with exact ties broken by residual.
pub fn brute_force(g: &Game2x2, grid_n: usize) -> BruteForceResult {
    assert!(grid_n >= 2, "grid needs at least two points per axis");
    let step = 1.0 / (grid_n - 1) as f64;
    let scale = g
        .payoff1
        .iter()
        .chain(g.payoff2.iter())
        .flat_map(|row| row.iter())
        .fold(1.0_f64, |m, v| m.max(math::abs(*v)));
    let slope_rows = math::abs(
        g.payoff1[0][0] - g.payoff1[0][1] - g.payoff1[1][0] + g.payoff1[1][1],
    );
    let slope_cols = math::abs(
        g.payoff2[0][0] - g.payoff2[0][1] - g.payoff2[1][0] + g.payoff2[1][1],
    );
    let res_tol = (slope_rows + slope_cols) * step + 1e-12 * scale;
    let tie = 1e-12 * scale;

    let coord = |i: usize| i as f64 / (grid_n - 1) as f64;
    let mut min_gain = BruteForceResult { p: 0.0, q: 0.0, deviation_gain: f64::INFINITY };
    let mut min_gain_res = f64::INFINITY;
    let mut min_res = (0.0, 0.0, f64::INFINITY, f64::INFINITY); // p, q, residual, gain
    for i in 0..grid_n {
        let p = coord(i);
        for j in 0..grid_n {
            let q = coord(j);
            let gain = deviation_gain(g, p, q);
            let residual = indifference_residual(g, p, q);
            if gain < min_gain.deviation_gain - tie
                || (gain <= min_gain.deviation_gain + tie && residual < min_gain_res)
            {
                min_gain = BruteForceResult {
                    p,
                    q,
                    deviation_gain: gain.min(min_gain.deviation_gain),
                };
                min_gain_res = residual;
            }
            if residual < min_res.2 {
                min_res = (p, q, residual, gain);
            }
        }
    }
    if min_res.2 <= res_tol {
        BruteForceResult { p: min_res.0, q: min_res.1, deviation_gain: min_res.3 }
    } else {
        min_gain
    }
}

// ---------------------------------------------------------------------------
