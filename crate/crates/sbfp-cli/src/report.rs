//! The decision report and the end-to-end prediction pipeline.
//!
//! `predict` runs fit -> feasibility -> both turning-point solvers ->
//! restricted moments at the chosen moment -> payoff builder -> mixed
//! equilibrium, embedding per-stage failures in the report instead of
//! aborting while later stages remain runnable. Reports are deterministic
//! for a given (input, config, seed) and round-trip through JSON.

use serde::{Deserialize, Serialize};

use sbfp_core::game::{payoff_from_analytics, solve_mixed, Game2x2, MixedEquilibrium};
use sbfp_core::hstar::{feasibility, solve_direct, solve_paper, HstarProblem, HstarResult};
use sbfp_core::process::McSummary;
use sbfp_core::transform::{restricted_moments, LstParams, RestrictedMoments};

use crate::fit::{fit_params, FitError, FitResult};
use crate::series::{SeriesData, TimeUnit};

/// A pipeline stage: its payload, or an explicit skip/failure marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Stage<T> {
    Ok { value: T },
    Skipped { reason: String },
    Failed { reason: String },
}

impl<T> Stage<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Stage::Ok { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Stage::Ok { .. })
    }

    fn from_result<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(value) => Stage::Ok { value },
            Err(e) => Stage::Failed { reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub window: usize,
    pub time_unit: TimeUnit,
    /// Residual tolerance handed to both solvers.
    pub tol: f64,
    /// Transaction cost in the payoff builder.
    pub cost: f64,
    /// Give the uncontrollable side the negated payoff matrix.
    pub zero_sum: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            window: 5,
            time_unit: TimeUnit::Sec,
            tol: 1e-9,
            cost: 0.0,
            zero_sum: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub lower: f64,
    pub upper: f64,
}

/// Restricted moments evaluated at the chosen turning-point moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub h_star: f64,
    /// Which solver produced the moment ("paper" or "direct").
    pub mode: String,
    #[serde(flatten)]
    pub moments: RestrictedMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub config: PredictConfig,
    pub fit: FitResult,
    pub feasibility: FeasibilityReport,
    pub hstar_paper: Stage<HstarResult>,
    pub hstar_direct: Stage<HstarResult>,
    pub moments: Stage<MomentsReport>,
    pub game: Stage<Game2x2>,
    pub equilibrium: Stage<MixedEquilibrium>,
    pub mc: Stage<McSummary>,
    pub diagnostics: Vec<String>,
}

impl Report {
    /// Exit-code-relevant domain outcome: infeasibility or a failed stage.
    pub fn has_domain_findings(&self) -> bool {
        let failed = |b: bool| b;
        !self.feasibility.feasible
            || failed(matches!(self.hstar_paper, Stage::Failed { .. }))
            || failed(matches!(self.hstar_direct, Stage::Failed { .. }))
            || failed(matches!(self.moments, Stage::Failed { .. }))
    }
}

/// Run the full decision pipeline on a series.
pub fn predict(
    series: &SeriesData,
    config: &PredictConfig,
    seed: u64,
) -> Result<Report, FitError> {
    let fit = fit_params(series, config.window, config.time_unit)?;
    let mut diagnostics = Vec::new();

    let problem = HstarProblem {
        delta_mean: fit.delta_hat,
        w_bar: fit.w_bar_hat,
        w_prev: fit.w_prev_hat,
        a0: fit.a0,
        delta0_mean: fit.delta_hat,
    };
    let lst = LstParams {
        delta_mean: fit.delta_hat,
        delta0_mean: fit.delta_hat,
        sigma: fit.sigma_hat,
        a0: fit.a0,
        w_bar: fit.w_bar_hat,
        w_prev: fit.w_prev_hat,
        w_exit: 0.0,
    };

    let feas = feasibility(&problem);
    let feasibility = FeasibilityReport {
        feasible: feas.feasible,
        lower: feas.lower,
        upper: feas.upper,
    };

    let hstar_paper = if feas.feasible {
        Stage::from_result(solve_paper(&problem, config.tol))
    } else {
        Stage::Skipped { reason: "fitted drift outside the first-turning-point window".into() }
    };
    let hstar_direct = Stage::from_result(solve_direct(&problem, &lst, config.tol));

    // The explicit-equation moment drives the decision when available; the
    // stationary-point moment stands in otherwise.
    let chosen = match (&hstar_paper, &hstar_direct) {
        (Stage::Ok { value }, _) => Some((value.h_star, "paper")),
        (_, Stage::Ok { value }) => {
            if !matches!(hstar_paper, Stage::Skipped { .. }) {
                diagnostics
                    .push("paper-mode solver failed; direct mode drives the game stage".into());
            }
            Some((value.h_star, "direct"))
        }
        _ => None,
    };

    let moments = match chosen {
        Some((h_star, mode)) => Stage::from_result(restricted_moments(&lst, h_star).map(
            |moments| MomentsReport { h_star, mode: mode.to_string(), moments },
        )),
        None => Stage::Skipped { reason: "no turning-point moment available".into() },
    };

    let (game, equilibrium) = match moments.value() {
        Some(m) => {
            let mut g = payoff_from_analytics(
                m.moments.a_prev,
                m.moments.a_exit,
                fit.w_bar_hat * fit.delta_hat,
                config.cost,
            );
            if config.zero_sum {
                g = Game2x2::zero_sum(g.payoff1);
            }
            let eq = solve_mixed(&g);
            (Stage::Ok { value: g }, Stage::Ok { value: eq })
        }
        None => {
            let reason = "moments unavailable".to_string();
            (
                Stage::Skipped { reason: reason.clone() },
                Stage::Skipped { reason },
            )
        }
    };

    Ok(Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: config.clone(),
        fit,
        feasibility,
        hstar_paper,
        hstar_direct,
        moments,
        game,
        equilibrium,
        mc: Stage::Skipped { reason: "simulation not requested".into() },
        diagnostics,
    })
}
